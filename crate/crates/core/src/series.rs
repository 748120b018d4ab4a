//! Series formulas for the mean of a last-arrival-time dependent process.
//!
//! With `f_k` the density of the `k`-th arrival time,
//!
//! ```text
//! f_1(u) = w(0, u) exp(-Omega(0, u))
//! f_k(u) = int_0^u f_{k-1}(v) w(v, u) exp(-Omega(v, u)) dv
//! ```
//!
//! so that `E[Z(t) - Z(s)] = sum_k int_s^t f_k` and
//! `exp(-Omega(0, t)) + sum_k int_0^t f_k(v) exp(-Omega(v, t)) dv = 1`.
//! Each layer is evaluated on a uniform grid with a fourth-order composite
//! rule, reusing one kernel matrix for all layers. Truncation after `k_max`
//! terms is controlled by the Poisson tail `sum_{k > k_max} (C t)^k / k!`
//! with `C` the intensity bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{composite_uniform, cumulative_uniform};
use crate::simulator::IntensityModel;

pub const DEFAULT_K_MAX: usize = 20;
pub const DEFAULT_GRID_INTERVALS: usize = 2048;
pub const DEFAULT_SERIES_TOL: f64 = 1e-8;

/// A truncated series value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Bound on the terms dropped after `k_max`.
    pub tail_bound: f64,
    /// Difference between the full grid and the half-resolution grid.
    pub quadrature_error: f64,
}

/// `E[Z(u)]` at the nodes `u_i = i * step` of `[0, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTable {
    pub step: f64,
    pub means: Vec<f64>,
    pub tail_bound: f64,
}

/// `sum_{k > k_max} lambda^k / k!`.
pub fn poisson_tail(lambda: f64, k_max: usize) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    for k in 1..=k_max {
        term *= lambda / k as f64;
    }
    let mut sum = 0.0;
    let mut k = k_max + 1;
    loop {
        term *= lambda / k as f64;
        sum += term;
        if (k as f64) > lambda && term <= 1e-18 * sum {
            break;
        }
        if !sum.is_finite() || k > k_max + 100_000 {
            return f64::INFINITY;
        }
        k += 1;
    }
    sum
}

struct Layers {
    step: f64,
    /// `f_k` at the nodes, `k = 1..=k_max`.
    densities: Vec<Vec<f64>>,
    survival: Option<Vec<Vec<f64>>>,
    survival_from_zero: Vec<f64>,
}

fn solve_layers(
    model: &IntensityModel,
    x: f64,
    k_max: usize,
    intervals: usize,
    with_survival: bool,
) -> Layers {
    let step = x / intervals as f64;
    let nodes: Vec<f64> = (0..=intervals).map(|i| i as f64 * step).collect();
    // row m holds K(u_i, u_m) = w(u_i, u_m) exp(-Omega(u_i, u_m)) for i <= m
    let (kernel, survival): (Vec<Vec<f64>>, Vec<Vec<f64>>) = nodes
        .par_iter()
        .map(|&u| {
            let mut k_row = Vec::new();
            let mut s_row = Vec::new();
            for &v in nodes.iter().take_while(|&&v| v <= u) {
                let surv = (-model.omega(v, u)).exp();
                k_row.push(model.w(v, u) * surv);
                if with_survival {
                    s_row.push(surv);
                }
            }
            (k_row, s_row)
        })
        .unzip();
    let survival_from_zero: Vec<f64> = nodes
        .iter()
        .map(|&u| (-model.omega(0.0, u)).exp())
        .collect();

    let mut densities: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    densities.push(kernel.iter().map(|row| row[0]).collect());
    let mut scratch = Vec::with_capacity(intervals + 1);
    for _ in 1..k_max {
        let prev = densities.last().expect("first layer present");
        let next: Vec<f64> = kernel
            .iter()
            .map(|row| {
                scratch.clear();
                scratch.extend(row.iter().zip(prev).map(|(k, f)| k * f));
                composite_uniform(&scratch, step)
            })
            .collect();
        densities.push(next);
    }
    Layers {
        step,
        densities,
        survival: with_survival.then_some(survival),
        survival_from_zero,
    }
}

fn mean_at_nodes(layers: &Layers) -> Vec<f64> {
    let n = layers.densities[0].len();
    let mut means = vec![0.0; n];
    for f in &layers.densities {
        for (acc, p) in means.iter_mut().zip(cumulative_uniform(f, layers.step)) {
            *acc += p;
        }
    }
    means
}

fn mean_upto(model: &IntensityModel, x: f64, k_max: usize, intervals: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let layers = solve_layers(model, x, k_max, intervals, false);
    *mean_at_nodes(&layers).last().expect("nonempty grid")
}

fn check_interval(model: &IntensityModel, s: f64, t: f64) -> Result<()> {
    if !(0.0 <= s && s <= t && t <= model.horizon()) {
        return Err(Error::DomainViolation {
            t1: s,
            t2: t,
            horizon: model.horizon(),
        });
    }
    Ok(())
}

fn check_kmax(k_max: usize) -> Result<()> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    Ok(())
}

fn checked_tail(model: &IntensityModel, t: f64, k_max: usize, tol: f64) -> Result<f64> {
    let tail = poisson_tail(model.sup_bound() * t, k_max);
    if tail > tol {
        return Err(Error::TailNotConverged { tail, tol, k_max });
    }
    Ok(tail)
}

/// `E[Z(t) - Z(s)]` from the first `k_max` terms of the arrival series.
pub fn latd_mean_series(
    model: &IntensityModel,
    s: f64,
    t: f64,
    k_max: usize,
    tol: f64,
) -> Result<SeriesValue> {
    latd_mean_series_on(model, s, t, k_max, tol, DEFAULT_GRID_INTERVALS)
}

/// [`latd_mean_series`] with an explicit grid resolution (rounded up to
/// an even number of intervals).
pub fn latd_mean_series_on(
    model: &IntensityModel,
    s: f64,
    t: f64,
    k_max: usize,
    tol: f64,
    intervals: usize,
) -> Result<SeriesValue> {
    check_interval(model, s, t)?;
    check_kmax(k_max)?;
    if s == t {
        return Ok(SeriesValue {
            value: 0.0,
            tail_bound: 0.0,
            quadrature_error: 0.0,
        });
    }
    let tail_bound = checked_tail(model, t, k_max, tol)?;
    let intervals = intervals.max(4).next_multiple_of(2);
    let fine = mean_upto(model, t, k_max, intervals) - mean_upto(model, s, k_max, intervals);
    let coarse =
        mean_upto(model, t, k_max, intervals / 2) - mean_upto(model, s, k_max, intervals / 2);
    Ok(SeriesValue {
        value: fine,
        tail_bound,
        quadrature_error: (fine - coarse).abs(),
    })
}

/// `E[Z(u)]` tabulated on `intervals + 1` uniform nodes of `[0, T]`.
pub fn latd_mean_table(
    model: &IntensityModel,
    k_max: usize,
    intervals: usize,
    tol: f64,
) -> Result<MeanTable> {
    check_kmax(k_max)?;
    let tail_bound = checked_tail(model, model.horizon(), k_max, tol)?;
    let intervals = intervals.max(2);
    let layers = solve_layers(model, model.horizon(), k_max, intervals, false);
    let mut means = mean_at_nodes(&layers);
    // keep the table non-decreasing under rounding
    for i in 1..means.len() {
        if means[i] < means[i - 1] {
            means[i] = means[i - 1];
        }
    }
    means[0] = 0.0;
    Ok(MeanTable {
        step: layers.step,
        means,
        tail_bound,
    })
}

/// Result of [`latd_normalization_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `|P(no arrival) + sum_{k <= k_max} P(Z(t) = k) - 1|`.
    pub residual: f64,
    pub tail_bound: f64,
}

/// How far the truncated "probabilities sum to one" identity is from one.
pub fn latd_normalization_residual(
    model: &IntensityModel,
    t: f64,
    k_max: usize,
    tol: f64,
) -> Result<ResidualReport> {
    check_interval(model, 0.0, t)?;
    check_kmax(k_max)?;
    if t == 0.0 {
        return Ok(ResidualReport {
            residual: 0.0,
            tail_bound: 0.0,
        });
    }
    let tail_bound = checked_tail(model, t, k_max, tol)?;
    let layers = solve_layers(model, t, k_max, DEFAULT_GRID_INTERVALS, true);
    let survival = layers.survival.as_ref().expect("requested survival");
    let last = survival.len() - 1;
    let surv_to_t = &survival[last];
    let mut total = layers.survival_from_zero[last];
    let mut scratch = Vec::with_capacity(last + 1);
    for f in &layers.densities {
        scratch.clear();
        scratch.extend(f.iter().zip(surv_to_t).map(|(d, s)| d * s));
        total += composite_uniform(&scratch, layers.step);
    }
    Ok(ResidualReport {
        residual: (total - 1.0).abs(),
        tail_bound,
    })
}
