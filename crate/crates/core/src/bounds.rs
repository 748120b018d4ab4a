//! Explicit constants, exponents and right-hand sides of the moment bounds
//! for the uniform deviation of averages of monotone-increment processes.
//!
//! Notation: `q` is the moment order, `r` the Hölder exponent of the mean,
//! `M` the moment scale of a single summand, `wbar` the averaged Hölder
//! coefficient and `N` the number of summands. Only the product `M * w_i`
//! enters the Hölder hypothesis, so callers choose the split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters shared by [`main_bound_rhs`] and [`main2_bound_rhs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub q: f64,
    pub r: f64,
    /// Target rate for [`main2_bound_rhs`].
    pub gamma: Option<f64>,
    /// Output moment order for [`main2_bound_rhs`].
    pub p: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "M")]
    pub moment_scale: f64,
    pub wbar: f64,
    #[serde(rename = "N")]
    pub n: u64,
}

impl BoundParams {
    fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        check_r(self.r)?;
        if !(self.horizon > 0.0) {
            return Err(Error::NonpositiveHorizon(self.horizon));
        }
        if !(self.moment_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "M must be > 0, got {}",
                self.moment_scale
            )));
        }
        if !(self.wbar >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "wbar must be >= 0, got {}",
                self.wbar
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        Ok(())
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 2.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::QOutOfRange(q))
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("r must be > 0, got {r}")))
    }
}

/// Universal constant of the scalar moment inequality:
/// `C_q = (0.5 (4k)^q + 2k/(2k - q) (8k)^q)^{1/q}` with `k` the smallest
/// integer greater than `q/2`.
pub fn cq_constant(q: f64) -> Result<f64> {
    check_q(q)?;
    let k = (q / 2.0).floor() + 1.0;
    let inner = 0.5 * (4.0 * k).powf(q) + 2.0 * k / (2.0 * k - q) * (8.0 * k).powf(q);
    Ok(inner.powf(1.0 / q))
}

/// Decay exponent of the main bound, `q^2 r / (2qr + 2r + 2)`.
pub fn rate_exponent(q: f64, r: f64) -> f64 {
    q * q * r / (2.0 * q * r + 2.0 * r + 2.0)
}

/// Exponent of the gate level, `qr / (2qr + 2r + 2)`; the level used for
/// `N` samples is `n_N = floor(N^level_exponent)`.
pub fn level_exponent(q: f64, r: f64) -> f64 {
    q * r / (2.0 * q * r + 2.0 * r + 2.0)
}

/// `n_N`, the largest integer not above `N^{qr/(2qr+2r+2)}`.
pub fn gate_level(n: u64, q: f64, r: f64) -> u64 {
    let x = (n as f64).powf(level_exponent(q, r));
    let mut level = x.floor() as u64;
    // guard against x landing a hair below an integer
    if ((level + 1) as f64 - x).abs() <= 1e-12 * x {
        level += 1;
    }
    level
}

const ROUNDING: f64 = 1e-12;

/// Smallest integer `N_0 >= 1` with `N_0^{qr/(2qr+2r+2)} >= 2`.
///
/// The comparison is made with relative tolerance `1e-12` so that exact
/// powers such as `8^{1/3} = 2` are recognised despite rounding.
pub fn n0_threshold(q: f64, r: f64) -> Result<u64> {
    check_q(q)?;
    check_r(r)?;
    let e = level_exponent(q, r);
    let satisfies = |n: u64| (n as f64).powf(e) >= 2.0 * (1.0 - ROUNDING);
    let mut n = (2f64.powf(1.0 / e)).ceil().max(1.0) as u64;
    while n > 1 && satisfies(n - 1) {
        n -= 1;
    }
    while !satisfies(n) {
        n += 1;
    }
    Ok(n)
}

/// `(q^2 - 2q - 2) r > 2`: the main bound is summable in `N`.
pub fn complete_lln_condition(q: f64, r: f64) -> bool {
    (q * q - 2.0 * q - 2.0) * r > 2.0
}

fn bracket(p: &BoundParams, cq: f64) -> f64 {
    let q = p.q;
    cq.powf(q) * (2.0 * p.horizon * p.wbar.powf(1.0 / p.r) + 1.0) + 2f64.powf(2.0 * q)
}

fn check_n0(n: u64, q: f64, r: f64) -> Result<u64> {
    let n0 = n0_threshold(q, r)?;
    if n < n0 {
        return Err(Error::BelowN0 { n, n0 });
    }
    Ok(n0)
}

/// Bound on `E[sup |Y_N - E Y_N|^q]`:
/// `M^q 2^{q-1} N^{-q^2 r/(2qr+2r+2)} (C_q^q (2 T wbar^{1/r} + 1) + 2^{2q})`.
pub fn main_bound_rhs(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    check_n0(p.n, p.q, p.r)?;
    let q = p.q;
    let cq = cq_constant(q)?;
    Ok(
        p.moment_scale.powf(q) * 2f64.powf(q - 1.0) / (p.n as f64).powf(rate_exponent(q, p.r))
            * bracket(p, cq),
    )
}

/// `q(p, gamma) = max(3, (r+1)/r * 2 gamma/(1 - 2 gamma), p)`.
pub fn choose_q(p: f64, gamma: f64, r: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 0.5) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p must be > 0, got {p}")));
    }
    check_r(r)?;
    let middle = (r + 1.0) / r * (2.0 * gamma / (1.0 - 2.0 * gamma));
    Ok(3f64.max(middle).max(p))
}

/// Bound on the `L^p` norm of the sup deviation at rate `N^{-gamma}`:
/// `M N^{-gamma} 2^{1-1/q} (C_q^q (2 T wbar^{1/r} + 1) + 2^{2q})^{1/q}`
/// with `q = choose_q(p, gamma, r)`; `params.q` is ignored.
pub fn main2_bound_rhs(params: &BoundParams) -> Result<f64> {
    let gamma = params
        .gamma
        .ok_or_else(|| Error::InvalidParameter("gamma is required".into()))?;
    let p = params
        .p
        .ok_or_else(|| Error::InvalidParameter("p is required".into()))?;
    let q = choose_q(p, gamma, params.r)?;
    let with_q = BoundParams { q, ..*params };
    with_q.validate()?;
    check_n0(params.n, q, params.r)?;
    let cq = cq_constant(q)?;
    Ok(params.moment_scale / (params.n as f64).powf(gamma)
        * 2f64.powf(1.0 - 1.0 / q)
        * bracket(&with_q, cq).powf(1.0 / q))
}

/// `C_q M / sqrt(N)`, the bound on the `L^q` norm of a centered average of
/// `N` independent summands with `L^q` norms at most `M`.
pub fn scalar_lln_bound(q: f64, moment_scale: f64, n: u64) -> Result<f64> {
    Ok(cq_constant(q)? * moment_scale / (n as f64).sqrt())
}

/// `2^{q-1} K s + 2^{q-1} (2/n)^q t`, the discretized bound on
/// `E[sup |Y - E Y|^q]` from `K` gates, `s = sup E|Y - E Y|^q` and
/// `t = (E Y(0, T))^q`.
pub fn discretization_bound_rhs(
    k: usize,
    n: u64,
    q: f64,
    sup_pointwise_moment: f64,
    top_moment: f64,
) -> Result<f64> {
    if k == 0 || n == 0 || !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need K >= 1, n >= 1, q >= 1; got K={k}, n={n}, q={q}"
        )));
    }
    let factor = 2f64.powf(q - 1.0);
    Ok(factor * k as f64 * sup_pointwise_moment + factor * (2.0 / n as f64).powf(q) * top_moment)
}

/// `(2CT)^q + (2q)^q`, a bound on `E[Z(T)^q]` for a counting process with
/// intensity at most `C`.
pub fn latd_moment_bound(c: f64, horizon: f64, q: u32) -> Result<f64> {
    if q == 0 || !(c >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need C >= 0 and integer q >= 1; got C={c}, q={q}"
        )));
    }
    let q_f = q as f64;
    Ok((2.0 * c * horizon).powi(q as i32) + (2.0 * q_f).powi(q as i32))
}

/// `C (t - s)`, a bound on `E[Z(t) - Z(s)]` for intensity at most `C`.
pub fn latd_mean_increment_bound(c: f64, s: f64, t: f64) -> Result<f64> {
    if !(s <= t) {
        return Err(Error::InvalidParameter(format!(
            "need s <= t, got s={s}, t={t}"
        )));
    }
    Ok(c * (t - s))
}

/// Stirling numbers of the second kind `S(q, k)`, `k = 0..=q`.
fn stirling2_row(q: u32) -> Vec<u128> {
    let mut row = vec![1u128];
    for n in 1..=q as usize {
        let mut next = vec![0u128; n + 1];
        for k in 1..=n {
            let keep = if k < row.len() { k as u128 * row[k] } else { 0 };
            next[k] = keep + row[k - 1];
        }
        row = next;
    }
    row
}

/// `E[X^q]` for `X ~ Poisson(mu)`: the Touchard polynomial
/// `sum_k S(q, k) mu^k` for integer `q`, the defining series otherwise.
pub fn poisson_raw_moment(mu: f64, q: f64) -> f64 {
    if q.fract() == 0.0 && (0.0..=30.0).contains(&q) {
        return stirling2_row(q as u32)
            .iter()
            .enumerate()
            .map(|(k, &s)| s as f64 * mu.powi(k as i32))
            .sum();
    }
    poisson_series(mu, |k| (k as f64).powf(q))
}

/// `E[|X - mu|^q]` for `X ~ Poisson(mu)`, by summing the pmf.
pub fn poisson_central_abs_moment(mu: f64, q: f64) -> f64 {
    poisson_series(mu, |k| (k as f64 - mu).abs().powf(q))
}

fn poisson_series(mu: f64, g: impl Fn(u64) -> f64) -> f64 {
    if mu == 0.0 {
        return g(0);
    }
    let mut pmf = (-mu).exp();
    let mut sum = 0.0;
    let mut k = 0u64;
    loop {
        let term = pmf * g(k);
        sum += term;
        if (k as f64) > mu + 10.0 && term <= 1e-18 * sum.max(f64::MIN_POSITIVE) {
            break;
        }
        k += 1;
        pmf *= mu / k as f64;
        if k > 1_000_000 {
            break;
        }
    }
    sum
}

/// Hypothesis data `(r, M, w)` making a process with mean increments
/// Lipschitz in each coordinate with constant `rate_sup` satisfy the
/// Hölder hypothesis with equality at `r = 1`: `w = rate_sup / M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub r: f64,
    #[serde(rename = "M")]
    pub moment_scale: f64,
    pub wbar: f64,
}

impl Hypotheses {
    /// Poisson with total mean `mu = int_0^T rate` and rate bounded by
    /// `rate_sup`: `M = E[Z(T)^q]^{1/q}`.
    pub fn poisson(mu: f64, rate_sup: f64, q: f64) -> Self {
        let m = poisson_raw_moment(mu, q).powf(1.0 / q);
        Self::lipschitz(m, rate_sup)
    }

    /// Last-arrival dependent process with intensity at most `c`:
    /// `M = ((2cT)^k + (2k)^k)^{1/k}` with `k = ceil(q)`, which dominates
    /// the `L^q` norm.
    pub fn latd(c: f64, horizon: f64, q: f64) -> Result<Self> {
        let k = q.ceil() as u32;
        let m = latd_moment_bound(c, horizon, k)?.powf(1.0 / k as f64);
        Ok(Self::lipschitz(m, c))
    }

    fn lipschitz(moment_scale: f64, rate_sup: f64) -> Self {
        let m = if moment_scale > 0.0 {
            moment_scale
        } else {
            1.0
        };
        Hypotheses {
            r: 1.0,
            moment_scale: m,
            wbar: rate_sup / m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: f64, r: f64, n: u64) -> BoundParams {
        BoundParams {
            q,
            r,
            gamma: None,
            p: None,
            horizon: 1.0,
            moment_scale: 1.0,
            wbar: 1.0,
            n,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn cq_values() {
        // k = 2: 0.5 * 8^3 + 4 * 16^3 = 16640
        assert!(rel(cq_constant(3.0).unwrap(), 16640f64.powf(1.0 / 3.0)) < 1e-13);
        // k = 3: 0.5 * 12^4 + 3 * 24^4 = 1005696
        assert!(rel(cq_constant(4.0).unwrap(), 1005696f64.powf(0.25)) < 1e-13);
        assert!((cq_constant(3.0).unwrap() - 25.5300).abs() < 1e-4);
        assert!((cq_constant(4.0).unwrap() - 31.6677).abs() < 1e-4);
        // k = 2: 0.5 * 8^2.5 + (4 / 1.5) * 16^2.5
        let direct = (0.5 * 8f64.powf(2.5) + 4.0 / 1.5 * 16f64.powf(2.5)).powf(1.0 / 2.5);
        assert!(rel(cq_constant(2.5).unwrap(), direct) < 1e-14);
        assert!((cq_constant(2.5).unwrap() - 23.9978).abs() < 1e-4);
        assert!(matches!(cq_constant(2.0), Err(Error::QOutOfRange(_))));
    }

    #[test]
    fn n0_values() {
        assert_eq!(n0_threshold(4.0, 1.0).unwrap(), 8);
        assert_eq!(n0_threshold(3.0, 1.0).unwrap(), 11);
        // exponent 400/1002, 2^{1002/400} = 5.68
        assert_eq!(n0_threshold(4.0, 100.0).unwrap(), 6);
    }

    #[test]
    fn condition_values() {
        assert!(!complete_lln_condition(3.0, 1.0));
        assert!(complete_lln_condition(4.0, 1.0));
        assert!(complete_lln_condition(3.0, 3.0));
    }

    #[test]
    fn main_bound_example() {
        let v = main_bound_rhs(&params(4.0, 1.0, 16)).unwrap();
        let expected = 8.0 * 16f64.powf(-4.0 / 3.0) * (1005696.0 * 3.0 + 256.0);
        assert!(rel(v, expected) < 1e-12);
        assert!((v - 5.987e5).abs() < 1e2, "{v}");
        let doubled = main_bound_rhs(&BoundParams {
            moment_scale: 2.0,
            ..params(4.0, 1.0, 16)
        })
        .unwrap();
        assert!(rel(doubled, 16.0 * v) < 1e-12);
        let bigger = main_bound_rhs(&params(4.0, 1.0, 128)).unwrap();
        assert!(rel(v / bigger, 16.0) < 1e-12);
        assert!(matches!(
            main_bound_rhs(&params(4.0, 1.0, 7)),
            Err(Error::BelowN0 { n: 7, n0: 8 })
        ));
    }

    #[test]
    fn choose_q_values() {
        assert_eq!(choose_q(2.0, 0.25, 1.0).unwrap(), 3.0);
        assert!((choose_q(5.0, 0.4, 1.0).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(choose_q(2.0, 1e-9, 1.0).unwrap(), 3.0);
        assert_eq!(choose_q(7.0, 1e-9, 1.0).unwrap(), 7.0);
        assert!(matches!(
            choose_q(2.0, 0.5, 1.0),
            Err(Error::GammaOutOfRange(_))
        ));
    }

    #[test]
    fn main2_examples() {
        let mut p = params(0.0, 1.0, 16);
        p.p = Some(2.0);
        p.gamma = Some(0.25);
        let v = main2_bound_rhs(&p).unwrap();
        let c3 = cq_constant(3.0).unwrap();
        let expected =
            16f64.powf(-0.25) * 2f64.powf(2.0 / 3.0) * (c3.powi(3) * 3.0 + 64.0).powf(1.0 / 3.0);
        assert!(rel(v, expected) < 1e-12);
        let doubled = main2_bound_rhs(&BoundParams {
            moment_scale: 2.0,
            ..p
        })
        .unwrap();
        assert!(rel(doubled, 2.0 * v) < 1e-12);

        // at gamma = qr/(2qr+2r+2) with p = q the two bounds coincide
        let mut p4 = params(4.0, 1.0, 64);
        p4.p = Some(4.0);
        p4.gamma = Some(1.0 / 3.0);
        let main = main_bound_rhs(&p4).unwrap();
        let main2 = main2_bound_rhs(&p4).unwrap();
        assert!(rel(main2, main.powf(0.25)) < 1e-12);
    }

    #[test]
    fn scalar_and_discretization() {
        let c4 = cq_constant(4.0).unwrap();
        assert!(rel(scalar_lln_bound(4.0, 1.0, 100).unwrap(), c4 / 10.0) < 1e-14);
        assert!((scalar_lln_bound(4.0, 1.0, 100).unwrap() - 3.167).abs() < 1e-3);
        let a = scalar_lln_bound(3.0, 2.0, 50).unwrap();
        let b = scalar_lln_bound(3.0, 2.0, 200).unwrap();
        assert!(rel(a, 2.0 * b) < 1e-14);

        let q = 3.0;
        let big_n = discretization_bound_rhs(1, 1 << 40, q, 0.7, 5.0).unwrap();
        assert!(rel(big_n, 4.0 * 0.7) < 1e-9);
        let q1 = discretization_bound_rhs(5, 4, 1.0, 0.2, 3.0).unwrap();
        assert!(rel(q1, 5.0 * 0.2 + 0.5 * 3.0) < 1e-14);
    }

    #[test]
    fn latd_helpers() {
        assert_eq!(latd_moment_bound(1.0, 1.0, 2).unwrap(), 20.0);
        assert_eq!(latd_moment_bound(1.0, 1.0, 1).unwrap(), 4.0);
        assert_eq!(latd_moment_bound(0.0, 1.0, 3).unwrap(), 216.0);
        // Poisson(1): E Z^2 = 2 <= 20, E Z = 1 <= 4
        assert!(poisson_raw_moment(1.0, 2.0) <= 20.0);
        assert_eq!(latd_mean_increment_bound(1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(latd_mean_increment_bound(1.0, 0.4, 0.4).unwrap(), 0.0);
        assert_eq!(latd_mean_increment_bound(2.0, 0.25, 0.75).unwrap(), 1.0);
    }

    #[test]
    fn poisson_moments() {
        // Bell numbers at mu = 1
        for (q, bell) in [(1.0, 1.0), (2.0, 2.0), (3.0, 5.0), (4.0, 15.0), (5.0, 52.0)] {
            assert_eq!(poisson_raw_moment(1.0, q), bell);
            assert!(rel(poisson_series(1.0, |k| (k as f64).powf(q)), bell) < 1e-13);
        }
        // lambda + 3 lambda^2 + lambda^3... E X^3 = mu^3 + 3 mu^2 + mu
        assert!(rel(poisson_raw_moment(2.0, 3.0), 8.0 + 12.0 + 2.0) < 1e-15);
        assert!(rel(poisson_central_abs_moment(3.0, 2.0), 3.0) < 1e-12);
        assert!(rel(poisson_central_abs_moment(3.0, 4.0), 3.0 + 3.0 * 9.0) < 1e-12);
    }

    #[test]
    fn hypotheses_for_poisson() {
        let h = Hypotheses::poisson(1.0, 1.0, 4.0);
        assert!(rel(h.moment_scale, 15f64.powf(0.25)) < 1e-15);
        assert!(rel(h.moment_scale * h.wbar, 1.0) < 1e-15);
        assert_eq!(h.r, 1.0);
    }
}
