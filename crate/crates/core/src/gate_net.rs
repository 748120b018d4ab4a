//! Finite gate sets for continuous monotone means.
//!
//! For a mean `m` normalized so that `m(0, T) = 1`, the gate set of level
//! `n` is a finite set of points such that for every `y` of the same shape
//! class (non-increasing in `t1`, non-decreasing in `t2`, zero on the
//! diagonal),
//!
//! ```text
//! sup |y - m| <= max_{gates} |y - m| + 2/n
//! ```
//!
//! It is the union of two families of staircase points built from the level
//! sets `{m = i/n}`: the "inner" family (used when `y` falls below `m`) and
//! the "outer" family plus `(0, T)` (used when `y` rises above `m`). With
//! Hölder data `(r, C)` of the normalized mean its size obeys
//! `K <= (2n - 1) T (C n)^{1/r} + 1`.

use serde::{Deserialize, Serialize};

use crate::domain::{DeltaPoint, TriangleFn};
use crate::error::{Error, Result};
use crate::mean::MeanModel;

/// Which side of the threshold the searched set lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    /// `{s : f(s) <= c}` for non-increasing `f`.
    AtMost,
    /// `{s : f(s) < c}` for non-increasing `f`.
    Below,
    /// `{s : f(s) > c}` for non-decreasing `f`.
    Above,
    /// `{s : f(s) >= c}` for non-decreasing `f`.
    AtLeast,
}

impl Crossing {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Crossing::AtMost => value <= threshold,
            Crossing::Below => value < threshold,
            Crossing::Above => value > threshold,
            Crossing::AtLeast => value >= threshold,
        }
    }

    fn increasing(self) -> bool {
        matches!(self, Crossing::Above | Crossing::AtLeast)
    }
}

const MONOTONE_PROBES: usize = 16;
const MONOTONE_SLACK: f64 = 1e-12;

/// Infimum of `{s in [lo, hi] : f(s) crosses threshold}` for monotone
/// continuous `f`, to absolute tolerance `tol`.
///
/// Returns `Ok(None)` when the set is empty. When the infimum is within
/// `tol` of `lo` the result is exactly `lo`; otherwise it is a point of the
/// set at most `tol` to the right of the infimum.
pub fn monotone_inf_solve<F: Fn(f64) -> f64>(
    f: F,
    threshold: f64,
    crossing: Crossing,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Option<f64>> {
    if !(tol > 0.0) || !(lo <= hi) {
        return Err(Error::InvalidParameter(format!(
            "monotone_inf_solve needs tol > 0 and lo <= hi, got tol={tol}, [{lo}, {hi}]"
        )));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    check_monotone(&f, crossing, lo, hi, f_lo, f_hi)?;
    let slack = MONOTONE_SLACK * f_lo.abs().max(f_hi.abs()).max(1.0);
    if crossing.holds(f_lo, threshold) {
        return Ok(Some(lo));
    }
    if !crossing.holds(f_hi, threshold) {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f_lo, f_hi);
    // bisect to machine precision so errors do not accumulate along the
    // staircase; `tol` only decides when to snap to `lo`
    loop {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        // rounding may break monotonicity at the ulp level
        let ordered = if crossing.increasing() {
            fa - slack <= fm && fm <= fb + slack
        } else {
            fa + slack >= fm && fm >= fb - slack
        };
        if !ordered {
            return Err(Error::NonmonotoneDetected { lo: a, hi: b });
        }
        if crossing.holds(fm, threshold) {
            b = mid;
            fb = fm;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(Some(if b - lo <= tol { lo } else { b }))
}

fn check_monotone<F: Fn(f64) -> f64>(
    f: &F,
    crossing: Crossing,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
) -> Result<()> {
    let slack = MONOTONE_SLACK * f_lo.abs().max(f_hi.abs()).max(1.0);
    let mut prev = f_lo;
    for j in 1..=MONOTONE_PROBES {
        let s = lo + (hi - lo) * j as f64 / MONOTONE_PROBES as f64;
        let v = if j == MONOTONE_PROBES { f_hi } else { f(s) };
        let bad = if crossing.increasing() {
            v < prev - slack
        } else {
            v > prev + slack
        };
        if bad || v.is_nan() {
            return Err(Error::NonmonotoneDetected { lo, hi });
        }
        prev = v;
    }
    Ok(())
}

/// The gate set `Delta*_n` of a mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSet {
    pub n: u32,
    #[serde(rename = "K")]
    pub size_k: usize,
    /// `m(0, T)`; the mean is divided by this before the construction.
    pub normalization: f64,
    /// Gates sorted lexicographically as `[t1, t2]`.
    #[serde(with = "gate_pairs")]
    pub gates: Vec<DeltaPoint>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub tol: f64,
    pub holder_r: f64,
    /// Hölder constant of the normalized mean.
    pub holder_c_norm: f64,
    pub source: String,
}

mod gate_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::domain::DeltaPoint;

    pub fn serialize<S: Serializer>(gates: &[DeltaPoint], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = gates.iter().map(|g| [g.t1, g.t2]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DeltaPoint>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|[t1, t2]| DeltaPoint { t1, t2 })
            .collect())
    }
}

impl GateSet {
    /// `(2n - 1) T (C_norm n)^{1/r} + 1`.
    pub fn size_bound(&self) -> f64 {
        gate_size_bound(self.n, self.horizon, self.holder_c_norm, self.holder_r)
    }

    /// Additive slack of [`gate_sup_bound`]: `(2/n + 2 C_norm tol^r) m(0, T)`.
    pub fn slack(&self) -> f64 {
        (2.0 / self.n as f64 + 2.0 * self.holder_c_norm * self.tol.powf(self.holder_r))
            * self.normalization
    }
}

/// `(2n - 1) T (C n)^{1/r} + 1`.
pub fn gate_size_bound(n: u32, horizon: f64, c: f64, r: f64) -> f64 {
    let n = n as f64;
    (2.0 * n - 1.0) * horizon * (c * n).powf(1.0 / r) + 1.0
}

pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Builds `Delta*_n` for `model`. `tol` is the root-finding tolerance;
/// `None` means `1e-10 * T`.
pub fn build_gate_set(model: &MeanModel, n: u32, tol: Option<f64>) -> Result<GateSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("gate level n must be >= 1".into()));
    }
    let horizon = model.horizon();
    let tol = tol.unwrap_or(DEFAULT_REL_TOL * horizon);
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tol must be positive, got {tol}"
        )));
    }
    let top = model.top_value();
    let r = model.holder_r();
    let top_gate = DeltaPoint {
        t1: 0.0,
        t2: horizon,
    };

    if top == 0.0 {
        return Ok(GateSet {
            n,
            size_k: 1,
            normalization: 0.0,
            gates: vec![top_gate],
            horizon,
            tol,
            holder_r: r,
            holder_c_norm: 0.0,
            source: model.label().to_string(),
        });
    }

    let c_norm = model.holder_c() / top;
    let spacing = (c_norm * n as f64).powf(-1.0 / r);
    if tol >= spacing / 4.0 {
        return Err(Error::ToleranceTooCoarse { tol, spacing });
    }
    let m = |t1: f64, t2: f64| model.raw(t1, t2) / top;
    let nf = n as f64;
    let mut gates = vec![top_gate];

    // inner family: levels i = 1..=i_max with (0, T) in {i/n < m <= (i+1)/n}
    let i_max = ((nf * m(0.0, horizon)).ceil() as i64 - 1).clamp(0, n as i64 - 1) as u32;
    for i in 1..=i_max {
        let upper = i as f64 / nf;
        let lower = (i - 1) as f64 / nf;
        let mut t2_prev = horizon;
        let mut t1_prev = f64::INFINITY;
        loop {
            let t1 = monotone_inf_solve(
                |s| m(s, t2_prev),
                upper,
                Crossing::AtMost,
                0.0,
                t2_prev,
                tol,
            )?
            .expect("m(t2, t2) = 0 <= i/n");
            if t1 >= t1_prev {
                return Err(Error::NonmonotoneDetected {
                    lo: t1,
                    hi: t1_prev,
                });
            }
            let Some(t2) =
                monotone_inf_solve(|s| m(t1, s), lower, Crossing::Above, t1, t2_prev, tol)?
            else {
                break;
            };
            gates.push(DeltaPoint { t1, t2 });
            if t1 == 0.0 {
                break;
            }
            t1_prev = t1;
            t2_prev = t2;
        }
    }

    // outer family: levels i = 0..=i_max' - 2 with i_max' = floor(n m(0, T))
    let i_max_outer = (nf * m(0.0, horizon)).floor() as i64;
    for i in 0..=(i_max_outer - 2) {
        let upper = (i + 2) as f64 / nf;
        let lower = (i + 1) as f64 / nf;
        let mut t2 = horizon;
        let mut t1_prev = f64::INFINITY;
        loop {
            let t1 = monotone_inf_solve(|s| m(s, t2), upper, Crossing::Below, 0.0, t2, tol)?
                .expect("m(t2, t2) = 0 < (i+2)/n");
            if t1 >= t1_prev {
                return Err(Error::NonmonotoneDetected {
                    lo: t1,
                    hi: t1_prev,
                });
            }
            gates.push(DeltaPoint { t1, t2 });
            if t1 == 0.0 {
                break;
            }
            let Some(next_t2) =
                monotone_inf_solve(|s| m(t1, s), lower, Crossing::AtLeast, t1, t2, tol)?
            else {
                break;
            };
            t1_prev = t1;
            t2 = next_t2;
        }
    }

    gates.sort_by(|a, b| a.lex_cmp(b));
    gates.dedup_by(|a, b| a.t1 == b.t1 && a.t2 == b.t2);
    Ok(GateSet {
        n,
        size_k: gates.len(),
        normalization: top,
        gates,
        horizon,
        tol,
        holder_r: r,
        holder_c_norm: c_norm,
        source: model.label().to_string(),
    })
}

/// Upper bound on `sup |y - m|` over the whole triangle:
/// `max_{gates} |y - m| + slack`. Valid for every `y` in the monotone shape
/// class.
pub fn gate_sup_bound<Y: TriangleFn>(gate_set: &GateSet, y: &Y, model: &MeanModel) -> Result<f64> {
    for h in [y.horizon(), gate_set.horizon] {
        if h != model.horizon() {
            return Err(Error::HorizonMismatch {
                left: h,
                right: model.horizon(),
            });
        }
    }
    let gate_max = gate_set
        .gates
        .iter()
        .map(|&g| (y.value(g) - model.value(g)).abs())
        .fold(0.0, f64::max);
    Ok(gate_max + gate_set.slack())
}

/// Whether `K` respects `(2n - 1) T (C_norm n)^{1/r} + 1` for `model`.
pub fn verify_gate_size(gate_set: &GateSet, model: &MeanModel) -> bool {
    let top = model.top_value();
    if top == 0.0 {
        return gate_set.size_k <= 1;
    }
    let c_norm = model.holder_c() / top;
    (gate_set.size_k as f64)
        <= gate_size_bound(gate_set.n, model.horizon(), c_norm, model.holder_r())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DeltaPoint, t1: f64, t2: f64) -> bool {
        (a.t1 - t1).abs() < 1e-9 && (a.t2 - t2).abs() < 1e-9
    }

    #[test]
    fn inf_solve_examples() {
        let v = monotone_inf_solve(|s| 1.0 - s, 0.5, Crossing::AtMost, 0.0, 1.0, 1e-10)
            .unwrap()
            .unwrap();
        assert!((v - 0.5).abs() <= 1e-10);
        let v = monotone_inf_solve(|s| s, 0.0, Crossing::Above, 0.0, 1.0, 1e-10)
            .unwrap()
            .unwrap();
        assert_eq!(v, 0.0);
        let v = monotone_inf_solve(|s| s * s, 0.25, Crossing::Above, 0.0, 1.0, 1e-10)
            .unwrap()
            .unwrap();
        assert!((v - 0.5).abs() <= 1e-10);
        assert_eq!(
            monotone_inf_solve(|s| s, 2.0, Crossing::AtLeast, 0.0, 1.0, 1e-10).unwrap(),
            None
        );
    }

    #[test]
    fn inf_solve_matches_plain_bisection() {
        // plain bisection on sqrt(s) >= 0.3 without any of the solver's shortcuts
        let (mut a, mut b) = (0.0f64, 1.0f64);
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            if mid.sqrt() >= 0.3 {
                b = mid
            } else {
                a = mid
            }
        }
        let v = monotone_inf_solve(f64::sqrt, 0.3, Crossing::AtLeast, 0.0, 1.0, 1e-10)
            .unwrap()
            .unwrap();
        assert!((v - b).abs() <= 1e-10);
    }

    #[test]
    fn inf_solve_rejects_nonmonotone() {
        let r = monotone_inf_solve(|s| (6.0 * s).sin(), 0.5, Crossing::AtLeast, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::NonmonotoneDetected { .. })));
    }

    #[test]
    fn linear_mean_small_levels() {
        let m = MeanModel::linear(1.0, 1.0).unwrap();
        let g = build_gate_set(&m, 1, None).unwrap();
        assert_eq!(g.size_k, 1);
        assert!(close(&g.gates[0], 0.0, 1.0));
        assert!(verify_gate_size(&g, &m));

        let g = build_gate_set(&m, 2, None).unwrap();
        assert_eq!(g.size_k, 3, "{:?}", g.gates);
        assert!(close(&g.gates[0], 0.0, 0.0));
        assert!(close(&g.gates[1], 0.0, 1.0));
        assert!(close(&g.gates[2], 0.5, 0.5));
        assert!(verify_gate_size(&g, &m));
        assert_eq!(g.size_bound(), 7.0);
    }

    #[test]
    fn linear_mean_level_three_by_hand() {
        // inner: (2/3,2/3) (1/3,1/3) (0,0) and (1/3,2/3) (0,1/3);
        // outer: (1/3,1) (0,2/3) and (0,1)
        let m = MeanModel::linear(1.0, 1.0).unwrap();
        let g = build_gate_set(&m, 3, None).unwrap();
        let expected = [
            (0.0, 0.0),
            (0.0, 1.0 / 3.0),
            (0.0, 2.0 / 3.0),
            (0.0, 1.0),
            (1.0 / 3.0, 1.0 / 3.0),
            (1.0 / 3.0, 2.0 / 3.0),
            (1.0 / 3.0, 1.0),
            (2.0 / 3.0, 2.0 / 3.0),
        ];
        assert_eq!(g.size_k, expected.len(), "{:?}", g.gates);
        for (t1, t2) in expected {
            assert!(
                g.gates.iter().any(|gate| close(gate, t1, t2)),
                "missing ({t1}, {t2})"
            );
        }
    }

    #[test]
    fn zero_mean_single_gate() {
        let m = MeanModel::zero(2.0).unwrap();
        let g = build_gate_set(&m, 7, None).unwrap();
        assert_eq!(g.size_k, 1);
        assert_eq!(g.gates[0], DeltaPoint { t1: 0.0, t2: 2.0 });
        assert_eq!(g.normalization, 0.0);
        assert_eq!(g.slack(), 0.0);
    }

    #[test]
    fn coarse_tolerance_rejected() {
        let m = MeanModel::linear(1.0, 1.0).unwrap();
        assert!(matches!(
            build_gate_set(&m, 10, Some(0.05)),
            Err(Error::ToleranceTooCoarse { .. })
        ));
    }

    #[test]
    fn sup_bound_examples() {
        let m = MeanModel::linear(1.0, 1.0).unwrap();
        let g = build_gate_set(&m, 2, None).unwrap();
        let b = gate_sup_bound(&g, &m, &m).unwrap();
        assert!((b - 1.0).abs() < 1e-9);

        let zero = crate::domain::FnOnTriangle::new(1.0, |_, _| 0.0);
        let b = gate_sup_bound(&g, &zero, &m).unwrap();
        assert!((b - 2.0).abs() < 1e-9);

        let m3 = MeanModel::linear(1.0, 3.0).unwrap();
        let g3 = build_gate_set(&m3, 4, None).unwrap();
        let y = m3.scaled(1.5).unwrap();
        let b = gate_sup_bound(&g3, &y, &m3).unwrap();
        let expected = 0.5 * 3.0 + 2.0 / 4.0 * 3.0;
        assert!((b - expected).abs() < 1e-8, "{b} vs {expected}");

        let other = MeanModel::linear(2.0, 1.0).unwrap();
        assert!(matches!(
            gate_sup_bound(&g, &other, &m),
            Err(Error::HorizonMismatch { .. })
        ));
    }

    #[test]
    fn size_verification() {
        let m = MeanModel::linear(1.0, 1.0).unwrap();
        let mut g = build_gate_set(&m, 2, None).unwrap();
        g.size_k = 8;
        assert!(!verify_gate_size(&g, &m));
    }

    #[test]
    fn builds_are_deterministic() {
        let m = MeanModel::power(1.0, 1.0, 0.5).unwrap();
        let a = build_gate_set(&m, 9, None).unwrap();
        let b = build_gate_set(&m, 9, None).unwrap();
        assert_eq!(a, b);
    }
}
