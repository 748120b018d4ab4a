//! Continuous mean functions `m` on the triangle: non-increasing in `t1`,
//! non-decreasing in `t2`, zero on the diagonal, with declared Hölder data
//! `|m(t) - m(s)| <= C (|t1 - s1|^r + |t2 - s2|^r)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{check_horizon, DeltaPoint, TriangleFn};
use crate::error::{Error, Result};
use crate::series::{latd_mean_table, DEFAULT_GRID_INTERVALS};
use crate::simulator::{IntensityModel, IntensitySpec};

type CustomFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum MeanKind {
    Zero,
    Linear {
        rate: f64,
    },
    Power {
        scale: f64,
        beta: f64,
    },
    Ramp {
        a: f64,
        b: f64,
    },
    /// `F(t2) - F(t1)` with `F` piecewise linear through uniform nodes.
    Tabulated {
        step: f64,
        values: Arc<[f64]>,
    },
    Custom(CustomFn),
}

/// A mean function with its Hölder exponent `r` and constant `C`.
///
/// The constants are declared, not certified; see [`MeanModel::spot_check`].
#[derive(Clone)]
pub struct MeanModel {
    horizon: f64,
    kind: MeanKind,
    holder_r: f64,
    holder_c: f64,
    top_value: f64,
    label: String,
}

impl fmt::Debug for MeanModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeanModel")
            .field("label", &self.label)
            .field("horizon", &self.horizon)
            .field("holder_r", &self.holder_r)
            .field("holder_c", &self.holder_c)
            .field("top_value", &self.top_value)
            .finish()
    }
}

impl MeanModel {
    fn build(horizon: f64, kind: MeanKind, r: f64, c: f64, label: String) -> Result<Self> {
        check_horizon(horizon)?;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidMean(format!(
                "Hölder exponent must be positive, got {r}"
            )));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidMean(format!(
                "Hölder constant must be >= 0, got {c}"
            )));
        }
        let mut model = MeanModel {
            horizon,
            kind,
            holder_r: r,
            holder_c: c,
            top_value: 0.0,
            label,
        };
        model.top_value = model.raw(0.0, horizon);
        if !(model.top_value >= 0.0 && model.top_value.is_finite()) {
            return Err(Error::InvalidMean(format!(
                "m(0, T) must be finite and >= 0, got {}",
                model.top_value
            )));
        }
        Ok(model)
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        Self::build(horizon, MeanKind::Zero, 1.0, 0.0, "zero".into())
    }

    /// `rate * (t2 - t1)`, the Poisson mean.
    pub fn linear(horizon: f64, rate: f64) -> Result<Self> {
        if !(rate >= 0.0) {
            return Err(Error::InvalidMean(format!("rate must be >= 0, got {rate}")));
        }
        Self::build(
            horizon,
            MeanKind::Linear { rate },
            1.0,
            rate,
            format!("linear(rate={rate})"),
        )
    }

    /// `scale * (t2^beta - t1^beta)`; Hölder with `r = min(beta, 1)`.
    pub fn power(horizon: f64, scale: f64, beta: f64) -> Result<Self> {
        if !(scale >= 0.0 && beta > 0.0) {
            return Err(Error::InvalidMean(format!(
                "power mean needs scale >= 0 and beta > 0, got ({scale}, {beta})"
            )));
        }
        let (r, c) = if beta <= 1.0 {
            (beta, scale)
        } else {
            (1.0, scale * beta * horizon.powf(beta - 1.0))
        };
        Self::build(
            horizon,
            MeanKind::Power { scale, beta },
            r,
            c,
            format!("power(scale={scale},beta={beta})"),
        )
    }

    /// Integrated rate `a + b u` over `(t1, t2]`.
    pub fn ramp(horizon: f64, a: f64, b: f64) -> Result<Self> {
        if a < 0.0 || a + b * horizon < 0.0 {
            return Err(Error::InvalidMean(format!(
                "rate a + b u must be >= 0 on [0, T], got a={a}, b={b}"
            )));
        }
        let c = a.max(a + b * horizon);
        Self::build(
            horizon,
            MeanKind::Ramp { a, b },
            1.0,
            c,
            format!("ramp(a={a},b={b})"),
        )
    }

    /// `F(t2) - F(t1)` for `F` tabulated at `values.len()` uniform nodes on
    /// `[0, T]` with `F(0) = 0`. Hölder data: `r = 1`, `C = ` max slope.
    pub fn tabulated(horizon: f64, values: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if values.len() < 2 {
            return Err(Error::InvalidMean("need at least two nodes".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidMean("tabulated F must start at 0".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidMean(
                "tabulated F must be non-decreasing".into(),
            ));
        }
        let step = horizon / (values.len() - 1) as f64;
        let c = values
            .windows(2)
            .map(|w| (w[1] - w[0]) / step)
            .fold(0.0, f64::max);
        Self::build(
            horizon,
            MeanKind::Tabulated {
                step,
                values: values.into(),
            },
            1.0,
            c,
            "tabulated".into(),
        )
    }

    /// A user-supplied mean with declared Hölder data.
    pub fn from_fn<F>(horizon: f64, holder_r: f64, holder_c: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::build(
            horizon,
            MeanKind::Custom(Arc::new(f)),
            holder_r,
            holder_c,
            "custom".into(),
        )
    }

    /// `factor * m`, with the Hölder constant scaled alike.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) {
            return Err(Error::InvalidMean(format!(
                "scale factor must be >= 0, got {factor}"
            )));
        }
        let inner = self.clone();
        Self::build(
            self.horizon,
            MeanKind::Custom(Arc::new(move |t1, t2| factor * inner.raw(t1, t2))),
            self.holder_r,
            self.holder_c * factor,
            format!("{factor}*{}", self.label),
        )
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn holder_r(&self) -> f64 {
        self.holder_r
    }

    pub fn holder_c(&self) -> f64 {
        self.holder_c
    }

    /// `m(0, T)`, the maximum of `m`.
    pub fn top_value(&self) -> f64 {
        self.top_value
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Checked evaluation.
    pub fn eval(&self, p: DeltaPoint) -> Result<f64> {
        p.check(self.horizon)?;
        Ok(self.raw(p.t1, p.t2))
    }

    pub(crate) fn raw(&self, t1: f64, t2: f64) -> f64 {
        match &self.kind {
            MeanKind::Zero => 0.0,
            MeanKind::Linear { rate } => rate * (t2 - t1),
            MeanKind::Power { scale, beta } => scale * (t2.powf(*beta) - t1.powf(*beta)),
            MeanKind::Ramp { a, b } => a * (t2 - t1) + 0.5 * b * (t2 * t2 - t1 * t1),
            MeanKind::Tabulated { step, values } => {
                interp(values, *step, t2) - interp(values, *step, t1)
            }
            MeanKind::Custom(f) => f(t1, t2),
        }
    }

    /// Checks diagonal vanishing, two-parameter monotonicity and the Hölder
    /// inequality on `pairs` random point pairs. Returns the first violation.
    pub fn spot_check<R: Rng>(&self, pairs: usize, rng: &mut R) -> Result<()> {
        let t = self.horizon;
        let scale = self.top_value.max(1.0);
        let slack = 1e-12 * scale;
        let random_point = |rng: &mut R| {
            let a = rng.random::<f64>() * t;
            let b = rng.random::<f64>() * t;
            DeltaPoint {
                t1: a.min(b),
                t2: a.max(b),
            }
        };
        for _ in 0..pairs {
            let d = rng.random::<f64>() * t;
            let diag = self.raw(d, d);
            if diag.abs() > slack {
                return Err(Error::InvalidMean(format!("m({d}, {d}) = {diag} != 0")));
            }

            let p = random_point(rng);
            let s = random_point(rng);
            let (mp, ms) = (self.raw(p.t1, p.t2), self.raw(s.t1, s.t2));
            if mp < -slack {
                return Err(Error::InvalidMean(format!(
                    "m({}, {}) = {mp} < 0",
                    p.t1, p.t2
                )));
            }
            let bound = self.holder_c
                * ((p.t1 - s.t1).abs().powf(self.holder_r)
                    + (p.t2 - s.t2).abs().powf(self.holder_r));
            if (mp - ms).abs() > bound + slack {
                return Err(Error::InvalidMean(format!(
                    "Hölder bound violated between ({}, {}) and ({}, {}): {} > {}",
                    p.t1,
                    p.t2,
                    s.t1,
                    s.t2,
                    (mp - ms).abs(),
                    bound
                )));
            }

            // enlarge p: smaller t1, larger t2
            let outer = DeltaPoint {
                t1: p.t1 * rng.random::<f64>(),
                t2: p.t2 + (t - p.t2) * rng.random::<f64>(),
            };
            let mo = self.raw(outer.t1, outer.t2);
            if mo < mp - slack {
                return Err(Error::InvalidMean(format!(
                    "monotonicity violated: m({}, {}) = {mo} < m({}, {}) = {mp}",
                    outer.t1, outer.t2, p.t1, p.t2
                )));
            }
        }
        Ok(())
    }
}

fn interp(values: &[f64], step: f64, x: f64) -> f64 {
    let last = values.len() - 1;
    let pos = x / step;
    if pos <= 0.0 {
        return values[0];
    }
    let i = (pos.floor() as usize).min(last);
    if i >= last {
        return values[last];
    }
    let frac = pos - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

impl TriangleFn for MeanModel {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, p: DeltaPoint) -> f64 {
        self.raw(p.t1, p.t2)
    }
}

/// Serializable description of a built-in mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanSpec {
    Zero {
        #[serde(rename = "T")]
        horizon: f64,
    },
    Linear {
        #[serde(rename = "T")]
        horizon: f64,
        rate: f64,
    },
    Power {
        #[serde(rename = "T")]
        horizon: f64,
        #[serde(default = "one")]
        scale: f64,
        beta: f64,
    },
    Ramp {
        #[serde(rename = "T")]
        horizon: f64,
        a: f64,
        b: f64,
    },
    /// Mean of a last-arrival-dependent process, tabulated from its series.
    LatdSeries {
        #[serde(rename = "T")]
        horizon: f64,
        w: IntensitySpec,
        sup_bound: Option<f64>,
        #[serde(default = "default_kmax")]
        k_max: usize,
        #[serde(default = "default_intervals")]
        intervals: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn default_kmax() -> usize {
    crate::series::DEFAULT_K_MAX
}

fn default_intervals() -> usize {
    DEFAULT_GRID_INTERVALS
}

impl MeanSpec {
    pub fn horizon(&self) -> f64 {
        match self {
            MeanSpec::Zero { horizon }
            | MeanSpec::Linear { horizon, .. }
            | MeanSpec::Power { horizon, .. }
            | MeanSpec::Ramp { horizon, .. }
            | MeanSpec::LatdSeries { horizon, .. } => *horizon,
        }
    }

    pub fn build(&self) -> Result<MeanModel> {
        match self {
            MeanSpec::Zero { horizon } => MeanModel::zero(*horizon),
            MeanSpec::Linear { horizon, rate } => MeanModel::linear(*horizon, *rate),
            MeanSpec::Power {
                horizon,
                scale,
                beta,
            } => MeanModel::power(*horizon, *scale, *beta),
            MeanSpec::Ramp { horizon, a, b } => MeanModel::ramp(*horizon, *a, *b),
            MeanSpec::LatdSeries {
                horizon,
                w,
                sup_bound,
                k_max,
                intervals,
            } => {
                let model = IntensityModel::builtin(*horizon, w.clone(), *sup_bound)?;
                let table = latd_mean_table(
                    &model,
                    *k_max,
                    *intervals,
                    crate::series::DEFAULT_SERIES_TOL,
                )?;
                let mut mean = MeanModel::tabulated(*horizon, table.means)?;
                mean.label = format!("latd_series({w:?})");
                Ok(mean)
            }
        }
    }
}
