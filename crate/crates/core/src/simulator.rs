//! Seed-deterministic samplers for counting processes.
//!
//! Three process kinds are supported: homogeneous Poisson, inhomogeneous
//! Poisson with a rate function of time, and the last-arrival-time dependent
//! (LATD) process whose intensity at time `u` is `w(t0, u)` with `t0` the
//! most recent arrival (`t0 = 0` before the first one). The latter two are
//! sampled by thinning a homogeneous proposal at the declared bound `C`.
//!
//! Path `i` of replication `j` draws from its own ChaCha8 stream, keyed by
//! `(master_seed, i, j)`, so a batch is identical for every worker count.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{check_horizon, SampleBatch, SeedRecord, StepPath};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Built-in intensity families `w(t0, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum IntensitySpec {
    /// `c`
    Constant { c: f64 },
    /// `a + b * t0`
    LastArrivalLinear { a: f64, b: f64 },
    /// `a + b * u`
    TimeRamp { a: f64, b: f64 },
    /// `a * (1 + b * t0) * (1 + c * u)`
    Product { a: f64, b: f64, c: f64 },
}

impl IntensitySpec {
    pub fn eval(&self, t0: f64, u: f64) -> f64 {
        match *self {
            IntensitySpec::Constant { c } => c,
            IntensitySpec::LastArrivalLinear { a, b } => a + b * t0,
            IntensitySpec::TimeRamp { a, b } => a + b * u,
            IntensitySpec::Product { a, b, c } => a * (1.0 + b * t0) * (1.0 + c * u),
        }
    }

    /// `Omega(s, t) = int_s^t w(s, u) du` in closed form.
    pub fn omega(&self, s: f64, t: f64) -> f64 {
        let len = t - s;
        match *self {
            IntensitySpec::Constant { c } => c * len,
            IntensitySpec::LastArrivalLinear { a, b } => (a + b * s) * len,
            IntensitySpec::TimeRamp { a, b } => a * len + 0.5 * b * (t * t - s * s),
            IntensitySpec::Product { a, b, c } => {
                a * (1.0 + b * s) * (len + 0.5 * c * (t * t - s * s))
            }
        }
    }

    pub fn depends_on_last_arrival(&self) -> bool {
        match *self {
            IntensitySpec::Constant { .. } | IntensitySpec::TimeRamp { .. } => false,
            IntensitySpec::LastArrivalLinear { b, .. } => b != 0.0,
            IntensitySpec::Product { a, b, .. } => a != 0.0 && b != 0.0,
        }
    }

    /// Exact `(min, max)` of `w` over `{0 <= t0 <= u <= T}`.
    ///
    /// Every family is bilinear, so extremes sit on the boundary: the three
    /// vertices, plus the interior critical point of the quadratic along the
    /// diagonal for the product family.
    pub fn range_on_triangle(&self, horizon: f64) -> (f64, f64) {
        let mut vals = vec![
            self.eval(0.0, 0.0),
            self.eval(0.0, horizon),
            self.eval(horizon, horizon),
        ];
        if let IntensitySpec::Product { b, c, .. } = *self {
            if b != 0.0 && c != 0.0 {
                let t = -(b + c) / (2.0 * b * c);
                if t > 0.0 && t < horizon {
                    vals.push(self.eval(t, t));
                }
            }
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

type CustomIntensity = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Intensity {
    Builtin(IntensitySpec),
    Custom(CustomIntensity),
}

/// A nonnegative intensity `w(t0, u)` on the triangle with a declared upper
/// bound `sup_bound`.
#[derive(Clone)]
pub struct IntensityModel {
    horizon: f64,
    intensity: Intensity,
    sup_bound: f64,
}

impl fmt::Debug for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.intensity {
            Intensity::Builtin(spec) => format!("{spec:?}"),
            Intensity::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("IntensityModel")
            .field("horizon", &self.horizon)
            .field("intensity", &kind)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl IntensityModel {
    /// A built-in family. When `sup_bound` is `None` the exact supremum on
    /// the triangle is used; a declared bound below it is rejected.
    pub fn builtin(horizon: f64, spec: IntensitySpec, sup_bound: Option<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        let (lo, hi) = spec.range_on_triangle(horizon);
        if !(lo >= 0.0) || !hi.is_finite() {
            return Err(Error::InvalidIntensity(format!(
                "{spec:?} takes negative or non-finite values on the triangle (min {lo})"
            )));
        }
        let bound = sup_bound.unwrap_or(hi);
        if !(bound >= hi - 1e-12 * hi.abs()) || !bound.is_finite() {
            return Err(Error::InvalidIntensity(format!(
                "declared bound {bound} is below the supremum {hi} of {spec:?}"
            )));
        }
        Ok(IntensityModel {
            horizon,
            intensity: Intensity::Builtin(spec),
            sup_bound: bound.max(hi),
        })
    }

    pub fn constant(horizon: f64, c: f64) -> Result<Self> {
        Self::builtin(horizon, IntensitySpec::Constant { c }, None)
    }

    /// A user intensity; `sup_bound` is trusted and enforced while sampling.
    pub fn custom<F>(horizon: f64, sup_bound: f64, w: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        check_horizon(horizon)?;
        if !(sup_bound >= 0.0 && sup_bound.is_finite()) {
            return Err(Error::InvalidIntensity(format!(
                "sup_bound must be finite and >= 0, got {sup_bound}"
            )));
        }
        Ok(IntensityModel {
            horizon,
            intensity: Intensity::Custom(Arc::new(w)),
            sup_bound,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn spec(&self) -> Option<&IntensitySpec> {
        match &self.intensity {
            Intensity::Builtin(s) => Some(s),
            Intensity::Custom(_) => None,
        }
    }

    pub fn w(&self, t0: f64, u: f64) -> f64 {
        match &self.intensity {
            Intensity::Builtin(spec) => spec.eval(t0, u),
            Intensity::Custom(f) => f(t0, u),
        }
    }

    /// `Omega(s, t) = int_s^t w(s, u) du`; closed form for built-ins.
    pub fn omega(&self, s: f64, t: f64) -> f64 {
        match &self.intensity {
            Intensity::Builtin(spec) => spec.omega(s, t),
            Intensity::Custom(_) => self.omega_quadrature(s, t),
        }
    }

    /// `Omega(s, t)` by adaptive Simpson at relative tolerance `1e-10`.
    pub fn omega_quadrature(&self, s: f64, t: f64) -> f64 {
        adaptive_simpson(|u| self.w(s, u), s, t, 1e-10)
    }

    /// Checked intensity evaluation used by the thinning loop.
    fn w_checked(&self, t0: f64, u: f64) -> Result<f64> {
        let value = self.w(t0, u);
        if value > self.sup_bound {
            return Err(Error::IntensityExceedsBound {
                t0,
                u,
                value,
                bound: self.sup_bound,
            });
        }
        if !(value >= 0.0) {
            return Err(Error::InvalidIntensity(format!(
                "w({t0}, {u}) = {value} is negative"
            )));
        }
        Ok(value)
    }
}

/// What kind of counting process to sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    PoissonConst {
        #[serde(rename = "T")]
        horizon: f64,
        rate: f64,
    },
    PoissonRateFn {
        #[serde(rename = "T")]
        horizon: f64,
        rate: IntensitySpec,
        #[serde(default)]
        sup_bound: Option<f64>,
    },
    Latd {
        #[serde(rename = "T")]
        horizon: f64,
        w: IntensitySpec,
        #[serde(default)]
        sup_bound: Option<f64>,
    },
}

/// A validated [`ProcessSpec`], ready to sample.
#[derive(Debug, Clone)]
pub enum Process {
    PoissonConst { horizon: f64, rate: f64 },
    PoissonRateFn(IntensityModel),
    Latd(IntensityModel),
}

impl ProcessSpec {
    pub fn horizon(&self) -> f64 {
        match self {
            ProcessSpec::PoissonConst { horizon, .. }
            | ProcessSpec::PoissonRateFn { horizon, .. }
            | ProcessSpec::Latd { horizon, .. } => *horizon,
        }
    }

    pub fn build(&self) -> Result<Process> {
        match self {
            ProcessSpec::PoissonConst { horizon, rate } => {
                check_horizon(*horizon)?;
                if !(*rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidIntensity(format!(
                        "Poisson rate must be finite and >= 0, got {rate}"
                    )));
                }
                Ok(Process::PoissonConst {
                    horizon: *horizon,
                    rate: *rate,
                })
            }
            ProcessSpec::PoissonRateFn {
                horizon,
                rate,
                sup_bound,
            } => {
                if rate.depends_on_last_arrival() {
                    return Err(Error::InvalidIntensity(
                        "a Poisson rate function cannot depend on the last arrival".into(),
                    ));
                }
                Ok(Process::PoissonRateFn(IntensityModel::builtin(
                    *horizon,
                    rate.clone(),
                    *sup_bound,
                )?))
            }
            ProcessSpec::Latd {
                horizon,
                w,
                sup_bound,
            } => Ok(Process::Latd(IntensityModel::builtin(
                *horizon,
                w.clone(),
                *sup_bound,
            )?)),
        }
    }
}

impl Process {
    pub fn horizon(&self) -> f64 {
        match self {
            Process::PoissonConst { horizon, .. } => *horizon,
            Process::PoissonRateFn(m) | Process::Latd(m) => m.horizon(),
        }
    }

    /// One path from `rng`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<StepPath> {
        match self {
            Process::PoissonConst { horizon, rate } => {
                Ok(sample_poisson_const(*horizon, *rate, rng))
            }
            Process::PoissonRateFn(m) => sample_poisson_rate(m, rng),
            Process::Latd(m) => sample_latd(m, rng),
        }
    }
}

/// Homogeneous Poisson path from exponential gaps.
pub fn sample_poisson_const<R: Rng>(horizon: f64, rate: f64, rng: &mut R) -> StepPath {
    let mut jumps = Vec::new();
    if rate > 0.0 {
        let gap = Exp::new(rate).expect("rate is positive");
        let mut t = gap.sample(rng);
        while t <= horizon {
            jumps.push(t);
            t += gap.sample(rng);
        }
    }
    StepPath::from_sorted(horizon, jumps)
}

/// Poisson path for either Poisson variant.
pub fn sample_poisson<R: Rng>(process: &Process, rng: &mut R) -> Result<StepPath> {
    match process {
        Process::PoissonConst { horizon, rate } => Ok(sample_poisson_const(*horizon, *rate, rng)),
        Process::PoissonRateFn(m) => sample_poisson_rate(m, rng),
        Process::Latd(_) => Err(Error::InvalidParameter(
            "sample_poisson called with a last-arrival dependent process".into(),
        )),
    }
}

/// Inhomogeneous Poisson path: thinning with a rate that ignores `t0`.
pub fn sample_poisson_rate<R: Rng>(model: &IntensityModel, rng: &mut R) -> Result<StepPath> {
    thin(model, rng, false)
}

/// LATD path by thinning against the constant rate `model.sup_bound()`:
/// a proposal at `u` is accepted with probability `w(t0, u) / sup_bound`,
/// where `t0` is the last accepted arrival.
pub fn sample_latd<R: Rng>(model: &IntensityModel, rng: &mut R) -> Result<StepPath> {
    thin(model, rng, true)
}

fn thin<R: Rng>(model: &IntensityModel, rng: &mut R, track_last: bool) -> Result<StepPath> {
    let horizon = model.horizon();
    let bound = model.sup_bound();
    let mut jumps = Vec::new();
    if bound > 0.0 {
        let gap = Exp::new(bound).expect("bound is positive");
        let mut last = 0.0;
        let mut t = gap.sample(rng);
        while t <= horizon {
            let w = model.w_checked(if track_last { last } else { 0.0 }, t)?;
            if rng.random::<f64>() * bound < w {
                jumps.push(t);
                last = t;
            }
            t += gap.sample(rng);
        }
    }
    Ok(StepPath::from_sorted(horizon, jumps))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for path `path` of replication `replication`.
///
/// The ChaCha8 key is `splitmix64(master_seed ^ splitmix64(replication))`
/// and the stream id is the path index.
pub fn substream_rng(master_seed: u64, path: u64, replication: u64) -> ChaCha8Rng {
    let key = splitmix64(master_seed ^ splitmix64(replication));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(path);
    rng
}

/// Replication id used by studies for replication `j` at sample count `n`.
pub fn study_replication_id(n: u64, j: u64) -> u64 {
    (n << 32) | (j & 0xffff_ffff)
}

/// `n_paths` independent paths, path `i` from `substream_rng(seed, i, 0)`.
pub fn sample_batch(spec: &ProcessSpec, n_paths: usize, master_seed: u64) -> Result<SampleBatch> {
    sample_batch_replication(&spec.build()?, n_paths, master_seed, 0)
}

/// Like [`sample_batch`] for a given replication id. Paths are generated in
/// parallel on the current rayon pool and merged by index.
pub fn sample_batch_replication(
    process: &Process,
    n_paths: usize,
    master_seed: u64,
    replication: u64,
) -> Result<SampleBatch> {
    if n_paths == 0 {
        return Err(Error::EmptyBatch);
    }
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| process.sample(&mut substream_rng(master_seed, i, replication)))
        .collect::<Result<Vec<_>>>()?;
    SampleBatch::new(
        paths,
        SeedRecord {
            master_seed,
            replication,
        },
    )
}

/// Sequential variant of [`sample_batch_replication`], for callers that
/// already parallelize at a coarser level.
pub fn sample_batch_sequential(
    process: &Process,
    n_paths: usize,
    master_seed: u64,
    replication: u64,
) -> Result<SampleBatch> {
    if n_paths == 0 {
        return Err(Error::EmptyBatch);
    }
    let paths = (0..n_paths as u64)
        .map(|i| process.sample(&mut substream_rng(master_seed, i, replication)))
        .collect::<Result<Vec<_>>>()?;
    SampleBatch::new(
        paths,
        SeedRecord {
            master_seed,
            replication,
        },
    )
}
