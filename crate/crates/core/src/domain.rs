//! Points of the triangle, counting paths and their empirical averages.
//!
//! A [`StepPath`] is a non-decreasing right-continuous counting path
//! `Z(t) = #{jumps <= t}` on `[0, T]`. Its two-parameter increment
//! `Z(t2) - Z(t1)` counts the jumps in the half-open interval `(t1, t2]`.
//! Time comparisons at this layer are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `(t1, t2)` with `0 <= t1 <= t2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub t1: f64,
    pub t2: f64,
}

impl DeltaPoint {
    /// Validates `0 <= t1 <= t2 <= horizon`.
    pub fn new(t1: f64, t2: f64, horizon: f64) -> Result<Self> {
        let p = DeltaPoint { t1, t2 };
        p.check(horizon)?;
        Ok(p)
    }

    pub fn check(&self, horizon: f64) -> Result<()> {
        let ok = self.t1.is_finite()
            && self.t2.is_finite()
            && 0.0 <= self.t1
            && self.t1 <= self.t2
            && self.t2 <= horizon;
        if ok {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                t1: self.t1,
                t2: self.t2,
                horizon,
            })
        }
    }

    pub fn diagonal(t: f64) -> Self {
        DeltaPoint { t1: t, t2: t }
    }

    /// Lexicographic order on `(t1, t2)`, used for deterministic tie-breaks.
    pub fn lex_cmp(&self, other: &DeltaPoint) -> std::cmp::Ordering {
        self.t1
            .total_cmp(&other.t1)
            .then(self.t2.total_cmp(&other.t2))
    }
}

/// A real-valued function on the triangle `{0 <= t1 <= t2 <= T}`.
pub trait TriangleFn {
    fn horizon(&self) -> f64;

    /// Value at `p`; callers guarantee `p` lies in the triangle.
    fn value(&self, p: DeltaPoint) -> f64;
}

impl<T: TriangleFn + ?Sized> TriangleFn for &T {
    fn horizon(&self) -> f64 {
        (**self).horizon()
    }

    fn value(&self, p: DeltaPoint) -> f64 {
        (**self).value(p)
    }
}

/// Adapts a closure into a [`TriangleFn`].
pub struct FnOnTriangle<F> {
    horizon: f64,
    f: F,
}

impl<F: Fn(f64, f64) -> f64> FnOnTriangle<F> {
    pub fn new(horizon: f64, f: F) -> Self {
        FnOnTriangle { horizon, f }
    }
}

impl<F: Fn(f64, f64) -> f64> TriangleFn for FnOnTriangle<F> {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, p: DeltaPoint) -> f64 {
        (self.f)(p.t1, p.t2)
    }
}

pub(crate) fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(Error::NonpositiveHorizon(horizon))
    }
}

/// Counting path on `[0, T]` stored as sorted jump times in `(0, T]`.
/// Repeated times are simultaneous unit jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPath {
    horizon: f64,
    jumps: Vec<f64>,
}

impl StepPath {
    pub fn new(horizon: f64, mut jumps: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if let Some(&bad) = jumps.iter().find(|&&u| !(u > 0.0 && u <= horizon)) {
            return Err(Error::JumpOutOfRange { time: bad, horizon });
        }
        jumps.sort_by(f64::total_cmp);
        Ok(StepPath { horizon, jumps })
    }

    pub fn zero(horizon: f64) -> Result<Self> {
        Self::new(horizon, Vec::new())
    }

    /// Jumps produced in increasing order by a sampler.
    pub(crate) fn from_sorted(horizon: f64, jumps: Vec<f64>) -> Self {
        debug_assert!(jumps.windows(2).all(|w| w[0] <= w[1]));
        StepPath { horizon, jumps }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn total(&self) -> usize {
        self.jumps.len()
    }

    /// `Z(t) = #{u <= t}`.
    pub fn count_upto(&self, t: f64) -> usize {
        self.jumps.partition_point(|&u| u <= t)
    }

    /// Number of jumps in `(t1, t2]`.
    pub fn increment(&self, p: DeltaPoint) -> Result<usize> {
        p.check(self.horizon)?;
        Ok(self.count_upto(p.t2) - self.count_upto(p.t1))
    }

    /// Every jump repeated `times` times; scales all increments by `times`.
    pub fn with_multiplicity(&self, times: usize) -> StepPath {
        let jumps = self
            .jumps
            .iter()
            .flat_map(|&u| std::iter::repeat_n(u, times))
            .collect();
        StepPath::from_sorted(self.horizon, jumps)
    }
}

impl TriangleFn for StepPath {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, p: DeltaPoint) -> f64 {
        (self.count_upto(p.t2) - self.count_upto(p.t1)) as f64
    }
}

/// Where the paths of a batch came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SeedRecord {
    pub master_seed: u64,
    /// Path `i` used substream `(master_seed, i, replication)`.
    pub replication: u64,
}

/// `N >= 1` paths sharing a horizon; evaluates to their arithmetic average.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    horizon: f64,
    paths: Vec<StepPath>,
    seed: SeedRecord,
}

impl SampleBatch {
    pub fn new(paths: Vec<StepPath>, seed: SeedRecord) -> Result<Self> {
        let first = paths.first().ok_or(Error::EmptyBatch)?;
        let horizon = first.horizon();
        if let Some(p) = paths.iter().find(|p| p.horizon() != horizon) {
            return Err(Error::HorizonMismatch {
                left: horizon,
                right: p.horizon(),
            });
        }
        Ok(SampleBatch {
            horizon,
            paths,
            seed,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn paths(&self) -> &[StepPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn seed(&self) -> SeedRecord {
        self.seed
    }

    /// `(1/N) * sum_i increment(path_i, p)`.
    pub fn average_increment(&self, p: DeltaPoint) -> Result<f64> {
        p.check(self.horizon)?;
        Ok(self.value(p))
    }

    /// All jump times of all paths, sorted.
    pub fn pooled_jumps(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .paths
            .iter()
            .flat_map(|p| p.jumps().iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all
    }
}

impl TriangleFn for SampleBatch {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, p: DeltaPoint) -> f64 {
        let total: usize = self.paths.iter().map(|path| path.value(p) as usize).sum();
        total as f64 / self.paths.len() as f64
    }
}
