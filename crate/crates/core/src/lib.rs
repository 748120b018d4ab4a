//! Uniform laws of large numbers for processes with monotone increments.
//!
//! The crate samples counting processes, measures the supremum over the
//! triangle `0 <= t1 <= t2 <= T` of the deviation between the averaged
//! increments and their mean, builds the finite gate sets that reduce that
//! supremum to a maximum over finitely many points, and evaluates the
//! explicit moment bounds that control it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod deviation;
pub mod domain;
pub mod error;
pub mod gate_net;
pub mod io;
pub mod mean;
pub mod quadrature;
pub mod series;
pub mod simulator;
pub mod study;

pub use deviation::{sup_deviation_exact, sup_deviation_grid, DeviationResult, Method};
pub use domain::{DeltaPoint, SampleBatch, SeedRecord, StepPath, TriangleFn};
pub use error::{Error, Result};
pub use gate_net::{build_gate_set, gate_sup_bound, GateSet};
pub use mean::{MeanModel, MeanSpec};
pub use simulator::{IntensityModel, IntensitySpec, ProcessSpec};
pub use study::{run_lln_study, StudyConfig, StudyResult};
