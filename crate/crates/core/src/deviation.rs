//! Supremum over the triangle of `|Y_N - m|` for an empirical average
//! `Y_N` of counting paths and a continuous monotone mean `m`.
//!
//! `Y_N` is constant on the cells `[b_j, b_{j+1}) x [b_k, b_{k+1})` of the
//! grid spanned by `0`, the pooled jump times and `T` (plus the line
//! `t2 = T`, which picks up jumps at `T`). On each cell `|c - m|` is
//! extremal at the corner maximizing `m`, `(b_j, b_{k+1})`, or the corner
//! minimizing it, `(b_{j+1}, b_k)`; diagonal cells are triangles whose
//! minimum is `0` on the diagonal. The supremum over the cell equals the
//! maximum over these closure corners because `m` is continuous.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DeltaPoint, SampleBatch};
use crate::error::{Error, Result};
use crate::mean::MeanModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationResult {
    pub value: f64,
    pub witness: DeltaPoint,
    /// The supremum is approached at `witness` from inside a cell rather
    /// than attained there.
    pub approached: bool,
    pub method: Method,
    pub cells_examined: u64,
}

/// Cell enumeration order; both give identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Evaluate `m` at both corners of every cell.
    Direct,
    /// Tabulate `m(b_j, .)` once per row and reuse it.
    RowSweep,
    /// `RowSweep` above [`ROW_SWEEP_THRESHOLD`] breakpoints, else `Direct`.
    Auto,
}

pub const ROW_SWEEP_THRESHOLD: usize = 5000;
const ROW_CHUNK: usize = 64;

struct RowContext<'a> {
    b: &'a [f64],
    prefix: &'a [u64],
    inv_n: f64,
}

impl RowContext<'_> {
    /// Best candidate of row `j` (t1 in `[b_j, b_{j+1})`), columns
    /// `k = j..=L` where `k = L` is the line `t2 = T`. `m_at(i, k)` returns
    /// `m(b_i, b_k)` for `i in {j, j + 1}`.
    fn scan(&self, j: usize, m_at: impl Fn(usize, usize) -> f64) -> Candidate {
        let b = self.b;
        let l = b.len() - 1;
        // diagonal triangle: Y = 0, m peaks at (b_j, b_{j+1})
        let mut best = Candidate {
            value: m_at(j, j + 1),
            witness: DeltaPoint {
                t1: b[j],
                t2: b[j + 1],
            },
            approached: true,
        };
        for k in (j + 1)..=l {
            let y = (self.prefix[k] - self.prefix[j]) as f64 * self.inv_n;
            let upper_idx = if k < l { k + 1 } else { l };
            let over = Candidate {
                value: (m_at(j, upper_idx) - y).abs(),
                witness: DeltaPoint {
                    t1: b[j],
                    t2: b[upper_idx],
                },
                approached: k < l,
            };
            let under = Candidate {
                value: (y - m_at(j + 1, k)).abs(),
                witness: DeltaPoint {
                    t1: b[j + 1],
                    t2: b[k],
                },
                approached: true,
            };
            best = best.better(over).better(under);
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    witness: DeltaPoint,
    approached: bool,
}

impl Candidate {
    fn better(self, other: Candidate) -> Candidate {
        match self.value.total_cmp(&other.value) {
            std::cmp::Ordering::Greater => self,
            std::cmp::Ordering::Less => other,
            std::cmp::Ordering::Equal => match other.witness.lex_cmp(&self.witness) {
                std::cmp::Ordering::Less => other,
                std::cmp::Ordering::Greater => self,
                std::cmp::Ordering::Equal if self.approached && !other.approached => other,
                std::cmp::Ordering::Equal => self,
            },
        }
    }
}

fn check_horizons(batch: &SampleBatch, model: &MeanModel) -> Result<()> {
    if batch.horizon() != model.horizon() {
        return Err(Error::HorizonMismatch {
            left: batch.horizon(),
            right: model.horizon(),
        });
    }
    Ok(())
}

/// Breakpoints `0 = b_0 < ... < b_L = T` and the pooled jump count at each.
fn breakpoints(batch: &SampleBatch) -> (Vec<f64>, Vec<u64>) {
    let horizon = batch.horizon();
    let mut points = vec![0.0];
    let mut counts = vec![0u64];
    for u in batch.pooled_jumps() {
        if *points.last().expect("nonempty") == u {
            *counts.last_mut().expect("nonempty") += 1;
        } else {
            points.push(u);
            counts.push(1);
        }
    }
    if *points.last().expect("nonempty") != horizon {
        points.push(horizon);
        counts.push(0);
    }
    (points, counts)
}

/// Exact `sup |Y_N - m|` over the triangle.
pub fn sup_deviation_exact(batch: &SampleBatch, model: &MeanModel) -> Result<DeviationResult> {
    sup_deviation_exact_with(batch, model, Strategy::Auto)
}

pub fn sup_deviation_exact_with(
    batch: &SampleBatch,
    model: &MeanModel,
    strategy: Strategy,
) -> Result<DeviationResult> {
    check_horizons(batch, model)?;
    let (b, counts) = breakpoints(batch);
    let l = b.len() - 1;
    let inv_n = 1.0 / batch.len() as f64;
    let mut prefix = Vec::with_capacity(b.len());
    let mut acc = 0u64;
    for c in &counts {
        acc += c;
        prefix.push(acc);
    }
    let strategy = match strategy {
        Strategy::Auto if b.len() > ROW_SWEEP_THRESHOLD => Strategy::RowSweep,
        Strategy::Auto => Strategy::Direct,
        s => s,
    };
    let ctx = RowContext {
        b: &b,
        prefix: &prefix,
        inv_n,
    };
    let best = match strategy {
        Strategy::RowSweep => {
            // rows in chunks; within a chunk m(b_{j+1}, .) of row j is
            // reused as m(b_j, .) of row j + 1
            let chunks: Vec<usize> = (0..l).step_by(ROW_CHUNK).collect();
            chunks
                .into_par_iter()
                .map(|start| {
                    let end = (start + ROW_CHUNK).min(l);
                    let tabulate = |i: usize| -> Vec<f64> {
                        b.iter()
                            .map(|&t2| if t2 >= b[i] { model.raw(b[i], t2) } else { 0.0 })
                            .collect()
                    };
                    let mut here = tabulate(start);
                    let mut best: Option<Candidate> = None;
                    for j in start..end {
                        let next = tabulate(j + 1);
                        let c = ctx.scan(j, |i, k| if i == j { here[k] } else { next[k] });
                        best = Some(best.map_or(c, |bst| bst.better(c)));
                        here = next;
                    }
                    best.expect("chunk has rows")
                })
                .reduce_with(Candidate::better)
        }
        _ => (0..l)
            .into_par_iter()
            .map(|j| ctx.scan(j, |i, k| model.raw(b[i], b[k])))
            .reduce_with(Candidate::better),
    }
    .expect("at least one row");
    let cells = (l as u64) * (l as u64 + 1) / 2 + l as u64;
    Ok(DeviationResult {
        value: best.value,
        witness: best.witness,
        approached: best.approached,
        method: Method::Exact,
        cells_examined: cells,
    })
}

/// Brute-force lower bound: `max |Y_N - m|` over all pairs of a uniform
/// grid with `grid_points` nodes, augmented with every pooled jump time and
/// its left neighbour in floating point.
pub fn sup_deviation_grid(
    batch: &SampleBatch,
    model: &MeanModel,
    grid_points: usize,
) -> Result<DeviationResult> {
    check_horizons(batch, model)?;
    if grid_points < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2 points, got {grid_points}"
        )));
    }
    let horizon = batch.horizon();
    let jumps = batch.pooled_jumps();
    let mut ts: Vec<f64> = (0..grid_points)
        .map(|i| horizon * i as f64 / (grid_points - 1) as f64)
        .collect();
    for &u in &jumps {
        ts.push(u);
        ts.push(u.next_down().max(0.0));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let counts: Vec<usize> = ts
        .iter()
        .map(|&t| jumps.partition_point(|&u| u <= t))
        .collect();
    let inv_n = 1.0 / batch.len() as f64;
    let best = (0..ts.len())
        .into_par_iter()
        .map(|i| {
            let mut best = Candidate {
                value: f64::NEG_INFINITY,
                witness: DeltaPoint::diagonal(ts[i]),
                approached: false,
            };
            for k in i..ts.len() {
                let y = (counts[k] - counts[i]) as f64 * inv_n;
                let c = Candidate {
                    value: (y - model.raw(ts[i], ts[k])).abs(),
                    witness: DeltaPoint {
                        t1: ts[i],
                        t2: ts[k],
                    },
                    approached: false,
                };
                best = best.better(c);
            }
            best
        })
        .reduce_with(Candidate::better)
        .expect("grid nonempty");
    let n = ts.len() as u64;
    Ok(DeviationResult {
        value: best.value,
        witness: best.witness,
        approached: false,
        method: Method::Grid,
        cells_examined: n * (n + 1) / 2,
    })
}
