//! Gate sets for a few means, and the bound they give on the sup deviation
//! of a sampled path.

use ulln::gate_net::{build_gate_set, gate_sup_bound};
use ulln::simulator::{sample_poisson_const, substream_rng};
use ulln::{MeanModel, Result, TriangleFn};

pub fn run_example() -> Result<()> {
    let means = [
        MeanModel::linear(1.0, 2.0)?,
        MeanModel::power(1.0, 1.0, 0.5)?,
        MeanModel::power(1.0, 1.0, 2.0)?,
    ];
    let path = sample_poisson_const(1.0, 2.0, &mut substream_rng(7, 0, 0));
    for m in &means {
        for n in [2, 5, 10] {
            let g = build_gate_set(m, n, None)?;
            let bound = gate_sup_bound(&g, &path, m)?;
            println!(
                "{:<24} n={n:<3} K={:<4} size bound={:<8.1} y(0,T)={} sup bound={bound:.4}",
                m.label(),
                g.size_k,
                g.size_bound(),
                path.value(ulln::DeltaPoint { t1: 0.0, t2: 1.0 }),
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
