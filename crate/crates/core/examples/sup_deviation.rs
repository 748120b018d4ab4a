//! Exact sup deviation of a Poisson batch from its mean, next to the grid
//! lower bound.

use ulln::simulator::{sample_batch, ProcessSpec};
use ulln::{sup_deviation_exact, sup_deviation_grid, MeanModel, Result};

pub fn run_example() -> Result<()> {
    let spec = ProcessSpec::PoissonConst {
        horizon: 1.0,
        rate: 1.0,
    };
    let mean = MeanModel::linear(1.0, 1.0)?;
    for n in [10, 100, 1000] {
        let batch = sample_batch(&spec, n, 1)?;
        let exact = sup_deviation_exact(&batch, &mean)?;
        let grid = sup_deviation_grid(&batch, &mean, 200)?;
        println!(
            "N={n:<5} exact={:.5} at ({:.4}, {:.4}) grid={:.5}",
            exact.value, exact.witness.t1, exact.witness.t2, grid.value
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
