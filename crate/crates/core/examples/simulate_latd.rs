//! Paths of a process whose intensity depends on the time of its last
//! arrival, sampled by thinning.

use ulln::simulator::{sample_batch, IntensitySpec, ProcessSpec};
use ulln::Result;

pub fn run_example() -> Result<()> {
    let spec = ProcessSpec::Latd {
        horizon: 1.0,
        w: IntensitySpec::LastArrivalLinear { a: 1.0, b: 1.0 },
        sup_bound: None,
    };
    let batch = sample_batch(&spec, 2000, 42)?;
    for (i, p) in batch.paths().iter().take(3).enumerate() {
        println!("path {i}: {:?}", p.jumps());
    }
    let mean_count =
        batch.paths().iter().map(|p| p.total() as f64).sum::<f64>() / batch.len() as f64;
    println!(
        "average count on [0, 1] over {} paths: {mean_count:.4}",
        batch.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
