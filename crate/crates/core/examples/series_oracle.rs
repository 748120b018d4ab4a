//! Series mean of a last-arrival dependent process against a Monte Carlo
//! average.

use ulln::series::{latd_mean_series, latd_normalization_residual};
use ulln::simulator::{sample_batch, IntensityModel, IntensitySpec, ProcessSpec};
use ulln::Result;

pub fn run_example() -> Result<()> {
    let w = IntensitySpec::LastArrivalLinear { a: 1.0, b: 1.0 };
    let model = IntensityModel::builtin(1.0, w.clone(), None)?;
    let series = latd_mean_series(&model, 0.0, 1.0, 20, 1e-8)?;
    let residual = latd_normalization_residual(&model, 1.0, 20, 1e-8)?;
    println!(
        "series E[Z(1)] = {:.8} (tail <= {:.1e}, quadrature ~ {:.1e}), residual {:.1e}",
        series.value, series.tail_bound, series.quadrature_error, residual.residual
    );
    let spec = ProcessSpec::Latd {
        horizon: 1.0,
        w,
        sup_bound: None,
    };
    let batch = sample_batch(&spec, 20_000, 5)?;
    let counts: Vec<f64> = batch.paths().iter().map(|p| p.total() as f64).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    println!(
        "monte carlo   E[Z(1)] = {mean:.4} +- {:.4}",
        3.0 * sd / n.sqrt()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
