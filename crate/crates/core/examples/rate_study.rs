//! A small study of E[sup^4] against N with the bound alongside.

use ulln::simulator::ProcessSpec;
use ulln::study::{export_results, run_lln_study, StudyConfig};
use ulln::Result;

pub fn run_example() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("ulln-rate-study-{}", std::process::id()));
    let config = StudyConfig {
        process: ProcessSpec::PoissonConst {
            horizon: 1.0,
            rate: 1.0,
        },
        mean: None,
        q_list: vec![4.0],
        n_grid: vec![8, 32, 128],
        replications: 50,
        master_seed: 2024,
        output_dir: dir.clone(),
        workers: None,
        hypotheses: None,
    };
    let result = run_lln_study(&config)?;
    for row in &result.rows {
        println!(
            "N={:<4} E[sup^4]={:.4e} +- {:.1e} bound={:.4e}",
            row.n,
            row.mean_supq,
            3.0 * row.stderr,
            row.bound_rhs.unwrap_or(f64::NAN)
        );
    }
    if let Some(fit) = result.fits[0].fit {
        println!("fitted slope {:.3} (bound exponent -4/3)", fit.slope);
    }
    export_results(&result, &dir)?;
    println!("files in {}", dir.display());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
