use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use ulln::bounds::{self, BoundParams};
use ulln::io::{
    parse_inline_or_file, read_batch, read_json, to_json_pretty, write_batch, write_json,
};
use ulln::series::{latd_mean_series, latd_normalization_residual, DEFAULT_SERIES_TOL};
use ulln::simulator::{sample_batch, IntensityModel, Process};
use ulln::study::{export_results, run_lln_study, write_plot_svg};
use ulln::{
    build_gate_set, sup_deviation_exact, sup_deviation_grid, Error, MeanSpec, ProcessSpec, Result,
    StudyConfig,
};

#[derive(Parser)]
#[command(
    name = "ulln",
    version,
    about = "Uniform deviation of averaged counting processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the gate set of a mean and write it as JSON.
    Gates {
        /// Mean spec, inline JSON or a file.
        #[arg(long)]
        mean: String,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a batch of paths and write it as a batch file.
    Simulate {
        /// Process spec, inline JSON or a file.
        #[arg(long)]
        spec: String,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sup deviation of a batch file from a mean.
    Deviation {
        #[arg(long)]
        batch: PathBuf,
        #[arg(long)]
        mean: String,
        /// Use the brute-force grid with this many nodes instead of the
        /// exact cell sweep.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Constants and right-hand sides of the moment bounds.
    Bounds {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        r: f64,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long = "M")]
        moment_scale: f64,
        #[arg(long)]
        wbar: f64,
        #[arg(long = "N")]
        n: u64,
        /// Target rate; with `--p` adds the rate-form bound.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Run a Monte Carlo study from a config file.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Also write plot.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Series mean of a last-arrival dependent process over (s, t].
    OracleMean {
        /// Process spec, inline JSON or a file.
        #[arg(long)]
        spec: String,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 20)]
        kmax: usize,
        #[arg(long, default_value_t = DEFAULT_SERIES_TOL)]
        tol: f64,
    },
}

#[derive(Serialize)]
struct BoundsReport {
    cq: f64,
    n0: u64,
    exponent: f64,
    condition: bool,
    rhs_main: Option<f64>,
    rhs_main2: Option<f64>,
}

#[derive(Serialize)]
struct OracleReport {
    value: f64,
    tail_bound: f64,
    quadrature_error: f64,
    normalization_residual: f64,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", to_json_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gates { mean, n, tol, out } => {
            let model = parse_inline_or_file::<MeanSpec>(&mean)?.build()?;
            let gates = build_gate_set(&model, n, tol)?;
            write_json(&out, &gates)?;
            eprintln!("wrote {} gates to {}", gates.size_k, out.display());
        }
        Command::Simulate { spec, n, seed, out } => {
            let spec: ProcessSpec = parse_inline_or_file(&spec)?;
            let batch = sample_batch(&spec, n, seed)?;
            write_batch(&out, &batch)?;
            eprintln!("wrote {} paths to {}", batch.len(), out.display());
        }
        Command::Deviation { batch, mean, grid } => {
            let batch = read_batch(&batch)?;
            let model = parse_inline_or_file::<MeanSpec>(&mean)?.build()?;
            let result = match grid {
                Some(g) => sup_deviation_grid(&batch, &model, g)?,
                None => sup_deviation_exact(&batch, &model)?,
            };
            print_json(&result)?;
        }
        Command::Bounds {
            q,
            r,
            horizon,
            moment_scale,
            wbar,
            n,
            gamma,
            p,
        } => {
            let params = BoundParams {
                q,
                r,
                gamma,
                p,
                horizon,
                moment_scale,
                wbar,
                n,
            };
            let rhs_main = match bounds::main_bound_rhs(&params) {
                Ok(v) => Some(v),
                Err(Error::BelowN0 { .. }) => None,
                Err(e) => return Err(e),
            };
            let rhs_main2 = match (gamma, p) {
                (Some(_), Some(_)) => match bounds::main2_bound_rhs(&params) {
                    Ok(v) => Some(v),
                    Err(Error::BelowN0 { .. }) => None,
                    Err(e) => return Err(e),
                },
                _ => None,
            };
            print_json(&BoundsReport {
                cq: bounds::cq_constant(q)?,
                n0: bounds::n0_threshold(q, r)?,
                exponent: bounds::rate_exponent(q, r),
                condition: bounds::complete_lln_condition(q, r),
                rhs_main,
                rhs_main2,
            })?;
        }
        Command::Study {
            config,
            workers,
            plot,
        } => {
            let mut cfg: StudyConfig = read_json(&config)?;
            if let Ok(seed) = std::env::var("ULLN_SEED") {
                cfg.master_seed = seed.trim().parse().map_err(|_| {
                    Error::InvalidConfig(format!("ULLN_SEED is not an integer: {seed:?}"))
                })?;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            let result = run_lln_study(&cfg)?;
            export_results(&result, &cfg.output_dir)?;
            if plot {
                write_plot_svg(&result, &cfg.output_dir.join("plot.svg"))?;
            }
            for row in &result.rows {
                let bound = row
                    .bound_rhs
                    .map_or("-".to_string(), |b| format!("{b:.4e}"));
                println!(
                    "q={} N={} E[sup^q]={:.4e} se={:.2e} bound={}",
                    row.q, row.n, row.mean_supq, row.stderr, bound
                );
            }
            for f in &result.fits {
                if let Some(fit) = f.fit {
                    println!("q={} slope={:.4} r2={:.4}", f.q, fit.slope, fit.r_squared);
                }
            }
            eprintln!("results in {}", cfg.output_dir.display());
        }
        Command::OracleMean {
            spec,
            s,
            t,
            kmax,
            tol,
        } => {
            let spec: ProcessSpec = parse_inline_or_file(&spec)?;
            let model = match spec.build()? {
                Process::PoissonConst { horizon, rate } => IntensityModel::constant(horizon, rate)?,
                Process::PoissonRateFn(m) | Process::Latd(m) => m,
            };
            let v = latd_mean_series(&model, s, t, kmax, tol)?;
            let res = latd_normalization_residual(&model, t, kmax, tol)?;
            print_json(&OracleReport {
                value: v.value,
                tail_bound: v.tail_bound,
                quadrature_error: v.quadrature_error,
                normalization_residual: res.residual,
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric_contract() {
                ExitCode::from(3)
            } else if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
