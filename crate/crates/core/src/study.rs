//! Monte Carlo studies of `E[sup |Y_N - m|^q]` over a grid of sample
//! counts, compared against the explicit moment bound.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{self, BoundParams, Hypotheses};
use crate::deviation::sup_deviation_exact;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, to_json_compact, write_json};
use crate::mean::{MeanModel, MeanSpec};
use crate::series::{DEFAULT_GRID_INTERVALS, DEFAULT_K_MAX, DEFAULT_SERIES_TOL};
use crate::simulator::{
    sample_batch_sequential, study_replication_id, IntensitySpec, Process, ProcessSpec,
};

pub const PARTIAL_FILE: &str = "partial.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub process: ProcessSpec,
    /// Defaults to the closed-form mean of `process`, or its tabulated
    /// series for last-arrival dependent processes.
    #[serde(default)]
    pub mean: Option<MeanSpec>,
    pub q_list: Vec<f64>,
    pub n_grid: Vec<u64>,
    pub replications: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses the global pool. Does not affect output.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Overrides the `(r, M, wbar)` derived from `process` for every `q`.
    #[serde(default)]
    pub hypotheses: Option<Hypotheses>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_list.is_empty() {
            return Err(Error::InvalidConfig("q_list must be nonempty".into()));
        }
        if let Some(q) = self.q_list.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
            return Err(Error::InvalidConfig(format!(
                "moment orders must be positive, got {q}"
            )));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::InvalidConfig(
                "n_grid must be nonempty with all N >= 1".into(),
            ));
        }
        let mut sorted = self.n_grid.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.n_grid.len() {
            return Err(Error::InvalidConfig("n_grid has repeated entries".into()));
        }
        if self.n_grid.iter().any(|&n| n >= 1 << 32) {
            return Err(Error::InvalidConfig("N must be below 2^32".into()));
        }
        if self.replications < 2 {
            return Err(Error::InvalidConfig("replications must be >= 2".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        if let Some(mean) = &self.mean {
            if mean.horizon() != self.process.horizon() {
                return Err(Error::HorizonMismatch {
                    left: mean.horizon(),
                    right: self.process.horizon(),
                });
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of every field that affects results
    /// (all but `workers` and `output_dir`).
    pub fn hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        let obj = value
            .as_object_mut()
            .expect("config serializes to an object");
        obj.remove("workers");
        obj.remove("output_dir");
        let canonical = serde_json::to_string(&value)?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    pub fn mean_spec(&self) -> Result<MeanSpec> {
        match &self.mean {
            Some(m) => Ok(m.clone()),
            None => default_mean(&self.process),
        }
    }

    /// Hypothesis data used for the bound at moment order `q`.
    pub fn hypotheses_for(&self, q: f64) -> Result<Hypotheses> {
        if let Some(h) = self.hypotheses {
            return Ok(h);
        }
        let horizon = self.process.horizon();
        Ok(match &self.process {
            ProcessSpec::PoissonConst { rate, .. } => Hypotheses::poisson(rate * horizon, *rate, q),
            ProcessSpec::PoissonRateFn { rate, .. } => {
                let (_, sup) = rate.range_on_triangle(horizon);
                Hypotheses::poisson(rate.omega(0.0, horizon), sup, q)
            }
            ProcessSpec::Latd { .. } => {
                let Process::Latd(model) = self.process.build()? else {
                    unreachable!("latd spec builds a latd process")
                };
                Hypotheses::latd(model.sup_bound(), horizon, q)?
            }
        })
    }
}

/// Closed-form mean of a Poisson process, or the tabulated series mean of a
/// last-arrival dependent one.
pub fn default_mean(process: &ProcessSpec) -> Result<MeanSpec> {
    let horizon = process.horizon();
    Ok(match process {
        ProcessSpec::PoissonConst { rate, .. } if *rate == 0.0 => MeanSpec::Zero { horizon },
        ProcessSpec::PoissonConst { rate, .. } => MeanSpec::Linear {
            horizon,
            rate: *rate,
        },
        ProcessSpec::PoissonRateFn { rate, .. } => match *rate {
            IntensitySpec::Constant { c } => MeanSpec::Linear { horizon, rate: c },
            IntensitySpec::TimeRamp { a, b } => MeanSpec::Ramp { horizon, a, b },
            IntensitySpec::LastArrivalLinear { a, .. } => MeanSpec::Linear { horizon, rate: a },
            IntensitySpec::Product { a, c, .. } => MeanSpec::Ramp {
                horizon,
                a,
                b: a * c,
            },
        },
        ProcessSpec::Latd { w, sup_bound, .. } => MeanSpec::LatdSeries {
            horizon,
            w: w.clone(),
            sup_bound: *sup_bound,
            k_max: DEFAULT_K_MAX,
            intervals: DEFAULT_GRID_INTERVALS,
        },
    })
}

/// Aggregates for one `(q, N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub q: f64,
    #[serde(rename = "N")]
    pub n: u64,
    /// Replication mean of `sup^q`.
    pub mean_supq: f64,
    /// Standard error of `mean_supq`.
    pub stderr: f64,
    /// Right-hand side of the moment bound, present when `N >= N_0`.
    pub bound_rhs: Option<f64>,
    /// Absent for `q <= 2`, where the bound does not apply.
    pub n0: Option<u64>,
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Squared correlation of the log-log points.
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFit {
    pub q: f64,
    /// `None` when fewer than three estimates are positive.
    pub fit: Option<RateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QHypotheses {
    pub q: f64,
    #[serde(flatten)]
    pub hypotheses: Hypotheses,
}

/// Sup deviations of every replication at one `N`, in replication order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSups {
    #[serde(rename = "N")]
    pub n: u64,
    pub sups: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config_hash: String,
    pub master_seed: u64,
    pub replications: usize,
    pub mean: String,
    /// Error budget of the mean itself (nonzero for tabulated series).
    pub mean_tolerance: f64,
    pub hypotheses: Vec<QHypotheses>,
    /// Sorted by `(q, N)`.
    pub rows: Vec<SummaryRow>,
    pub fits: Vec<QFit>,
    /// Sorted by `N`.
    pub raw: Vec<RawSups>,
}

/// Ordinary least squares of `ln y` on `ln N`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints {
            needed: 3,
            got: points.len(),
        });
    }
    if let Some(&(_, y)) = points.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::NonpositiveEstimate(y));
    }
    if let Some(&(x, _)) = points.iter().find(|(x, _)| !(*x > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "sample counts must be positive, got {x}"
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(x, _)| x.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "all sample counts are equal".into(),
        ));
    }
    let slope = sxy / sxx;
    // a constant y lies exactly on the fitted line
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct PartialLine {
    config_hash: String,
    #[serde(rename = "N")]
    n: u64,
    sups: Vec<f64>,
}

/// Completed `N` values from a previous run with the same config.
fn load_partial(path: &Path, hash: &str) -> Result<BTreeMap<u64, Vec<f64>>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    for line in BufReader::new(fs::File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn final line from an interrupted run is dropped
        let Ok(entry) = serde_json::from_str::<PartialLine>(&line) else {
            continue;
        };
        if entry.config_hash != hash {
            return Err(Error::ConfigMismatch {
                path: path.to_path_buf(),
                found: entry.config_hash,
                expected: hash.to_string(),
            });
        }
        done.insert(entry.n, entry.sups);
    }
    Ok(done)
}

fn sups_at(
    process: &Process,
    mean: &MeanModel,
    n: u64,
    replications: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|j| {
            let batch =
                sample_batch_sequential(process, n as usize, seed, study_replication_id(n, j))?;
            Ok(sup_deviation_exact(&batch, mean)?.value)
        })
        .collect()
}

/// Runs the study, flushing each completed `N` to `output_dir/partial.jsonl`
/// so that an interrupted run resumes where it stopped. Does not write the
/// final files; see [`export_results`].
pub fn run_lln_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(w) = config.workers {
            builder = builder.num_threads(w);
        }
        builder
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?
    };
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &StudyConfig) -> Result<StudyResult> {
    let hash = config.hash()?;
    let process = config.process.build()?;
    let mean_spec = config.mean_spec()?;
    let mean = mean_spec.build()?;
    let mean_tolerance = match mean_spec {
        MeanSpec::LatdSeries { .. } => DEFAULT_SERIES_TOL,
        _ => 0.0,
    };

    fs::create_dir_all(&config.output_dir)?;
    let partial_path = config.output_dir.join(PARTIAL_FILE);
    let mut done = load_partial(&partial_path, &hash)?;
    let mut n_sorted = config.n_grid.clone();
    n_sorted.sort_unstable();
    for &n in &n_sorted {
        if done.get(&n).is_some_and(|s| s.len() == config.replications) {
            continue;
        }
        let sups = sups_at(&process, &mean, n, config.replications, config.master_seed)?;
        let line = PartialLine {
            config_hash: hash.clone(),
            n,
            sups,
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&partial_path)?;
        writeln!(f, "{}", to_json_compact(&line)?)?;
        f.sync_data()?;
        done.insert(n, line.sups);
    }

    let raw: Vec<RawSups> = n_sorted
        .iter()
        .map(|&n| RawSups {
            n,
            sups: done.remove(&n).expect("every N computed"),
        })
        .collect();

    let mut q_sorted = config.q_list.clone();
    q_sorted.sort_by(f64::total_cmp);
    q_sorted.dedup();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut hypotheses = Vec::new();
    for &q in &q_sorted {
        let h = config.hypotheses_for(q)?;
        hypotheses.push(QHypotheses { q, hypotheses: h });
        let n0 = if q > 2.0 {
            Some(bounds::n0_threshold(q, h.r)?)
        } else {
            None
        };
        for entry in &raw {
            let (mean_supq, stderr) = mean_and_stderr(entry.sups.iter().map(|s| s.powf(q)));
            let bound_rhs = match n0 {
                Some(n0) if entry.n >= n0 => Some(bounds::main_bound_rhs(&BoundParams {
                    q,
                    r: h.r,
                    gamma: None,
                    p: None,
                    horizon: config.process.horizon(),
                    moment_scale: h.moment_scale,
                    wbar: h.wbar,
                    n: entry.n,
                })?),
                _ => None,
            };
            rows.push(SummaryRow {
                q,
                n: entry.n,
                mean_supq,
                stderr,
                bound_rhs,
                n0,
                exponent: n0.map(|_| bounds::rate_exponent(q, h.r)),
            });
        }
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.q == q)
            .map(|r| (r.n as f64, r.mean_supq))
            .collect();
        let fit = if points.len() >= 3 && points.iter().all(|p| p.1 > 0.0) {
            Some(fit_rate(&points)?)
        } else {
            None
        };
        fits.push(QFit { q, fit });
    }

    Ok(StudyResult {
        config_hash: hash,
        master_seed: config.master_seed,
        replications: config.replications,
        mean: mean.label().to_string(),
        mean_tolerance,
        hypotheses,
        rows,
        fits,
        raw,
    })
}

/// Sample mean and standard error (sample variance with `R - 1`).
fn mean_and_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let r = v.len() as f64;
    let mean = v.iter().sum::<f64>() / r;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

pub const RAW_HEADER: &str = "q,N,replication,sup_dev";
pub const SUMMARY_HEADER: &str = "q,N,mean_supq,stderr,bound_rhs,n0";

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `raw.csv`, `summary.csv` and `study.json` into `dir`.
pub fn export_results(result: &StudyResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut raw = String::from(RAW_HEADER);
    raw.push('\n');
    for h in &result.hypotheses {
        for entry in &result.raw {
            for (j, s) in entry.sups.iter().enumerate() {
                raw.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(h.q),
                    entry.n,
                    j,
                    fmt_f64(*s)
                ));
            }
        }
    }
    fs::write(dir.join("raw.csv"), raw)?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for row in &result.rows {
        summary.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(row.q),
            row.n,
            fmt_f64(row.mean_supq),
            fmt_f64(row.stderr),
            opt_f64(row.bound_rhs),
            row.n0.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    fs::write(dir.join("summary.csv"), summary)?;
    write_json(&dir.join("study.json"), result)
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub q: f64,
    pub n: u64,
    pub mean_supq: f64,
    pub stderr: f64,
    pub bound_rhs: Option<f64>,
    pub n0: Option<u64>,
}

impl From<&SummaryRow> for SummaryRecord {
    fn from(r: &SummaryRow) -> Self {
        SummaryRecord {
            q: r.q,
            n: r.n,
            mean_supq: r.mean_supq,
            stderr: r.stderr,
            bound_rhs: r.bound_rhs,
            n0: r.n0,
        }
    }
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(Error::Parse(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    let bad = |line: &str| Error::Parse(format!("{}: bad row {line:?}", path.display()));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(line));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(line));
            Ok(SummaryRecord {
                q: float(f[0])?,
                n: int(f[1])?,
                mean_supq: float(f[2])?,
                stderr: float(f[3])?,
                bound_rhs: if f[4].is_empty() {
                    None
                } else {
                    Some(float(f[4])?)
                },
                n0: if f[5].is_empty() {
                    None
                } else {
                    Some(int(f[5])?)
                },
            })
        })
        .collect()
}

/// Log-log plot of the estimates (points) and bounds (dashed) per `q`.
pub fn write_plot_svg(result: &StudyResult, path: &Path) -> Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const PAD: f64 = 50.0;
    let pts: Vec<(f64, f64)> = result
        .rows
        .iter()
        .flat_map(|r| {
            let mut v = vec![(r.n as f64, r.mean_supq)];
            v.extend(r.bound_rhs.map(|b| (r.n as f64, b)));
            v
        })
        .filter(|&(_, y)| y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if !pts.is_empty() {
        let (x0, x1) = span(pts.iter().map(|p| p.0));
        let (y0, y1) = span(pts.iter().map(|p| p.1));
        let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
        svg.push_str(&format!(
            "<text x=\"{PAD}\" y=\"{}\" font-size=\"12\">log10 N in [{x0:.2}, {x1:.2}], log10 value in [{y0:.2}, {y1:.2}]</text>\n",
            H - 15.0
        ));
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
        for (idx, h) in result.hypotheses.iter().enumerate() {
            let color = colors[idx % colors.len()];
            let rows: Vec<&SummaryRow> = result.rows.iter().filter(|r| r.q == h.q).collect();
            for r in rows.iter().filter(|r| r.mean_supq > 0.0) {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                    sx((r.n as f64).log10()),
                    sy(r.mean_supq.log10())
                ));
            }
            let line: Vec<String> = rows
                .iter()
                .filter_map(|r| r.bound_rhs.map(|b| (r.n, b)))
                .map(|(n, b)| format!("{:.2},{:.2}", sx((n as f64).log10()), sy(b.log10())))
                .collect();
            if line.len() > 1 {
                svg.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-dasharray=\"4 3\"/>\n",
                    line.join(" ")
                ));
            }
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">q = {}</text>\n",
                W - PAD - 60.0,
                PAD + 15.0 * idx as f64,
                h.q
            ));
        }
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

fn span(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}
