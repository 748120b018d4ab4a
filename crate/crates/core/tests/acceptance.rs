//! Acceptance checks. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;

use ulln::bounds::{self, poisson_central_abs_moment};
use ulln::deviation::{sup_deviation_exact, sup_deviation_grid};
use ulln::gate_net::{build_gate_set, gate_sup_bound, verify_gate_size};
use ulln::series::{latd_mean_series, latd_normalization_residual};
use ulln::simulator::{
    sample_batch, sample_latd, sample_poisson_const, substream_rng, IntensityModel, IntensitySpec,
    ProcessSpec,
};
use ulln::study::{run_lln_study, StudyConfig};
use ulln::{MeanModel, SampleBatch, SeedRecord, StepPath};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

/// Kolmogorov-Smirnov critical value factor at level 0.001.
const KS_0001: f64 = 1.9495;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_threaded() -> bool {
    std::thread::available_parallelism().map_or(1, |n| n.get()) < 8
}

fn mean_families() -> Vec<MeanModel> {
    let mut v: Vec<MeanModel> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&l| MeanModel::linear(1.0, l).unwrap())
        .collect();
    v.extend(
        [0.5, 1.0, 2.0]
            .iter()
            .map(|&b| MeanModel::power(1.0, 1.0, b).unwrap()),
    );
    v
}

fn random_path(horizon: f64, rng: &mut ChaCha8Rng) -> StepPath {
    let k = rng.random_range(0..=20);
    let jumps = (0..k)
        .map(|_| horizon * (1.0 - rng.random::<f64>()))
        .collect();
    StepPath::new(horizon, jumps).unwrap()
}

fn c1_gate_size() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for m in mean_families() {
        for n in 1..=50 {
            let g = build_gate_set(&m, n, None).map_err(|e| e.to_string())?;
            ensure(verify_gate_size(&g, &m), || {
                format!("{} n={n}: K={} > {}", m.label(), g.size_k, g.size_bound())
            })?;
            worst = worst.min(g.size_bound() - g.size_k as f64);
            checked += 1;
        }
    }
    Ok(format!("{checked} gate sets, smallest margin {worst:.1}"))
}

fn c2_gate_inequality() -> Outcome {
    let means = [
        MeanModel::linear(1.0, 1.0).unwrap(),
        MeanModel::power(1.0, 1.0, 0.5).unwrap(),
        MeanModel::power(1.0, 1.0, 2.0).unwrap(),
    ];
    let gate_sets: Vec<_> = means
        .iter()
        .flat_map(|m| [2, 5, 10].map(|n| (m, build_gate_set(m, n, None).unwrap())))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min_margin = f64::INFINITY;
    for i in 0..100 {
        let path = random_path(1.0, &mut rng);
        let batch = SampleBatch::new(vec![path], SeedRecord::default()).unwrap();
        for (m, g) in &gate_sets {
            let sup = sup_deviation_grid(&batch, m, 1000).unwrap().value;
            let bound = gate_sup_bound(g, &batch, m).unwrap();
            ensure(sup <= bound, || {
                format!(
                    "path {i}, {} n={}: grid sup {sup} > bound {bound}",
                    m.label(),
                    g.n
                )
            })?;
            min_margin = min_margin.min(bound - sup);
        }
    }
    Ok(format!("900 comparisons, smallest margin {min_margin:.3e}"))
}

fn c3_oracle_equivalence() -> Outcome {
    let means = mean_families();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = 500;
    let mut max_gap: f64 = 0.0;
    for i in 0..100 {
        let m = &means[rng.random_range(0..means.len())];
        let n = rng.random_range(1..=30);
        let rate = m.top_value() * rng.random_range(0.5..1.5);
        let paths = (0..n)
            .map(|_| sample_poisson_const(1.0, rate, &mut rng))
            .collect();
        let batch = SampleBatch::new(paths, SeedRecord::default()).unwrap();
        let exact = sup_deviation_exact(&batch, m).unwrap().value;
        let approx = sup_deviation_grid(&batch, m, grid).unwrap().value;
        // Hölder modulus of the mean over one grid step in each coordinate
        let slack = 2.0 * m.holder_c() * (1.0 / (grid - 1) as f64).powf(m.holder_r());
        let gap = exact - approx;
        ensure(gap >= 0.0 && gap <= slack, || {
            format!(
                "pair {i} ({}): exact {exact}, grid {approx}, slack {slack}",
                m.label()
            )
        })?;
        max_gap = max_gap.max(gap);
    }
    Ok(format!("100 pairs, largest exact - grid = {max_gap:.3e}"))
}

fn c4_domination() -> Outcome {
    // E[Z(1)^4] for Poisson(1) by Monte Carlo against the Bell number 15
    let draws = 1_000_000usize;
    let pois: Poisson<f64> = Poisson::new(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let fourth: Vec<f64> = (0..draws)
        .map(|_| {
            let z: f64 = pois.sample(&mut rng);
            z.powi(4)
        })
        .collect();
    let (mc, se) = mean_se(&fourth);
    ensure((mc - 15.0).abs() <= 3.0 * se, || {
        format!("Monte Carlo E[Z^4] = {mc} +- {} misses 15", 3.0 * se)
    })?;
    ensure(bounds::poisson_raw_moment(1.0, 4.0) == 15.0, || {
        "closed form != 15".into()
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = StudyConfig {
        process: ProcessSpec::PoissonConst {
            horizon: 1.0,
            rate: 1.0,
        },
        mean: None,
        q_list: vec![4.0],
        n_grid: vec![8, 16, 32, 64, 128, 256, 512, 1024],
        replications: 200,
        master_seed: 20240601,
        output_dir: dir.path().to_path_buf(),
        workers: None,
        hypotheses: None,
    };
    let result = run_lln_study(&cfg).map_err(|e| e.to_string())?;
    let h = result.hypotheses[0].hypotheses;
    ensure((h.moment_scale - 15f64.powf(0.25)).abs() < 1e-14, || {
        format!("M = {}", h.moment_scale)
    })?;
    let mut worst_ratio: f64 = 0.0;
    for row in &result.rows {
        ensure(row.n0 == Some(8), || format!("N_0 = {:?}", row.n0))?;
        let bound = row
            .bound_rhs
            .ok_or_else(|| format!("no bound at N={}", row.n))?;
        let upper = row.mean_supq + 3.0 * row.stderr;
        ensure(upper < bound, || {
            format!("N={}: estimate + 3 SE = {upper} >= bound {bound}", row.n)
        })?;
        worst_ratio = worst_ratio.max(upper / bound);
    }
    let fit = result.fits[0].fit.ok_or("no rate fit")?;
    ensure(fit.slope <= -4.0 / 3.0, || {
        format!("fitted slope {} > -4/3", fit.slope)
    })?;
    Ok(format!(
        "E[Z^4] MC {mc:.3}; max (estimate + 3 SE) / bound = {worst_ratio:.2e}; slope {:.3} (r2 {:.3})",
        fit.slope, fit.r_squared
    ))
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn ks_exponential(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn c5_latd_reduction() -> Outcome {
    let n = 100_000u64;
    // long horizon so that the first arrival is essentially never censored
    let long = IntensityModel::constant(30.0, 1.0).map_err(|e| e.to_string())?;
    let mut firsts = Vec::with_capacity(n as usize);
    for i in 0..n {
        let p = sample_latd(&long, &mut substream_rng(5, i, 0)).map_err(|e| e.to_string())?;
        let first = p
            .jumps()
            .first()
            .copied()
            .ok_or("path without arrivals on [0, 30]")?;
        firsts.push(first);
    }
    let d = ks_exponential(&mut firsts, 1.0);
    let crit = KS_0001 / (n as f64).sqrt();
    ensure(d < crit, || format!("KS distance {d} >= {crit}"))?;

    let unit = IntensityModel::constant(1.0, 1.0).map_err(|e| e.to_string())?;
    let counts: Vec<f64> = (0..n)
        .map(|i| sample_latd(&unit, &mut substream_rng(55, i, 0)).map(|p| p.total() as f64))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (m, se) = mean_se(&counts);
    ensure((m - 1.0).abs() <= 3.0 * se, || {
        format!("mean count {m} +- {}", 3.0 * se)
    })?;
    Ok(format!(
        "KS {d:.5} < {crit:.5}; mean count {m:.4} (3 SE {:.4})",
        3.0 * se
    ))
}

fn c6_series() -> Outcome {
    let unit = IntensityModel::constant(1.0, 1.0).map_err(|e| e.to_string())?;
    let mut worst_linear: f64 = 0.0;
    for (s, t) in [(0.0, 1.0), (0.25, 0.75), (0.1, 0.3), (0.0, 0.5), (0.9, 1.0)] {
        let v = latd_mean_series(&unit, s, t, 20, 1e-8).map_err(|e| e.to_string())?;
        worst_linear = worst_linear.max((v.value - (t - s)).abs());
    }
    ensure(worst_linear <= 1e-8, || {
        format!("|series - (t - s)| = {worst_linear}")
    })?;

    let families = [
        IntensitySpec::Constant { c: 2.0 },
        IntensitySpec::LastArrivalLinear { a: 1.0, b: 1.0 },
        IntensitySpec::TimeRamp { a: 1.0, b: 1.0 },
        IntensitySpec::Product {
            a: 0.5,
            b: 1.0,
            c: 1.0,
        },
    ];
    let mut worst_residual: f64 = 0.0;
    for w in families {
        let model = IntensityModel::builtin(1.0, w.clone(), None).map_err(|e| e.to_string())?;
        ensure(model.sup_bound() <= 2.0, || {
            format!("{w:?}: C T = {}", model.sup_bound())
        })?;
        let r = latd_normalization_residual(&model, 1.0, 20, 1e-8).map_err(|e| e.to_string())?;
        ensure(r.residual <= 1e-8, || {
            format!("{w:?}: residual {}", r.residual)
        })?;
        worst_residual = worst_residual.max(r.residual);
    }

    let w = IntensitySpec::LastArrivalLinear { a: 1.0, b: 1.0 };
    let model = IntensityModel::builtin(1.0, w.clone(), None).map_err(|e| e.to_string())?;
    let series = latd_mean_series(&model, 0.0, 1.0, 20, 1e-8).map_err(|e| e.to_string())?;
    let spec = ProcessSpec::Latd {
        horizon: 1.0,
        w,
        sup_bound: None,
    };
    let batch = sample_batch(&spec, 100_000, 6).map_err(|e| e.to_string())?;
    let counts: Vec<f64> = batch.paths().iter().map(|p| p.total() as f64).collect();
    let (m, se) = mean_se(&counts);
    ensure((m - series.value).abs() <= 3.0 * se, || {
        format!("Monte Carlo {m} +- {} vs series {}", 3.0 * se, series.value)
    })?;
    Ok(format!(
        "linear error {worst_linear:.1e}; worst residual {worst_residual:.1e}; series {:.6} vs MC {m:.4} (3 SE {:.4})",
        series.value,
        3.0 * se
    ))
}

fn c7_constants() -> Outcome {
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let c3 = bounds::cq_constant(3.0).map_err(|e| e.to_string())?;
    let c4 = bounds::cq_constant(4.0).map_err(|e| e.to_string())?;
    ensure(rel(c3, 16640f64.powf(1.0 / 3.0)) < 5e-13, || {
        format!("C_3 = {c3}")
    })?;
    ensure(rel(c4, 1005696f64.powf(0.25)) < 5e-13, || {
        format!("C_4 = {c4}")
    })?;
    let n0 = |q, r| bounds::n0_threshold(q, r).map_err(|e| e.to_string());
    ensure(n0(4.0, 1.0)? == 8, || "N_0(4, 1) != 8".into())?;
    ensure(n0(3.0, 1.0)? == 11, || "N_0(3, 1) != 11".into())?;
    for (q, r, expected) in [(3.0, 1.0, false), (4.0, 1.0, true), (3.0, 3.0, true)] {
        ensure(bounds::complete_lln_condition(q, r) == expected, || {
            format!("condition({q}, {r}) != {expected}")
        })?;
    }
    Ok(format!("C_3 = {c3:.12}, C_4 = {c4:.12}"))
}

#[derive(Clone, Copy, Debug)]
enum Summand {
    Bernoulli,
    Poisson,
    Uniform,
}

impl Summand {
    /// `||X - E X||_q`.
    fn centered_norm(self, q: f64) -> f64 {
        match self {
            Summand::Bernoulli => 0.5,
            Summand::Uniform => 0.5 * (q + 1.0).powf(-1.0 / q),
            Summand::Poisson => poisson_central_abs_moment(1.0, q).powf(1.0 / q),
        }
    }

    /// Centered average of `n` summands.
    fn centered_average(self, n: u64, rng: &mut ChaCha8Rng) -> f64 {
        let nf = n as f64;
        match self {
            Summand::Bernoulli => Binomial::new(n, 0.5).unwrap().sample(rng) as f64 / nf - 0.5,
            Summand::Poisson => {
                let z: f64 = Poisson::new(nf).unwrap().sample(rng);
                z / nf - 1.0
            }
            Summand::Uniform => (0..n).map(|_| rng.random::<f64>()).sum::<f64>() / nf - 0.5,
        }
    }
}

fn c8_scalar() -> Outcome {
    let reps = 100_000u64;
    let mut worst: f64 = 0.0;
    for (si, s) in [Summand::Bernoulli, Summand::Poisson, Summand::Uniform]
        .into_iter()
        .enumerate()
    {
        for n in [10u64, 100, 1000] {
            let devs: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|j| s.centered_average(n, &mut substream_rng(8, si as u64, (n << 32) | j)))
                .collect();
            for q in [3.0, 4.0] {
                let emp =
                    (devs.iter().map(|d| d.abs().powf(q)).sum::<f64>() / reps as f64).powf(1.0 / q);
                let bound = bounds::scalar_lln_bound(q, s.centered_norm(q), n)
                    .map_err(|e| e.to_string())?;
                ensure(emp <= bound, || {
                    format!("{s:?} q={q} N={n}: {emp} > {bound}")
                })?;
                worst = worst.max(emp / bound);
            }
        }
    }
    Ok(format!("18 cases, largest empirical / bound = {worst:.3e}"))
}

fn c9_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |workers: usize| -> Result<(Vec<u8>, Vec<u8>), String> {
        let out = root.path().join(format!("w{workers}"));
        let config = serde_json::json!({
            "process": {"kind": "latd", "T": 1.0, "w": {"family": "last_arrival_linear", "a": 1.0, "b": 1.0}},
            "q_list": [3.0, 4.0],
            "n_grid": [4, 16, 64],
            "replications": 10,
            "master_seed": 99,
            "output_dir": out,
            "workers": workers,
        });
        let cfg_path = root.path().join(format!("config{workers}.json"));
        std::fs::write(&cfg_path, config.to_string()).map_err(|e| e.to_string())?;
        let status = Command::new(env!("CARGO_BIN_EXE_ulln"))
            .args(["study", "--config"])
            .arg(&cfg_path)
            .env_remove("ULLN_SEED")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!(
                "ulln study failed: {}",
                String::from_utf8_lossy(&status.stderr)
            )
        })?;
        let read =
            |name: &str| std::fs::read(Path::new(&out).join(name)).map_err(|e| e.to_string());
        Ok((read("raw.csv")?, read("study.json")?))
    };
    let one = run(1)?;
    let eight = run(8)?;
    ensure(one.0 == eight.0, || {
        "raw.csv differs between 1 and 8 workers".into()
    })?;
    ensure(one.1 == eight.1, || {
        "study.json differs between 1 and 8 workers".into()
    })?;
    Ok(format!(
        "raw.csv {} bytes, study.json {} bytes identical",
        one.0.len(),
        one.1.len()
    ))
}

fn main() {
    let limit = |single: u64, multi: u64| {
        Duration::from_secs(if single_threaded() { single } else { multi })
    };
    let criteria: Vec<Criterion> = vec![
        (1, "gate-size bound", Duration::from_secs(10), c1_gate_size),
        (
            2,
            "gate inequality on step paths",
            Duration::from_secs(60),
            c2_gate_inequality,
        ),
        (
            3,
            "exact vs grid deviation",
            Duration::from_secs(60),
            c3_oracle_equivalence,
        ),
        (
            4,
            "empirical moment below bound",
            limit(600, 120),
            c4_domination,
        ),
        (
            5,
            "constant-intensity reduction to Poisson",
            Duration::from_secs(30),
            c5_latd_reduction,
        ),
        (6, "series oracles", Duration::from_secs(120), c6_series),
        (
            7,
            "constants regression",
            Duration::from_secs(1),
            c7_constants,
        ),
        (
            8,
            "scalar moment inequality",
            Duration::from_secs(180),
            c8_scalar,
        ),
        (
            9,
            "study determinism across worker counts",
            Duration::from_secs(600),
            c9_determinism,
        ),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!(
                "{detail}; took {:.1}s, budget {}s",
                elapsed.as_secs_f64(),
                budget.as_secs()
            )),
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "[PASS] criterion {id} ({name}): {detail} [{:.1}s]",
                elapsed.as_secs_f64()
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "[FAIL] criterion {id} ({name}): {detail} [{:.1}s]",
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
