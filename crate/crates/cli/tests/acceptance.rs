//! Acceptance suite. Runs without the test harness so that every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use persuade_cli::cmd_simulate;
use persuade_cli::verify::random_lower_splits;
use persuade_core::closed_forms::{embedding_time_via_potential, expected_exit_time, laplace_exit_transform};
use persuade_core::costs::{icx_report, monte_carlo_cost, CostModel};
use persuade_core::dynamics::{
    coupled_no_garbling_comparison, hitting_stats, linear_grid, simulate_exit, upper_exit_probability, SimConfig,
};
use persuade_core::model::{make_two_atom_law, mean_and_std_err};
use persuade_core::solver::{objective, solve_sender, sweep_convexity, sweep_snr, SolveConfig};
use persuade_core::{GarblingPolicy, HittingStats, ModelParams, TerminalLaw};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn benchmark() -> ModelParams {
    ModelParams::from_snr(1.0, 0.5, 0.75).unwrap()
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_3se(observed: f64, se: f64, target: f64) -> bool {
    (observed - target).abs() <= 3.0 * se
}

/// Samples shared by the first two criteria.
fn benchmark_samples() -> Result<(HittingStats, f64), String> {
    let p = benchmark();
    let sim = SimConfig::new(100_000, 1e-5, 11);
    let start = Instant::now();
    let out = pool(1).install(|| simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::none(), &sim)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    Ok((hitting_stats(&out, 0.75).map_err(|e| e.to_string())?, secs))
}

fn mean_exit_time(samples: &Result<(HittingStats, f64), String>) -> Outcome {
    let (stats, secs) = samples.as_ref().map_err(Clone::clone)?;
    let target = 3f64.ln();
    let ok = within_3se(stats.mean, stats.std_err, target) && *secs < 60.0;
    verdict(
        ok,
        format!("mean {:.6} se {:.2e} vs ln 3 = {target:.6}; {secs:.1} s on one thread (limit 60 s)", stats.mean, stats.std_err),
    )
}

fn laplace_transform(samples: &Result<(HittingStats, f64), String>) -> Outcome {
    let (stats, _) = samples.as_ref().map_err(Clone::clone)?;
    let p = benchmark();
    let mut ok = true;
    let mut parts = Vec::new();
    for s in [0.5, 1.0, 2.0] {
        let xs: Vec<f64> = stats.samples.iter().map(|t| (-s * t).exp()).collect();
        let (m, se) = mean_and_std_err(&xs);
        let exact = laplace_exit_transform(s, 0.5, 0.25, 0.75, &p).map_err(|e| e.to_string())?;
        ok &= within_3se(m, se, exact);
        parts.push(format!("s={s}: {m:.5} vs {exact:.5} (se {se:.1e})"));
    }
    verdict(ok, parts.join("; "))
}

fn exit_probability() -> Outcome {
    let configs = [(0.4, 0.1, 0.9, 1.0), (0.3, 0.2, 0.75, 1.0), (0.6, 0.5, 0.95, 2.0), (0.5, 0.1, 0.6, 0.5), (0.7, 0.3, 0.8, 1.5)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, &(p0, lower, upper, k)) in configs.iter().enumerate() {
        let p = ModelParams::from_snr(k, p0, upper).map_err(|e| e.to_string())?;
        let sim = SimConfig::new(40_000, 1e-4, 300 + i as u64);
        let out = simulate_exit(&p, lower, upper, &GarblingPolicy::none(), &sim).map_err(|e| e.to_string())?;
        let stats = hitting_stats(&out, upper).map_err(|e| e.to_string())?;
        let target = upper_exit_probability(p0, lower, upper);
        ok &= within_3se(stats.success_fraction(), stats.success_std_err(), target);
        parts.push(format!("{:.4}/{target:.4}", stats.success_fraction()));
    }
    verdict(ok, format!("observed/expected {}", parts.join(", ")))
}

fn pathwise_garbling() -> Outcome {
    let p = benchmark();
    let sim = SimConfig::new(100_000, 1e-4, 4);
    let phi = GarblingPolicy::piecewise(vec![0.5], vec![0.5, 1.0]).unwrap();
    let e = |e: persuade_core::Error| e.to_string();
    let coupled = coupled_no_garbling_comparison(&p, 0.25, 0.75, &phi, &sim).map_err(e)?;
    let garbled = simulate_exit(&p, 0.25, 0.75, &phi, &sim).map_err(e)?;
    let clean = simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::none(), &sim).map_err(e)?;

    let complete = coupled.len() == sim.n_paths && garbled.len() == sim.n_paths && clean.len() == sim.n_paths;
    let dominated = coupled.iter().filter(|c| c.tau_garbled >= c.tau_clean).count();
    let same_terminal = garbled
        .iter()
        .zip(&clean)
        .zip(&coupled)
        .filter(|((g, c), cc)| g.terminal_belief == c.terminal_belief && cc.terminal_belief == c.terminal_belief)
        .count();
    let tg: Vec<f64> = coupled.iter().map(|c| c.tau_garbled).collect();
    let t0: Vec<f64> = coupled.iter().map(|c| c.tau_clean).collect();
    let costs = [
        CostModel::linear(1.0).unwrap(),
        CostModel::power(1.0, 2.0).unwrap(),
        CostModel::laplace_mixture(1.0, vec![(1.0, -1.0)]).unwrap(),
    ];
    let cost_ok = costs.iter().all(|c| monte_carlo_cost(c, &tg).mean >= monte_carlo_cost(c, &t0).mean);
    verdict(
        complete && dominated == sim.n_paths && same_terminal == sim.n_paths && cost_ok,
        format!(
            "tau_g >= tau_0 on {dominated}/{n}, identical terminals {same_terminal}/{n}, mean cost dominance for 3 costs: {cost_ok}",
            n = sim.n_paths
        ),
    )
}

fn two_atom_dominance() -> Outcome {
    let p = benchmark();
    let base = embedding_time_via_potential(&make_two_atom_law(&p, 0.5).unwrap(), &p).map_err(|e| e.to_string())?;
    let mut worst = f64::INFINITY;
    for law in random_lower_splits(5, 10) {
        let t = embedding_time_via_potential(&law, &p).map_err(|e| e.to_string())?;
        worst = worst.min(t - base);
    }
    verdict(worst > 1e-6, format!("smallest margin over 10 splits {worst:.6} (need > 1e-6)"))
}

fn potential_consistency() -> Outcome {
    let priors = [0.3, 0.4, 0.5, 0.6, 0.7];
    let pairs = [(0.05, 0.95), (0.1, 0.8), (0.2, 0.75), (0.25, 0.9), (0.15, 0.85)];
    let snrs = [0.5, 1.0, 2.0];
    let mut worst: f64 = 0.0;
    for &p0 in &priors {
        for &(lower, upper) in &pairs {
            for &k in &snrs {
                let p = ModelParams::from_snr(k, p0, upper).map_err(|e| e.to_string())?;
                let law = TerminalLaw::two_point(lower, upper, p0).map_err(|e| e.to_string())?;
                let a = embedding_time_via_potential(&law, &p).map_err(|e| e.to_string())?;
                let b = expected_exit_time(p0, lower, upper, &p).map_err(|e| e.to_string())?;
                worst = worst.max((a - b).abs());
            }
        }
    }
    verdict(worst <= 1e-6, format!("max |potential - closed form| over 75 cases {worst:.2e} (limit 1e-6)"))
}

fn convexity_sweep() -> Outcome {
    let rows = sweep_convexity(&CostModel::linear(0.1).unwrap(), &[0.0, 0.1, 1.0, 10.0], &benchmark(), &SolveConfig::default())
        .map_err(|e| e.to_string())?;
    let stars: Vec<f64> = rows.iter().map(|r| r.1.p_star).collect();
    verdict(stars.windows(2).all(|w| w[1] <= w[0] + 1e-6), format!("p_star {stars:.6?}"))
}

fn snr_sweep() -> Outcome {
    let kappas = [0.5, 1.0, 2.0, 4.0];
    let p = benchmark();
    let rows = sweep_snr(&CostModel::linear(0.1).unwrap(), &kappas, &p, &SolveConfig::default()).map_err(|e| e.to_string())?;
    let stars: Vec<f64> = rows.iter().map(|r| r.1.p_star).collect();
    let monotone = stars.windows(2).all(|w| w[1] >= w[0] - 1e-6);
    let mut worst_rel: f64 = 0.0;
    for (i, &k1) in kappas.iter().enumerate() {
        for &k2 in &kappas[i + 1..] {
            let t1 = expected_exit_time(0.5, 0.25, 0.75, &p.with_snr(k1).unwrap()).map_err(|e| e.to_string())?;
            let t2 = expected_exit_time(0.5, 0.25, 0.75, &p.with_snr(k2).unwrap()).map_err(|e| e.to_string())?;
            let want = (k1 / k2).powi(2);
            worst_rel = worst_rel.max(((t2 / t1) - want).abs() / want);
        }
    }
    verdict(
        monotone && worst_rel <= 1e-12,
        format!("p_star {stars:.6?}; worst relative scaling error {worst_rel:.1e} (limit 1e-12)"),
    )
}

fn residual_dominance() -> Outcome {
    let p = benchmark();
    let run = |lower: f64, seed: u64| -> Result<HittingStats, String> {
        let sim = SimConfig::new(100_000, 1e-4, seed);
        let out = simulate_exit(&p, lower, 0.75, &GarblingPolicy::none(), &sim).map_err(|e| e.to_string())?;
        hitting_stats(&out, 0.75).map_err(|e| e.to_string())
    };
    let narrow = run(0.25, 91)?;
    let wide = run(0.2, 92)?;
    let t_max = wide.samples.iter().chain(&narrow.samples).copied().fold(0.0, f64::max);
    let grid = linear_grid(t_max, 50);
    let report = icx_report(&wide, &narrow, &grid, 2.0).map_err(|e| e.to_string())?;
    let dominates = persuade_core::costs::icx_dominates(&wide, &narrow, &grid);
    verdict(
        report.dominates && dominates,
        format!(
            "means {:.4} vs {:.4}; worst margin {:.2e} on 50 points; icx_dominates = {dominates}",
            report.mean_a,
            report.mean_b,
            report.worst_margin()
        ),
    )
}

fn solver_oracle() -> Outcome {
    let p = benchmark();
    let cost = CostModel::linear(0.1).unwrap();
    let cfg = SolveConfig::default();
    let start = Instant::now();
    let result = solve_sender(&cost, &p, &cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();

    let n = 100_000;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let lower = 1e-6 + (0.5 - 1e-6) * i as f64 / (n - 1) as f64;
        best = best.max(objective(lower, &cost, &p, &cfg.sim).map_err(|e| e.to_string())?);
    }
    let gap = (result.objective - best).abs();
    verdict(
        gap <= 1e-4 && secs < 10.0,
        format!("solver {:.8} vs scan {best:.8} (gap {gap:.1e}, limit 1e-4); solve took {secs:.3} s", result.objective),
    )
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = tmp.path().join("config.json");
    fs::write(
        &config,
        r#"{
  "model": {"mu_h": 1.0, "mu_l": 0.0, "sigma": 1.0, "p0": 0.5, "p_bar": 0.75},
  "sim": {"n_paths": 20000, "du": 1e-4, "max_u": 10.0, "seed": 7, "bridge_correction": true},
  "interval": {"lower": 0.25},
  "garbling": {"kind": "piecewise", "breaks": [0.5], "values": [0.5, 1.0]}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, threads) in [1usize, 1, 4].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        pool(threads).install(|| cmd_simulate(&config, &out, None)).map_err(|e| e.to_string())?;
        runs.push(read_all(&out));
    }
    let repeat = runs[0] == runs[1];
    let threads = runs[0] == runs[2];
    verdict(
        repeat && threads && runs[0].len() == 2,
        format!("repeat run identical: {repeat}; 1 vs 4 workers identical: {threads}; files {}", runs[0].len()),
    )
}

fn main() -> ExitCode {
    let samples = benchmark_samples();
    let criteria: [Criterion; 11] = [
        ("mean exit time vs ln 3", Box::new(|| mean_exit_time(&samples))),
        ("Laplace transform of exit time", Box::new(|| laplace_transform(&samples))),
        ("upper exit probability", Box::new(exit_probability)),
        ("pathwise garbling comparison", Box::new(pathwise_garbling)),
        ("two-atom law is fastest", Box::new(two_atom_dominance)),
        ("potential route equals closed form", Box::new(potential_consistency)),
        ("convexity sweep", Box::new(convexity_sweep)),
        ("signal-to-noise sweep", Box::new(snr_sweep)),
        ("wider interval dominates residual curve", Box::new(residual_dominance)),
        ("solver vs brute-force scan", Box::new(solver_oracle)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
