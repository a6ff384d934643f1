//! Built-in verification suites on the symmetric benchmark
//! (`k = 1`, `p0 = 0.5`, `p_bar = 0.75`).

use std::fmt;
use std::str::FromStr;

use persuade_core::closed_forms::{
    embedding_time_via_potential, expected_exit_time, expected_exit_time_psi, laplace_exit_transform,
    second_moment_exit_time,
};
use persuade_core::costs::{monte_carlo_cost, CostModel};
use persuade_core::dynamics::{coupled_no_garbling_comparison, hitting_stats, simulate_exit, SimConfig};
use persuade_core::model::{make_two_atom_law, mean_and_std_err};
use persuade_core::solver::{sweep_convexity, sweep_snr, SolveConfig};
use persuade_core::{GarblingPolicy, ModelParams, TerminalLaw};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{from_core, CliError};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    NoGarbling,
    TwoAtom,
    ClosedForms,
    ComparativeStatics,
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "no_garbling" => Ok(Self::NoGarbling),
            "two_atom" => Ok(Self::TwoAtom),
            "closed_forms" => Ok(Self::ClosedForms),
            "comparative_statics" => Ok(Self::ComparativeStatics),
            other => Err(CliError::config(format!(
                "unknown suite '{other}' (expected no_garbling, two_atom, closed_forms or comparative_statics)"
            ))),
        }
    }
}

/// One verification check with what was seen and what was required.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, observed: impl Into<String>, expected: impl Into<String>) -> Self {
        Self { name: name.into(), passed, observed: observed.into(), expected: expected.into() }
    }

    /// `|observed - target| <= n_se * se`.
    fn within_se(name: impl Into<String>, observed: f64, se: f64, target: f64, n_se: f64) -> Self {
        let passed = (observed - target).abs() <= n_se * se;
        Self::new(name, passed, format!("{observed:.6} (se {se:.2e})"), format!("{target:.6} ± {n_se} se"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: observed {}, expected {}", self.name, self.observed, self.expected)
    }
}

fn benchmark() -> ModelParams {
    ModelParams::from_snr(1.0, 0.5, 0.75).expect("valid benchmark")
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Check>, CliError> {
    match suite {
        Suite::NoGarbling => no_garbling(seed),
        Suite::TwoAtom => two_atom(seed),
        Suite::ClosedForms => closed_forms(seed),
        Suite::ComparativeStatics => comparative_statics(),
    }
    .map_err(from_core)
}

fn no_garbling(seed: u64) -> persuade_core::Result<Vec<Check>> {
    let p = benchmark();
    let sim = SimConfig::new(20_000, 1e-4, seed);
    let garbling = GarblingPolicy::piecewise(vec![0.5], vec![0.5, 1.0])?;
    let coupled = coupled_no_garbling_comparison(&p, 0.25, 0.75, &garbling, &sim)?;
    let clean = simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::none(), &sim)?;
    let mut checks = Vec::new();

    let dominated = coupled.iter().filter(|c| c.tau_garbled >= c.tau_clean).count();
    checks.push(Check::new(
        "pathwise tau_garbled >= tau_clean",
        dominated == coupled.len() && coupled.len() == sim.n_paths,
        format!("{dominated}/{}", coupled.len()),
        format!("{}/{}", sim.n_paths, sim.n_paths),
    ));
    let same_terminal = coupled.iter().zip(&clean).filter(|(c, o)| c.terminal_belief == o.terminal_belief).count();
    checks.push(Check::new(
        "identical terminal beliefs",
        same_terminal == coupled.len(),
        format!("{same_terminal}/{}", coupled.len()),
        format!("{}/{}", coupled.len(), coupled.len()),
    ));

    let garbled: Vec<f64> = coupled.iter().map(|c| c.tau_garbled).collect();
    let ungarbled: Vec<f64> = coupled.iter().map(|c| c.tau_clean).collect();
    for (name, cost) in [
        ("linear", CostModel::linear(1.0)?),
        ("power(1,2)", CostModel::power(1.0, 2.0)?),
        ("laplace mixture", CostModel::laplace_mixture(1.0, vec![(1.0, -1.0)])?),
    ] {
        let g = monte_carlo_cost(&cost, &garbled).mean;
        let c = monte_carlo_cost(&cost, &ungarbled).mean;
        checks.push(Check::new(format!("mean {name} cost garbled >= clean"), g >= c, format!("{g:.6} vs {c:.6}"), ">="));
    }

    let halved = simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::constant(0.5)?, &sim.with_paths(2000))?;
    let doubled = halved.iter().zip(&clean).filter(|(h, c)| h.tau == 2.0 * c.tau).count();
    checks.push(Check::new("constant 1/2 attenuation doubles tau exactly", doubled == 2000, format!("{doubled}/2000"), "2000/2000"));
    Ok(checks)
}

/// Random mean-preserving splits of the lower atom of the symmetric law.
pub fn random_lower_splits(seed: u64, count: usize) -> Vec<TerminalLaw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a: f64 = rng.gen_range(0.02..0.24);
            let b: f64 = rng.gen_range(0.26..0.70);
            // masses on a and b average to the original atom at 0.25
            let mass_b = 0.5 * (0.25 - a) / (b - a);
            TerminalLaw::new(vec![(a, 0.5 - mass_b), (b, mass_b), (0.75, 0.5)]).expect("valid split")
        })
        .collect()
}

fn two_atom(seed: u64) -> persuade_core::Result<Vec<Check>> {
    let p = benchmark();
    let base = embedding_time_via_potential(&make_two_atom_law(&p, 0.5)?, &p)?;
    let mut checks = vec![Check::new(
        "two-atom embedding time equals closed form",
        (base - 3f64.ln()).abs() < 1e-6,
        format!("{base:.9}"),
        format!("{:.9} ± 1e-6", 3f64.ln()),
    )];
    for (i, law) in random_lower_splits(seed, 10).iter().enumerate() {
        let t = embedding_time_via_potential(law, &p)?;
        checks.push(Check::new(
            format!("split {i} slower than two-atom law"),
            t > base + 1e-6,
            format!("{t:.9}"),
            format!("> {:.9}", base + 1e-6),
        ));
    }
    Ok(checks)
}

fn closed_forms(seed: u64) -> persuade_core::Result<Vec<Check>> {
    let p = benchmark();
    let sim = SimConfig::new(20_000, 1e-5, seed);
    let out = simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::none(), &sim)?;
    let stats = hitting_stats(&out, 0.75)?;
    let mean = expected_exit_time(0.5, 0.25, 0.75, &p)?;
    let mut checks = vec![Check::within_se("mean exit time vs closed form", stats.mean, stats.std_err, mean, 3.0)];
    for s in [0.5, 1.0, 2.0] {
        let xs: Vec<f64> = stats.samples.iter().map(|t| (-s * t).exp()).collect();
        let (m, se) = mean_and_std_err(&xs);
        let exact = laplace_exit_transform(s, 0.5, 0.25, 0.75, &p)?;
        checks.push(Check::within_se(format!("Laplace transform at s={s}"), m, se, exact, 3.0));
    }
    let squares: Vec<f64> = stats.samples.iter().map(|t| t * t).collect();
    let (m2, se2) = mean_and_std_err(&squares);
    checks.push(Check::within_se("second moment", m2, se2, second_moment_exit_time(0.5, 0.25, 0.75, &p)?, 3.0));
    checks.push(Check::within_se(
        "upper exit fraction",
        stats.success_fraction(),
        stats.success_std_err(),
        0.5,
        3.0,
    ));
    let psi = expected_exit_time_psi(0.5, 0.25, 0.75, &p)?;
    checks.push(Check::new(
        "psi-integral route equals closed form",
        (psi - mean).abs() < 1e-8,
        format!("{psi:.12}"),
        format!("{mean:.12} ± 1e-8"),
    ));
    Ok(checks)
}

fn comparative_statics() -> persuade_core::Result<Vec<Check>> {
    let p = benchmark();
    let cfg = SolveConfig::default();
    let base = CostModel::linear(0.1)?;
    let mut checks = Vec::new();

    let rows = sweep_convexity(&base, &[0.0, 0.1, 1.0, 10.0], &p, &cfg)?;
    let stars: Vec<f64> = rows.iter().map(|r| r.1.p_star).collect();
    checks.push(Check::new(
        "p_star weakly decreasing in quadratic weight",
        stars.windows(2).all(|w| w[1] <= w[0] + 1e-6),
        format!("{stars:.6?}"),
        "nonincreasing (slack 1e-6)",
    ));

    let rows = sweep_snr(&base, &[0.5, 1.0, 2.0, 4.0], &p, &cfg)?;
    let stars: Vec<f64> = rows.iter().map(|r| r.1.p_star).collect();
    checks.push(Check::new(
        "p_star weakly increasing in signal-to-noise ratio",
        stars.windows(2).all(|w| w[1] >= w[0] - 1e-6),
        format!("{stars:.6?}"),
        "nondecreasing (slack 1e-6)",
    ));

    let t1 = expected_exit_time(0.5, 0.25, 0.75, &p.with_snr(1.0)?)?;
    let t2 = expected_exit_time(0.5, 0.25, 0.75, &p.with_snr(2.0)?)?;
    let ratio = t2 / t1;
    checks.push(Check::new(
        "exit time scales by (k1/k2)^2",
        (ratio - 0.25).abs() <= 1e-12 * 0.25,
        format!("{ratio:.15}"),
        "0.25 (rel 1e-12)",
    ));
    Ok(checks)
}
