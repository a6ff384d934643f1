//! The sender's reduced problem.
//!
//! With no garbling and a binary terminal law on `{lower, p_bar}`, the sender
//! picks the lower belief to maximize
//!
//! ```text
//! (p0 - lower) / (p_bar - lower) - E[c(tau_{[lower, p_bar]})]
//! ```
//!
//! over `lower ∈ [0, p0]`. The first term is the probability of reaching
//! `p_bar`; `lower = p0` is the empty experiment.

use std::io::{self, Write};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{expected_cost_on_interval, CostModel};
use crate::dynamics::{format_number, SimConfig};
use crate::model::ModelParams;
use crate::optimize::golden_section_max;
use crate::{Error, Result};

/// Smallest lower belief searched; zero makes every unbounded cost infinite.
pub const EPS_LOW: f64 = 1e-6;
/// Absolute tolerance of the golden-section refinement in the lower belief.
pub const LOWER_TOL: f64 = 1e-8;
/// Objective values this close are ties, broken toward the smaller lower belief.
pub const TIE_TOL: f64 = 1e-10;
pub const MIN_GRID: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub grid_n: usize,
    /// Simulation settings for costs without an exact route. The fixed seed
    /// gives common random numbers across candidate lower beliefs.
    pub sim: SimConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { grid_n: 64, sim: SimConfig::new(4000, 1e-4, 0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Optimal probability of reaching the approval threshold.
    pub p_star: f64,
    pub lower_star: f64,
    pub objective: f64,
    pub cost_at_opt: f64,
    /// Coarse grid as `(lower, objective)` pairs.
    pub trace: Vec<(f64, f64)>,
}

/// Probability of stopping at `p_bar` rather than `lower`.
pub fn success_probability(lower: f64, params: &ModelParams) -> f64 {
    (params.p0() - lower) / (params.p_bar() - lower)
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    lower: f64,
    success: f64,
    cost: f64,
    objective: f64,
}

fn evaluate(lower: f64, c: &CostModel, params: &ModelParams, sim: &SimConfig) -> Result<Candidate> {
    let p0 = params.p0();
    if !(0.0..=p0).contains(&lower) {
        return Err(Error::InvalidArgument(format!("lower belief {lower} outside [0, p0 = {p0}]")));
    }
    if lower == p0 {
        return Ok(Candidate { lower, success: 0.0, cost: 0.0, objective: 0.0 });
    }
    let success = success_probability(lower, params);
    if lower == 0.0 {
        return Ok(Candidate { lower, success, cost: f64::INFINITY, objective: f64::NEG_INFINITY });
    }
    let cost = expected_cost_on_interval(c, lower, params.p_bar(), params, sim)?.mean;
    Ok(Candidate { lower, success, cost, objective: success - cost })
}

/// Success probability minus expected cost for the binary law on
/// `{lower, p_bar}`. Zero at `lower = p0`; `-inf` at `lower = 0`, where the
/// exit time is infinite with positive probability.
pub fn objective(lower: f64, c: &CostModel, params: &ModelParams, sim: &SimConfig) -> Result<f64> {
    evaluate(lower, c, params, sim).map(|x| x.objective)
}

/// Maximizes [`objective`] over `[EPS_LOW, p0]`: a coarse grid of
/// `cfg.grid_n` points, then golden-section refinement around every local
/// grid maximum. The best candidate wins; near-ties go to the smaller lower
/// belief.
pub fn solve_sender(c: &CostModel, params: &ModelParams, cfg: &SolveConfig) -> Result<SolveResult> {
    if cfg.grid_n < MIN_GRID {
        return Err(Error::InvalidArgument(format!("grid_n must be at least {MIN_GRID}, got {}", cfg.grid_n)));
    }
    let p0 = params.p0();
    let n = cfg.grid_n;
    let grid: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { p0 } else { EPS_LOW + (p0 - EPS_LOW) * i as f64 / (n - 1) as f64 })
        .collect();
    let coarse: Vec<Candidate> =
        grid.par_iter().map(|&l| evaluate(l, c, params, &cfg.sim)).collect::<Result<_>>()?;

    let peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let v = coarse[i].objective;
            (i == 0 || v >= coarse[i - 1].objective) && (i == n - 1 || v >= coarse[i + 1].objective)
        })
        .collect();

    let failure = Mutex::new(None);
    let refined: Vec<Candidate> = peaks
        .iter()
        .map(|&i| {
            let (a, b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n - 1)]);
            let best = golden_section_max(
                |l| match evaluate(l, c, params, &cfg.sim) {
                    Ok(x) => x.objective,
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                },
                a,
                b,
                LOWER_TOL,
            );
            evaluate(best.x, c, params, &cfg.sim)
        })
        .collect::<Result<_>>()?;
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }

    let all = coarse.iter().chain(&refined);
    let top = all.clone().map(|x| x.objective).fold(f64::NEG_INFINITY, f64::max);
    let best = all
        .filter(|x| x.objective >= top - TIE_TOL)
        .min_by(|x, y| x.lower.total_cmp(&y.lower))
        .copied()
        .expect("grid is non-empty");

    Ok(SolveResult {
        p_star: best.success,
        lower_star: best.lower,
        objective: best.objective,
        cost_at_opt: best.cost,
        trace: coarse.iter().map(|x| (x.lower, x.objective)).collect(),
    })
}

fn check_increasing(xs: &[f64], what: &str, positive: bool) -> Result<()> {
    let bad_value = xs.iter().any(|&x| !x.is_finite() || x < 0.0 || (positive && x == 0.0));
    if bad_value || xs.windows(2).any(|w| w[1] < w[0]) {
        let sign = if positive { "positive" } else { "nonnegative" };
        return Err(Error::InvalidArgument(format!("{what} must be {sign} and increasing")));
    }
    Ok(())
}

/// Solves with `c_base + w t²` for each weight. Adding an increasing convex
/// term makes persuasion weakly less likely, so `p_star` should not rise.
pub fn sweep_convexity(
    c_base: &CostModel,
    extra_quadratic_weights: &[f64],
    params: &ModelParams,
    cfg: &SolveConfig,
) -> Result<Vec<(f64, SolveResult)>> {
    check_increasing(extra_quadratic_weights, "quadratic weights", false)?;
    extra_quadratic_weights
        .iter()
        .map(|&w| Ok((w, solve_sender(&c_base.plus_quadratic(w)?, params, cfg)?)))
        .collect()
}

/// Solves at each signal-to-noise ratio, keeping `sigma` and `mu_l`. Raising
/// the ratio from `k1` to `k2` speeds every exit time up by `(k1/k2)²`, so
/// `p_star` should not fall.
pub fn sweep_snr(
    c: &CostModel,
    kappas: &[f64],
    params_template: &ModelParams,
    cfg: &SolveConfig,
) -> Result<Vec<(f64, SolveResult)>> {
    check_increasing(kappas, "signal-to-noise ratios", true)?;
    kappas
        .iter()
        .map(|&k| Ok((k, solve_sender(c, &params_template.with_snr(k)?, cfg)?)))
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "sweep_param,p_star,lower_star,objective,cost_at_opt";

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[(f64, SolveResult)]) -> io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for (x, r) in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_number(*x),
            format_number(r.p_star),
            format_number(r.lower_star),
            format_number(r.objective),
            format_number(r.cost_at_opt)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench() -> ModelParams {
        ModelParams::from_snr(1.0, 0.5, 0.75).unwrap()
    }

    fn cfg() -> SolveConfig {
        SolveConfig::default()
    }

    #[test]
    fn objective_examples() {
        let p = bench();
        let sim = cfg().sim;
        let lin = CostModel::linear(1.0).unwrap();
        assert_eq!(objective(0.5, &lin, &p, &sim).unwrap(), 0.0);
        let v = objective(0.25, &lin, &p, &sim).unwrap();
        assert!((v - (0.5 - 3f64.ln())).abs() < 1e-15);
        assert_eq!(objective(0.0, &lin, &p, &sim).unwrap(), f64::NEG_INFINITY);
        assert!(objective(0.6, &lin, &p, &sim).is_err());
    }

    #[test]
    fn vanishing_cost_recovers_static_value() {
        let p = bench();
        let tiny = CostModel::linear(1e-12).unwrap();
        let v = objective(EPS_LOW, &tiny, &p, &cfg().sim).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn steep_cost_means_no_experiment() {
        let r = solve_sender(&CostModel::linear(1e6).unwrap(), &bench(), &cfg()).unwrap();
        assert!((r.lower_star - 0.5).abs() < 1e-3);
        assert!(r.objective.abs() < 1e-3);
        assert!(r.p_star < 1e-3);
    }

    #[test]
    fn cheap_cost_means_static_persuasion() {
        let r = solve_sender(&CostModel::linear(1e-9).unwrap(), &bench(), &cfg()).unwrap();
        assert!((r.p_star - 2.0 / 3.0).abs() < 1e-3, "{}", r.p_star);
    }

    #[test]
    fn result_invariants() {
        let p = bench();
        let r = solve_sender(&CostModel::linear(0.1).unwrap(), &p, &cfg()).unwrap();
        assert!((r.objective - (r.p_star - r.cost_at_opt)).abs() < 1e-10);
        assert!((r.p_star - success_probability(r.lower_star, &p)).abs() < 1e-15);
        assert_eq!(r.trace.len(), 64);
        assert!(r.trace.iter().all(|&(_, v)| v <= r.objective));
    }

    #[test]
    fn small_grid_rejected() {
        let c = SolveConfig { grid_n: 8, ..cfg() };
        assert!(solve_sender(&CostModel::linear(0.1).unwrap(), &bench(), &c).is_err());
    }

    #[test]
    fn zero_weight_sweep_is_base() {
        let p = bench();
        let base = CostModel::linear(0.1).unwrap();
        let rows = sweep_convexity(&base, &[0.0], &p, &cfg()).unwrap();
        assert_eq!(rows[0].1, solve_sender(&base, &p, &cfg()).unwrap());
        assert!(sweep_convexity(&base, &[1.0, 0.5], &p, &cfg()).is_err());
    }

    #[test]
    fn huge_weights_stop_persuasion() {
        let rows = sweep_convexity(&CostModel::linear(0.1).unwrap(), &[1e6, 1e7], &bench(), &cfg()).unwrap();
        assert!(rows.iter().all(|(_, r)| r.p_star < 1e-3));
    }

    #[test]
    fn duplicated_kappa_gives_identical_results() {
        let rows = sweep_snr(&CostModel::linear(0.1).unwrap(), &[1.5, 1.5], &bench(), &cfg()).unwrap();
        assert_eq!(rows[0].1, rows[1].1);
        assert!(sweep_snr(&CostModel::linear(0.1).unwrap(), &[0.0], &bench(), &cfg()).is_err());
    }

    #[test]
    fn monte_carlo_cost_solves_smoothly() {
        // exponent 1.5 has no exact route; common random numbers keep the
        // simulated objective smooth enough for the refinement.
        let p = bench();
        let c = CostModel::power(0.1, 1.5).unwrap();
        let sc = SolveConfig { grid_n: 16, sim: SimConfig::new(400, 4e-4, 9) };
        let r = solve_sender(&c, &p, &sc).unwrap();
        assert!(r.p_star > 0.0 && r.p_star < 2.0 / 3.0);
        assert!(r.trace.iter().all(|&(_, v)| v <= r.objective));
        assert_eq!(r, solve_sender(&c, &p, &sc).unwrap());
    }

    #[test]
    fn sweep_csv_header() {
        let rows = sweep_snr(&CostModel::linear(0.1).unwrap(), &[1.0], &bench(), &cfg()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sweep_param,p_star,lower_star,objective,cost_at_opt\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
