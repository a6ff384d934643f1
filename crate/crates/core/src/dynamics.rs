//! Belief-diffusion simulation.
//!
//! Under no garbling the posterior solves `dp = k p (1 - p) dW` with
//! `k = (mu_h - mu_l) / sigma`. Garbling multiplies the instantaneous
//! variance by `phi(p) <= 1`. Any such process is a time-changed Brownian
//! motion: run `p0 + B_u` in natural scale until it leaves `[lower, upper]`
//! and recover calendar time as
//!
//! ```text
//! tau = ∫_0^{u_exit} du / (phi(p0 + B_u) * k² p² (1 - p)²)
//! ```
//!
//! The terminal belief depends only on the Brownian path, never on `phi`, so
//! simulating one path and integrating several clocks along it couples
//! garbled and ungarbled policies exactly. A calendar-time Euler scheme is
//! kept as an independent cross-check.

use std::io::{self, Write};

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{mean_and_std_err, GarblingPolicy, HittingStats, ModelParams};
use crate::rng::{path_streams, PathStreams};
use crate::{Error, Result};

/// Share of censored paths above which a run fails.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;

/// Beyond this exponent the bridge crossing probability is below `e^-50`.
const BRIDGE_EXPONENT_CUTOFF: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Natural-scale step, i.e. the variance of each Brownian increment.
    pub du: f64,
    /// Cap on the natural-scale clock; paths still running are censored.
    pub max_u: f64,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, du: f64, seed: u64) -> Self {
        Self { n_paths, du, max_u: 10.0, seed, bridge_correction: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be at least 1".into()));
        }
        if !(self.du > 0.0 && self.du.is_finite()) {
            return Err(Error::InvalidConfig(format!("du must be positive and finite, got {}", self.du)));
        }
        if !(self.max_u > 0.0 && self.max_u.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "max_u must be positive and finite, got {}",
                self.max_u
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.n_paths = n_paths;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub path_index: usize,
    /// Exactly `lower` or `upper`.
    pub terminal_belief: f64,
    /// Calendar stopping time.
    pub tau: f64,
    /// Natural-scale exit clock, the posterior's quadratic variation at `tau`.
    pub u_exit: f64,
}

/// Calendar stopping times of one driving path under a garbling policy and
/// under no garbling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledOutcome {
    pub path_index: usize,
    pub terminal_belief: f64,
    pub tau_garbled: f64,
    pub tau_clean: f64,
    pub u_exit: f64,
}

/// Posterior volatility without garbling, `k p (1 - p)`; zero at the
/// absorbing beliefs 0 and 1.
#[inline]
pub fn sigma0(p: f64, params: &ModelParams) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    params.snr() * p * (1.0 - p)
}

#[inline]
fn clean_time_density(p: f64, k: f64) -> f64 {
    let s = k * p * (1.0 - p);
    1.0 / (s * s)
}

/// Probability that the upper boundary is hit first from `p0`.
pub fn upper_exit_probability(p0: f64, lower: f64, upper: f64) -> f64 {
    (p0 - lower) / (upper - lower)
}

fn check_interval(params: &ModelParams, lower: f64, upper: f64) -> Result<()> {
    let p0 = params.p0();
    if !(0.0 <= lower && lower < p0 && p0 < upper && upper <= 1.0) {
        return Err(Error::InvalidInterval(format!(
            "need 0 <= lower < p0 < upper <= 1, got lower={lower}, p0={p0}, upper={upper}"
        )));
    }
    if lower == 0.0 || upper == 1.0 {
        return Err(Error::Divergent(format!(
            "interval [{lower}, {upper}] touches an absorbing belief; the exit time is not finite"
        )));
    }
    Ok(())
}

enum WalkEnd {
    Exited { upper: bool, u_exit: f64 },
    Censored,
}

#[inline]
fn crossing_probability(a: f64, b: f64, variance: f64) -> f64 {
    let e = 2.0 * a * b / variance;
    if e > BRIDGE_EXPONENT_CUTOFF {
        0.0
    } else {
        (-e).exp()
    }
}

/// Walks `start + B_u` with steps of variance `du` until it leaves
/// `(lower, upper)`. `step(p, h)` is called for every piece of the path with
/// its end point and natural-time length; the last piece ends exactly on the
/// exited boundary. A step that overshoots is cut at the boundary by linear
/// interpolation. With `bridge`, an exit is also triggered when the Brownian
/// bridge between two interior points would have crossed a boundary, which
/// removes the `O(sqrt(du))` monitoring bias.
#[inline]
fn walk<F: FnMut(f64, f64)>(
    streams: &mut PathStreams,
    start: f64,
    lower: f64,
    upper: f64,
    cfg: &SimConfig,
    mut step: F,
) -> WalkEnd {
    let du = cfg.du;
    let sd = du.sqrt();
    let mut p = start;
    let mut u = 0.0;
    loop {
        if u >= cfg.max_u {
            return WalkEnd::Censored;
        }
        let z: f64 = streams.increments.sample(StandardNormal);
        let next = p + sd * z;
        if next >= upper {
            let h = du * (upper - p) / (next - p);
            step(upper, h);
            return WalkEnd::Exited { upper: true, u_exit: u + h };
        }
        if next <= lower {
            let h = du * (p - lower) / (p - next);
            step(lower, h);
            return WalkEnd::Exited { upper: false, u_exit: u + h };
        }
        if cfg.bridge_correction {
            let pu = crossing_probability(upper - p, upper - next, du);
            let pl = crossing_probability(p - lower, next - lower, du);
            if pu + pl > 0.0 {
                let x: f64 = streams.auxiliary.gen();
                if x < pu + pl {
                    let hit_upper = x < pu;
                    let h = 0.5 * du;
                    step(if hit_upper { upper } else { lower }, h);
                    return WalkEnd::Exited { upper: hit_upper, u_exit: u + h };
                }
            }
        }
        step(next, du);
        p = next;
        u += du;
    }
}

/// Runs `path` for every index in parallel and assembles results in index
/// order. `None` marks a censored path.
fn run_paths<T, F>(cfg: &SimConfig, path: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut PathStreams) -> Option<T> + Sync,
{
    cfg.validate()?;
    let raw: Vec<Option<T>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut streams = path_streams(cfg.seed, i as u64);
            path(i, &mut streams)
        })
        .collect();
    let censored = raw.iter().filter(|r| r.is_none()).count();
    if censored > 0 {
        warn!("{censored} of {} paths censored at max_u = {}", cfg.n_paths, cfg.max_u);
        if censored as f64 > MAX_CENSORED_FRACTION * cfg.n_paths as f64 {
            return Err(Error::Censored { censored, n_paths: cfg.n_paths });
        }
    }
    Ok(raw.into_iter().flatten().collect())
}

/// Simulates exit times from `[lower, upper]` under `garbling` by the
/// natural-scale walk plus time change. Censored paths are dropped (their
/// indices are missing from the output); more than 1% censored is an error.
pub fn simulate_exit(
    params: &ModelParams,
    lower: f64,
    upper: f64,
    garbling: &GarblingPolicy,
    cfg: &SimConfig,
) -> Result<Vec<PathOutcome>> {
    check_interval(params, lower, upper)?;
    let k = params.snr();
    let p0 = params.p0();
    let density = |p: f64| clean_time_density(p, k) / garbling.attenuation(p);
    run_paths(cfg, |i, streams| {
        let mut prev = density(p0);
        let mut tau = 0.0;
        let end = walk(streams, p0, lower, upper, cfg, |p, h| {
            let cur = density(p);
            tau += 0.5 * h * (prev + cur);
            prev = cur;
        });
        match end {
            WalkEnd::Exited { upper: hit, u_exit } if tau.is_finite() => Some(PathOutcome {
                path_index: i,
                terminal_belief: if hit { upper } else { lower },
                tau,
                u_exit,
            }),
            _ => None,
        }
    })
}

/// Integrates the garbled and the ungarbled clock along the same driving
/// path. Because `phi <= 1`, `tau_garbled >= tau_clean` on every path.
pub fn coupled_no_garbling_comparison(
    params: &ModelParams,
    lower: f64,
    upper: f64,
    garbling: &GarblingPolicy,
    cfg: &SimConfig,
) -> Result<Vec<CoupledOutcome>> {
    check_interval(params, lower, upper)?;
    let k = params.snr();
    let p0 = params.p0();
    run_paths(cfg, |i, streams| {
        let mut prev_clean = clean_time_density(p0, k);
        let mut prev_garbled = prev_clean / garbling.attenuation(p0);
        let (mut tau_clean, mut tau_garbled) = (0.0, 0.0);
        let end = walk(streams, p0, lower, upper, cfg, |p, h| {
            let clean = clean_time_density(p, k);
            let garbled = clean / garbling.attenuation(p);
            tau_clean += 0.5 * h * (prev_clean + clean);
            tau_garbled += 0.5 * h * (prev_garbled + garbled);
            prev_clean = clean;
            prev_garbled = garbled;
        });
        match end {
            WalkEnd::Exited { upper: hit, u_exit } if tau_garbled.is_finite() => Some(CoupledOutcome {
                path_index: i,
                terminal_belief: if hit { upper } else { lower },
                tau_garbled,
                tau_clean,
                u_exit,
            }),
            _ => None,
        }
    })
}

/// Summarizes calendar exit times; success means stopping at `upper`.
pub fn hitting_stats(outcomes: &[PathOutcome], upper: f64) -> Result<HittingStats> {
    HittingStats::new(
        outcomes.iter().map(|o| o.tau).collect(),
        outcomes.iter().map(|o| o.terminal_belief == upper).collect(),
    )
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("t_grid must be nonnegative and increasing".into()));
    }
    Ok(())
}

/// Empirical residual expected time `R(t) = mean((tau - t)+)`.
pub fn residual_curve(stats: &HittingStats, t_grid: &[f64]) -> Result<Vec<f64>> {
    Ok(residual_curve_with_se(stats, t_grid)?.into_iter().map(|(r, _)| r).collect())
}

/// Residual curve with the standard error of each point.
pub fn residual_curve_with_se(stats: &HittingStats, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if stats.samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    check_grid(t_grid)?;
    let mut buf = Vec::with_capacity(stats.samples.len());
    Ok(t_grid
        .iter()
        .map(|&t| {
            buf.clear();
            buf.extend(stats.samples.iter().map(|&x| (x - t).max(0.0)));
            mean_and_std_err(&buf)
        })
        .collect())
}

/// `n` equally spaced points on `[0, t_max]`.
pub fn linear_grid(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Calendar-time Euler–Maruyama run with optional belief snapshots.
#[derive(Debug, Clone)]
pub struct EulerRun {
    pub stats: HittingStats,
    /// Mean and standard error of the belief at each requested horizon, with
    /// stopped paths held at their boundary.
    pub belief_at_horizons: Vec<(f64, f64)>,
}

/// Simulates `dp = sqrt(phi(p)) sigma0(p) dB` directly in calendar time with
/// step `dt = cfg.du`. Exists only to cross-check the time-change simulator.
pub fn direct_euler_check(
    params: &ModelParams,
    lower: f64,
    upper: f64,
    garbling: &GarblingPolicy,
    cfg: &SimConfig,
) -> Result<HittingStats> {
    Ok(euler_run(params, lower, upper, garbling, cfg, &[])?.stats)
}

pub fn euler_run(
    params: &ModelParams,
    lower: f64,
    upper: f64,
    garbling: &GarblingPolicy,
    cfg: &SimConfig,
    horizons: &[f64],
) -> Result<EulerRun> {
    check_interval(params, lower, upper)?;
    check_grid(horizons)?;
    if garbling.min_attenuation() <= 0.0 {
        return Err(Error::InvalidGarbling(
            "calendar-time simulation needs strictly positive attenuation".into(),
        ));
    }
    let dt = cfg.du;
    let p0 = params.p0();
    let variance_rate = |p: f64| {
        let s = sigma0(p, params);
        garbling.attenuation(p) * s * s
    };

    struct EulerPath {
        tau: f64,
        hit_upper: bool,
        snapshots: Vec<f64>,
    }

    let paths = run_paths(cfg, |_, streams| {
        let mut snapshots = Vec::with_capacity(horizons.len());
        let mut p = p0;
        let mut t = 0.0;
        let mut qv = 0.0;
        let mut exit: Option<(bool, f64)> = None;
        while exit.is_none() {
            if qv >= cfg.max_u {
                return None;
            }
            let var = variance_rate(p) * dt;
            let z: f64 = streams.increments.sample(StandardNormal);
            let next = p + var.sqrt() * z;
            if next >= upper {
                exit = Some((true, t + dt * (upper - p) / (next - p)));
            } else if next <= lower {
                exit = Some((false, t + dt * (p - lower) / (p - next)));
            } else if cfg.bridge_correction {
                let pu = crossing_probability(upper - p, upper - next, var);
                let pl = crossing_probability(p - lower, next - lower, var);
                if pu + pl > 0.0 {
                    let x: f64 = streams.auxiliary.gen();
                    if x < pu + pl {
                        exit = Some((x < pu, t + 0.5 * dt));
                    }
                }
            }
            t += dt;
            qv += var;
            p = match exit {
                Some((true, _)) => upper,
                Some((false, _)) => lower,
                None => next,
            };
            while snapshots.len() < horizons.len() && horizons[snapshots.len()] <= t {
                snapshots.push(p);
            }
        }
        snapshots.resize(horizons.len(), p);
        let (hit_upper, tau) = exit.expect("loop ends on exit");
        Some(EulerPath { tau, hit_upper, snapshots })
    })?;

    let belief_at_horizons = (0..horizons.len())
        .map(|j| {
            let xs: Vec<f64> = paths.iter().map(|p| p.snapshots[j]).collect();
            mean_and_std_err(&xs)
        })
        .collect();
    let stats = HittingStats::new(
        paths.iter().map(|p| p.tau).collect(),
        paths.iter().map(|p| p.hit_upper).collect(),
    )?;
    Ok(EulerRun { stats, belief_at_horizons })
}

/// Formats a double with 17 significant digits, enough to round-trip.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

pub const OUTCOME_CSV_HEADER: &str = "path_index,terminal_belief,tau,u_exit";

pub fn write_outcomes_csv<W: Write>(mut w: W, outcomes: &[PathOutcome]) -> io::Result<()> {
    writeln!(w, "{OUTCOME_CSV_HEADER}")?;
    for o in outcomes {
        writeln!(
            w,
            "{},{},{},{}",
            o.path_index,
            format_number(o.terminal_belief),
            format_number(o.tau),
            format_number(o.u_exit)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: f64) -> ModelParams {
        ModelParams::from_snr(k, 0.5, 0.75).unwrap()
    }

    fn cfg(n: usize) -> SimConfig {
        SimConfig { n_paths: n, du: 1e-4, max_u: 10.0, seed: 11, bridge_correction: true }
    }

    #[test]
    fn sigma0_values() {
        assert_eq!(sigma0(0.5, &params(1.0)), 0.25);
        assert_eq!(sigma0(0.0, &params(3.0)), 0.0);
        assert_eq!(sigma0(1.0, &params(3.0)), 0.0);
        assert_eq!(sigma0(0.25, &params(2.0)), 0.375);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0).validate().is_err());
        assert!(SimConfig { du: 0.0, ..cfg(1) }.validate().is_err());
        assert!(SimConfig { max_u: f64::INFINITY, ..cfg(1) }.validate().is_err());
        let json = serde_json::to_value(cfg(5)).unwrap();
        let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["bridge_correction", "du", "max_u", "n_paths", "seed"]);
    }

    #[test]
    fn rejects_bad_intervals() {
        let p = params(1.0);
        let g = GarblingPolicy::none();
        assert!(matches!(simulate_exit(&p, 0.6, 0.75, &g, &cfg(10)), Err(Error::InvalidInterval(_))));
        assert!(matches!(simulate_exit(&p, 0.0, 0.75, &g, &cfg(10)), Err(Error::Divergent(_))));
        assert!(matches!(simulate_exit(&p, 0.25, 1.0, &g, &cfg(10)), Err(Error::Divergent(_))));
    }

    #[test]
    fn terminal_beliefs_snap_to_boundaries() {
        let out = simulate_exit(&params(1.0), 0.25, 0.75, &GarblingPolicy::none(), &cfg(500)).unwrap();
        assert_eq!(out.len(), 500);
        assert!(out.iter().all(|o| o.terminal_belief == 0.25 || o.terminal_belief == 0.75));
        assert!(out.iter().enumerate().all(|(i, o)| o.path_index == i));
    }

    #[test]
    fn tau_bounded_by_extreme_volatilities() {
        let p = params(1.0);
        let out = simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::none(), &cfg(500)).unwrap();
        let max_s2 = sigma0(0.5, &p).powi(2);
        let min_s2 = sigma0(0.25, &p).powi(2);
        for o in &out {
            assert!(o.tau >= o.u_exit / max_s2 * (1.0 - 1e-12));
            assert!(o.tau <= o.u_exit / min_s2 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn constant_attenuation_doubles_time_exactly() {
        let p = params(1.0);
        let clean = simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::none(), &cfg(300)).unwrap();
        let half = simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::Constant(0.5), &cfg(300)).unwrap();
        for (a, b) in clean.iter().zip(&half) {
            assert_eq!(b.tau, 2.0 * a.tau);
            assert_eq!(a.terminal_belief, b.terminal_belief);
            assert_eq!(a.u_exit, b.u_exit);
        }
    }

    #[test]
    fn snr_rescales_time_pathwise() {
        let a = simulate_exit(&params(1.0), 0.25, 0.75, &GarblingPolicy::none(), &cfg(200)).unwrap();
        let b = simulate_exit(&params(2.0), 0.25, 0.75, &GarblingPolicy::none(), &cfg(200)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y.tau - x.tau / 4.0).abs() <= 1e-12 * x.tau);
        }
    }

    #[test]
    fn coupled_identity_attenuation_is_equal() {
        let out =
            coupled_no_garbling_comparison(&params(1.0), 0.25, 0.75, &GarblingPolicy::none(), &cfg(300))
                .unwrap();
        assert!(out.iter().all(|o| o.tau_garbled == o.tau_clean));
    }

    #[test]
    fn coupled_matches_separate_runs() {
        let p = params(1.0);
        let g = GarblingPolicy::piecewise(vec![0.5], vec![0.5, 1.0]).unwrap();
        let coupled = coupled_no_garbling_comparison(&p, 0.25, 0.75, &g, &cfg(300)).unwrap();
        let clean = simulate_exit(&p, 0.25, 0.75, &GarblingPolicy::none(), &cfg(300)).unwrap();
        let garbled = simulate_exit(&p, 0.25, 0.75, &g, &cfg(300)).unwrap();
        for ((c, a), b) in coupled.iter().zip(&clean).zip(&garbled) {
            assert_eq!(c.tau_clean, a.tau);
            assert_eq!(c.tau_garbled, b.tau);
            assert_eq!(a.terminal_belief, b.terminal_belief);
            assert_eq!(c.terminal_belief, a.terminal_belief);
            assert!(c.tau_garbled >= c.tau_clean);
        }
    }

    #[test]
    fn zero_attenuation_censors() {
        let p = params(1.0);
        let g = GarblingPolicy::Constant(0.0);
        assert!(matches!(
            simulate_exit(&p, 0.25, 0.75, &g, &cfg(50)),
            Err(Error::Censored { censored: 50, n_paths: 50 })
        ));
        assert!(matches!(direct_euler_check(&p, 0.25, 0.75, &g, &cfg(5)), Err(Error::InvalidGarbling(_))));
    }

    #[test]
    fn tiny_cap_censors() {
        let c = SimConfig { max_u: 1e-3, ..cfg(100) };
        let r = simulate_exit(&params(1.0), 0.25, 0.75, &GarblingPolicy::none(), &c);
        assert!(matches!(r, Err(Error::Censored { .. })));
    }

    #[test]
    fn residual_curve_examples() {
        let s = HittingStats::from_samples(vec![2.0, 2.0, 2.0]).unwrap();
        assert_eq!(residual_curve(&s, &[1.0]).unwrap(), vec![1.0]);
        assert_eq!(residual_curve(&s, &[5.0]).unwrap(), vec![0.0]);
        let s = HittingStats::from_samples(vec![1.0, 3.0]).unwrap();
        assert_eq!(residual_curve(&s, &[0.0, 2.0]).unwrap(), vec![2.0, 0.5]);
        assert!(residual_curve(&s, &[1.0, 0.5]).is_err());
        assert!(residual_curve(&s, &[-1.0]).is_err());
        let empty = HittingStats { samples: vec![], n: 0, mean: 0.0, std_err: 0.0, success_indicator: vec![] };
        assert_eq!(residual_curve(&empty, &[0.0]), Err(Error::EmptySamples));
    }

    #[test]
    fn csv_layout() {
        let out = vec![PathOutcome { path_index: 3, terminal_belief: 0.75, tau: 1.5, u_exit: 0.0625 }];
        let mut buf = Vec::new();
        write_outcomes_csv(&mut buf, &out).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "path_index,terminal_belief,tau,u_exit");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "3");
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.75);
        assert_eq!(row[3], "6.2500000000000000e-2");
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let p = params(1.0);
        let g = GarblingPolicy::none();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_exit(&p, 0.25, 0.75, &g, &cfg(400)).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
