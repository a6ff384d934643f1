//! Delay cost models and their expected values at exit times.

use serde::{Deserialize, Serialize};

use crate::closed_forms::{expected_exit_time, laplace_exit_transform, second_moment_exit_time};
use crate::dynamics::{residual_curve_with_se, simulate_exit, SimConfig};
use crate::model::{mean_and_std_err, validate_law, GarblingPolicy, HittingStats, ModelParams, TerminalLaw};
use crate::{Error, Result};

/// Points of the grid used to validate monotonicity and convexity.
const SHAPE_CHECK_POINTS: usize = 4001;

/// Unvalidated cost description, the JSON form of [`CostModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CostSpec {
    /// `rate · t`
    Linear { rate: f64 },
    /// `coef · t^exponent`
    Power { coef: f64, exponent: f64 },
    /// `affine_rate · t + Σ w (1 - e^{-s t})` over `(s, w)` atoms. Weights may
    /// be negative as long as the total stays increasing and convex.
    LaplaceMixture { affine_rate: f64, atoms: Vec<(f64, f64)> },
    /// Piecewise-linear through `(t, c)` knots starting at `(0, 0)`, extended
    /// past the last knot with the last slope.
    Tabulated { knots: Vec<(f64, f64)> },
    /// Sum of the component costs.
    Sum { terms: Vec<CostSpec> },
}

/// An increasing convex delay cost with `c(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostSpec", into = "CostSpec")]
pub struct CostModel {
    spec: CostSpec,
}

impl CostModel {
    pub fn new(spec: CostSpec) -> Result<Self> {
        validate_spec(&spec)?;
        Ok(Self { spec })
    }

    pub fn linear(rate: f64) -> Result<Self> {
        Self::new(CostSpec::Linear { rate })
    }

    pub fn power(coef: f64, exponent: f64) -> Result<Self> {
        Self::new(CostSpec::Power { coef, exponent })
    }

    pub fn laplace_mixture(affine_rate: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(CostSpec::LaplaceMixture { affine_rate, atoms })
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(CostSpec::Tabulated { knots })
    }

    pub fn sum(terms: Vec<CostModel>) -> Result<Self> {
        Self::new(CostSpec::Sum { terms: terms.into_iter().map(|t| t.spec).collect() })
    }

    /// `self + weight · t²`; unchanged for a zero weight.
    pub fn plus_quadratic(&self, weight: f64) -> Result<Self> {
        if weight == 0.0 {
            return Ok(self.clone());
        }
        Self::sum(vec![self.clone(), Self::power(weight, 2.0)?])
    }

    pub fn spec(&self) -> &CostSpec {
        &self.spec
    }

    pub fn eval(&self, t: f64) -> f64 {
        eval_spec(&self.spec, t)
    }

    /// Whether [`expected_cost`] needs simulation for this model.
    pub fn needs_monte_carlo(&self) -> bool {
        let mut closed = Vec::new();
        let mut mc = Vec::new();
        split_terms(&self.spec, &mut closed, &mut mc);
        !mc.is_empty()
    }
}

impl TryFrom<CostSpec> for CostModel {
    type Error = Error;

    fn try_from(spec: CostSpec) -> Result<Self> {
        Self::new(spec)
    }
}

impl From<CostModel> for CostSpec {
    fn from(c: CostModel) -> Self {
        c.spec
    }
}

pub fn eval_cost(c: &CostModel, t: f64) -> f64 {
    c.eval(t)
}

fn eval_spec(spec: &CostSpec, t: f64) -> f64 {
    match spec {
        CostSpec::Linear { rate } => rate * t,
        CostSpec::Power { coef, exponent } => coef * t.powf(*exponent),
        CostSpec::LaplaceMixture { affine_rate, atoms } => {
            affine_rate * t + atoms.iter().map(|&(s, w)| -w * (-s * t).exp_m1()).sum::<f64>()
        }
        CostSpec::Tabulated { knots } => interpolate(knots, t),
        CostSpec::Sum { terms } => terms.iter().map(|c| eval_spec(c, t)).sum(),
    }
}

fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    let i = knots.partition_point(|k| k.0 <= t).clamp(1, knots.len() - 1);
    let (t0, c0) = knots[i - 1];
    let (t1, c1) = knots[i];
    c0 + (t - t0) * (c1 - c0) / (t1 - t0)
}

fn invalid(msg: String) -> Result<()> {
    Err(Error::InvalidCost(msg))
}

fn validate_spec(spec: &CostSpec) -> Result<()> {
    match spec {
        CostSpec::Linear { rate } => {
            if !(*rate > 0.0 && rate.is_finite()) {
                return invalid(format!("linear rate must be positive, got {rate}"));
            }
        }
        CostSpec::Power { coef, exponent } => {
            if !(*coef > 0.0 && coef.is_finite()) {
                return invalid(format!("power coefficient must be positive, got {coef}"));
            }
            if !(*exponent >= 1.0 && exponent.is_finite()) {
                return invalid(format!("power exponent must be at least 1, got {exponent}"));
            }
        }
        CostSpec::LaplaceMixture { affine_rate, atoms } => validate_mixture(*affine_rate, atoms)?,
        CostSpec::Tabulated { knots } => validate_knots(knots)?,
        CostSpec::Sum { terms } => {
            if terms.is_empty() {
                return invalid("sum needs at least one term".into());
            }
            for t in terms {
                validate_spec(t)?;
            }
        }
    }
    Ok(())
}

/// Checks `c' >= 0` and `c'' >= 0` on a dense grid over `[0, 40 / s_min]`,
/// past which every exponential term is below `e^-40`, and checks the sign
/// of the slowest-decaying curvature term for the tail.
fn validate_mixture(affine_rate: f64, atoms: &[(f64, f64)]) -> Result<()> {
    if !(affine_rate >= 0.0 && affine_rate.is_finite()) {
        return invalid(format!("affine rate must be nonnegative, got {affine_rate}"));
    }
    if let Some(&(s, w)) = atoms.iter().find(|(s, w)| !(*s > 0.0 && s.is_finite() && w.is_finite())) {
        return invalid(format!("mixture atom (s={s}, w={w}) needs s > 0 and finite weight"));
    }
    if affine_rate == 0.0 && atoms.iter().all(|a| a.1 == 0.0) {
        return invalid("mixture is identically zero".into());
    }
    if atoms.is_empty() {
        return Ok(());
    }
    let slope = |t: f64| affine_rate + atoms.iter().map(|&(s, w)| w * s * (-s * t).exp()).sum::<f64>();
    let curvature = |t: f64| -atoms.iter().map(|&(s, w)| w * s * s * (-s * t).exp()).sum::<f64>();
    let scale = affine_rate + atoms.iter().map(|&(s, w)| w.abs() * s * (1.0 + s)).sum::<f64>();
    let tol = 1e-12 * scale;
    let s_min = atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    let horizon = 40.0 / s_min;
    for i in 0..SHAPE_CHECK_POINTS {
        let t = horizon * i as f64 / (SHAPE_CHECK_POINTS - 1) as f64;
        if slope(t) < -tol {
            return invalid(format!("mixture cost decreases at t={t} (slope {})", slope(t)));
        }
        if curvature(t) < -tol {
            return invalid(format!("mixture cost is concave at t={t} (curvature {})", curvature(t)));
        }
    }
    let mut rates: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    for s in rates {
        let weight: f64 = atoms.iter().filter(|a| a.0 == s).map(|a| a.1).sum();
        if weight > 0.0 {
            return invalid(format!("mixture cost is eventually concave (net weight {weight} at s={s})"));
        }
        if weight < 0.0 {
            break;
        }
    }
    Ok(())
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<()> {
    if knots.len() < 2 {
        return invalid("tabulated cost needs at least two knots".into());
    }
    if knots[0] != (0.0, 0.0) {
        return invalid(format!("tabulated cost must start at (0, 0), got {:?}", knots[0]));
    }
    if knots.iter().any(|k| !(k.0.is_finite() && k.1.is_finite())) {
        return invalid("tabulated knots must be finite".into());
    }
    let mut prev_slope = 0.0;
    for (i, w) in knots.windows(2).enumerate() {
        let dt = w[1].0 - w[0].0;
        if !(dt > 0.0) {
            return invalid(format!("knot times must increase strictly (knot {})", i + 1));
        }
        let slope = (w[1].1 - w[0].1) / dt;
        let tol = 1e-12 * slope.abs().max(prev_slope).max(1.0);
        if slope < -tol {
            return invalid(format!("tabulated cost decreases between knots {i} and {}", i + 1));
        }
        if slope < prev_slope - tol {
            return invalid(format!("tabulated cost is not convex at knot {i}"));
        }
        prev_slope = slope;
    }
    Ok(())
}

/// Expected cost with its Monte Carlo standard error (zero for exact routes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_err: f64,
}

impl CostEstimate {
    pub const ZERO: Self = Self { mean: 0.0, std_err: 0.0 };
}

/// Splits a cost into terms with an exact route and terms that need
/// simulation.
fn split_terms<'a>(spec: &'a CostSpec, closed: &mut Vec<&'a CostSpec>, mc: &mut Vec<&'a CostSpec>) {
    match spec {
        CostSpec::Sum { terms } => terms.iter().for_each(|t| split_terms(t, closed, mc)),
        CostSpec::Power { exponent, .. } if *exponent != 1.0 && *exponent != 2.0 => mc.push(spec),
        CostSpec::Tabulated { .. } => mc.push(spec),
        _ => closed.push(spec),
    }
}

fn closed_form_term(spec: &CostSpec, lower: f64, upper: f64, params: &ModelParams) -> Result<f64> {
    let p0 = params.p0();
    let mean = || expected_exit_time(p0, lower, upper, params);
    Ok(match spec {
        CostSpec::Linear { rate } => rate * mean()?,
        CostSpec::Power { coef, exponent } if *exponent == 1.0 => coef * mean()?,
        CostSpec::Power { coef, .. } => coef * second_moment_exit_time(p0, lower, upper, params)?,
        CostSpec::LaplaceMixture { affine_rate, atoms } => {
            let mut total = if *affine_rate > 0.0 { affine_rate * mean()? } else { 0.0 };
            for &(s, w) in atoms {
                total += w * (1.0 - laplace_exit_transform(s, p0, lower, upper, params)?);
            }
            total
        }
        CostSpec::Tabulated { .. } | CostSpec::Sum { .. } => unreachable!("split_terms routes these"),
    })
}

/// Expected cost of stopping when the ungarbled posterior, started at the
/// prior, leaves `[lower, upper]`.
///
/// Linear, quadratic, unit-exponent power and Laplace-mixture terms are
/// exact (first and second exit-time moments and the exit-time Laplace
/// transform). Other power exponents and tabulated costs are averaged over
/// `sim.n_paths` simulated exits; the same seed gives the same driving paths
/// for every interval.
pub fn expected_cost_on_interval(
    c: &CostModel,
    lower: f64,
    upper: f64,
    params: &ModelParams,
    sim: &SimConfig,
) -> Result<CostEstimate> {
    let p0 = params.p0();
    if !(0.0 <= lower && lower <= p0 && p0 <= upper && upper <= 1.0) {
        return Err(Error::InvalidInterval(format!(
            "need 0 <= lower <= p0 <= upper <= 1, got lower={lower}, p0={p0}, upper={upper}"
        )));
    }
    if lower == p0 || upper == p0 {
        return Ok(CostEstimate::ZERO);
    }
    if lower == 0.0 || upper == 1.0 {
        return Err(Error::Divergent(format!(
            "exit time from [{lower}, {upper}] is not finite, so the expected cost is infinite"
        )));
    }
    let (mut closed, mut mc) = (Vec::new(), Vec::new());
    split_terms(&c.spec, &mut closed, &mut mc);
    let mut mean = 0.0;
    for term in closed {
        mean += closed_form_term(term, lower, upper, params)?;
    }
    let mut std_err = 0.0;
    if !mc.is_empty() {
        let outcomes = simulate_exit(params, lower, upper, &GarblingPolicy::none(), sim)?;
        let costs: Vec<f64> =
            outcomes.iter().map(|o| mc.iter().map(|t| eval_spec(t, o.tau)).sum::<f64>()).collect();
        let (m, se) = mean_and_std_err(&costs);
        mean += m;
        std_err = se;
    }
    Ok(CostEstimate { mean, std_err })
}

/// Expected cost of embedding a two-atom (or point-mass) law without
/// garbling. See [`expected_cost_on_interval`] for the evaluation routes.
pub fn expected_cost(
    c: &CostModel,
    law: &TerminalLaw,
    params: &ModelParams,
    sim: &SimConfig,
) -> Result<CostEstimate> {
    let report = validate_law(law, params);
    if !report.is_ok() {
        return Err(Error::InvalidLaw(report.to_string()));
    }
    if law.len() == 1 {
        return Ok(CostEstimate::ZERO);
    }
    let (lower, upper) = law
        .boundaries()
        .ok_or_else(|| Error::InvalidLaw(format!("expected a two-atom law, got {} atoms", law.len())))?;
    expected_cost_on_interval(c, lower, upper, params, sim)
}

/// Sample mean and standard error of `c(tau)`.
pub fn monte_carlo_cost(c: &CostModel, samples: &[f64]) -> CostEstimate {
    let costs: Vec<f64> = samples.iter().map(|&t| c.eval(t)).collect();
    let (mean, std_err) = mean_and_std_err(&costs);
    CostEstimate { mean, std_err }
}

/// Pointwise comparison of residual curves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcxReport {
    pub t_grid: Vec<f64>,
    pub residual_a: Vec<f64>,
    pub residual_b: Vec<f64>,
    /// Allowed shortfall at each grid point, `se_multiplier · (SE_a + SE_b)`.
    pub tolerance: Vec<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_tolerance: f64,
    pub dominates: bool,
}

impl IcxReport {
    /// Worst `R_a - R_b + tol` over the grid; negative means a violation.
    pub fn worst_margin(&self) -> f64 {
        self.residual_a
            .iter()
            .zip(&self.residual_b)
            .zip(&self.tolerance)
            .map(|((a, b), t)| a - b + t)
            .fold(self.mean_a - self.mean_b + self.mean_tolerance, f64::min)
    }
}

pub fn icx_report(a: &HittingStats, b: &HittingStats, t_grid: &[f64], se_multiplier: f64) -> Result<IcxReport> {
    let ra = residual_curve_with_se(a, t_grid)?;
    let rb = residual_curve_with_se(b, t_grid)?;
    let tolerance: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| se_multiplier * (x.1 + y.1)).collect();
    let mean_tolerance = se_multiplier * (a.std_err + b.std_err);
    let pointwise = ra.iter().zip(&rb).zip(&tolerance).all(|((x, y), tol)| x.0 >= y.0 - tol);
    let dominates = pointwise && a.mean >= b.mean - mean_tolerance;
    Ok(IcxReport {
        t_grid: t_grid.to_vec(),
        residual_a: ra.into_iter().map(|x| x.0).collect(),
        residual_b: rb.into_iter().map(|x| x.0).collect(),
        tolerance,
        mean_a: a.mean,
        mean_b: b.mean,
        mean_tolerance,
        dominates,
    })
}

/// Empirical increasing-convex-order test: `a` dominates `b` when its
/// residual curve and mean are no lower, up to two combined standard errors.
pub fn icx_dominates(a: &HittingStats, b: &HittingStats, t_grid: &[f64]) -> bool {
    icx_report(a, b, t_grid, 2.0).map(|r| r.dominates).unwrap_or(false)
}
