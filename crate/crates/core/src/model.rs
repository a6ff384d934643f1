//! Domain types: model parameters, Bayes-plausible terminal laws, garbling
//! policies and Monte Carlo hitting-time summaries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance for mass normalization and Bayes plausibility.
pub const LAW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ModelParamsRepr {
    mu_h: f64,
    mu_l: f64,
    sigma: f64,
    p0: f64,
    p_bar: f64,
}

/// Parameters of the belief diffusion.
///
/// The fundamental is `dX = mu dt + sigma dB` with `mu` equal to `mu_h` in the
/// high state and `mu_l` in the low state. The common prior on the high state
/// is `p0`, and the receiver approves once the posterior reaches `p_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParamsRepr", into = "ModelParamsRepr")]
pub struct ModelParams {
    mu_h: f64,
    mu_l: f64,
    sigma: f64,
    p0: f64,
    p_bar: f64,
}

impl ModelParams {
    pub fn new(mu_h: f64, mu_l: f64, sigma: f64, p0: f64, p_bar: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        for (name, v) in [("mu_h", mu_h), ("mu_l", mu_l), ("sigma", sigma), ("p0", p0), ("p_bar", p_bar)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if mu_h <= mu_l {
            return bad(format!("mu_h > mu_l required, got mu_h={mu_h}, mu_l={mu_l}"));
        }
        if sigma <= 0.0 {
            return bad(format!("sigma > 0 required, got {sigma}"));
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return bad(format!("0 < p0 < 1 required, got p0={p0}"));
        }
        if !(p_bar > 0.0 && p_bar < 1.0) {
            return bad(format!("0 < p_bar < 1 required, got p_bar={p_bar}"));
        }
        if p0 >= p_bar {
            return bad(format!("p0 < p_bar required, got p0={p0}, p_bar={p_bar}"));
        }
        Ok(Self { mu_h, mu_l, sigma, p0, p_bar })
    }

    /// Unit-volatility parameters with signal-to-noise ratio `snr`.
    pub fn from_snr(snr: f64, p0: f64, p_bar: f64) -> Result<Self> {
        Self::new(snr, 0.0, 1.0, p0, p_bar)
    }

    pub fn mu_h(&self) -> f64 {
        self.mu_h
    }

    pub fn mu_l(&self) -> f64 {
        self.mu_l
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p_bar(&self) -> f64 {
        self.p_bar
    }

    /// Signal-to-noise ratio `(mu_h - mu_l) / sigma`.
    pub fn snr(&self) -> f64 {
        (self.mu_h - self.mu_l) / self.sigma
    }

    /// Same volatility and low drift, high drift moved so the SNR equals `snr`.
    pub fn with_snr(&self, snr: f64) -> Result<Self> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::InvalidParams(format!("snr must be positive, got {snr}")));
        }
        Self::new(self.mu_l + snr * self.sigma, self.mu_l, self.sigma, self.p0, self.p_bar)
    }

    pub fn with_prior(&self, p0: f64) -> Result<Self> {
        Self::new(self.mu_h, self.mu_l, self.sigma, p0, self.p_bar)
    }

    pub fn with_threshold(&self, p_bar: f64) -> Result<Self> {
        Self::new(self.mu_h, self.mu_l, self.sigma, self.p0, p_bar)
    }
}

impl TryFrom<ModelParamsRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ModelParamsRepr) -> Result<Self> {
        Self::new(r.mu_h, r.mu_l, r.sigma, r.p0, r.p_bar)
    }
}

impl From<ModelParams> for ModelParamsRepr {
    fn from(p: ModelParams) -> Self {
        Self { mu_h: p.mu_h, mu_l: p.mu_l, sigma: p.sigma, p0: p.p0, p_bar: p.p_bar }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TerminalLawRepr {
    atoms: Vec<(f64, f64)>,
}

/// A finitely supported distribution of terminal posteriors.
///
/// Construction checks the structural invariants (beliefs in `[0,1]` and
/// strictly increasing, masses in `(0,1]` summing to one). Bayes plausibility
/// depends on the prior and is checked by [`validate_law`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TerminalLawRepr", into = "TerminalLawRepr")]
pub struct TerminalLaw {
    atoms: Vec<(f64, f64)>,
}

impl TerminalLaw {
    /// Builds a law from `(belief, mass)` atoms. Masses whose sum is within
    /// [`LAW_TOL`] of one are renormalized.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let report = structural_violations(&atoms);
        if !report.is_empty() {
            return Err(Error::InvalidLaw(LawReport { violations: report }.to_string()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let atoms = if total != 1.0 {
            atoms.into_iter().map(|(b, m)| (b, m / total)).collect()
        } else {
            atoms
        };
        Ok(Self { atoms })
    }

    pub fn point_mass(belief: f64) -> Result<Self> {
        Self::new(vec![(belief, 1.0)])
    }

    /// The Bayes-plausible law on `{lower, upper}` with mean `p0`.
    pub fn two_point(lower: f64, upper: f64, p0: f64) -> Result<Self> {
        if !(lower <= p0 && p0 <= upper) {
            return Err(Error::InvalidLaw(format!(
                "prior {p0} outside support hull [{lower}, {upper}]"
            )));
        }
        if lower == upper {
            return Self::point_mass(p0);
        }
        let q = (p0 - lower) / (upper - lower);
        if q <= 0.0 {
            Self::point_mass(lower)
        } else if q >= 1.0 {
            Self::point_mass(upper)
        } else {
            Self::new(vec![(lower, 1.0 - q), (upper, q)])
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(b, m)| b * m).sum()
    }

    pub fn min_support(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn max_support(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// `Some((lower, upper))` for a two-atom law, `None` otherwise.
    pub fn boundaries(&self) -> Option<(f64, f64)> {
        match self.atoms.as_slice() {
            [(l, _), (u, _)] => Some((*l, *u)),
            _ => None,
        }
    }
}

impl TryFrom<TerminalLawRepr> for TerminalLaw {
    type Error = Error;

    fn try_from(r: TerminalLawRepr) -> Result<Self> {
        Self::new(r.atoms)
    }
}

impl From<TerminalLaw> for TerminalLawRepr {
    fn from(l: TerminalLaw) -> Self {
        Self { atoms: l.atoms }
    }
}

/// One failed invariant of a candidate terminal law.
#[derive(Debug, Clone, PartialEq)]
pub enum LawViolation {
    Empty,
    BeliefOutOfRange { index: usize, belief: f64 },
    MassOutOfRange { index: usize, mass: f64 },
    NotIncreasing { index: usize, previous: f64, belief: f64 },
    MassSum { total: f64, discrepancy: f64 },
    Mean { mean: f64, prior: f64, discrepancy: f64 },
}

impl fmt::Display for LawViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "law has no atoms"),
            Self::BeliefOutOfRange { index, belief } => {
                write!(f, "atom {index}: belief {belief} outside [0, 1]")
            }
            Self::MassOutOfRange { index, mass } => {
                write!(f, "atom {index}: mass {mass} outside (0, 1]")
            }
            Self::NotIncreasing { index, previous, belief } => {
                write!(f, "atom {index}: belief {belief} not above previous {previous}")
            }
            Self::MassSum { total, discrepancy } => {
                write!(f, "masses sum to {total} (off by {discrepancy:e})")
            }
            Self::Mean { mean, prior, discrepancy } => {
                write!(f, "mean {mean} differs from prior {prior} by {discrepancy:e}")
            }
        }
    }
}

/// Result of [`validate_law`]; empty means every invariant holds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LawReport {
    pub violations: Vec<LawViolation>,
}

impl LawReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for LawReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn structural_violations(atoms: &[(f64, f64)]) -> Vec<LawViolation> {
    let mut out = Vec::new();
    if atoms.is_empty() {
        out.push(LawViolation::Empty);
        return out;
    }
    for (i, &(b, m)) in atoms.iter().enumerate() {
        if !(0.0..=1.0).contains(&b) {
            out.push(LawViolation::BeliefOutOfRange { index: i, belief: b });
        }
        if !(m > 0.0 && m <= 1.0) {
            out.push(LawViolation::MassOutOfRange { index: i, mass: m });
        }
        if i > 0 && !(b > atoms[i - 1].0) {
            out.push(LawViolation::NotIncreasing { index: i, previous: atoms[i - 1].0, belief: b });
        }
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    let discrepancy = (total - 1.0).abs();
    if !(discrepancy <= LAW_TOL) {
        out.push(LawViolation::MassSum { total, discrepancy });
    }
    out
}

/// Checks raw atoms against every terminal-law invariant for prior `p0`.
pub fn validate_atoms(atoms: &[(f64, f64)], p0: f64) -> LawReport {
    let mut violations = structural_violations(atoms);
    if !atoms.is_empty() {
        let mean: f64 = atoms.iter().map(|&(b, m)| b * m).sum();
        let discrepancy = (mean - p0).abs();
        if !(discrepancy <= LAW_TOL) {
            violations.push(LawViolation::Mean { mean, prior: p0, discrepancy });
        }
    }
    LawReport { violations }
}

pub fn validate_law(law: &TerminalLaw, params: &ModelParams) -> LawReport {
    validate_atoms(law.atoms(), params.p0())
}

/// Largest feasible success probability, `p0 / p_bar`.
pub fn max_success_probability(params: &ModelParams) -> f64 {
    params.p0() / params.p_bar()
}

/// The binary law that reaches `p_bar` with probability `p_success` and puts
/// the remaining mass on the lower belief fixed by the martingale constraint,
/// `(p0 - p_success * p_bar) / (1 - p_success)`.
pub fn make_two_atom_law(params: &ModelParams, p_success: f64) -> Result<TerminalLaw> {
    let (p0, p_bar) = (params.p0(), params.p_bar());
    let p_max = max_success_probability(params);
    if !(p_success >= 0.0 && p_success <= p_max * (1.0 + 4.0 * f64::EPSILON)) {
        return Err(Error::InvalidArgument(format!(
            "success probability {p_success} outside [0, p0/p_bar = {p_max}]"
        )));
    }
    if p_success == 0.0 {
        return TerminalLaw::point_mass(p0);
    }
    let mut lower = (p0 - p_success * p_bar) / (1.0 - p_success);
    if lower < 0.0 {
        if lower < -LAW_TOL {
            return Err(Error::InvalidArgument(format!(
                "success probability {p_success} forces a negative lower belief {lower}"
            )));
        }
        lower = 0.0;
    }
    TerminalLaw::new(vec![(lower, 1.0 - p_success), (p_bar, p_success)])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum GarblingRepr {
    None,
    Constant { value: f64 },
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

/// State-only attenuation `phi(p)` of the posterior's quadratic variation.
///
/// Every garbling of the fundamental signal multiplies the instantaneous
/// variance of the posterior by a factor in `[0, 1]`; `phi = 1` is no
/// garbling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GarblingRepr", into = "GarblingRepr")]
pub enum GarblingPolicy {
    Constant(f64),
    /// `values[i]` applies on `[breaks[i-1], breaks[i])`, with the first and
    /// last pieces unbounded.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation between `(grid[i], values[i])`, flat outside.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl GarblingPolicy {
    pub fn none() -> Self {
        Self::Constant(1.0)
    }

    pub fn constant(value: f64) -> Result<Self> {
        check_attenuations(&[value])?;
        Ok(Self::Constant(value))
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::InvalidGarbling(format!(
                "piecewise policy needs one more value than breaks, got {} breaks and {} values",
                breaks.len(),
                values.len()
            )));
        }
        check_increasing(&breaks, "breaks")?;
        check_attenuations(&values)?;
        Ok(Self::Piecewise { breaks, values })
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::InvalidGarbling(format!(
                "tabulated policy needs matching non-empty grid and values, got {} and {}",
                grid.len(),
                values.len()
            )));
        }
        check_increasing(&grid, "grid")?;
        check_attenuations(&values)?;
        Ok(Self::Tabulated { grid, values })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Self::Constant(v) if *v == 1.0)
    }

    #[inline]
    pub fn attenuation(&self, p: f64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Piecewise { breaks, values } => values[breaks.partition_point(|&b| b <= p)],
            Self::Tabulated { grid, values } => {
                let i = grid.partition_point(|&g| g <= p);
                if i == 0 {
                    values[0]
                } else if i == grid.len() {
                    values[grid.len() - 1]
                } else {
                    let (x0, x1) = (grid[i - 1], grid[i]);
                    let w = (p - x0) / (x1 - x0);
                    values[i - 1] + w * (values[i] - values[i - 1])
                }
            }
        }
    }

    /// Smallest attenuation anywhere in `[0, 1]`.
    pub fn min_attenuation(&self) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Piecewise { values, .. } | Self::Tabulated { values, .. } => {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }
}

impl Default for GarblingPolicy {
    fn default() -> Self {
        Self::none()
    }
}

fn check_attenuations(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::InvalidGarbling(format!("attenuation {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn check_increasing(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGarbling(format!("{what} must be finite and strictly increasing")));
    }
    Ok(())
}

impl TryFrom<GarblingRepr> for GarblingPolicy {
    type Error = Error;

    fn try_from(r: GarblingRepr) -> Result<Self> {
        match r {
            GarblingRepr::None => Ok(Self::none()),
            GarblingRepr::Constant { value } => Self::constant(value),
            GarblingRepr::Piecewise { breaks, values } => Self::piecewise(breaks, values),
            GarblingRepr::Tabulated { grid, values } => Self::tabulated(grid, values),
        }
    }
}

impl From<GarblingPolicy> for GarblingRepr {
    fn from(g: GarblingPolicy) -> Self {
        match g {
            GarblingPolicy::Constant(v) if v == 1.0 => Self::None,
            GarblingPolicy::Constant(value) => Self::Constant { value },
            GarblingPolicy::Piecewise { breaks, values } => Self::Piecewise { breaks, values },
            GarblingPolicy::Tabulated { grid, values } => Self::Tabulated { grid, values },
        }
    }
}

/// Monte Carlo summary of a stopping time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingStats {
    pub samples: Vec<f64>,
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
    /// Whether each sample stopped at the upper boundary.
    pub success_indicator: Vec<bool>,
}

impl HittingStats {
    pub fn new(samples: Vec<f64>, success_indicator: Vec<bool>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if success_indicator.len() != samples.len() {
            return Err(Error::InvalidArgument(format!(
                "{} success flags for {} samples",
                success_indicator.len(),
                samples.len()
            )));
        }
        let (mean, std_err) = mean_and_std_err(&samples);
        Ok(Self { n: samples.len(), samples, mean, std_err, success_indicator })
    }

    /// Stats for samples with no boundary information (all flagged as failures).
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        let flags = vec![false; samples.len()];
        Self::new(samples, flags)
    }

    pub fn success_fraction(&self) -> f64 {
        self.success_indicator.iter().filter(|&&s| s).count() as f64 / self.n as f64
    }

    /// Standard error of the success fraction.
    pub fn success_std_err(&self) -> f64 {
        let p = self.success_fraction();
        (p * (1.0 - p) / self.n as f64).sqrt()
    }
}

/// Sample mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_and_std_err(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}
