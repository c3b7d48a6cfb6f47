//! Per-step update cycle for discounted Bayesian and BIB inference.
//!
//! The estimator tracks the mean of a Gaussian data stream with a Gaussian
//! prior N(θ_t, Φ_t) and a Gaussian likelihood of variance Σ_t. Each step runs:
//!
//! 1. the discounted Bayesian update of the prior,
//!      α' = Φ / (Φ + (1−β)Σ),   Φ' = α'Σ,   θ' = (1−α')θ + α'd
//! 2. (BIB mode only) the inverse Bayesian expansion of the likelihood,
//!      Σ' = Σ · (Φ + Σ) / (Φ + (1−β)Σ)
//! 3. argmax-change detection over a fixed hypothesis grid μ⁰..μᴺ, resetting
//!    Σ' to Σ0 whenever the most-confident grid hypothesis changes.
//!
//! Both updates in a step read the same pre-step (Φ_t, Σ_t); neither sees the
//! other's output. Arithmetic is plain IEEE 754 binary64: overflow saturates
//! to +∞ and 1/∞ = 0, so once the variances diverge the grid densities all
//! collapse to zero, the argmax is drawn uniformly at random, and the
//! resulting reset restores finite dynamics.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("variance must be positive and not NaN, got {0}")]
    InvalidVariance(f64),
    #[error("beta must satisfy 0 <= beta < 1, got {0}")]
    InvalidBeta(f64),
    #[error("observation must be finite, got {0}")]
    InvalidObservation(f64),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty density vector")]
    EmptyDensities,
    #[error("inverse Bayesian update is not defined in Bayes mode")]
    InverseUpdateInBayesMode,
}

/// Inference variant: pure discounted Bayesian updating, or combined
/// Bayesian / inverse-Bayesian updating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bayes,
    Bib,
}

impl std::str::FromStr for Mode {
    type Err = InferenceError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bayes" => Ok(Mode::Bayes),
            "bib" => Ok(Mode::Bib),
            other => Err(InferenceError::InvalidConfig(format!(
                "unknown mode '{other}' (expected 'bayes' or 'bib')"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Bayes => write!(f, "bayes"),
            Mode::Bib => write!(f, "bib"),
        }
    }
}

/// Static configuration of one inference run.
///
/// The hypothesis grid has `grid_n + 1` points, μⁱ = grid_origin + i·grid_delta
/// for i in 0..=grid_n.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Discount rate / symmetry-bias strength, 0 <= beta < 1.
    pub beta: f64,
    /// Initial and reset likelihood variance Σ0.
    pub sigma0: f64,
    pub mode: Mode,
    /// Hypothesis-grid count N (grid has N+1 points).
    pub grid_n: usize,
    /// μ⁰.
    pub grid_origin: f64,
    /// Δμ between adjacent grid points.
    pub grid_delta: f64,
    /// Initial estimate θ0.
    pub theta0: f64,
    /// Initial prior variance Φ0.
    pub phi0: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            beta: 0.05,
            sigma0: 0.09,
            mode: Mode::Bib,
            grid_n: 50,
            grid_origin: -2.5,
            grid_delta: 0.1,
            theta0: 0.0,
            phi0: 0.09,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(InferenceError::InvalidBeta(self.beta));
        }
        if !(self.sigma0 > 0.0) || !self.sigma0.is_finite() {
            return Err(InferenceError::InvalidVariance(self.sigma0));
        }
        if !(self.phi0 > 0.0) || !self.phi0.is_finite() {
            return Err(InferenceError::InvalidVariance(self.phi0));
        }
        if !(self.grid_delta > 0.0) || !self.grid_delta.is_finite() {
            return Err(InferenceError::InvalidConfig(format!(
                "grid_delta must be positive, got {}",
                self.grid_delta
            )));
        }
        if self.grid_n < 1 {
            return Err(InferenceError::InvalidConfig("grid_n must be >= 1".into()));
        }
        if !self.grid_origin.is_finite() || !self.theta0.is_finite() {
            return Err(InferenceError::InvalidConfig(
                "grid_origin and theta0 must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Grid point μⁱ.
    pub fn grid_point(&self, i: usize) -> f64 {
        self.grid_origin + i as f64 * self.grid_delta
    }

    /// Number of grid points (N + 1).
    pub fn grid_len(&self) -> usize {
        self.grid_n + 1
    }
}

/// Posterior summary carried between steps.
///
/// `mu_max_index` is `None` only before the first grid evaluation; every step
/// stores the argmax index (drawn at random when all grid densities collapse
/// to zero).
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    /// Current estimate θ_t.
    pub theta: f64,
    /// Prior variance Φ_t (may be +∞).
    pub phi: f64,
    /// Likelihood variance Σ_t (may be +∞).
    pub sigma: f64,
    /// Last learning rate α_t.
    pub alpha: f64,
    /// Current most-confident grid hypothesis.
    pub mu_max_index: Option<usize>,
}

impl BeliefState {
    /// Initial state from the config, with the argmax seeded from the initial
    /// prior when it is well defined.
    pub fn new(cfg: &InferenceConfig) -> Result<Self, InferenceError> {
        cfg.validate()?;
        let mut state = Self {
            theta: cfg.theta0,
            phi: cfg.phi0,
            sigma: cfg.sigma0,
            alpha: 0.0,
            mu_max_index: None,
        };
        let densities = prior_density_at_grid(&state, cfg);
        state.mu_max_index = deterministic_argmax(&densities);
        Ok(state)
    }
}

/// One analyzed time step of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// Observation d_t.
    pub d: f64,
    /// True environment mean at t.
    pub eta: f64,
    pub theta: f64,
    pub phi: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Σ was reset to Σ0 this step.
    pub reset: bool,
    /// alpha > beta.
    pub active: bool,
}

/// Learning rate α = Φ / (Φ + (1−β)Σ).
///
/// Infinities follow the saturation convention: Φ = +∞ gives α = 1 (the prior
/// carries no information, the observation is absorbed wholesale; this branch
/// also covers Φ = Σ = +∞) and Σ = +∞ with finite Φ gives α = 0.
pub fn learning_rate(phi: f64, sigma: f64, beta: f64) -> Result<f64, InferenceError> {
    if !(phi > 0.0) {
        return Err(InferenceError::InvalidVariance(phi));
    }
    if !(sigma > 0.0) {
        return Err(InferenceError::InvalidVariance(sigma));
    }
    if !(beta >= 0.0 && beta < 1.0) {
        return Err(InferenceError::InvalidBeta(beta));
    }
    if phi.is_infinite() {
        return Ok(1.0);
    }
    if sigma.is_infinite() {
        return Ok(0.0);
    }
    Ok(phi / (phi + (1.0 - beta) * sigma))
}

/// Discounted Bayesian update of the prior: α' = Φ/(Φ+(1−β)Σ), Φ' = α'Σ,
/// θ' = (1−α')θ + α'd. Σ and the stored argmax are untouched.
///
/// With Σ = +∞ the product α'Σ is indeterminate; the harmonic form
/// Φ' = ((1−β)/Φ + 1/Σ)⁻¹ with 1/∞ = 0 gives the limit Φ' = Φ/(1−β).
pub fn bayes_update(
    state: &BeliefState,
    d: f64,
    cfg: &InferenceConfig,
) -> Result<BeliefState, InferenceError> {
    if !d.is_finite() {
        return Err(InferenceError::InvalidObservation(d));
    }
    let alpha = learning_rate(state.phi, state.sigma, cfg.beta)?;
    let phi = if state.phi.is_infinite() {
        // alpha = 1: the posterior variance equals the likelihood variance.
        state.sigma
    } else if state.sigma.is_infinite() {
        state.phi / (1.0 - cfg.beta)
    } else {
        alpha * state.sigma
    };
    let theta = (1.0 - alpha) * state.theta + alpha * d;
    Ok(BeliefState {
        theta,
        phi,
        sigma: state.sigma,
        alpha,
        mu_max_index: state.mu_max_index,
    })
}

/// Inverse Bayesian (variance-expanding) update of the likelihood:
/// Σ' = Σ · (Φ + Σ) / (Φ + (1−β)Σ).
///
/// Reads the same pre-step (Φ_t, Σ_t) as `bayes_update`. Overflow saturates
/// to +∞, and an already-infinite Σ stays infinite. An infinite Φ drives the
/// expansion factor to 1, leaving Σ unchanged.
pub fn inverse_bayes_update(
    state: &BeliefState,
    cfg: &InferenceConfig,
) -> Result<BeliefState, InferenceError> {
    if cfg.mode == Mode::Bayes {
        return Err(InferenceError::InverseUpdateInBayesMode);
    }
    let sigma = expanded_sigma(state.phi, state.sigma, cfg.beta)?;
    Ok(BeliefState {
        sigma,
        ..state.clone()
    })
}

fn expanded_sigma(phi: f64, sigma: f64, beta: f64) -> Result<f64, InferenceError> {
    if !(phi > 0.0) {
        return Err(InferenceError::InvalidVariance(phi));
    }
    if !(sigma > 0.0) {
        return Err(InferenceError::InvalidVariance(sigma));
    }
    if sigma.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if phi.is_infinite() {
        return Ok(sigma);
    }
    Ok(sigma * ((phi + sigma) / (phi + (1.0 - beta) * sigma)))
}

/// Prior density P_t(μⁱ) at every grid point. All entries are 0 when Φ = +∞
/// (confidence collapse across all hypotheses).
pub fn prior_density_at_grid(state: &BeliefState, cfg: &InferenceConfig) -> Vec<f64> {
    let n = cfg.grid_len();
    if state.phi.is_infinite() {
        return vec![0.0; n];
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI * state.phi).sqrt();
    (0..n)
        .map(|i| {
            let diff = cfg.grid_point(i) - state.theta;
            norm * (-diff * diff / (2.0 * state.phi)).exp()
        })
        .collect()
}

/// Strict-max index with NaN entries treated as 0, or `None` when every entry
/// is equal (including the all-zero collapse case).
fn deterministic_argmax(densities: &[f64]) -> Option<usize> {
    let val = |x: f64| if x.is_nan() { 0.0 } else { x };
    let mut best = 0usize;
    let mut all_equal = true;
    for i in 1..densities.len() {
        let v = val(densities[i]);
        if v != val(densities[best]) {
            all_equal = false;
        }
        if v > val(densities[best]) {
            best = i;
        }
    }
    if all_equal {
        None
    } else {
        Some(best)
    }
}

/// Index of the maximum density. Ties go to the lower index; when all entries
/// are equal (in particular all zero or NaN after divergence) the index is
/// drawn uniformly at random.
pub fn argmax_hypothesis<R: Rng + ?Sized>(
    densities: &[f64],
    rng: &mut R,
) -> Result<usize, InferenceError> {
    if densities.is_empty() {
        return Err(InferenceError::EmptyDensities);
    }
    match deterministic_argmax(densities) {
        Some(i) => Ok(i),
        None => Ok(rng.random_range(0..densities.len())),
    }
}

/// One full inference step:
/// Bayesian update, inverse Bayesian update (BIB mode; Σ' = Σ0 in Bayes mode),
/// argmax-change detection on the updated prior, and the reset rule.
pub fn step<R: Rng + ?Sized>(
    state: &BeliefState,
    t: u64,
    d: f64,
    eta: f64,
    cfg: &InferenceConfig,
    rng: &mut R,
) -> Result<(BeliefState, StepRecord), InferenceError> {
    let updated = bayes_update(state, d, cfg)?;
    let mut sigma = match cfg.mode {
        Mode::Bayes => cfg.sigma0,
        Mode::Bib => expanded_sigma(state.phi, state.sigma, cfg.beta)?,
    };
    let densities = prior_density_at_grid(&updated, cfg);
    let idx = argmax_hypothesis(&densities, rng)?;
    let reset = state.mu_max_index.is_some_and(|old| old != idx);
    if reset {
        sigma = cfg.sigma0;
    }
    let active = updated.alpha > cfg.beta;
    let next = BeliefState {
        theta: updated.theta,
        phi: updated.phi,
        sigma,
        alpha: updated.alpha,
        mu_max_index: Some(idx),
    };
    let record = StepRecord {
        t,
        d,
        eta,
        theta: next.theta,
        phi: next.phi,
        sigma: next.sigma,
        alpha: next.alpha,
        reset,
        active,
    };
    Ok((next, record))
}
