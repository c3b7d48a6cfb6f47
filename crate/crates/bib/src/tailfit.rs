//! Discrete duration fitting: truncated power law (TP) vs. exponential (EP)
//! by maximum likelihood with KS-based range selection, compared via Akaike
//! weights with a sample-size-adjusted KS tie-breaker.
//!
//! TP on [τ_min, τ_max]:  P(τ) = τ^−γ / ζ(γ, τ_min, τ_max),
//!                         ζ(γ, a, b) = Σ_{i=a}^{b} i^−γ
//! EP on [τ_min, ∞):       P(τ) = (1 − e^−λ) e^{−λ(τ − τ_min)}
//!
//! For each candidate τ_min (drawn from the distinct observed durations) the
//! exponent is fitted by likelihood maximization — a γ grid from 0.5 to 3.5
//! in steps of 0.01 for TP, the closed form λ̂ = ln(m/Σ(τᵢ−τ_min) + 1) for
//! EP — and the τ_min minimizing the KS distance between the empirical and
//! model CCDFs (both anchored to 1 at τ_min) is kept. Model selection
//! compares AIC weights at both fitted ranges; on disagreement the smaller
//! D_adj = (ln N / ln n) · D wins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GAMMA_MIN: f64 = 0.5;
pub const GAMMA_MAX: f64 = 3.5;
pub const GAMMA_STEP: f64 = 0.01;
const GAMMA_STEPS: usize = 301;

/// Smallest in-range sample for a valid fit; KS over fewer points is
/// meaningless.
pub const MIN_POINTS_IN_RANGE: usize = 10;
/// Candidate τ_min values are capped so at least this fraction of the sample
/// stays in range.
pub const MIN_TAIL_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("durations must be positive integers")]
    NonPositiveDuration,
    #[error("need at least {MIN_POINTS_IN_RANGE} durations with >= 2 distinct values, got {n} ({distinct} distinct)")]
    InsufficientData { n: usize, distinct: usize },
    #[error("no candidate tau_min leaves a fittable tail")]
    NoViableRange,
    #[error("all in-range durations equal tau_min: EP rate estimate diverges")]
    DegenerateExponential,
    #[error("zeta_trunc requires 1 <= a <= b")]
    BadZetaRange,
    #[error("tau {tau} outside the model support [{lo}, {hi}]")]
    OutOfSupport { tau: u64, lo: u64, hi: u64 },
    #[error("duration {tau} outside the fitting range [{lo}, {hi}]")]
    OutOfRange { tau: u64, lo: u64, hi: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailModel {
    #[serde(rename = "TP")]
    Tp,
    #[serde(rename = "EP")]
    Ep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionPath {
    #[serde(rename = "AICW_AGREE")]
    AicwAgree,
    #[serde(rename = "D_ADJ_TIEBREAK")]
    DAdjTiebreak,
}

/// Sorted positive integer durations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurationSample {
    values: Vec<u64>,
}

impl DurationSample {
    pub fn new(mut values: Vec<u64>) -> Result<Self, FitError> {
        if values.iter().any(|&v| v == 0) {
            return Err(FitError::NonPositiveDuration);
        }
        values.sort_unstable();
        let distinct = count_distinct(&values);
        if values.len() < MIN_POINTS_IN_RANGE || distinct < 2 {
            return Err(FitError::InsufficientData {
                n: values.len(),
                distinct,
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> u64 {
        *self.values.last().expect("nonempty")
    }
}

fn count_distinct(sorted: &[u64]) -> usize {
    let mut n = 0;
    let mut prev = None;
    for &v in sorted {
        if Some(v) != prev {
            n += 1;
            prev = Some(v);
        }
    }
    n
}

/// One fitted model on one range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailFitResult {
    pub model: TailModel,
    /// γ̂ for TP, λ̂ for EP.
    pub exponent: f64,
    pub tau_min: u64,
    /// Data maximum; the EP model does not use it.
    pub tau_max: u64,
    pub loglik: f64,
    /// Max |empirical CCDF − model CCDF| over distinct in-range durations.
    pub ks_d: f64,
    pub n_used: usize,
    pub aic: f64,
    /// Akaike weight against the competing model, filled by `select_model`.
    pub aicw: Option<f64>,
    /// Sample-size-adjusted KS, filled when the tie-break is exercised.
    pub d_adj: Option<f64>,
    /// γ̂ landed on the edge of the search grid.
    pub boundary_hit: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSelection {
    pub tp_at_tp_range: TailFitResult,
    pub ep_at_tp_range: TailFitResult,
    pub tp_at_ep_range: TailFitResult,
    pub ep_at_ep_range: TailFitResult,
    pub winner: TailModel,
    pub decision_path: DecisionPath,
}

/// Truncated zeta Σ_{i=a}^{b} i^−γ, accumulated smallest-terms-first.
pub fn zeta_trunc(gamma: f64, a: u64, b: u64) -> Result<f64, FitError> {
    if a < 1 || a > b {
        return Err(FitError::BadZetaRange);
    }
    let mut sum = 0.0;
    let mut i = b;
    while i >= a {
        sum += (i as f64).powf(-gamma);
        i -= 1;
    }
    Ok(sum)
}

/// TP log-likelihood −n·ln ζ(γ, τ_min, τ_max) − γ·Σ ln τᵢ.
pub fn tp_loglik(data: &[u64], gamma: f64, tau_min: u64, tau_max: u64) -> Result<f64, FitError> {
    if let Some(&tau) = data.iter().find(|&&t| t < tau_min || t > tau_max) {
        return Err(FitError::OutOfRange {
            tau,
            lo: tau_min,
            hi: tau_max,
        });
    }
    let zeta = zeta_trunc(gamma, tau_min, tau_max)?;
    let sum_log: f64 = data.iter().map(|&t| (t as f64).ln()).sum();
    Ok(-(data.len() as f64) * zeta.ln() - gamma * sum_log)
}

/// Closed-form EP rate λ̂ = ln(m / Σ(τᵢ − τ_min) + 1) over the m points with
/// τᵢ ≥ τ_min.
pub fn ep_lambda_hat(data: &[u64], tau_min: u64) -> Result<f64, FitError> {
    let in_range: Vec<u64> = data.iter().copied().filter(|&t| t >= tau_min).collect();
    if in_range.is_empty() {
        return Err(FitError::NoViableRange);
    }
    let m = in_range.len() as f64;
    let excess: u64 = in_range.iter().map(|&t| t - tau_min).sum();
    if excess == 0 {
        return Err(FitError::DegenerateExponential);
    }
    Ok((m / excess as f64 + 1.0).ln())
}

fn ep_loglik(data: &[u64], lambda: f64, tau_min: u64) -> f64 {
    let m = data.len() as f64;
    let excess: f64 = data.iter().map(|&t| (t - tau_min) as f64).sum();
    m * (1.0 - (-lambda).exp()).ln() - lambda * excess
}

/// Model CCDF at τ for a fitted result: ζ(γ, τ, τ_max)/ζ(γ, τ_min, τ_max) for
/// TP, e^{−λ(τ−τ_min)} for EP. Both anchor to 1 at τ = τ_min.
pub fn model_ccdf(fit: &TailFitResult, tau: u64) -> Result<f64, FitError> {
    match fit.model {
        TailModel::Tp => {
            if tau < fit.tau_min || tau > fit.tau_max {
                return Err(FitError::OutOfSupport {
                    tau,
                    lo: fit.tau_min,
                    hi: fit.tau_max,
                });
            }
            Ok(zeta_trunc(fit.exponent, tau, fit.tau_max)?
                / zeta_trunc(fit.exponent, fit.tau_min, fit.tau_max)?)
        }
        TailModel::Ep => {
            if tau < fit.tau_min {
                return Err(FitError::OutOfSupport {
                    tau,
                    lo: fit.tau_min,
                    hi: u64::MAX,
                });
            }
            Ok((-fit.exponent * (tau - fit.tau_min) as f64).exp())
        }
    }
}

fn gamma_grid() -> impl Iterator<Item = f64> {
    (0..GAMMA_STEPS).map(|k| GAMMA_MIN + k as f64 * GAMMA_STEP)
}

/// Distinct values, per-value counts, and suffix point counts of a sorted
/// slice.
struct Tail<'a> {
    sorted: &'a [u64],
    distinct: Vec<u64>,
    /// points >= distinct[j]
    count_ge: Vec<usize>,
    /// Σ ln τ over points >= distinct[j]
    sumlog_ge: Vec<f64>,
}

impl<'a> Tail<'a> {
    fn new(sorted: &'a [u64]) -> Self {
        let mut distinct = Vec::new();
        let mut first_idx = Vec::new();
        for (i, &v) in sorted.iter().enumerate() {
            if distinct.last() != Some(&v) {
                distinct.push(v);
                first_idx.push(i);
            }
        }
        let n = sorted.len();
        let count_ge: Vec<usize> = first_idx.iter().map(|&i| n - i).collect();
        // suffix sums of ln tau, evaluated at each distinct value's first index
        let mut suffix = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + (sorted[i] as f64).ln();
        }
        let sumlog_ge = first_idx.iter().map(|&i| suffix[i]).collect();
        Self {
            sorted,
            distinct,
            count_ge,
            sumlog_ge,
        }
    }

    /// Index of `tau` in `distinct`, if observed.
    fn pos(&self, tau: u64) -> Option<usize> {
        self.distinct.binary_search(&tau).ok()
    }
}

/// ζ(γ, v, τ_max) for every γ on the grid and every distinct observed v,
/// built by one descending accumulation per γ (terms added smallest first).
struct ZetaTable {
    /// [gamma index][distinct index]
    at: Vec<Vec<f64>>,
    tau_max: u64,
}

impl ZetaTable {
    fn new(distinct: &[u64], tau_max: u64) -> Self {
        let at = gamma_grid()
            .map(|gamma| {
                let mut out = vec![0.0; distinct.len()];
                let mut sum = 0.0;
                let mut next = distinct.len();
                let mut i = tau_max;
                loop {
                    sum += (i as f64).powf(-gamma);
                    while next > 0 && distinct[next - 1] == i {
                        next -= 1;
                        out[next] = sum;
                    }
                    if i == distinct[0] {
                        break;
                    }
                    i -= 1;
                }
                out
            })
            .collect();
        Self { at, tau_max }
    }

    fn zeta(&self, gamma_idx: usize, distinct_idx: usize) -> f64 {
        self.at[gamma_idx][distinct_idx]
    }
}

struct TpRangeFit {
    gamma: f64,
    gamma_idx: usize,
    loglik: f64,
    ks_d: f64,
    n_used: usize,
}

/// Grid-search γ̂ and KS distance for a fixed τ_min (index into the distinct
/// values), reusing the precomputed zeta table.
fn tp_fit_range(tail: &Tail, table: &ZetaTable, min_idx: usize) -> TpRangeFit {
    let n = tail.count_ge[min_idx] as f64;
    let sum_log = tail.sumlog_ge[min_idx];
    let mut best_idx = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for (gi, gamma) in gamma_grid().enumerate() {
        let ll = -n * table.zeta(gi, min_idx).ln() - gamma * sum_log;
        if ll > best_ll {
            best_ll = ll;
            best_idx = gi;
        }
    }
    let gamma = GAMMA_MIN + best_idx as f64 * GAMMA_STEP;
    // KS over distinct in-range values, both CCDFs anchored to 1 at tau_min
    let m = tail.count_ge[min_idx] as f64;
    let zmin = table.zeta(best_idx, min_idx);
    let mut ks_d = 0.0_f64;
    for j in min_idx..tail.distinct.len() {
        let empirical = tail.count_ge[j] as f64 / m;
        let model = table.zeta(best_idx, j) / zmin;
        ks_d = ks_d.max((empirical - model).abs());
    }
    TpRangeFit {
        gamma,
        gamma_idx: best_idx,
        loglik: best_ll,
        ks_d,
        n_used: tail.count_ge[min_idx],
    }
}

struct EpRangeFit {
    lambda: f64,
    loglik: f64,
    ks_d: f64,
    n_used: usize,
}

fn ep_fit_range(tail: &Tail, min_idx: usize) -> Result<EpRangeFit, FitError> {
    let tau_min = tail.distinct[min_idx];
    let start = tail.sorted.len() - tail.count_ge[min_idx];
    let in_range = &tail.sorted[start..];
    let lambda = ep_lambda_hat(in_range, tau_min)?;
    let loglik = ep_loglik(in_range, lambda, tau_min);
    let m = tail.count_ge[min_idx] as f64;
    let mut ks_d = 0.0_f64;
    for j in min_idx..tail.distinct.len() {
        let empirical = tail.count_ge[j] as f64 / m;
        let model = (-lambda * (tail.distinct[j] - tau_min) as f64).exp();
        ks_d = ks_d.max((empirical - model).abs());
    }
    Ok(EpRangeFit {
        lambda,
        loglik,
        ks_d,
        n_used: tail.count_ge[min_idx],
    })
}

/// Candidate τ_min indices: distinct values keeping at least
/// `MIN_POINTS_IN_RANGE` points and `MIN_TAIL_FRACTION` of the sample in
/// range.
fn candidate_indices(tail: &Tail) -> Vec<usize> {
    let n = tail.sorted.len();
    let floor = MIN_POINTS_IN_RANGE.max((MIN_TAIL_FRACTION * n as f64).ceil() as usize);
    (0..tail.distinct.len())
        .filter(|&j| tail.count_ge[j] >= floor && tail.distinct.len() - j >= 2)
        .collect()
}

fn aic(loglik: f64) -> f64 {
    // one free exponent per model
    -2.0 * loglik + 2.0
}

/// Fit the TP model: τ_max is the data maximum, τ_min minimizes the KS
/// distance over the candidate set, γ̂ maximizes the likelihood on the chosen
/// range.
pub fn fit_tp(data: &DurationSample) -> Result<TailFitResult, FitError> {
    let tail = Tail::new(data.values());
    let table = ZetaTable::new(&tail.distinct, data.max());
    let candidates = candidate_indices(&tail);
    let mut best: Option<(usize, TpRangeFit)> = None;
    for &j in &candidates {
        let fit = tp_fit_range(&tail, &table, j);
        let better = match &best {
            None => true,
            Some((_, b)) => fit.ks_d < b.ks_d,
        };
        if better {
            best = Some((j, fit));
        }
    }
    let (min_idx, fit) = best.ok_or(FitError::NoViableRange)?;
    Ok(TailFitResult {
        model: TailModel::Tp,
        exponent: fit.gamma,
        tau_min: tail.distinct[min_idx],
        tau_max: table.tau_max,
        loglik: fit.loglik,
        ks_d: fit.ks_d,
        n_used: fit.n_used,
        aic: aic(fit.loglik),
        aicw: None,
        d_adj: None,
        boundary_hit: fit.gamma_idx == 0 || fit.gamma_idx == GAMMA_STEPS - 1,
    })
}

/// Fit the EP model with the same KS-driven τ_min search; no upper
/// truncation.
pub fn fit_ep(data: &DurationSample) -> Result<TailFitResult, FitError> {
    let tail = Tail::new(data.values());
    let candidates = candidate_indices(&tail);
    let mut best: Option<(usize, EpRangeFit)> = None;
    for &j in &candidates {
        let Ok(fit) = ep_fit_range(&tail, j) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((_, b)) => fit.ks_d < b.ks_d,
        };
        if better {
            best = Some((j, fit));
        }
    }
    let (min_idx, fit) = best.ok_or(FitError::NoViableRange)?;
    Ok(TailFitResult {
        model: TailModel::Ep,
        exponent: fit.lambda,
        tau_min: tail.distinct[min_idx],
        tau_max: data.max(),
        loglik: fit.loglik,
        ks_d: fit.ks_d,
        n_used: fit.n_used,
        aic: aic(fit.loglik),
        aicw: None,
        d_adj: None,
        boundary_hit: false,
    })
}

/// Refit both models on the data restricted to [τ_min, τ_max].
fn refit_both_at(
    tail: &Tail,
    table: &ZetaTable,
    min_idx: usize,
) -> Result<(TailFitResult, TailFitResult), FitError> {
    let tau_min = tail.distinct[min_idx];
    let tau_max = table.tau_max;
    let tp = tp_fit_range(tail, table, min_idx);
    let ep = ep_fit_range(tail, min_idx)?;
    let tp_res = TailFitResult {
        model: TailModel::Tp,
        exponent: tp.gamma,
        tau_min,
        tau_max,
        loglik: tp.loglik,
        ks_d: tp.ks_d,
        n_used: tp.n_used,
        aic: aic(tp.loglik),
        aicw: None,
        d_adj: None,
        boundary_hit: tp.gamma_idx == 0 || tp.gamma_idx == GAMMA_STEPS - 1,
    };
    let ep_res = TailFitResult {
        model: TailModel::Ep,
        exponent: ep.lambda,
        tau_min,
        tau_max,
        loglik: ep.loglik,
        ks_d: ep.ks_d,
        n_used: ep.n_used,
        aic: aic(ep.loglik),
        aicw: None,
        d_adj: None,
        boundary_hit: false,
    };
    Ok((tp_res, ep_res))
}

/// Akaike weights (w_tp, w_ep) from two AIC values.
pub fn aic_weights(aic_tp: f64, aic_ep: f64) -> (f64, f64) {
    let aic_min = aic_tp.min(aic_ep);
    let e_tp = (-(aic_tp - aic_min) / 2.0).exp();
    let e_ep = (-(aic_ep - aic_min) / 2.0).exp();
    (e_tp / (e_tp + e_ep), e_ep / (e_tp + e_ep))
}

/// Full TP-vs-EP selection: fit both, compare Akaike weights at both fitted
/// ranges, and fall back to the adjusted KS statistic on disagreement (the
/// smaller D_adj wins; an exact tie goes to TP).
pub fn select_model(data: &DurationSample) -> Result<ModelSelection, FitError> {
    let tp_fit = fit_tp(data)?;
    let ep_fit = fit_ep(data)?;

    let tail = Tail::new(data.values());
    let table = ZetaTable::new(&tail.distinct, data.max());
    let tp_min_idx = tail.pos(tp_fit.tau_min).expect("tau_min is observed");
    let ep_min_idx = tail.pos(ep_fit.tau_min).expect("tau_min is observed");

    let (mut tp_at_tp, mut ep_at_tp) = refit_both_at(&tail, &table, tp_min_idx)?;
    let (mut tp_at_ep, mut ep_at_ep) = refit_both_at(&tail, &table, ep_min_idx)?;

    let (w_tp_1, w_ep_1) = aic_weights(tp_at_tp.aic, ep_at_tp.aic);
    let (w_tp_2, w_ep_2) = aic_weights(tp_at_ep.aic, ep_at_ep.aic);
    tp_at_tp.aicw = Some(w_tp_1);
    ep_at_tp.aicw = Some(w_ep_1);
    tp_at_ep.aicw = Some(w_tp_2);
    ep_at_ep.aicw = Some(w_ep_2);

    let (winner, decision_path) = if w_tp_1 > w_ep_1 && w_tp_2 > w_ep_2 {
        (TailModel::Tp, DecisionPath::AicwAgree)
    } else if w_tp_1 < w_ep_1 && w_tp_2 < w_ep_2 {
        (TailModel::Ep, DecisionPath::AicwAgree)
    } else {
        // disagreement: adjust each model's own fitted KS by sample coverage,
        // with N the full sample size before any tau_min cut
        let n_total = (data.len() as f64).ln();
        let d_adj_tp = n_total / (tp_fit.n_used as f64).ln() * tp_fit.ks_d;
        let d_adj_ep = n_total / (ep_fit.n_used as f64).ln() * ep_fit.ks_d;
        tp_at_tp.d_adj = Some(d_adj_tp);
        ep_at_ep.d_adj = Some(d_adj_ep);
        let winner = if d_adj_tp <= d_adj_ep {
            TailModel::Tp
        } else {
            TailModel::Ep
        };
        (winner, DecisionPath::DAdjTiebreak)
    };

    Ok(ModelSelection {
        tp_at_tp_range: tp_at_tp,
        ep_at_tp_range: ep_at_tp,
        tp_at_ep_range: tp_at_ep,
        ep_at_ep_range: ep_at_ep,
        winner,
        decision_path,
    })
}
