//! Reproducible run harness: seed splitting, single-replica simulation, and
//! the (mode, β) sweep.
//!
//! RNG streams derive from the master seed with ChaCha12 stream selection:
//! replica r draws its environment from stream 2r and its inference from
//! stream 2r+1 of the same key. Environment and inference never share a
//! stream, so Bayes/BIB comparisons at the same seed see identical
//! observation sequences, and adding replicas never perturbs earlier ones.

use crate::analysis::{split_rmse, Trace};
use crate::environment::{advance, EnvConfig, EnvState};
use crate::inference::{step, BeliefState, InferenceConfig, Mode};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Inference(#[from] crate::inference::InferenceError),
    #[error(transparent)]
    Env(#[from] crate::environment::EnvError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub inference: InferenceConfig,
    pub env: EnvConfig,
    /// Total simulated steps including burn-in.
    pub steps: u64,
    /// Discarded prefix.
    pub burnin: u64,
    pub seed: u64,
    pub replicas: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inference: InferenceConfig::default(),
            env: EnvConfig::default(),
            steps: 20_000,
            burnin: 10_000,
            seed: 0,
            replicas: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.inference.validate()?;
        self.env.validate()?;
        if self.burnin >= self.steps {
            return Err(ExperimentError::InvalidConfig(format!(
                "burnin ({}) must be below steps ({})",
                self.burnin, self.steps
            )));
        }
        if self.replicas < 1 {
            return Err(ExperimentError::InvalidConfig(
                "replicas must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_step: f64,
    pub modes: Vec<Mode>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            base: RunConfig::default(),
            beta_start: 0.05,
            beta_end: 0.25,
            beta_step: 0.005,
            modes: vec![Mode::Bayes, Mode::Bib],
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.base.validate()?;
        if !(self.beta_step > 0.0) {
            return Err(ExperimentError::InvalidConfig(
                "beta_step must be positive".into(),
            ));
        }
        if self.beta_start > self.beta_end {
            return Err(ExperimentError::InvalidConfig(
                "beta_start must not exceed beta_end".into(),
            ));
        }
        if self.modes.is_empty() {
            return Err(ExperimentError::InvalidConfig(
                "at least one mode required".into(),
            ));
        }
        Ok(())
    }

    pub fn beta_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let beta = self.beta_start + f64::from(k) * self.beta_step;
            if beta > self.beta_end + 1e-12 {
                break;
            }
            out.push(beta);
            k += 1;
        }
        out
    }
}

/// Environment RNG for (seed, replica): stream 2r of the master key.
pub fn env_stream(seed: u64, replica: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(2 * replica as u64);
    rng
}

/// Inference RNG for (seed, replica): stream 2r+1 of the master key.
pub fn inference_stream(seed: u64, replica: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(2 * replica as u64 + 1);
    rng
}

/// Simulate one replica and return the post-burn-in trace.
pub fn run_replica(cfg: &RunConfig, replica: usize) -> Result<Trace, ExperimentError> {
    cfg.validate()?;
    let mut env_rng = env_stream(cfg.seed, replica);
    let mut inf_rng = inference_stream(cfg.seed, replica);
    let mut env = EnvState::new(&cfg.env);
    let mut belief = BeliefState::new(&cfg.inference)?;
    let analyzed = (cfg.steps - cfg.burnin) as usize;
    let mut records = Vec::with_capacity(analyzed);
    let mut change_times = Vec::new();
    for t in 0..cfg.steps {
        let (next_env, d, changed) = advance(&env, &cfg.env, &mut env_rng);
        env = next_env;
        let (next_belief, record) = step(&belief, t, d, env.eta, &cfg.inference, &mut inf_rng)?;
        belief = next_belief;
        if t >= cfg.burnin {
            if changed {
                change_times.push(records.len());
            }
            records.push(record);
        }
    }
    Ok(Trace::new(records, change_times))
}

/// All replicas, parallel, merged in replica order.
pub fn run_all(cfg: &RunConfig) -> Result<Vec<Trace>, ExperimentError> {
    cfg.validate()?;
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| run_replica(cfg, r))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: Mode,
    pub beta: f64,
    /// Replica-averaged mean first-half RMSE (adaptability).
    pub rmse_f: f64,
    /// Replica-averaged mean second-half RMSE (accuracy).
    pub rmse_s: f64,
    pub replicas: usize,
}

/// Replica-averaged split RMSEs per (mode, β).
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &mode in &cfg.modes {
        for beta in cfg.beta_values() {
            let run = RunConfig {
                inference: InferenceConfig {
                    beta,
                    mode,
                    ..cfg.base.inference.clone()
                },
                ..cfg.base.clone()
            };
            let pairs: Vec<(f64, f64)> = (0..run.replicas)
                .into_par_iter()
                .map(|r| -> Result<(f64, f64), ExperimentError> {
                    let trace = run_replica(&run, r)?;
                    Ok(split_rmse(&trace)?)
                })
                .collect::<Result<_, _>>()?;
            let n = pairs.len() as f64;
            rows.push(SweepRow {
                mode,
                beta,
                rmse_f: pairs.iter().map(|p| p.0).sum::<f64>() / n,
                rmse_s: pairs.iter().map(|p| p.1).sum::<f64>() / n,
                replicas: run.replicas,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_trace() {
        let cfg = RunConfig {
            steps: 3000,
            burnin: 1000,
            seed: 99,
            ..RunConfig::default()
        };
        let a = run_replica(&cfg, 0).unwrap();
        let b = run_replica(&cfg, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replicas_are_independent_of_replica_count() {
        let cfg = RunConfig {
            steps: 2000,
            burnin: 1000,
            seed: 5,
            replicas: 2,
            ..RunConfig::default()
        };
        let two = run_all(&cfg).unwrap();
        let more = run_all(&RunConfig {
            replicas: 4,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(two[0], more[0]);
        assert_eq!(two[1], more[1]);
    }

    #[test]
    fn beta_zero_makes_bib_and_bayes_bitwise_identical() {
        let mk = |mode| RunConfig {
            inference: InferenceConfig {
                beta: 0.0,
                mode,
                ..InferenceConfig::default()
            },
            steps: 15_000,
            burnin: 0,
            seed: 123,
            ..RunConfig::default()
        };
        let bayes = run_replica(&mk(Mode::Bayes), 0).unwrap();
        let bib = run_replica(&mk(Mode::Bib), 0).unwrap();
        assert_eq!(bayes.records.len(), bib.records.len());
        for (a, b) in bayes.records.iter().zip(&bib.records) {
            assert_eq!(a.theta.to_bits(), b.theta.to_bits());
            assert_eq!(a.phi.to_bits(), b.phi.to_bits());
            assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
            assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
            assert_eq!(a.reset, b.reset);
        }
    }

    #[test]
    fn bayes_and_bib_share_observations_at_same_seed() {
        let mk = |mode| RunConfig {
            inference: InferenceConfig {
                beta: 0.05,
                mode,
                ..InferenceConfig::default()
            },
            steps: 4000,
            burnin: 0,
            seed: 7,
            ..RunConfig::default()
        };
        let bayes = run_replica(&mk(Mode::Bayes), 0).unwrap();
        let bib = run_replica(&mk(Mode::Bib), 0).unwrap();
        for (a, b) in bayes.records.iter().zip(&bib.records) {
            assert_eq!(a.d.to_bits(), b.d.to_bits());
            assert_eq!(a.eta.to_bits(), b.eta.to_bits());
        }
        assert_eq!(bayes.change_times, bib.change_times);
    }

    #[test]
    fn bayes_mode_converges_to_equilibrium() {
        // static environment: Phi -> beta*Sigma0 and alpha -> beta
        let cfg = RunConfig {
            inference: InferenceConfig {
                beta: 0.05,
                mode: Mode::Bayes,
                ..InferenceConfig::default()
            },
            env: EnvConfig {
                change_prob: 0.0,
                ..EnvConfig::default()
            },
            steps: 5000,
            burnin: 0,
            seed: 1,
            ..RunConfig::default()
        };
        let trace = run_replica(&cfg, 0).unwrap();
        let last = trace.records.last().unwrap();
        assert!((last.alpha - 0.05).abs() < 1e-6, "alpha={}", last.alpha);
        assert!((last.phi - 0.05 * 0.09).abs() < 1e-7, "phi={}", last.phi);
        // monotone approach from above (Phi0 > beta*Sigma0)
        for w in trace.records.windows(2) {
            assert!(w[1].phi <= w[0].phi + 1e-15);
        }
    }

    #[test]
    fn sweep_single_cell_matches_manual_pipeline() {
        let cfg = SweepConfig {
            base: RunConfig {
                steps: 30_000,
                burnin: 10_000,
                seed: 21,
                ..RunConfig::default()
            },
            beta_start: 0.1,
            beta_end: 0.1,
            beta_step: 0.01,
            modes: vec![Mode::Bib],
        };
        let rows = sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let run = RunConfig {
            inference: InferenceConfig {
                beta: 0.1,
                mode: Mode::Bib,
                ..InferenceConfig::default()
            },
            ..cfg.base.clone()
        };
        let trace = run_replica(&run, 0).unwrap();
        let (f, s) = split_rmse(&trace).unwrap();
        assert_eq!(rows[0].rmse_f.to_bits(), f.to_bits());
        assert_eq!(rows[0].rmse_s.to_bits(), s.to_bits());
    }

    #[test]
    fn sweep_rejects_empty_modes() {
        let cfg = SweepConfig {
            modes: vec![],
            ..SweepConfig::default()
        };
        assert!(sweep(&cfg).is_err());
    }

    #[test]
    fn beta_grid_covers_endpoints() {
        let cfg = SweepConfig::default();
        let betas = cfg.beta_values();
        assert_eq!(betas.len(), 41);
        assert!((betas[0] - 0.05).abs() < 1e-12);
        assert!((betas[40] - 0.25).abs() < 1e-12);
    }
}
