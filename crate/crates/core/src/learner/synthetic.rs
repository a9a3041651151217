//! Gated-proficiency surrogate learner.
//!
//! Each task `k` has a proficiency `p_k` in `[0, 1]` and loss `1 - p_k`.
//! Training task `k` moves `p_k <- p_k + eta * (1 - p_k) * gate_k` with
//! `gate_k = prod_{j < k} p_j`, so harder tasks only become learnable once the
//! easier ones are.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Learner, LearnerReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLearnerConfig {
    pub eta: f64,
    pub init_p: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticLearnerConfig {
    fn default() -> Self {
        SyntheticLearnerConfig {
            eta: 0.2,
            init_p: 0.05,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticLearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.init_p) {
            return Err(Error::Config(format!("init_p must lie in [0, 1], got {}", self.init_p)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticLearner {
    proficiency: Vec<f64>,
    eta: f64,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl SyntheticLearner {
    pub fn new(k: usize, config: &SyntheticLearnerConfig) -> Result<Self> {
        config.validate()?;
        if k == 0 {
            return Err(Error::Config("synthetic learner needs at least one task".into()));
        }
        let noise = if config.noise_sigma > 0.0 {
            Some(Normal::new(0.0, config.noise_sigma).map_err(|e| Error::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(SyntheticLearner {
            proficiency: vec![config.init_p; k],
            eta: config.eta,
            noise,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        })
    }

    pub fn with_proficiency(proficiency: Vec<f64>, config: &SyntheticLearnerConfig) -> Result<Self> {
        if let Some(p) = proficiency.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("proficiency {p} outside [0, 1]")));
        }
        let mut learner = Self::new(proficiency.len(), config)?;
        learner.proficiency = proficiency;
        Ok(learner)
    }

    pub fn proficiency(&self) -> &[f64] {
        &self.proficiency
    }

    pub fn gate(&self, task: usize) -> f64 {
        self.proficiency[..task].iter().product()
    }

    fn check_task(&self, task: usize) -> Result<()> {
        if task < self.proficiency.len() {
            Ok(())
        } else {
            Err(Error::InvalidTask {
                task,
                k: self.proficiency.len(),
            })
        }
    }

    fn observed_loss(&mut self, task: usize) -> f64 {
        let loss = 1.0 - self.proficiency[task];
        match &self.noise {
            Some(normal) => (loss + normal.sample(&mut self.rng)).max(0.0),
            None => loss,
        }
    }
}

impl Learner for SyntheticLearner {
    fn train(&mut self, task: usize, batch: &[String]) -> Result<LearnerReport> {
        self.check_task(task)?;
        let loss_before = self.observed_loss(task);
        let gate = self.gate(task);
        let p = self.proficiency[task];
        self.proficiency[task] = (p + self.eta * (1.0 - p) * gate).clamp(0.0, 1.0);
        let loss_after = self.observed_loss(task);
        Ok(LearnerReport {
            loss_before,
            loss_after,
            step_cost: batch.len() as f64,
        })
    }

    fn eval(&mut self, task: usize, _batch: &[String]) -> Result<f64> {
        self.check_task(task)?;
        Ok(self.observed_loss(task))
    }

    fn validation_loss(&mut self) -> Result<f64> {
        let k = self.proficiency.len() as f64;
        Ok(self.proficiency.iter().map(|p| 1.0 - p).sum::<f64>() / k)
    }
}
