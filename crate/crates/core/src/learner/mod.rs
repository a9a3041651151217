//! The learner contract driven by the scheduler.
//!
//! A learner trains on a batch drawn from one task and reports the batch loss
//! before and after the update. It can also score a fresh batch without
//! updating (for self-prediction gain) and report a validation loss.

mod external;
mod synthetic;

pub use external::{ExternalLearner, ExternalLearnerConfig, Request, PROTOCOL_VERSION};
pub use synthetic::{SyntheticLearner, SyntheticLearnerConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerReport {
    /// Loss on the batch before the update.
    pub loss_before: f64,
    /// Loss on the same batch after the update.
    pub loss_after: f64,
    pub step_cost: f64,
}

impl LearnerReport {
    pub fn validate(&self) -> Result<()> {
        check_loss(self.loss_before)?;
        check_loss(self.loss_after)?;
        Ok(())
    }
}

pub(crate) fn check_loss(loss: f64) -> Result<f64> {
    if loss.is_finite() && loss >= 0.0 {
        Ok(loss)
    } else {
        Err(Error::NonFinite(loss))
    }
}

pub trait Learner {
    /// Applies one update on `batch` (ids from task `task`).
    fn train(&mut self, task: usize, batch: &[String]) -> Result<LearnerReport>;

    /// Loss on `batch` from task `task`; the model is left untouched.
    fn eval(&mut self, task: usize, batch: &[String]) -> Result<f64>;

    fn validation_loss(&mut self) -> Result<f64>;
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn train(&mut self, task: usize, batch: &[String]) -> Result<LearnerReport> {
        (**self).train(task, batch)
    }

    fn eval(&mut self, task: usize, batch: &[String]) -> Result<f64> {
        (**self).eval(task, batch)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        (**self).validation_loss()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerConfig {
    Synthetic(SyntheticLearnerConfig),
    External(ExternalLearnerConfig),
}
