//! The curriculum training loop.
//!
//! Each epoch gives task `k` a budget of `ceil(|D_k| / batch_size)` batches.
//! A step selects an arm, takes the next batch of that task's per-epoch
//! shuffle, trains, turns the loss change into a gain, maps it to a reward,
//! updates the policy and finally records the gain in the history. An arm is
//! masked once its budget is spent; the epoch ends when every arm is masked.

mod trace;

pub use trace::{read_trace, JsonlTraceWriter, Trace, TraceHeader, TraceSink, VecSink, TRACE_VERSION};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TaskSet;
use crate::error::{Error, Result};
use crate::learner::{Learner, LearnerConfig, LearnerReport};
use crate::policy::{PolicyKind, PolicyState};
use crate::reward::{self, GainHistory, GainKind};

const POLICY_STREAM: u64 = 0;
const EVAL_STREAM: u64 = 1;
const EPOCH_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub policy: PolicyKind,
    pub gain: GainKind,
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learner: LearnerConfig,
    pub warmup: usize,
    pub history_capacity: Option<usize>,
    /// Also record the validation loss every this many steps. Epoch ends are
    /// always recorded.
    pub eval_interval: Option<u64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.eval_interval == Some(0) {
            return Err(Error::Config("eval_interval must be >= 1".into()));
        }
        if let LearnerConfig::Synthetic(cfg) = &self.learner {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// One scheduler step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Global step, starting at 1.
    pub t: u64,
    pub epoch: usize,
    pub arm: usize,
    /// Probability the policy assigned to `arm`.
    pub prob: f64,
    /// Unmasked arms at selection time.
    pub unmasked: usize,
    pub batch: Vec<String>,
    pub raw_gain: f64,
    pub q_lo: Option<f64>,
    pub q_hi: Option<f64>,
    pub reward: f64,
    pub loss_before: f64,
    pub loss_after: f64,
    /// Post-update loss on the fresh batch (self-prediction gain only).
    pub eval_loss: Option<f64>,
    pub validation_loss: Option<f64>,
    pub policy_snapshot: Vec<f64>,
}

/// Batches per task per epoch.
pub fn task_budgets(task_sizes: &[usize], batch_size: usize) -> Vec<usize> {
    task_sizes.iter().map(|n| n.div_ceil(batch_size)).collect()
}

pub fn steps_per_epoch(task_sizes: &[usize], batch_size: usize) -> usize {
    task_budgets(task_sizes, batch_size).iter().sum()
}

/// Raw progress gain for one step, plus the fresh-batch loss for SPG.
pub fn compute_gain<L: Learner + ?Sized>(
    kind: GainKind,
    report: &LearnerReport,
    learner: &mut L,
    task: usize,
    fresh_batch: &[String],
) -> Result<(f64, Option<f64>)> {
    match kind {
        GainKind::Pg => Ok((reward::prediction_gain(report.loss_before, report.loss_after)?, None)),
        GainKind::Spg => {
            let after = learner.eval(task, fresh_batch)?;
            Ok((reward::self_prediction_gain(report.loss_before, after)?, Some(after)))
        }
    }
}

fn epoch_batches(tasks: &TaskSet, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<Vec<String>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EPOCH_STREAM_BASE + epoch as u64);
    tasks
        .tasks
        .iter()
        .map(|ids| {
            let mut order = ids.clone();
            order.shuffle(&mut rng);
            order.chunks(batch_size).map(<[String]>::to_vec).collect()
        })
        .collect()
}

fn fresh_batch(ids: &[String], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    ids.choose_multiple(rng, batch_size.min(ids.len())).cloned().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub steps: u64,
    pub epoch_validation: Vec<f64>,
}

/// Runs the full schedule, streaming the header and every event to `sink`.
/// A learner failure stops the run; events already emitted stay in the sink.
pub fn run_curriculum<L: Learner + ?Sized, S: TraceSink + ?Sized>(
    config: &RunConfig,
    tasks: &TaskSet,
    learner: &mut L,
    sink: &mut S,
) -> Result<RunOutcome> {
    config.validate()?;
    tasks.validate()?;
    if tasks.k != config.k {
        return Err(Error::Config(format!(
            "config expects {} tasks but the task set has {}",
            config.k, tasks.k
        )));
    }
    sink.header(&TraceHeader::new(config, tasks))?;

    let mut policy = PolicyState::new(config.policy, config.k)?;
    let mut history = GainHistory::new(config.history_capacity);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(config.seed);
    policy_rng.set_stream(POLICY_STREAM);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seed);
    eval_rng.set_stream(EVAL_STREAM);

    let mut t = 0u64;
    let mut epoch_validation = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        policy.reset_masks();
        let batches = epoch_batches(tasks, config.batch_size, config.seed, epoch);
        let mut next = vec![0usize; config.k];

        while policy.unmasked_count() > 0 {
            let selection = policy.select(&mut policy_rng)?;
            let arm = selection.arm;
            let batch = &batches[arm][next[arm]];
            next[arm] += 1;

            let report = learner.train(arm, batch)?;
            report.validate()?;
            let fresh = match config.gain {
                GainKind::Spg => fresh_batch(&tasks.tasks[arm], config.batch_size, &mut eval_rng),
                GainKind::Pg => Vec::new(),
            };
            let (raw_gain, eval_loss) = compute_gain(config.gain, &report, learner, arm, &fresh)?;
            let mapped = reward::map_reward(raw_gain, &history, config.warmup)?;
            policy.update(&selection, mapped.reward)?;
            history.push(raw_gain)?;

            if next[arm] == batches[arm].len() {
                policy.mask_arm(arm)?;
            }
            t += 1;
            let epoch_done = policy.unmasked_count() == 0;
            let interval_hit = config.eval_interval.is_some_and(|n| t % n == 0);
            let validation_loss = if epoch_done || interval_hit {
                Some(learner.validation_loss()?)
            } else {
                None
            };
            if epoch_done {
                epoch_validation.push(validation_loss.expect("recorded at epoch end"));
            }

            sink.event(&TraceEvent {
                t,
                epoch,
                arm,
                prob: selection.prob,
                unmasked: selection.unmasked,
                batch: batch.clone(),
                raw_gain,
                q_lo: mapped.q_lo,
                q_hi: mapped.q_hi,
                reward: mapped.reward,
                loss_before: report.loss_before,
                loss_after: report.loss_after,
                eval_loss,
                validation_loss,
                policy_snapshot: policy.snapshot(),
            })?;
        }
    }
    sink.finish()?;
    Ok(RunOutcome {
        steps: t,
        epoch_validation,
    })
}

/// Convenience wrapper collecting the whole trace in memory.
pub fn run_to_trace<L: Learner + ?Sized>(config: &RunConfig, tasks: &TaskSet, learner: &mut L) -> Result<Trace> {
    let mut sink = VecSink::default();
    run_curriculum(config, tasks, learner, &mut sink)?;
    sink.into_trace()
}
