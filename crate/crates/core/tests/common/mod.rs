#![allow(dead_code)]

use curriculum::corpus::TaskSet;
use curriculum::learner::{LearnerConfig, SyntheticLearner, SyntheticLearnerConfig};
use curriculum::policy::PolicyKind;
use curriculum::reward::{GainKind, DEFAULT_WARMUP};
use curriculum::scheduler::{run_to_trace, RunConfig, Trace};

pub fn task_set(sizes: &[usize]) -> TaskSet {
    TaskSet {
        k: sizes.len(),
        tasks: sizes
            .iter()
            .enumerate()
            .map(|(t, &n)| (0..n).map(|i| format!("t{t}-{i:04}")).collect())
            .collect(),
        compressor: "gzip@6".into(),
    }
}

pub fn strict_learner(seed: u64) -> SyntheticLearnerConfig {
    SyntheticLearnerConfig {
        eta: 0.2,
        init_p: 0.0,
        noise_sigma: 0.0,
        seed,
    }
}

pub fn run_config(
    policy: PolicyKind,
    gain: GainKind,
    k: usize,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    learner: SyntheticLearnerConfig,
) -> RunConfig {
    RunConfig {
        policy,
        gain,
        k,
        epochs,
        batch_size,
        seed,
        learner: LearnerConfig::Synthetic(learner),
        warmup: DEFAULT_WARMUP,
        history_capacity: None,
        eval_interval: None,
    }
}

pub fn run_synthetic(config: &RunConfig, tasks: &TaskSet) -> Trace {
    let LearnerConfig::Synthetic(cfg) = &config.learner else {
        panic!("synthetic learner expected");
    };
    let mut learner = SyntheticLearner::new(tasks.k, cfg).unwrap();
    run_to_trace(config, tasks, &mut learner).unwrap()
}

/// First step whose recorded validation loss is at or below `threshold`.
pub fn steps_to(trace: &Trace, threshold: f64) -> Option<u64> {
    trace
        .events
        .iter()
        .find(|e| e.validation_loss.is_some_and(|v| v <= threshold))
        .map(|e| e.t)
}

/// Easy-to-hard staircase for one epoch: task k repeated budget_k times.
pub fn staircase(budgets: &[usize]) -> Vec<usize> {
    budgets
        .iter()
        .enumerate()
        .flat_map(|(k, &b)| std::iter::repeat(k).take(b))
        .collect()
}
