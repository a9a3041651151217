//! Arm-selection policies over the `k` difficulty tasks.
//!
//! All four policies share one [`PolicyState`] and the same
//! select / update / mask cycle:
//!
//! * UCB1 plays every unmasked arm once (lowest index first), then the argmax
//!   of `q(a) + c * sqrt(ln t / n(a))`.
//! * EXP3 samples from `p_i = (1 - gamma) * w_i / sum(w) + gamma / m` over the
//!   `m` unmasked arms and updates the played arm with an importance-weighted
//!   exponential step.
//! * Random picks uniformly among unmasked arms.
//! * Sequential always returns the lowest unmasked arm, i.e. it walks the
//!   tasks easy to hard as they get exhausted.
//!
//! Masks mark arms whose per-epoch budget is spent. They never touch the
//! learned statistics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights above this are renormalized by the maximum weight.
pub const WEIGHT_CEILING: f64 = 1e100;

pub const DEFAULT_UCB1_C: f64 = 0.5;
pub const DEFAULT_EXP3_GAMMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyKind {
    Ucb1 { c: f64 },
    Exp3 { gamma: f64 },
    Random,
    Sequential,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Ucb1 { .. } => "ucb1",
            PolicyKind::Exp3 { .. } => "exp3",
            PolicyKind::Random => "random",
            PolicyKind::Sequential => "sequential",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicyKind::Ucb1 { c } if !(c.is_finite() && c >= 0.0) => {
                Err(Error::Config(format!("ucb1 exploration constant must be >= 0, got {c}")))
            }
            PolicyKind::Exp3 { gamma } if !(0.0..=1.0).contains(&gamma) => {
                Err(Error::Config(format!("exp3 gamma must lie in [0, 1], got {gamma}")))
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of one `select` call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub arm: usize,
    /// Probability with which `arm` was drawn (1 for deterministic policies).
    pub prob: f64,
    /// Number of unmasked arms at selection time.
    pub unmasked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    kind: PolicyKind,
    k: usize,
    t: u64,
    counts: Vec<u64>,
    values: Vec<f64>,
    weights: Vec<f64>,
    masked: Vec<bool>,
    cursor: usize,
}

fn check_reward(reward: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&reward) {
        Ok(())
    } else {
        Err(Error::RewardOutOfRange(reward))
    }
}

impl PolicyState {
    pub fn new(kind: PolicyKind, k: usize) -> Result<Self> {
        kind.validate()?;
        if k == 0 {
            return Err(Error::Config("policy needs at least one arm".into()));
        }
        Ok(PolicyState {
            kind,
            k,
            t: 0,
            counts: vec![0; k],
            values: vec![0.0; k],
            weights: vec![1.0; k],
            masked: vec![false; k],
            cursor: 0,
        })
    }

    /// UCB1 state with preset statistics; `t` is the global update count.
    pub fn ucb1_with_stats(c: f64, counts: Vec<u64>, values: Vec<f64>, t: u64) -> Result<Self> {
        if counts.len() != values.len() {
            return Err(Error::Config("counts and values differ in length".into()));
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::RewardOutOfRange(*v));
        }
        let mut state = Self::new(PolicyKind::Ucb1 { c }, counts.len())?;
        state.counts = counts;
        state.values = values;
        state.t = t;
        Ok(state)
    }

    pub fn exp3_with_weights(gamma: f64, weights: Vec<f64>) -> Result<Self> {
        let mut state = Self::new(PolicyKind::Exp3 { gamma }, weights.len())?;
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Config(format!("exp3 weights must be positive and finite, got {w}")));
        }
        state.weights = weights;
        Ok(state)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }

    /// Task the sequential policy last trained on.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm < self.k {
            Ok(())
        } else {
            Err(Error::InvalidArm { arm, k: self.k })
        }
    }

    fn require(&self, op: &'static str, ok: bool) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::PolicyMismatch {
                op,
                kind: self.kind.name(),
            })
        }
    }

    fn unmasked_arms(&self) -> impl Iterator<Item = usize> + '_ {
        self.masked.iter().enumerate().filter(|(_, m)| !**m).map(|(i, _)| i)
    }

    pub fn unmasked_count(&self) -> usize {
        self.masked.iter().filter(|m| !**m).count()
    }

    pub fn mask_arm(&mut self, arm: usize) -> Result<()> {
        self.check_arm(arm)?;
        self.masked[arm] = true;
        Ok(())
    }

    pub fn reset_masks(&mut self) {
        self.masked.fill(false);
    }

    pub fn ucb1_select(&self) -> Result<usize> {
        let PolicyKind::Ucb1 { c } = self.kind else {
            return Err(Error::PolicyMismatch {
                op: "ucb1_select",
                kind: self.kind.name(),
            });
        };
        if let Some(arm) = self.unmasked_arms().find(|&a| self.counts[a] == 0) {
            return Ok(arm);
        }
        let ln_t = (self.t.max(1) as f64).ln();
        let mut best: Option<(usize, f64)> = None;
        for arm in self.unmasked_arms() {
            let score = self.values[arm] + c * (ln_t / self.counts[arm] as f64).sqrt();
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((arm, score));
            }
        }
        best.map(|(arm, _)| arm).ok_or(Error::NoArmsAvailable)
    }

    /// Incremental mean update of the played arm.
    pub fn ucb1_update(&mut self, arm: usize, reward: f64) -> Result<()> {
        self.require("ucb1_update", matches!(self.kind, PolicyKind::Ucb1 { .. }))?;
        self.check_arm(arm)?;
        check_reward(reward)?;
        self.counts[arm] += 1;
        self.values[arm] += (reward - self.values[arm]) / self.counts[arm] as f64;
        self.t += 1;
        Ok(())
    }

    /// Length-`k` distribution, zero on masked arms.
    pub fn exp3_distribution(&self) -> Result<Vec<f64>> {
        let PolicyKind::Exp3 { gamma } = self.kind else {
            return Err(Error::PolicyMismatch {
                op: "exp3_distribution",
                kind: self.kind.name(),
            });
        };
        let m = self.unmasked_count();
        if m == 0 {
            return Err(Error::NoArmsAvailable);
        }
        let total: f64 = self.unmasked_arms().map(|a| self.weights[a]).sum();
        let uniform = 1.0 / m as f64;
        // (1-γ)x + γ/m written as x - γ(x - 1/m): exact when x == 1/m.
        Ok((0..self.k)
            .map(|a| {
                if self.masked[a] {
                    0.0
                } else {
                    let x = self.weights[a] / total;
                    x - gamma * (x - uniform)
                }
            })
            .collect())
    }

    /// Draws an arm from the EXP3 distribution; returns it with its probability.
    pub fn exp3_select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(usize, f64)> {
        let probs = self.exp3_distribution()?;
        let arm = sample_index(&probs, rng.gen::<f64>());
        Ok((arm, probs[arm]))
    }

    /// Importance-weighted update. `reward` lives in [-1, 1] and is mapped to
    /// [0, 1] before the step; `m` is the unmasked-arm count at call time.
    pub fn exp3_update(&mut self, arm: usize, reward: f64, prob_used: f64) -> Result<()> {
        let PolicyKind::Exp3 { gamma } = self.kind else {
            return Err(Error::PolicyMismatch {
                op: "exp3_update",
                kind: self.kind.name(),
            });
        };
        self.check_arm(arm)?;
        check_reward(reward)?;
        if !(prob_used > 0.0) {
            return Err(Error::NonPositiveProbability(prob_used));
        }
        let m = self.unmasked_count().max(1) as f64;
        let scaled = (reward + 1.0) / 2.0;
        let estimate = scaled / prob_used;
        let log_w = self.weights[arm].ln() + gamma * estimate / m;
        let log_max = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| if i == arm { log_w } else { w.ln() })
            .fold(f64::NEG_INFINITY, f64::max);
        if log_max > WEIGHT_CEILING.ln() {
            // rescale in log space so the played arm cannot overflow first
            for (i, w) in self.weights.iter_mut().enumerate() {
                let log = if i == arm { log_w } else { w.ln() };
                *w = (log - log_max).exp().max(f64::MIN_POSITIVE);
            }
        } else {
            self.weights[arm] = log_w.exp();
        }
        self.t += 1;
        Ok(())
    }

    /// Divides every weight by the largest one. Leaves the distribution unchanged.
    pub fn renormalize_weights(&mut self) {
        let max = self.weights.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 && max.is_finite() {
            for w in &mut self.weights {
                *w /= max;
            }
        }
    }

    pub fn random_select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let m = self.unmasked_count();
        if m == 0 {
            return Err(Error::NoArmsAvailable);
        }
        let pick = rng.gen_range(0..m);
        Ok(self.unmasked_arms().nth(pick).expect("pick < unmasked count"))
    }

    pub fn sequential_select(&self) -> Result<usize> {
        self.unmasked_arms().next().ok_or(Error::NoArmsAvailable)
    }

    /// Kind-dispatched selection. Only EXP3 and random consume randomness.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Selection> {
        let unmasked = self.unmasked_count();
        if unmasked == 0 {
            return Err(Error::NoArmsAvailable);
        }
        let (arm, prob) = match self.kind {
            PolicyKind::Ucb1 { .. } => (self.ucb1_select()?, 1.0),
            PolicyKind::Exp3 { .. } => self.exp3_select(rng)?,
            PolicyKind::Random => (self.random_select(rng)?, 1.0 / unmasked as f64),
            PolicyKind::Sequential => (self.sequential_select()?, 1.0),
        };
        Ok(Selection { arm, prob, unmasked })
    }

    /// Kind-dispatched update. For random and sequential only the step counter
    /// (and the sequential cursor) moves.
    pub fn update(&mut self, selection: &Selection, reward: f64) -> Result<()> {
        match self.kind {
            PolicyKind::Ucb1 { .. } => self.ucb1_update(selection.arm, reward),
            PolicyKind::Exp3 { .. } => self.exp3_update(selection.arm, reward, selection.prob),
            PolicyKind::Random | PolicyKind::Sequential => {
                self.check_arm(selection.arm)?;
                check_reward(reward)?;
                self.cursor = selection.arm;
                self.t += 1;
                Ok(())
            }
        }
    }

    /// `q(a)` for UCB1, normalized weights for EXP3, empty otherwise.
    pub fn snapshot(&self) -> Vec<f64> {
        match self.kind {
            PolicyKind::Ucb1 { .. } => self.values.clone(),
            PolicyKind::Exp3 { .. } => {
                let total: f64 = self.weights.iter().sum();
                self.weights.iter().map(|w| w / total).collect()
            }
            PolicyKind::Random | PolicyKind::Sequential => Vec::new(),
        }
    }
}

/// Inverse-CDF sampling with `u` in [0, 1). Zero-probability entries are
/// never returned.
fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}
