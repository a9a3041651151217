//! Progress gains and their rescaling into `[-1, 1]`.
//!
//! Raw gains shrink as training converges, so rewards are expressed relative
//! to the 0.2 and 0.8 quantiles of the gains seen so far:
//!
//! ```text
//!        -1                                 gain < q_lo
//! r =    +1                                 gain > q_hi
//!        2 (gain - q_lo) / (q_hi - q_lo) - 1   otherwise
//! ```

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LOW_QUANTILE: f64 = 0.2;
pub const HIGH_QUANTILE: f64 = 0.8;
/// Below this many stored gains the raw gain is clamped instead of rescaled.
pub const DEFAULT_WARMUP: usize = 10;

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(x))
    }
}

/// Loss decrease on the trained batch.
pub fn prediction_gain(loss_before: f64, loss_after: f64) -> Result<f64> {
    Ok(finite(loss_before)? - finite(loss_after)?)
}

/// Loss on the trained batch before the update minus the loss on a fresh
/// batch of the same task after it. Drawing that fresh batch from the same
/// task is the caller's job.
pub fn self_prediction_gain(loss_before_x: f64, loss_after_xprime: f64) -> Result<f64> {
    Ok(finite(loss_before_x)? - finite(loss_after_xprime)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainKind {
    Pg,
    Spg,
}

/// Record of raw gains, optionally windowed (oldest evicted first).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GainHistory {
    gains: VecDeque<f64>,
    // Same values in total order, kept in step with `gains`.
    sorted: Vec<f64>,
    capacity: Option<usize>,
}

impl GainHistory {
    pub fn new(capacity: Option<usize>) -> Self {
        GainHistory {
            gains: VecDeque::new(),
            sorted: Vec::new(),
            capacity,
        }
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut h = GainHistory::default();
        for v in values {
            h.push(v)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, gain: f64) -> Result<()> {
        finite(gain)?;
        if self.capacity == Some(0) {
            return Ok(());
        }
        if let Some(cap) = self.capacity {
            while self.gains.len() >= cap {
                if let Some(old) = self.gains.pop_front() {
                    let at = self.sorted.partition_point(|v| v.total_cmp(&old).is_lt());
                    self.sorted.remove(at);
                }
            }
        }
        self.gains.push_back(gain);
        let at = self.sorted.partition_point(|v| v.total_cmp(&gain).is_le());
        self.sorted.insert(at, gain);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.gains.iter().copied()
    }

    fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Linear interpolation between order statistics at rank `p * (n - 1)`.
pub fn quantile(history: &GainHistory, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidQuantile(p));
    }
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    Ok(quantile_sorted(history.sorted(), p))
}

/// A mapped reward with the quantile bounds it was computed from (absent
/// during warmup).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedReward {
    pub reward: f64,
    pub q_lo: Option<f64>,
    pub q_hi: Option<f64>,
}

/// Maps `raw_gain` against `history` without recording it.
pub fn map_reward(raw_gain: f64, history: &GainHistory, warmup: usize) -> Result<MappedReward> {
    finite(raw_gain)?;
    if history.len() < warmup || history.is_empty() {
        return Ok(MappedReward {
            reward: raw_gain.clamp(-1.0, 1.0),
            q_lo: None,
            q_hi: None,
        });
    }
    let sorted = history.sorted();
    let q_lo = quantile_sorted(&sorted, LOW_QUANTILE);
    let q_hi = quantile_sorted(&sorted, HIGH_QUANTILE);
    let reward = if raw_gain < q_lo {
        -1.0
    } else if raw_gain > q_hi {
        1.0
    } else if q_hi == q_lo {
        0.0
    } else {
        (2.0 * (raw_gain - q_lo) / (q_hi - q_lo) - 1.0).clamp(-1.0, 1.0)
    };
    Ok(MappedReward {
        reward,
        q_lo: Some(q_lo),
        q_hi: Some(q_hi),
    })
}

/// Gain history plus warmup threshold; maps each gain and then records it.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMapper {
    history: GainHistory,
    warmup: usize,
}

impl RewardMapper {
    pub fn new(warmup: usize, capacity: Option<usize>) -> Self {
        RewardMapper {
            history: GainHistory::new(capacity),
            warmup,
        }
    }

    pub fn history(&self) -> &GainHistory {
        &self.history
    }

    pub fn map_and_record(&mut self, raw_gain: f64) -> Result<MappedReward> {
        let mapped = map_reward(raw_gain, &self.history, self.warmup)?;
        self.history.push(raw_gain)?;
        Ok(mapped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_to_ten() -> GainHistory {
        GainHistory::from_values((0..=10).map(f64::from)).unwrap()
    }

    #[test]
    fn gains() {
        assert_eq!(prediction_gain(2.0, 1.5).unwrap(), 0.5);
        assert_eq!(prediction_gain(0.7, 0.7).unwrap(), 0.0);
        assert!((prediction_gain(1.0, 1.4).unwrap() + 0.4).abs() < 1e-15);
        assert!((self_prediction_gain(2.0, 1.8).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(self_prediction_gain(3.0, 3.0).unwrap(), 0.0);
        assert!(prediction_gain(f64::NAN, 1.0).is_err());
        assert!(self_prediction_gain(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_interpolation() {
        let h = zero_to_ten();
        assert_eq!(quantile(&h, 0.2).unwrap(), 2.0);
        assert_eq!(quantile(&h, 0.8).unwrap(), 8.0);
        let single = GainHistory::from_values([4.5]).unwrap();
        assert_eq!(quantile(&single, 0.37).unwrap(), 4.5);
        let pair = GainHistory::from_values([3.0, 1.0]).unwrap();
        assert_eq!(quantile(&pair, 0.5).unwrap(), 2.0);
        assert!(matches!(quantile(&GainHistory::default(), 0.5), Err(Error::EmptyHistory)));
        assert!(quantile(&h, 1.5).is_err());
    }

    #[test]
    fn branches() {
        let h = zero_to_ten();
        let map = |g| map_reward(g, &h, DEFAULT_WARMUP).unwrap();
        assert_eq!(map(12.0).reward, 1.0);
        assert_eq!(map(1.0).reward, -1.0);
        assert_eq!(map(5.0).reward, 0.0);
        assert_eq!(map(2.0).reward, -1.0);
        assert_eq!(map(8.0).reward, 1.0);
        assert_eq!((map(5.0).q_lo, map(5.0).q_hi), (Some(2.0), Some(8.0)));
    }

    #[test]
    fn degenerate_history_is_neutral() {
        let h = GainHistory::from_values(std::iter::repeat(0.25).take(12)).unwrap();
        assert_eq!(map_reward(0.25, &h, 10).unwrap().reward, 0.0);
        // off the degenerate point the strict branches still apply
        assert_eq!(map_reward(0.3, &h, 10).unwrap().reward, 1.0);
        assert_eq!(map_reward(-3.0, &h, 10).unwrap().reward, -1.0);
    }

    #[test]
    fn warmup_clamps() {
        let h = GainHistory::from_values([0.0, 1.0, 2.0]).unwrap();
        let m = map_reward(3.5, &h, 10).unwrap();
        assert_eq!((m.reward, m.q_lo), (1.0, None));
        assert_eq!(map_reward(-0.25, &h, 10).unwrap().reward, -0.25);
        assert!(map_reward(f64::NAN, &h, 10).is_err());
    }

    #[test]
    fn mapping_excludes_current_gain() {
        let mut mapper = RewardMapper::new(1, None);
        mapper.map_and_record(0.0).unwrap();
        // with only {0} in history q_lo = q_hi = 0, so 5 maps to +1; had 5 been
        // inserted first the bounds would be (1, 4) and the reward still +1,
        // whereas 0 would map to -1
        assert_eq!(mapper.map_and_record(5.0).unwrap().reward, 1.0);
        let m = mapper.map_and_record(0.0).unwrap();
        assert_eq!((m.q_lo, m.q_hi), (Some(1.0), Some(4.0)));
        assert_eq!(m.reward, -1.0);
        assert_eq!(mapper.history().len(), 3);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut h = GainHistory::new(Some(3));
        for g in [1.0, 2.0, 3.0, 4.0] {
            h.push(g).unwrap();
        }
        assert_eq!(h.iter().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
        assert!(h.push(f64::NAN).is_err());
        assert_eq!(h.len(), 3);
    }

    #[test]
    fn gain_kind_serialization() {
        assert_eq!(serde_json::to_string(&GainKind::Spg).unwrap(), "\"spg\"");
    }
}
