//! Summaries and CSV curves built from one or more traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheduler::Trace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdHit {
    pub threshold: f64,
    /// First step whose recorded validation loss is at or below `threshold`.
    pub steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub label: String,
    pub policy: String,
    pub gain: String,
    pub k: usize,
    pub steps: u64,
    pub epoch_validation: Vec<f64>,
    /// Every recorded `(t, validation_loss)` point.
    pub validation_curve: Vec<(u64, f64)>,
    pub cumulative_reward: Vec<f64>,
    /// `action_histograms[epoch][arm]`.
    pub action_histograms: Vec<Vec<usize>>,
    pub final_epoch_actions: Vec<usize>,
    pub steps_to_threshold: Vec<ThresholdHit>,
}

pub fn summarize(label: &str, trace: &Trace, thresholds: &[f64]) -> ReportSummary {
    let k = trace.header.config.k;
    let mut cumulative = Vec::with_capacity(trace.events.len());
    let mut running = 0.0;
    let mut histograms: Vec<Vec<usize>> = Vec::new();
    let mut epoch_validation = Vec::new();
    let mut curve = Vec::new();
    for e in &trace.events {
        running += e.reward;
        cumulative.push(running);
        if histograms.len() <= e.epoch {
            histograms.resize(e.epoch + 1, vec![0; k]);
        }
        if e.arm < k {
            histograms[e.epoch][e.arm] += 1;
        }
        if let Some(v) = e.validation_loss {
            curve.push((e.t, v));
        }
    }
    // the last event of an epoch always carries the validation loss
    for pair in trace.events.windows(2) {
        if pair[0].epoch != pair[1].epoch {
            epoch_validation.extend(pair[0].validation_loss);
        }
    }
    if let Some(last) = trace.events.last() {
        epoch_validation.extend(last.validation_loss);
    }

    let final_epoch = trace.events.last().map(|e| e.epoch);
    let final_epoch_actions = trace
        .events
        .iter()
        .filter(|e| Some(e.epoch) == final_epoch)
        .map(|e| e.arm)
        .collect();
    let steps_to_threshold = thresholds
        .iter()
        .map(|&threshold| ThresholdHit {
            threshold,
            steps: curve.iter().find(|(_, v)| *v <= threshold).map(|(t, _)| *t),
        })
        .collect();

    let config = &trace.header.config;
    ReportSummary {
        label: label.to_owned(),
        policy: config.policy.name().to_owned(),
        gain: serde_json::to_value(config.gain)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        k,
        steps: trace.events.last().map_or(0, |e| e.t),
        epoch_validation,
        validation_curve: curve,
        cumulative_reward: cumulative,
        action_histograms: histograms,
        final_epoch_actions,
        steps_to_threshold,
    }
}

/// Output files of a report, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub files: BTreeMap<String, String>,
}

fn cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn header_row(first: &str, labels: &[&str]) -> String {
    let mut row = first.to_owned();
    for l in labels {
        row.push(',');
        row.push_str(l);
    }
    row.push('\n');
    row
}

/// Builds every report file. All traces must share the same `k`.
pub fn build_report(runs: &[(String, Trace)], thresholds: &[f64]) -> Result<ReportFiles> {
    if runs.is_empty() {
        return Err(Error::Trace("no traces given".into()));
    }
    let k = runs[0].1.header.config.k;
    if let Some((label, trace)) = runs.iter().find(|(_, t)| t.header.config.k != k) {
        return Err(Error::Trace(format!(
            "trace `{label}` has k={} but `{}` has k={k}",
            trace.header.config.k, runs[0].0
        )));
    }
    let summaries: Vec<ReportSummary> = runs.iter().map(|(l, t)| summarize(l, t, thresholds)).collect();
    let labels: Vec<&str> = summaries.iter().map(|s| s.label.as_str()).collect();
    let mut files = BTreeMap::new();

    let steps: BTreeSet<u64> = summaries
        .iter()
        .flat_map(|s| s.validation_curve.iter().map(|(t, _)| *t))
        .collect();
    let lookups: Vec<BTreeMap<u64, f64>> = summaries
        .iter()
        .map(|s| s.validation_curve.iter().copied().collect())
        .collect();
    let mut csv = header_row("t", &labels);
    for t in steps {
        let _ = write!(csv, "{t}");
        for lookup in &lookups {
            let _ = write!(csv, ",{}", cell(lookup.get(&t).copied()));
        }
        csv.push('\n');
    }
    files.insert("validation_loss.csv".to_owned(), csv);

    let longest = summaries.iter().map(|s| s.cumulative_reward.len()).max().unwrap_or(0);
    let mut csv = header_row("t", &labels);
    for i in 0..longest {
        let _ = write!(csv, "{}", i + 1);
        for s in &summaries {
            let _ = write!(csv, ",{}", cell(s.cumulative_reward.get(i).copied()));
        }
        csv.push('\n');
    }
    files.insert("cumulative_reward.csv".to_owned(), csv);

    let epochs = runs
        .iter()
        .flat_map(|(_, t)| t.events.last().map(|e| e.epoch + 1))
        .max()
        .unwrap_or(0);
    for epoch in 0..epochs {
        let sequences: Vec<Vec<usize>> = runs
            .iter()
            .map(|(_, t)| t.events.iter().filter(|e| e.epoch == epoch).map(|e| e.arm).collect())
            .collect();
        let len = sequences.iter().map(Vec::len).max().unwrap_or(0);
        let mut csv = header_row("step", &labels);
        for i in 0..len {
            let _ = write!(csv, "{i}");
            for seq in &sequences {
                match seq.get(i) {
                    Some(a) => {
                        let _ = write!(csv, ",{a}");
                    }
                    None => csv.push(','),
                }
            }
            csv.push('\n');
        }
        files.insert(format!("actions_epoch{epoch}.csv"), csv);
    }

    #[derive(Serialize)]
    struct SummaryFile<'a> {
        k: usize,
        runs: Vec<RunSummaryJson<'a>>,
    }
    #[derive(Serialize)]
    struct RunSummaryJson<'a> {
        label: &'a str,
        policy: &'a str,
        gain: &'a str,
        steps: u64,
        epoch_validation: &'a [f64],
        steps_to_threshold: &'a [ThresholdHit],
        action_histograms: &'a [Vec<usize>],
        final_epoch_actions: &'a [usize],
        total_reward: f64,
    }
    let summary = SummaryFile {
        k,
        runs: summaries
            .iter()
            .map(|s| RunSummaryJson {
                label: &s.label,
                policy: &s.policy,
                gain: &s.gain,
                steps: s.steps,
                epoch_validation: &s.epoch_validation,
                steps_to_threshold: &s.steps_to_threshold,
                action_histograms: &s.action_histograms,
                final_epoch_actions: &s.final_epoch_actions,
                total_reward: s.cumulative_reward.last().copied().unwrap_or(0.0),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::json("encoding summary", e))?;
    files.insert("summary.json".to_owned(), json + "\n");
    Ok(ReportFiles { files })
}

/// Run label from a trace path: file name without `.trace.jsonl` (or the last
/// extension).
pub fn label_from_path(path: &std::path::Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if let Some(stem) = name.strip_suffix(".trace.jsonl") {
        return stem.to_owned();
    }
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(name)
}

/// Makes labels unique by suffixing repeats with `_2`, `_3`, ...
pub fn dedup_labels(labels: Vec<String>) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    labels
        .into_iter()
        .map(|l| {
            let n = seen.entry(l.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                l
            } else {
                format!("{l}_{n}")
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn labels() {
        assert_eq!(label_from_path(Path::new("/x/ucb1.trace.jsonl")), "ucb1");
        assert_eq!(label_from_path(Path::new("run.jsonl")), "run");
        assert_eq!(
            dedup_labels(vec!["a".into(), "b".into(), "a".into()]),
            vec!["a".to_string(), "b".into(), "a_2".into()]
        );
    }
}
