//! Compression-ratio difficulty ranking.
//!
//! Every training example is scored by how well its raw bytes compress:
//!
//! ```text
//! cr = 1 - size_after / size_before
//! ```
//!
//! Clean recordings compress well and score close to 1; noisy recordings carry
//! more entropy and score near (or below) 0. Examples are ranked by descending
//! score and cut into `k` contiguous tasks, task 0 being the easiest.

mod snr;

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::{Compression, GzBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use snr::{snr_study, synthesize_noisy_signal, SnrPoint, SyntheticSignal, BATTERY_SAMPLE_RATE};

/// A byte-level compressor used to score payloads.
pub trait Compressor {
    /// Identifier recorded alongside task sets, `<name>@<level>`.
    fn descriptor(&self) -> String;

    fn compressed_len(&self, payload: &[u8]) -> io::Result<usize>;
}

/// gzip framing around DEFLATE, matching the output of the standard `gzip`
/// utility. The header carries no file name and a zero mtime so the output
/// length only depends on the payload and the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gzip {
    pub level: u32,
}

impl Default for Gzip {
    fn default() -> Self {
        Gzip {
            level: Compression::default().level(),
        }
    }
}

impl Compressor for Gzip {
    fn descriptor(&self) -> String {
        format!("gzip@{}", self.level)
    }

    fn compressed_len(&self, payload: &[u8]) -> io::Result<usize> {
        let mut encoder: GzEncoder<ByteCounter> =
            GzBuilder::new().mtime(0).write(ByteCounter::default(), Compression::new(self.level));
        encoder.write_all(payload)?;
        Ok(encoder.finish()?.written)
    }
}

#[derive(Debug, Default)]
struct ByteCounter {
    written: usize,
}

impl Write for ByteCounter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.written += buf.len();
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Sizes and score of one compressed payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionMeasure {
    pub size_before: u64,
    pub size_after: u64,
    pub cr: f64,
}

impl CompressionMeasure {
    pub fn from_sizes(size_before: u64, size_after: u64) -> Self {
        CompressionMeasure {
            size_before,
            size_after,
            cr: 1.0 - size_after as f64 / size_before as f64,
        }
    }
}

pub fn measure_compression(payload: &[u8], compressor: &dyn Compressor) -> Result<CompressionMeasure> {
    if payload.is_empty() {
        return Err(Error::EmptyPayload);
    }
    let after = compressor.compressed_len(payload).map_err(Error::Compressor)?;
    Ok(CompressionMeasure::from_sizes(payload.len() as u64, after as u64))
}

/// Compression ratio of `payload`. Expansion yields a negative ratio, which is
/// kept as-is.
pub fn compute_compression_ratio(payload: &[u8], compressor: &dyn Compressor) -> Result<f64> {
    measure_compression(payload, compressor).map(|m| m.cr)
}

/// One row of a training manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub payload_path: PathBuf,
    pub transcript: Option<String>,
}

/// Parses `id<TAB>path<TAB>transcript` lines. Blank lines are skipped, the
/// transcript column may be empty or missing. Relative paths are resolved
/// against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(3, '\t');
        let id = cols.next().unwrap_or_default();
        let path = cols.next().ok_or_else(|| Error::Manifest {
            line: idx + 1,
            reason: "expected at least two tab-separated columns".into(),
        })?;
        if id.is_empty() || path.is_empty() {
            return Err(Error::Manifest {
                line: idx + 1,
                reason: "empty id or path".into(),
            });
        }
        let transcript = cols.next().filter(|t| !t.is_empty()).map(str::to_owned);
        let path = Path::new(path);
        let payload_path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            base_dir.join(path)
        };
        entries.push(ManifestEntry {
            id: id.to_owned(),
            payload_path,
            transcript,
        });
    }
    Ok(entries)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base)
}

/// A training example with its compression score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedExample {
    pub id: String,
    #[serde(skip)]
    pub payload_path: PathBuf,
    pub size_before: u64,
    pub size_after: u64,
    pub cr: f64,
    pub transcript: Option<String>,
}

/// Scores every manifest row and sorts by descending ratio, ties broken by
/// ascending id.
pub fn rank_manifest(entries: &[ManifestEntry], compressor: &dyn Compressor) -> Result<Vec<RankedExample>> {
    let mut seen = HashSet::with_capacity(entries.len());
    for entry in entries {
        if !seen.insert(entry.id.as_str()) {
            return Err(Error::DuplicateId(entry.id.clone()));
        }
    }

    let mut ranked = entries
        .iter()
        .map(|entry| {
            let bytes = fs::read(&entry.payload_path).map_err(|source| Error::UnreadablePayload {
                id: entry.id.clone(),
                path: entry.payload_path.clone(),
                source,
            })?;
            let measure = measure_compression(&bytes, compressor).map_err(|e| match e {
                Error::EmptyPayload => Error::UnreadablePayload {
                    id: entry.id.clone(),
                    path: entry.payload_path.clone(),
                    source: io::Error::new(io::ErrorKind::InvalidData, "empty payload"),
                },
                other => other,
            })?;
            Ok(RankedExample {
                id: entry.id.clone(),
                payload_path: entry.payload_path.clone(),
                size_before: measure.size_before,
                size_after: measure.size_after,
                cr: measure.cr,
                transcript: entry.transcript.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    sort_ranked(&mut ranked);
    Ok(ranked)
}

pub(crate) fn sort_ranked(ranked: &mut [RankedExample]) {
    ranked.sort_by(|a, b| b.cr.total_cmp(&a.cr).then_with(|| a.id.cmp(&b.id)));
}

pub fn write_ranked_jsonl<W: Write>(mut out: W, ranked: &[RankedExample]) -> Result<()> {
    for example in ranked {
        let line = serde_json::to_string(example).map_err(|e| Error::json("encoding ranked example", e))?;
        writeln!(out, "{line}").map_err(|e| Error::io("writing ranked output", e))?;
    }
    Ok(())
}

/// Reads ranked JSONL back. The payload path is not part of the format and is
/// left empty.
pub fn read_ranked_jsonl(text: &str) -> Result<Vec<RankedExample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("ranked line {}", i + 1), e)))
        .collect()
}

/// `k` difficulty-ordered partitions of the example ids. Index 0 holds the
/// highest compression ratios.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    pub k: usize,
    pub tasks: Vec<Vec<String>>,
    pub compressor: String,
}

impl TaskSet {
    pub fn task_sizes(&self) -> Vec<usize> {
        self.tasks.iter().map(Vec::len).collect()
    }

    pub fn total_examples(&self) -> usize {
        self.tasks.iter().map(Vec::len).sum()
    }

    /// Structural checks: `k` matches, no task is empty, no id repeats.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.tasks.len() != self.k {
            return Err(Error::Config(format!(
                "task set declares k={} but holds {} tasks",
                self.k,
                self.tasks.len()
            )));
        }
        if let Some(i) = self.tasks.iter().position(Vec::is_empty) {
            return Err(Error::Config(format!("task {i} is empty")));
        }
        let mut seen = HashSet::new();
        for id in self.tasks.iter().flatten() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: TaskSet = serde_json::from_str(text).map_err(|e| Error::json("parsing task set", e))?;
        set.validate()?;
        Ok(set)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::json("encoding task set", e))
    }
}

/// Sizes of `k` contiguous slices over `n` items; the remainder goes to the
/// lowest indices.
pub fn partition_sizes(n: usize, k: usize) -> Result<Vec<usize>> {
    if k < 1 || k > n {
        return Err(Error::InvalidTaskCount { k, examples: n });
    }
    let (base, rem) = (n / k, n % k);
    Ok((0..k).map(|i| base + usize::from(i < rem)).collect())
}

pub fn partition_tasks(ranked: &[RankedExample], k: usize, compressor: &str) -> Result<TaskSet> {
    let sizes = partition_sizes(ranked.len(), k)?;
    let mut rest = ranked;
    let tasks = sizes
        .into_iter()
        .map(|size| {
            let (head, tail) = rest.split_at(size);
            rest = tail;
            head.iter().map(|e| e.id.clone()).collect()
        })
        .collect();
    Ok(TaskSet {
        k,
        tasks,
        compressor: compressor.to_owned(),
    })
}
