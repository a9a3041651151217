//! Word and character error rates.
//!
//! Both rates come from a unit-cost Levenshtein alignment of hypothesis
//! against reference. When several minimal alignments exist the backtrace
//! prefers substitution, then insertion, then deletion.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRateResult {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_length: usize,
    /// `errors / reference_length`; infinite for an empty reference with a
    /// non-empty hypothesis. May exceed 1.
    pub rate: f64,
}

impl ErrorRateResult {
    fn new(substitutions: usize, insertions: usize, deletions: usize, reference_length: usize) -> Self {
        let errors = substitutions + insertions + deletions;
        let rate = if reference_length > 0 {
            errors as f64 / reference_length as f64
        } else if errors == 0 {
            0.0
        } else {
            f64::INFINITY
        };
        ErrorRateResult {
            substitutions,
            insertions,
            deletions,
            reference_length,
            rate,
        }
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// Corpus-level rate: total errors over total reference length.
    pub fn aggregate<'a>(results: impl IntoIterator<Item = &'a ErrorRateResult>) -> Self {
        let (mut s, mut i, mut d, mut n) = (0, 0, 0, 0);
        for r in results {
            s += r.substitutions;
            i += r.insertions;
            d += r.deletions;
            n += r.reference_length;
        }
        ErrorRateResult::new(s, i, d, n)
    }
}

/// Edit operation counts of one minimal alignment of `hypothesis` to `reference`.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> ErrorRateResult {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut dist = vec![0usize; (n + 1) * width];
    for j in 0..=m {
        dist[j] = j;
    }
    for i in 1..=n {
        dist[i * width] = i;
        for j in 1..=m {
            let cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            let diag = dist[(i - 1) * width + j - 1] + cost;
            let del = dist[(i - 1) * width + j] + 1;
            let ins = dist[i * width + j - 1] + 1;
            dist[i * width + j] = diag.min(del).min(ins);
        }
    }

    let (mut s, mut ins, mut del) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        if i > 0 && j > 0 {
            let cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            if here == dist[(i - 1) * width + j - 1] + cost {
                s += cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && here == dist[i * width + j - 1] + 1 {
            ins += 1;
            j -= 1;
        } else {
            del += 1;
            i -= 1;
        }
    }
    ErrorRateResult::new(s, ins, del, n)
}

/// Whitespace-run tokenization, no case folding or punctuation handling.
pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

pub fn wer(reference: &str, hypothesis: &str) -> ErrorRateResult {
    align(&words(reference), &words(hypothesis))
}

/// Character error rate over Unicode scalar values, whitespace included.
pub fn cer(reference: &str, hypothesis: &str) -> ErrorRateResult {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    align(&r, &h)
}
