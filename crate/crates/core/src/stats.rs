//! Run-level statistics.
//!
//! A [`GenerationReport`] stores integer counts only; every rate is derived
//! from counts on demand, so merging partial reports in any order gives the
//! same rates as one sequential pass.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::mixlang::MixedParagraph;
use crate::pipeline::{Action, Record};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {source}")]
    Record {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: inconsistent counts in record {id}")]
    Inconsistent { line: usize, id: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub paragraph_count: u64,
    /// Input tokens (original paragraph tokens).
    pub token_count: u64,
    pub masked: u64,
    pub kept: u64,
    pub replaced: u64,
    pub deleted: u64,
    /// Unmasked tokens with a dictionary entry, when known.
    pub covered: Option<u64>,
    /// Input tokens missing from a reference vocabulary, when one was given.
    pub oov_tokens: Option<u64>,
    /// Tokens in rendered inputs, masks included.
    pub output_tokens: u64,
    /// Rendered input length -> number of records.
    pub length_histogram: BTreeMap<u64, u64>,
}

fn add_opt(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x + y),
        (x, None) => x,
        (None, y) => y,
    }
}

fn rate(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl GenerationReport {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Report for one generated paragraph.
    pub fn from_mixed(mixed: &MixedParagraph, output_tokens: usize) -> Self {
        let c = &mixed.counts;
        let mut length_histogram = BTreeMap::new();
        length_histogram.insert(output_tokens as u64, 1);
        GenerationReport {
            paragraph_count: 1,
            token_count: c.total() as u64,
            masked: c.masked as u64,
            kept: c.kept as u64,
            replaced: c.replaced as u64,
            deleted: c.deleted as u64,
            covered: Some(c.covered as u64),
            oov_tokens: None,
            output_tokens: output_tokens as u64,
            length_histogram,
        }
    }

    /// Counts add; optional counts add over the reports that carry them.
    pub fn merge(&self, other: &GenerationReport) -> GenerationReport {
        let mut out = self.clone();
        out.merge_in(other);
        out
    }

    pub fn merge_in(&mut self, other: &GenerationReport) {
        self.paragraph_count += other.paragraph_count;
        self.token_count += other.token_count;
        self.masked += other.masked;
        self.kept += other.kept;
        self.replaced += other.replaced;
        self.deleted += other.deleted;
        self.covered = add_opt(self.covered, other.covered);
        self.oov_tokens = add_opt(self.oov_tokens, other.oov_tokens);
        self.output_tokens += other.output_tokens;
        for (len, n) in &other.length_histogram {
            *self.length_histogram.entry(*len).or_default() += n;
        }
    }

    pub fn unmasked(&self) -> u64 {
        self.kept + self.replaced + self.deleted
    }

    pub fn masked_fraction(&self) -> f64 {
        rate(self.masked, self.token_count)
    }

    /// Replaced over unmasked input tokens.
    pub fn mixing_ratio(&self) -> f64 {
        rate(self.replaced, self.unmasked())
    }

    /// Replaced over surviving untranslated tokens; may exceed 1.
    pub fn source_target_ratio(&self) -> Option<f64> {
        (self.kept > 0).then(|| self.replaced as f64 / self.kept as f64)
    }

    /// Deleted over covered tokens that were not replaced.
    pub fn deletion_rate(&self) -> Option<f64> {
        self.covered
            .map(|c| rate(self.deleted, c.saturating_sub(self.replaced)))
    }

    /// Covered over unmasked input tokens.
    pub fn coverage(&self) -> Option<f64> {
        self.covered.map(|c| rate(c, self.unmasked()))
    }

    pub fn oov_rate(&self) -> Option<f64> {
        self.oov_tokens.map(|o| rate(o, self.token_count))
    }

    /// `mixing_ratio <= coverage`, checked on integer counts.
    pub fn coverage_bound_holds(&self) -> Option<bool> {
        self.covered.map(|c| self.replaced <= c)
    }

    /// Internal consistency of the counts.
    pub fn is_consistent(&self) -> bool {
        let counts_ok = self.masked + self.unmasked() == self.token_count;
        let covered_ok = self
            .covered
            .is_none_or(|c| c >= self.replaced + self.deleted && c <= self.unmasked());
        let oov_ok = self.oov_tokens.is_none_or(|o| o <= self.token_count);
        let hist_ok = self.length_histogram.values().sum::<u64>() == self.paragraph_count;
        counts_ok && covered_ok && oov_ok && hist_ok
    }

    /// Counts and derived rates as a JSON object.
    pub fn to_json(&self) -> serde_json::Value {
        let hist: BTreeMap<String, u64> = self
            .length_histogram
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        serde_json::json!({
            "paragraph_count": self.paragraph_count,
            "token_count": self.token_count,
            "masked": self.masked,
            "kept": self.kept,
            "replaced": self.replaced,
            "deleted": self.deleted,
            "covered": self.covered,
            "oov_tokens": self.oov_tokens,
            "output_tokens": self.output_tokens,
            "masked_fraction": self.masked_fraction(),
            "mixing_ratio": self.mixing_ratio(),
            "source_target_ratio": self.source_target_ratio(),
            "deletion_rate": self.deletion_rate(),
            "coverage": self.coverage(),
            "coverage_bound_holds": self.coverage_bound_holds(),
            "oov_rate": self.oov_rate(),
            "length_histogram": hist,
        })
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.4}"))
}

impl fmt::Display for GenerationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, String); 13] = [
            ("paragraphs", self.paragraph_count.to_string()),
            ("tokens", self.token_count.to_string()),
            ("output tokens", self.output_tokens.to_string()),
            ("masked", self.masked.to_string()),
            ("replaced", self.replaced.to_string()),
            ("deleted", self.deleted.to_string()),
            ("kept", self.kept.to_string()),
            ("masked fraction", format!("{:.4}", self.masked_fraction())),
            ("mixing ratio", format!("{:.4}", self.mixing_ratio())),
            ("source/target ratio", fmt_opt(self.source_target_ratio())),
            ("deletion rate", fmt_opt(self.deletion_rate())),
            ("coverage", fmt_opt(self.coverage())),
            ("oov rate", fmt_opt(self.oov_rate())),
        ];
        for (name, value) in rows {
            writeln!(f, "{name:<22}{value:>12}")?;
        }
        Ok(())
    }
}

/// One word per line; blank lines ignored.
pub fn load_vocab(path: impl AsRef<Path>) -> std::io::Result<HashSet<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Fraction of token occurrences absent from `vocab` (0 on an empty corpus).
pub fn oov_rate(corpus: &Corpus, vocab: &HashSet<String>) -> f64 {
    let mut total = 0u64;
    let mut missing = 0u64;
    for tok in corpus.tokens() {
        total += 1;
        if !vocab.contains(&tok.surface) {
            missing += 1;
        }
    }
    rate(missing, total)
}

/// Rebuilds a report from a JSON-lines dataset. Coverage is recovered only
/// from records carrying audit actions.
pub fn report_from_dataset<R: BufRead>(
    reader: R,
    vocab: Option<&HashSet<String>>,
) -> Result<GenerationReport, StatsError> {
    let mut report = GenerationReport::empty();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|source| StatsError::Record {
            line: i + 1,
            source,
        })?;
        let m = &rec.meta;
        let used = m.masked + m.replaced + m.deleted;
        if used > m.tokens {
            return Err(StatsError::Inconsistent {
                line: i + 1,
                id: rec.id,
            });
        }
        let out_len = rec.input.split_whitespace().count() as u64;
        let mut part = GenerationReport {
            paragraph_count: 1,
            token_count: m.tokens,
            masked: m.masked,
            kept: m.tokens - used,
            replaced: m.replaced,
            deleted: m.deleted,
            covered: None,
            oov_tokens: None,
            output_tokens: out_len,
            length_histogram: BTreeMap::from([(out_len, 1)]),
        };
        if let Some(actions) = &rec.actions {
            let parsed: Option<Vec<Action>> = actions.chars().map(Action::from_code).collect();
            let Some(parsed) = parsed.filter(|a| a.len() as u64 == m.tokens) else {
                return Err(StatsError::Inconsistent {
                    line: i + 1,
                    id: rec.id,
                });
            };
            part.covered = Some(parsed.iter().filter(|a| a.is_covered()).count() as u64);
        }
        if let Some(vocab) = vocab {
            part.oov_tokens = Some(
                rec.target
                    .split_whitespace()
                    .filter(|w| !vocab.contains(*w))
                    .count() as u64,
            );
        }
        report.merge_in(&part);
    }
    Ok(report)
}
