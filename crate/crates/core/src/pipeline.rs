//! Corpus-level generation of `(noisy mixed input, clean target)` pairs.
//!
//! Each paragraph draws from its own stream, `derive_stream(seed, doc_id)`,
//! so a record depends only on its paragraph and the configuration. Workers
//! process fixed-size chunks and results are written back in `doc_id` order,
//! which makes the output byte-identical for any worker count.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ConfigError;
use crate::corpus::{Corpus, Paragraph};
use crate::dictionary::BilingualDictionary;
use crate::mixlang::{mix, MixConfig, MixCounts, MixedItem, MixedParagraph};
use crate::noise::{corrupt, NoiseConfig};
use crate::rng::derive_stream;
use crate::stats::GenerationReport;

const CHUNK: usize = 2048;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("failed to start worker pool: {0}")]
    Pool(String),
    #[error("output write failed after {written} records: {source}")]
    Sink {
        written: u64,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub noise: NoiseConfig,
    pub mix: MixConfig,
    pub seed: u64,
    /// Free-form label recorded with outputs, e.g. which side of a
    /// translation pair the corpus belongs to.
    pub direction_label: String,
}

impl PipelineConfig {
    /// Noise, replacement and deletion all off: output equals input.
    pub fn identity() -> Self {
        PipelineConfig {
            noise: NoiseConfig::disabled(),
            mix: MixConfig::disabled(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.noise.validate()?;
        self.mix.validate()
    }
}

/// What happened to one original token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Masked,
    /// Kept, no dictionary entry.
    Kept,
    /// Kept although a dictionary entry existed.
    KeptCovered,
    Replaced,
    Deleted,
}

impl Action {
    pub fn code(self) -> char {
        match self {
            Action::Masked => 'M',
            Action::Kept => 'K',
            Action::KeptCovered => 'C',
            Action::Replaced => 'R',
            Action::Deleted => 'D',
        }
    }

    pub fn from_code(c: char) -> Option<Action> {
        Some(match c {
            'M' => Action::Masked,
            'K' => Action::Kept,
            'C' => Action::KeptCovered,
            'R' => Action::Replaced,
            'D' => Action::Deleted,
            _ => return None,
        })
    }

    pub fn is_covered(self) -> bool {
        matches!(self, Action::KeptCovered | Action::Replaced | Action::Deleted)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PseudoPair {
    pub doc_id: u64,
    pub input_text: String,
    pub target_text: String,
    /// Indexed by original token position.
    pub actions: Vec<Action>,
    pub counts: MixCounts,
    pub output_tokens: usize,
}

impl PseudoPair {
    pub fn action_codes(&self) -> String {
        self.actions.iter().map(|a| a.code()).collect()
    }

    pub fn report(&self) -> GenerationReport {
        let mut r = GenerationReport::empty();
        let c = &self.counts;
        r.paragraph_count = 1;
        r.token_count = c.total() as u64;
        r.masked = c.masked as u64;
        r.kept = c.kept as u64;
        r.replaced = c.replaced as u64;
        r.deleted = c.deleted as u64;
        r.covered = Some(c.covered as u64);
        r.output_tokens = self.output_tokens as u64;
        r.length_histogram.insert(self.output_tokens as u64, 1);
        r
    }

    pub fn to_record(&self, audit: bool) -> Record {
        Record {
            id: self.doc_id,
            input: self.input_text.clone(),
            target: self.target_text.clone(),
            meta: RecordMeta {
                replaced: self.counts.replaced as u64,
                deleted: self.counts.deleted as u64,
                masked: self.counts.masked as u64,
                tokens: self.counts.total() as u64,
            },
            actions: audit.then(|| self.action_codes()),
        }
    }
}

/// One JSON-lines output record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    pub input: String,
    pub target: String,
    pub meta: RecordMeta,
    /// One action code per original token (`M K C R D`), audit runs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub replaced: u64,
    pub deleted: u64,
    pub masked: u64,
    pub tokens: u64,
}

/// Runs noise then mixing on one paragraph with its derived stream.
pub fn transform(
    paragraph: &Paragraph,
    dict: &BilingualDictionary,
    config: &PipelineConfig,
) -> MixedParagraph {
    let mut rng = derive_stream(config.seed, paragraph.doc_id);
    let noisy = corrupt(paragraph, &config.noise, &mut rng);
    mix(&noisy, dict, &config.mix, &mut rng)
}

pub fn generate_pair(
    paragraph: &Paragraph,
    dict: &BilingualDictionary,
    config: &PipelineConfig,
) -> PseudoPair {
    let mixed = transform(paragraph, dict, config);

    let mut input_text = String::new();
    let mut output_tokens = 0;
    for s in mixed.surfaces(&config.noise.mask_token) {
        if output_tokens > 0 {
            input_text.push(' ');
        }
        input_text.push_str(s);
        output_tokens += 1;
    }

    let mut actions = vec![Action::Kept; paragraph.token_count()];
    for item in &mixed.items {
        match item {
            MixedItem::Masked { start, end } => actions[*start..*end].fill(Action::Masked),
            MixedItem::Kept { token, covered } => {
                actions[token.index] = if *covered {
                    Action::KeptCovered
                } else {
                    Action::Kept
                }
            }
            MixedItem::Replaced { original, .. } => actions[original.index] = Action::Replaced,
            MixedItem::Deleted(t) => actions[t.index] = Action::Deleted,
        }
    }

    PseudoPair {
        doc_id: paragraph.doc_id,
        input_text,
        target_text: paragraph.text(),
        actions,
        counts: mixed.counts,
        output_tokens,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GenerateOptions<'a> {
    pub workers: usize,
    /// Include per-token action codes in each record.
    pub audit: bool,
    /// Reference vocabulary for the OOV count.
    pub vocab: Option<&'a HashSet<String>>,
}

impl Default for GenerateOptions<'_> {
    fn default() -> Self {
        GenerateOptions {
            workers: 1,
            audit: false,
            vocab: None,
        }
    }
}

fn with_pool<T: Send>(
    workers: usize,
    job: impl FnOnce() -> T + Send,
) -> Result<T, PipelineError> {
    if workers == 0 {
        return Err(PipelineError::NoWorkers);
    }
    if workers == 1 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

fn oov_count(paragraph: &Paragraph, vocab: &HashSet<String>) -> u64 {
    paragraph
        .tokens()
        .filter(|t| !vocab.contains(&t.surface))
        .count() as u64
}

/// Writes one JSON line per paragraph, in corpus order, and returns the
/// merged report. On a write failure the error carries the number of
/// records already written.
pub fn generate_dataset<W: Write + Send>(
    corpus: &Corpus,
    dict: &BilingualDictionary,
    config: &PipelineConfig,
    out: &mut W,
    opts: &GenerateOptions<'_>,
) -> Result<GenerationReport, PipelineError> {
    config.validate()?;
    with_pool(opts.workers, || -> Result<_, PipelineError> {
        let mut report = GenerationReport::empty();
        if opts.vocab.is_some() {
            report.oov_tokens = Some(0);
        }
        let mut written = 0u64;
        for chunk in corpus.paragraphs.chunks(CHUNK) {
            let rendered: Vec<(String, GenerationReport)> = chunk
                .par_iter()
                .map(|p| {
                    let pair = generate_pair(p, dict, config);
                    let mut line = serde_json::to_string(&pair.to_record(opts.audit))
                        .expect("records always serialize");
                    line.push('\n');
                    let mut r = pair.report();
                    if let Some(v) = opts.vocab {
                        r.oov_tokens = Some(oov_count(p, v));
                    }
                    (line, r)
                })
                .collect();
            for (line, r) in rendered {
                out.write_all(line.as_bytes())
                    .map_err(|source| PipelineError::Sink { written, source })?;
                written += 1;
                report.merge_in(&r);
            }
        }
        out.flush()
            .map_err(|source| PipelineError::Sink { written, source })?;
        Ok(report)
    })?
}

/// Report for a run without rendering any output.
pub fn simulate(
    corpus: &Corpus,
    dict: &BilingualDictionary,
    config: &PipelineConfig,
    workers: usize,
) -> Result<GenerationReport, PipelineError> {
    config.validate()?;
    with_pool(workers, || {
        corpus
            .paragraphs
            .par_iter()
            .map(|p| {
                let mixed = transform(p, dict, config);
                let out_len = mixed.surfaces("").count();
                GenerationReport::from_mixed(&mixed, out_len)
            })
            .reduce(GenerationReport::empty, |a, b| a.merge(&b))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::parse_muse_str;

    #[test]
    fn identity_config_copies_text() {
        let p = Paragraph::parse("Anjing makan. Kucing tidur!", 3).unwrap();
        let d = parse_muse_str("anjing dog\n", "id", "en").unwrap();
        let pair = generate_pair(&p, &d, &PipelineConfig::identity());
        assert_eq!(pair.input_text, pair.target_text);
        assert_eq!(pair.action_codes(), "CKKK");
    }

    #[test]
    fn single_token_trace() {
        let p = Paragraph::parse("anjing makan.", 1).unwrap();
        let d = parse_muse_str("anjing dog\n", "id", "en").unwrap();
        let mut cfg = PipelineConfig::identity();
        cfg.mix.replacement_enabled = true;
        cfg.mix.replace_prob = 1.0;
        let pair = generate_pair(&p, &d, &cfg);
        assert_eq!(pair.input_text, "dog makan.");
        assert_eq!(pair.target_text, "anjing makan.");
        assert_eq!(pair.action_codes(), "RK");
    }

    #[test]
    fn pair_is_deterministic() {
        let p = Paragraph::parse("a b c. d e f! g h i j k", 17).unwrap();
        let d = parse_muse_str("a x\nd y\ng z\n", "s", "t").unwrap();
        let cfg = PipelineConfig::default();
        assert_eq!(generate_pair(&p, &d, &cfg), generate_pair(&p, &d, &cfg));
    }

    #[test]
    fn record_layout() {
        let p = Paragraph::parse("a b", 7).unwrap();
        let d = BilingualDictionary::new("s", "t");
        let pair = generate_pair(&p, &d, &PipelineConfig::identity());
        let line = serde_json::to_string(&pair.to_record(false)).unwrap();
        assert_eq!(
            line,
            r#"{"id":7,"input":"a b","target":"a b","meta":{"replaced":0,"deleted":0,"masked":0,"tokens":2}}"#
        );
        let line = serde_json::to_string(&pair.to_record(true)).unwrap();
        assert!(line.ends_with(r#""actions":"KK"}"#));
    }

    #[test]
    fn empty_corpus() {
        let mut out = Vec::new();
        let r = generate_dataset(
            &Corpus::new("x"),
            &BilingualDictionary::new("s", "t"),
            &PipelineConfig::default(),
            &mut out,
            &GenerateOptions::default(),
        )
        .unwrap();
        assert!(out.is_empty());
        assert_eq!(r, GenerationReport::empty());
    }

    #[test]
    fn zero_workers_rejected() {
        let mut out = Vec::new();
        let opts = GenerateOptions {
            workers: 0,
            ..Default::default()
        };
        assert!(matches!(
            generate_dataset(
                &Corpus::new("x"),
                &BilingualDictionary::new("s", "t"),
                &PipelineConfig::default(),
                &mut out,
                &opts
            ),
            Err(PipelineError::NoWorkers)
        ));
    }

    struct FailAfter(usize);

    impl Write for FailAfter {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            if self.0 == 0 {
                return Err(std::io::Error::other("disk full"));
            }
            self.0 -= 1;
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn sink_failure_reports_progress() {
        let corpus = Corpus::from_lines("x", ["a", "b", "c", "d"]);
        let err = generate_dataset(
            &corpus,
            &BilingualDictionary::new("s", "t"),
            &PipelineConfig::default(),
            &mut FailAfter(2),
            &GenerateOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::Sink { written: 2, .. }));
    }

    #[test]
    fn simulate_matches_generate() {
        let corpus = Corpus::from_lines(
            "x",
            (0..300).map(|i| format!("a{} b{} c. d{} e{}", i % 7, i % 5, i % 3, i % 11)),
        );
        let mut d = BilingualDictionary::new("s", "t");
        for w in ["a1", "a2", "b3", "d0", "e4", "c."] {
            d.insert(w, "zz");
        }
        let cfg = PipelineConfig::default();
        let mut sink = Vec::new();
        let a = generate_dataset(&corpus, &d, &cfg, &mut sink, &GenerateOptions::default()).unwrap();
        let b = simulate(&corpus, &d, &cfg, 3).unwrap();
        assert_eq!(a, b);
    }
}
