use serde::{Deserialize, Serialize};

use super::ProbeError;
use crate::corpus::{Corpus, Paragraph};
use crate::dictionary::BilingualDictionary;
use crate::rng::{derive_stream, Stream};

pub const SOURCE_LANG: &str = "syna";
pub const TARGET_LANG: &str = "synb";

/// Parameters of a synthetic language pair with a planted lexicon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub vocab_size: usize,
    pub n_sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Exponent `s` of the rank-frequency law `P(k) ∝ k^-s`.
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab_size: 200,
            n_sentences: 5000,
            min_len: 5,
            max_len: 15,
            zipf_exponent: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.vocab_size < 2 {
            return Err(ProbeError::InvalidSpec("vocab_size must be at least 2"));
        }
        if self.min_len < 1 || self.max_len < self.min_len {
            return Err(ProbeError::InvalidSpec("need 1 <= min_len <= max_len"));
        }
        if !self.zipf_exponent.is_finite() || self.zipf_exponent < 0.0 {
            return Err(ProbeError::InvalidSpec("zipf_exponent must be finite and >= 0"));
        }
        Ok(())
    }

    fn width(&self) -> usize {
        (self.vocab_size - 1).to_string().len()
    }

    /// Word of rank `k` (0-based) in the source language.
    pub fn source_word(&self, k: usize) -> String {
        format!("sa{k:0w$}", w = self.width())
    }

    pub fn target_word(&self, k: usize) -> String {
        format!("tb{k:0w$}", w = self.width())
    }
}

/// Inverse-CDF sampler over ranks `0..n` with weights `(k+1)^-s`.
#[derive(Clone, Debug)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(n: usize, exponent: f64) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = (1..=n)
            .map(|k| {
                acc += (k as f64).powf(-exponent);
                acc
            })
            .collect();
        for c in &mut cdf {
            *c /= acc;
        }
        ZipfSampler { cdf }
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.cdf[k] - if k == 0 { 0.0 } else { self.cdf[k - 1] }
    }

    pub fn sample(&self, rng: &mut Stream) -> usize {
        let u = rng.next_f64();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Generates a Zipf-distributed source-language corpus and the planted
/// source-to-target bijection. Line `i` has `doc_id = i + 1`.
pub fn synth_corpus(spec: &SynthSpec) -> Result<(Corpus, BilingualDictionary), ProbeError> {
    spec.validate()?;

    let mut lexicon_rng = derive_stream(spec.seed, 0);
    let mut targets: Vec<usize> = (0..spec.vocab_size).collect();
    lexicon_rng.shuffle(&mut targets);
    let mut dict = BilingualDictionary::new(SOURCE_LANG, TARGET_LANG);
    for (k, &t) in targets.iter().enumerate() {
        dict.insert(&spec.source_word(k), &spec.target_word(t));
    }

    let words: Vec<String> = (0..spec.vocab_size).map(|k| spec.source_word(k)).collect();
    let zipf = ZipfSampler::new(spec.vocab_size, spec.zipf_exponent);
    let span = spec.max_len - spec.min_len + 1;
    let mut corpus = Corpus::new(SOURCE_LANG);
    for i in 0..spec.n_sentences {
        let doc_id = i as u64 + 1;
        let mut rng = derive_stream(spec.seed, doc_id);
        let len = spec.min_len + rng.below(span);
        let line: Vec<&str> = (0..len).map(|_| words[zipf.sample(&mut rng)].as_str()).collect();
        corpus
            .paragraphs
            .extend(Paragraph::parse(&line.join(" "), doc_id));
    }
    Ok((corpus, dict))
}
