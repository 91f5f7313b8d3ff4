//! Span masking and sentence permutation.

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::corpus::{Paragraph, Token};
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Fraction of paragraph tokens to cover with mask spans.
    pub mask_fraction: f64,
    /// Poisson mean of span lengths.
    pub span_lambda: f64,
    pub permute_sentences: bool,
    pub mask_token: String,
    pub enabled: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            mask_fraction: 0.35,
            span_lambda: 3.5,
            permute_sentences: true,
            mask_token: "<mask>".to_owned(),
            enabled: true,
        }
    }
}

impl NoiseConfig {
    pub fn disabled() -> Self {
        NoiseConfig {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.mask_fraction) {
            return Err(ConfigError::invalid("noise.mask_fraction", "must be in [0, 1]"));
        }
        if !self.span_lambda.is_finite() || self.span_lambda <= 0.0 {
            return Err(ConfigError::invalid("noise.span_lambda", "must be a positive number"));
        }
        if self.mask_token.is_empty() || self.mask_token.chars().any(char::is_whitespace) {
            return Err(ConfigError::invalid(
                "noise.mask_token",
                "must be non-empty and contain no whitespace",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoisyItem {
    /// One mask replacing original tokens `start..end`.
    Mask { start: usize, end: usize },
    Original(Token),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisyParagraph {
    pub items: Vec<NoisyItem>,
    /// `sentence_order[k]` is the original index of the k-th emitted sentence.
    pub sentence_order: Vec<usize>,
    /// Token count of the source paragraph.
    pub token_count: usize,
}

impl NoisyParagraph {
    /// The paragraph unchanged.
    pub fn identity(paragraph: &Paragraph) -> Self {
        NoisyParagraph {
            items: paragraph.tokens().cloned().map(NoisyItem::Original).collect(),
            sentence_order: (0..paragraph.sentences.len()).collect(),
            token_count: paragraph.token_count(),
        }
    }

    pub fn masked_tokens(&self) -> usize {
        self.items
            .iter()
            .map(|it| match it {
                NoisyItem::Mask { start, end } => end - start,
                NoisyItem::Original(_) => 0,
            })
            .sum()
    }

    pub fn mask_items(&self) -> usize {
        self.items
            .iter()
            .filter(|it| matches!(it, NoisyItem::Mask { .. }))
            .count()
    }
}

/// Fraction of original tokens covered by masks (0 for an empty paragraph).
pub fn masked_fraction(noisy: &NoisyParagraph) -> f64 {
    if noisy.token_count == 0 {
        0.0
    } else {
        noisy.masked_tokens() as f64 / noisy.token_count as f64
    }
}

/// Applies sentence permutation and then span masking.
///
/// The mask budget is `round(mask_fraction * tokens)`. Each span length is a
/// Poisson draw clamped to at least 1, to the remaining budget, and to the
/// longest unmasked run inside one sentence, so the budget is always met.
/// Starts are uniform over placements that fit.
pub fn corrupt(paragraph: &Paragraph, config: &NoiseConfig, rng: &mut Stream) -> NoisyParagraph {
    if !config.enabled {
        return NoisyParagraph::identity(paragraph);
    }

    let mut order: Vec<usize> = (0..paragraph.sentences.len()).collect();
    if config.permute_sentences {
        rng.shuffle(&mut order);
    }

    // Permuted token stream with the emitted-sentence slot of each token.
    let mut stream: Vec<(&Token, usize)> = Vec::with_capacity(paragraph.token_count());
    for (slot, &s) in order.iter().enumerate() {
        stream.extend(paragraph.sentences[s].tokens.iter().map(|t| (t, slot)));
    }
    let n = stream.len();

    let mut masked = vec![false; n];
    // span_len[p] > 0 marks a mask span starting at stream position p
    let mut span_len = vec![0usize; n];
    let mut budget = ((config.mask_fraction * n as f64).round() as usize).min(n);
    let mut runs: Vec<(usize, usize)> = Vec::new();

    while budget > 0 {
        let drawn = rng.poisson(config.span_lambda).max(1) as usize;

        runs.clear();
        let mut p = 0;
        while p < n {
            if masked[p] {
                p += 1;
                continue;
            }
            let start = p;
            let slot = stream[p].1;
            while p < n && !masked[p] && stream[p].1 == slot {
                p += 1;
            }
            runs.push((start, p - start));
        }
        let Some(longest) = runs.iter().map(|r| r.1).max() else {
            break;
        };

        let len = drawn.min(budget).min(longest);
        let placements: usize = runs
            .iter()
            .filter(|r| r.1 >= len)
            .map(|r| r.1 - len + 1)
            .sum();
        let mut pick = rng.below(placements);
        let mut start = 0;
        for &(rs, rl) in runs.iter().filter(|r| r.1 >= len) {
            let fits = rl - len + 1;
            if pick < fits {
                start = rs + pick;
                break;
            }
            pick -= fits;
        }

        masked[start..start + len].fill(true);
        span_len[start] = len;
        budget -= len;
    }

    let mut items = Vec::with_capacity(n);
    let mut p = 0;
    while p < n {
        if span_len[p] > 0 {
            let len = span_len[p];
            let first = stream[p].0.index;
            let last = stream[p + len - 1].0.index;
            items.push(NoisyItem::Mask {
                start: first,
                end: last + 1,
            });
            p += len;
        } else {
            items.push(NoisyItem::Original(stream[p].0.clone()));
            p += 1;
        }
    }

    NoisyParagraph {
        items,
        sentence_order: order,
        token_count: n,
    }
}
