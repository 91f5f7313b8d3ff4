//! Dictionary replacement and deletion over the unmasked tokens of a noised
//! paragraph.
//!
//! Every covered token consumes exactly three draws (replace, delete,
//! translation choice) whatever the configuration, and uncovered tokens
//! consume none. A token replaced at probability `p` is therefore also
//! replaced at any `p' > p` under the same stream, which makes the mixing
//! ratio monotone in `replace_prob` for a fixed seed.

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::corpus::Token;
use crate::dictionary::{split_key, BilingualDictionary};
use crate::noise::{NoisyItem, NoisyParagraph};
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixConfig {
    pub replace_prob: f64,
    /// Chance of deleting a covered token that was not replaced.
    pub delete_prob: f64,
    pub deletion_enabled: bool,
    pub replacement_enabled: bool,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig {
            replace_prob: 0.3,
            delete_prob: 0.5,
            deletion_enabled: true,
            replacement_enabled: true,
        }
    }
}

impl MixConfig {
    /// Neither replaces nor deletes.
    pub fn disabled() -> Self {
        MixConfig {
            deletion_enabled: false,
            replacement_enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.replace_prob) {
            return Err(ConfigError::invalid("mix.replace_prob", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.delete_prob) {
            return Err(ConfigError::invalid("mix.delete_prob", "must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedItem {
    Masked { start: usize, end: usize },
    /// `covered` records whether the token had a dictionary entry.
    Kept { token: Token, covered: bool },
    /// `translation` already carries the original trailing punctuation.
    Replaced { original: Token, translation: String },
    Deleted(Token),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixCounts {
    /// Unmasked tokens with a dictionary entry.
    pub covered: usize,
    pub replaced: usize,
    pub deleted: usize,
    pub kept: usize,
    /// Original tokens under masks.
    pub masked: usize,
    pub mask_items: usize,
}

impl MixCounts {
    pub fn unmasked(&self) -> usize {
        self.kept + self.replaced + self.deleted
    }

    pub fn total(&self) -> usize {
        self.unmasked() + self.masked
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedParagraph {
    pub items: Vec<MixedItem>,
    pub counts: MixCounts,
}

impl MixedParagraph {
    /// Output surfaces in order; deleted tokens are omitted.
    pub fn surfaces<'a>(&'a self, mask_token: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.items.iter().filter_map(move |item| match item {
            MixedItem::Masked { .. } => Some(mask_token),
            MixedItem::Kept { token, .. } => Some(token.surface.as_str()),
            MixedItem::Replaced { translation, .. } => Some(translation.as_str()),
            MixedItem::Deleted(_) => None,
        })
    }
}

/// Replaced tokens over unmasked input tokens; 0 when nothing is unmasked.
pub fn mixing_ratio(mixed: &MixedParagraph) -> f64 {
    ratio(mixed.counts.replaced, mixed.counts.unmasked())
}

/// Replaced tokens over surviving untranslated tokens. `None` when no
/// token survived untranslated.
pub fn source_target_ratio(mixed: &MixedParagraph) -> Option<f64> {
    (mixed.counts.kept > 0).then(|| mixed.counts.replaced as f64 / mixed.counts.kept as f64)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn mix(
    noisy: &NoisyParagraph,
    dict: &BilingualDictionary,
    config: &MixConfig,
    rng: &mut Stream,
) -> MixedParagraph {
    let mut counts = MixCounts::default();
    let mut items = Vec::with_capacity(noisy.items.len());

    for item in &noisy.items {
        let token = match item {
            NoisyItem::Mask { start, end } => {
                counts.masked += end - start;
                counts.mask_items += 1;
                items.push(MixedItem::Masked {
                    start: *start,
                    end: *end,
                });
                continue;
            }
            NoisyItem::Original(token) => token,
        };

        let (key, suffix) = split_key(&token.surface);
        let Some(translations) = dict.lookup_key(&key).filter(|t| !t.is_empty()) else {
            counts.kept += 1;
            items.push(MixedItem::Kept {
                token: token.clone(),
                covered: false,
            });
            continue;
        };
        counts.covered += 1;

        let replace_draw = rng.next_f64();
        let delete_draw = rng.next_f64();
        let choice = rng.below(translations.len());

        if config.replacement_enabled && replace_draw < config.replace_prob {
            counts.replaced += 1;
            let mut translation = translations[choice].clone();
            translation.push_str(suffix);
            items.push(MixedItem::Replaced {
                original: token.clone(),
                translation,
            });
        } else if config.deletion_enabled && delete_draw < config.delete_prob {
            counts.deleted += 1;
            items.push(MixedItem::Deleted(token.clone()));
        } else {
            counts.kept += 1;
            items.push(MixedItem::Kept {
                token: token.clone(),
                covered: true,
            });
        }
    }

    MixedParagraph { items, counts }
}
