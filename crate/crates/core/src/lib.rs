//! Deterministic corpus corruption for denoising pre-training with
//! dictionary-driven code mixing.
//!
//! A monolingual paragraph `X` is first noised (span masking and sentence
//! permutation), then mixed: unmasked tokens with a dictionary entry are
//! replaced by a translation with probability `replace_prob`, and covered
//! tokens that were not replaced are deleted with probability `delete_prob`.
//! The result is written as `(f(X), X)` pairs, one JSON line per paragraph.
//!
//! All randomness flows from a single 64-bit seed through per-paragraph
//! streams ([`rng::derive_stream`]), so outputs are identical for any
//! worker count.

pub mod alignprobe;
pub mod calibrate;
pub mod config;
pub mod corpus;
pub mod dictionary;
pub mod mixlang;
pub mod noise;
pub mod pipeline;
pub mod rng;
pub mod stats;

pub use calibrate::{calibrate_replace_prob, CalibrationError, CalibrationResult};
pub use config::{load_config, ConfigError};
pub use corpus::{
    load_corpus, sample_paragraphs, split_sentences, Corpus, CorpusError, LoadOptions, Paragraph,
    Pretokenizer, Sentence, Token,
};
pub use dictionary::{
    compose_pivot, coverage, parse_muse, parse_muse_str, BilingualDictionary, DictionaryError,
};
pub use mixlang::{mix, mixing_ratio, MixConfig, MixedItem, MixedParagraph};
pub use noise::{corrupt, masked_fraction, NoiseConfig, NoisyItem, NoisyParagraph};
pub use pipeline::{
    generate_dataset, generate_pair, GenerateOptions, PipelineConfig, PipelineError, PseudoPair,
    Record,
};
pub use rng::{derive_stream, Stream};
pub use stats::{oov_rate, GenerationReport};

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
