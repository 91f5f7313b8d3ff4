//! Shared fixtures for the benchmarks.

use mixnoise::alignprobe::{synth_corpus, SynthSpec};
use mixnoise::{BilingualDictionary, Corpus};

/// Synthetic corpus of `n` paragraphs over a 2000-word Zipfian vocabulary,
/// with its full planted dictionary.
pub fn fixture(n: usize) -> (Corpus, BilingualDictionary) {
    let spec = SynthSpec {
        vocab_size: 2000,
        n_sentences: n,
        min_len: 10,
        max_len: 40,
        ..Default::default()
    };
    synth_corpus(&spec).expect("benchmark spec is valid")
}
