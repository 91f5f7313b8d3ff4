//! Word-level bilingual dictionaries in MUSE format (`src tgt` per line).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use thiserror::Error;

use crate::corpus::Corpus;

/// Trailing characters ignored when matching a token against a dictionary.
pub const TRAILING_PUNCTUATION: [char; 5] = ['.', ',', '!', '?', '…'];

/// Language tag used when none can be inferred.
pub const UNDETERMINED: &str = "und";

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected 2 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: word `{word}` is empty after normalization")]
    EmptyWord { line: usize, word: String },
    #[error("cannot compose {left_src}-{left_tgt} with {right_src}-{right_tgt}: pivot languages differ")]
    PivotMismatch {
        left_src: String,
        left_tgt: String,
        right_src: String,
        right_tgt: String,
    },
}

/// Splits a token into its lookup key and its trailing punctuation.
///
/// The key is lower-cased with trailing `.,!?…` removed; the returned suffix
/// is the removed punctuation, verbatim.
pub fn split_key(surface: &str) -> (String, &str) {
    let stem = surface.trim_end_matches(TRAILING_PUNCTUATION);
    (stem.to_lowercase(), &surface[stem.len()..])
}

pub fn normalize(word: &str) -> String {
    split_key(word).0
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BilingualDictionary {
    pub src_lang: String,
    pub tgt_lang: String,
    entries: IndexMap<String, Vec<String>>,
}

impl BilingualDictionary {
    pub fn new(src_lang: impl Into<String>, tgt_lang: impl Into<String>) -> Self {
        BilingualDictionary {
            src_lang: src_lang.into(),
            tgt_lang: tgt_lang.into(),
            entries: IndexMap::new(),
        }
    }

    /// Adds `src -> tgt`. The source word is normalized; duplicate pairs are
    /// ignored. Returns `false` if the normalized source word is empty.
    pub fn insert(&mut self, src: &str, tgt: &str) -> bool {
        let key = normalize(src);
        if key.is_empty() || tgt.is_empty() {
            return false;
        }
        let list = self.entries.entry(key).or_default();
        if !list.iter().any(|t| t == tgt) {
            list.push(tgt.to_owned());
        }
        true
    }

    /// Translations of `word` after normalization.
    pub fn lookup(&self, word: &str) -> Option<&[String]> {
        self.lookup_key(&normalize(word))
    }

    /// Lookup by an already-normalized key.
    pub fn lookup_key(&self, key: &str) -> Option<&[String]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.lookup(word).is_some()
    }

    /// Number of source words.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of `(src, tgt)` pairs.
    pub fn pair_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.iter()
            .flat_map(|(k, v)| v.iter().map(move |t| (k, t.as_str())))
    }

    /// Adds every pair of `other`, keeping this dictionary's tags.
    pub fn extend_from(&mut self, other: &BilingualDictionary) {
        for (s, t) in other.pairs() {
            self.insert(s, t);
        }
    }

    pub fn write_muse<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (s, t) in self.pairs() {
            writeln!(out, "{s} {t}")?;
        }
        Ok(())
    }

    pub fn to_muse_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_muse(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("entries are UTF-8")
    }
}

/// Parses MUSE text. Lines with a number of fields other than two abort.
pub fn parse_muse_str(
    text: &str,
    src_lang: &str,
    tgt_lang: &str,
) -> Result<BilingualDictionary, DictionaryError> {
    let mut dict = BilingualDictionary::new(src_lang, tgt_lang);
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => {}
            [src, tgt] => {
                if !dict.insert(src, tgt) {
                    return Err(DictionaryError::EmptyWord {
                        line: i + 1,
                        word: (*src).to_owned(),
                    });
                }
            }
            _ => {
                return Err(DictionaryError::FieldCount {
                    line: i + 1,
                    found: fields.len(),
                })
            }
        }
    }
    Ok(dict)
}

/// Reads a MUSE file. Language tags come from a `xx-yy` file-name prefix
/// (`id-en.txt`, `id-en.0-5000.txt`), else [`UNDETERMINED`].
pub fn parse_muse(path: impl AsRef<Path>) -> Result<BilingualDictionary, DictionaryError> {
    let path = path.as_ref();
    let (src, tgt) = langs_from_path(path);
    parse_muse_with_langs(path, &src, &tgt)
}

pub fn parse_muse_with_langs(
    path: impl AsRef<Path>,
    src_lang: &str,
    tgt_lang: &str,
) -> Result<BilingualDictionary, DictionaryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DictionaryError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_muse_str(&text, src_lang, tgt_lang)
}

pub fn langs_from_path(path: &Path) -> (String, String) {
    let stem = path
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let head = stem.split('.').next().unwrap_or_default();
    match head.split_once('-') {
        Some((a, b))
            if !a.is_empty()
                && !b.is_empty()
                && a.chars().all(|c| c.is_ascii_alphabetic())
                && b.chars().all(|c| c.is_ascii_alphabetic()) =>
        {
            (a.to_owned(), b.to_owned())
        }
        _ => (UNDETERMINED.to_owned(), UNDETERMINED.to_owned()),
    }
}

/// Relational composition `x -> y` through a shared pivot language.
///
/// `x -> y` is present iff some `e` has `x -> e` in `x_to_pivot` and
/// `e -> y` in `pivot_to_y`. Translations keep first-derivation order.
pub fn compose_pivot(
    x_to_pivot: &BilingualDictionary,
    pivot_to_y: &BilingualDictionary,
) -> Result<BilingualDictionary, DictionaryError> {
    if x_to_pivot.tgt_lang != pivot_to_y.src_lang {
        return Err(DictionaryError::PivotMismatch {
            left_src: x_to_pivot.src_lang.clone(),
            left_tgt: x_to_pivot.tgt_lang.clone(),
            right_src: pivot_to_y.src_lang.clone(),
            right_tgt: pivot_to_y.tgt_lang.clone(),
        });
    }
    let mut out = BilingualDictionary::new(&x_to_pivot.src_lang, &pivot_to_y.tgt_lang);
    for (x, pivots) in x_to_pivot.iter() {
        for e in pivots {
            for y in pivot_to_y.lookup(e).unwrap_or_default() {
                out.insert(x, y);
            }
        }
    }
    Ok(out)
}

/// Fraction of token occurrences in `corpus` that have an entry.
pub fn coverage(dict: &BilingualDictionary, corpus: &Corpus) -> f64 {
    let mut total = 0usize;
    let mut covered = 0usize;
    for tok in corpus.tokens() {
        total += 1;
        if dict.contains(&tok.surface) {
            covered += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        covered as f64 / total as f64
    }
}
