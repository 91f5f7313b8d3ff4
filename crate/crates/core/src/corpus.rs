//! Monolingual corpus ingestion: one paragraph per line, whitespace tokens,
//! punctuation-delimited sentences.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_stream, mix64};

/// Characters that close a sentence when they end a token.
pub const SENTENCE_TERMINALS: [char; 4] = ['.', '!', '?', '…'];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid UTF-8")]
    InvalidUtf8 { line: u64 },
    #[error("pre-tokenizer `{command}` failed to start: {source}")]
    PretokenizerSpawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("pre-tokenizer `{command}` exited with {status}: {stderr}")]
    PretokenizerFailed {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("pre-tokenizer `{command}` returned {got} lines for {expected} inputs")]
    PretokenizerLineCount {
        command: String,
        expected: usize,
        got: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Position in the paragraph token stream.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    /// Half-open `[start, end)` range into the paragraph token stream.
    pub span: (usize, usize),
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub sentences: Vec<Sentence>,
    /// 1-based line number in the source file.
    pub doc_id: u64,
}

impl Paragraph {
    /// Tokenizes `text` on whitespace and splits it into sentences with the
    /// default punctuation rule. Returns `None` for blank text.
    pub fn parse(text: &str, doc_id: u64) -> Option<Paragraph> {
        Self::parse_with(text, doc_id, &PunctuationSplitter)
    }

    pub fn parse_with(
        text: &str,
        doc_id: u64,
        splitter: &dyn SentenceSplitter,
    ) -> Option<Paragraph> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return None;
        }
        Some(Paragraph {
            sentences: splitter.split(tokens),
            doc_id,
        })
    }

    pub fn token_count(&self) -> usize {
        self.sentences.last().map_or(0, |s| s.span.1)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    /// Space-joined surfaces in original order.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&tok.surface);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub paragraphs: Vec<Paragraph>,
    pub language_tag: String,
    /// Lines dropped because they were not valid UTF-8.
    #[serde(default)]
    pub skipped_invalid: usize,
}

impl Corpus {
    pub fn new(language_tag: impl Into<String>) -> Self {
        Corpus {
            paragraphs: Vec::new(),
            language_tag: language_tag.into(),
            skipped_invalid: 0,
        }
    }

    /// Builds a corpus from in-memory lines; line `i` gets `doc_id = i + 1`.
    pub fn from_lines<I, S>(language_tag: impl Into<String>, lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut corpus = Corpus::new(language_tag);
        for (i, line) in lines.into_iter().enumerate() {
            if let Some(p) = Paragraph::parse(line.as_ref(), i as u64 + 1) {
                corpus.paragraphs.push(p);
            }
        }
        corpus
    }

    pub fn len(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paragraphs.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.paragraphs.iter().map(Paragraph::token_count).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.paragraphs.iter().flat_map(Paragraph::tokens)
    }

    /// Writes one space-joined paragraph per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.paragraphs {
            writeln!(out, "{}", p.text())?;
        }
        Ok(())
    }
}

/// Splits whitespace-delimited text into indexed tokens.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .enumerate()
        .map(|(index, s)| Token {
            surface: s.to_owned(),
            index,
        })
        .collect()
}

/// Groups a paragraph token stream into sentences.
pub trait SentenceSplitter: Send + Sync {
    /// The returned spans must partition `tokens`.
    fn split(&self, tokens: Vec<Token>) -> Vec<Sentence>;
}

/// Ends a sentence after any token whose surface ends in `.`, `!`, `?` or `…`.
#[derive(Clone, Copy, Debug, Default)]
pub struct PunctuationSplitter;

impl SentenceSplitter for PunctuationSplitter {
    fn split(&self, tokens: Vec<Token>) -> Vec<Sentence> {
        split_sentences(tokens)
    }
}

pub fn split_sentences(tokens: Vec<Token>) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut start = 0;
    for tok in tokens {
        let terminal = tok.surface.ends_with(SENTENCE_TERMINALS);
        current.push(tok);
        if terminal {
            let end = start + current.len();
            sentences.push(Sentence {
                tokens: std::mem::take(&mut current),
                span: (start, end),
            });
            start = end;
        }
    }
    if !current.is_empty() {
        let end = start + current.len();
        sentences.push(Sentence {
            tokens: current,
            span: (start, end),
        });
    }
    sentences
}

/// What to do with a line that is not valid UTF-8.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InvalidUtf8Policy {
    #[default]
    Abort,
    /// Drop the line and count it in [`Corpus::skipped_invalid`].
    Skip,
}

/// An external command that reads lines on stdin and writes one
/// space-separated line per input line on stdout. Run through `sh -c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pretokenizer {
    pub command: String,
}

impl Pretokenizer {
    pub fn new(command: impl Into<String>) -> Self {
        Pretokenizer {
            command: command.into(),
        }
    }

    /// Pipes `lines` through the command in one batch.
    pub fn run(&self, lines: &[&str]) -> Result<Vec<String>, CorpusError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| CorpusError::PretokenizerSpawn {
                command: self.command.clone(),
                source,
            })?;

        let mut input = String::new();
        for line in lines {
            input.push_str(line);
            input.push('\n');
        }
        let mut stdin = child.stdin.take().expect("stdin is piped");
        // Feed stdin from a separate thread so a chatty child cannot deadlock us.
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(input.as_bytes());
        });
        let output = child
            .wait_with_output()
            .map_err(|source| CorpusError::PretokenizerSpawn {
                command: self.command.clone(),
                source,
            })?;
        let _ = writer.join();

        if !output.status.success() {
            return Err(CorpusError::PretokenizerFailed {
                command: self.command.clone(),
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_owned(),
            });
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let out: Vec<String> = stdout.lines().map(str::to_owned).collect();
        if out.len() != lines.len() {
            return Err(CorpusError::PretokenizerLineCount {
                command: self.command.clone(),
                expected: lines.len(),
                got: out.len(),
            });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub pretokenizer: Option<Pretokenizer>,
    pub invalid_utf8: InvalidUtf8Policy,
    pub language_tag: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            pretokenizer: None,
            invalid_utf8: InvalidUtf8Policy::Abort,
            language_tag: "und".to_owned(),
        }
    }
}

/// Loads a corpus file with one paragraph per line. Blank lines are skipped;
/// `doc_id` is the 1-based line number.
pub fn load_corpus(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
    parse_corpus_bytes(&bytes, opts)
}

pub fn parse_corpus_bytes(bytes: &[u8], opts: &LoadOptions) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::new(opts.language_tag.clone());
    let mut lines: Vec<(u64, &str)> = Vec::new();

    let mut raw_lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if raw_lines.last().is_some_and(|l| l.is_empty()) {
        raw_lines.pop();
    }
    for (i, raw) in raw_lines.into_iter().enumerate() {
        let line_no = i as u64 + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        match std::str::from_utf8(raw) {
            Ok(text) if text.trim().is_empty() => {}
            Ok(text) => lines.push((line_no, text)),
            Err(_) => match opts.invalid_utf8 {
                InvalidUtf8Policy::Abort => return Err(CorpusError::InvalidUtf8 { line: line_no }),
                InvalidUtf8Policy::Skip => corpus.skipped_invalid += 1,
            },
        }
    }

    match &opts.pretokenizer {
        None => {
            for (line_no, text) in lines {
                corpus.paragraphs.extend(Paragraph::parse(text, line_no));
            }
        }
        Some(pre) => {
            let texts: Vec<&str> = lines.iter().map(|(_, t)| *t).collect();
            let segmented = pre.run(&texts)?;
            for ((line_no, _), text) in lines.iter().zip(&segmented) {
                corpus.paragraphs.extend(Paragraph::parse(text, *line_no));
            }
        }
    }
    Ok(corpus)
}

/// Uniform sample of `n` paragraphs without replacement, in original order.
/// Returns the whole corpus when `n >= corpus.len()`.
pub fn sample_paragraphs(corpus: &Corpus, n: usize, seed: u64) -> Corpus {
    const SAMPLE_DOMAIN: u64 = 0x5A4D_504C_4521_0001;
    if n >= corpus.len() {
        return corpus.clone();
    }
    let mut stream = derive_stream(mix64(seed ^ SAMPLE_DOMAIN), 0);
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    // partial Fisher-Yates: the first n slots end up a uniform n-subset
    for i in 0..n {
        let j = i + stream.below(idx.len() - i);
        idx.swap(i, j);
    }
    let mut chosen = idx[..n].to_vec();
    chosen.sort_unstable();
    Corpus {
        paragraphs: chosen.into_iter().map(|i| corpus.paragraphs[i].clone()).collect(),
        language_tag: corpus.language_tag.clone(),
        skipped_invalid: corpus.skipped_invalid,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(s: &Sentence) -> Vec<&str> {
        s.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn two_line_file() {
        let c = parse_corpus_bytes(b"a b.\nc d.", &LoadOptions::default()).unwrap();
        assert_eq!(c.len(), 2);
        for p in &c.paragraphs {
            assert_eq!(p.token_count(), 2);
            assert_eq!(p.sentences.len(), 1);
        }
        assert_eq!(c.paragraphs[0].doc_id, 1);
        assert_eq!(c.paragraphs[1].doc_id, 2);
    }

    #[test]
    fn empty_and_blank_lines() {
        let c = parse_corpus_bytes(b"", &LoadOptions::default()).unwrap();
        assert!(c.is_empty());
        let c = parse_corpus_bytes(b"\n   \nx y\n\n", &LoadOptions::default()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.paragraphs[0].doc_id, 3);
    }

    #[test]
    fn crlf_is_stripped() {
        let c = parse_corpus_bytes(b"a b\r\nc\r\n", &LoadOptions::default()).unwrap();
        assert_eq!(c.paragraphs[0].text(), "a b");
        assert_eq!(c.paragraphs[1].text(), "c");
    }

    #[test]
    fn invalid_utf8_abort_and_skip() {
        let bytes = b"ok\n\xff\xfe bad\nfine\n";
        match parse_corpus_bytes(bytes, &LoadOptions::default()) {
            Err(CorpusError::InvalidUtf8 { line }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let opts = LoadOptions {
            invalid_utf8: InvalidUtf8Policy::Skip,
            ..Default::default()
        };
        let c = parse_corpus_bytes(bytes, &opts).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.skipped_invalid, 1);
        assert_eq!(c.paragraphs[1].doc_id, 3);
    }

    #[test]
    fn split_rule() {
        let s = split_sentences(tokenize("a b. c d?"));
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].span, (0, 2));
        assert_eq!(s[1].span, (2, 4));
        assert_eq!(surfaces(&s[1]), ["c", "d?"]);

        let s = split_sentences(tokenize("a b c"));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].span, (0, 3));

        let s = split_sentences(tokenize("x!"));
        assert_eq!(s.len(), 1);

        let s = split_sentences(tokenize("wait… what"));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn pretokenizer_splits_thai() {
        let opts = LoadOptions {
            pretokenizer: Some(Pretokenizer::new("sed -e 's/กขค/ก ข ค/'")),
            ..Default::default()
        };
        let c = parse_corpus_bytes("กขค\n".as_bytes(), &opts).unwrap();
        assert_eq!(c.paragraphs[0].token_count(), 3);
        assert_eq!(c.paragraphs[0].text(), "ก ข ค");
    }

    #[test]
    fn pretokenizer_failure_captures_stderr() {
        let opts = LoadOptions {
            pretokenizer: Some(Pretokenizer::new("echo boom >&2; exit 3")),
            ..Default::default()
        };
        match parse_corpus_bytes(b"a\n", &opts) {
            Err(CorpusError::PretokenizerFailed { stderr, .. }) => assert_eq!(stderr, "boom"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sample_identity_and_determinism() {
        let c = Corpus::from_lines("x", (0..5).map(|i| format!("w{i}")));
        assert_eq!(sample_paragraphs(&c, 5, 99), c);
        assert_eq!(sample_paragraphs(&c, 50, 99), c);

        let c = Corpus::from_lines("x", (0..10).map(|i| format!("w{i}")));
        let a = sample_paragraphs(&c, 3, 7);
        let b = sample_paragraphs(&c, 3, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.paragraphs.windows(2).all(|w| w[0].doc_id < w[1].doc_id));
        assert!(sample_paragraphs(&c, 0, 7).is_empty());
    }

    #[test]
    fn sample_is_roughly_uniform() {
        let c = Corpus::from_lines("x", (0..10).map(|i| format!("w{i}")));
        let mut hits = [0u32; 10];
        for seed in 0..20_000 {
            for p in sample_paragraphs(&c, 3, seed).paragraphs {
                hits[p.doc_id as usize - 1] += 1;
            }
        }
        // expected 6000 each, sd ~65
        for h in hits {
            assert!((5600..6400).contains(&h), "{hits:?}");
        }
    }

    fn word() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-zé]{1,6}",
            "[a-z]{1,4}[.!?…]",
            Just("ก".to_owned()),
        ]
    }

    proptest! {
        #[test]
        fn spans_partition_tokens(words in prop::collection::vec(word(), 1..40)) {
            let p = Paragraph::parse(&words.join(" "), 1).unwrap();
            let mut next = 0;
            for s in &p.sentences {
                prop_assert!(!s.is_empty());
                prop_assert_eq!(s.span.0, next);
                prop_assert_eq!(s.span.1 - s.span.0, s.tokens.len());
                for (k, t) in s.tokens.iter().enumerate() {
                    prop_assert_eq!(t.index, s.span.0 + k);
                    prop_assert!(!t.surface.chars().any(char::is_whitespace));
                }
                next = s.span.1;
            }
            prop_assert_eq!(next, words.len());
        }

        #[test]
        fn text_round_trips(words in prop::collection::vec(word(), 1..40), sep in "[ \t]{1,3}") {
            let p = Paragraph::parse(&words.join(&sep), 4).unwrap();
            let again = Paragraph::parse(&p.text(), 4).unwrap();
            prop_assert_eq!(p, again);
        }
    }
}
