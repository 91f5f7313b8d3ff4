//! IBM Model 1 trained by EM.
//!
//! Roles: the clean target text supplies the conditioning words `e` (plus a
//! null word), the noisy mixed input supplies the generated words `f`, and
//! the table holds `t(f|e)`. Initialization is uniform, there is no
//! smoothing, and EM is deterministic.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProbeError;
use crate::dictionary::BilingualDictionary;
use crate::pipeline::PseudoPair;

pub const NULL_WORD: &str = "<NULL>";
/// Pairs per E-step work unit. Fixed so sums do not depend on thread count.
const CHUNK: usize = 256;
/// Relative slack allowed for floating-point noise in the likelihood check.
const LL_SLACK: f64 = 1e-9;

/// Sparse `t(f|e)` rows. Row 0 belongs to the null word.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslationTable {
    e_vocab: Vec<String>,
    f_vocab: Vec<String>,
    e_index: HashMap<String, u32>,
    /// Per `e`: `(f, t(f|e))` sorted by `f` id.
    rows: Vec<Vec<(u32, f64)>>,
}

impl TranslationTable {
    /// Builds a table from `(e, f, t(f|e))` triples; rows are taken as given.
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Self {
        let mut b = Builder::default();
        let mut cells = Vec::new();
        for (e, f, p) in entries {
            cells.push((b.e(e), b.f(f), p));
        }
        let mut rows = vec![Vec::new(); b.e_vocab.len()];
        for (e, f, p) in cells {
            rows[e as usize].push((f, p));
        }
        for row in &mut rows {
            row.sort_by_key(|c| c.0);
        }
        b.into_table(rows)
    }

    /// `t(f|e) = 1/|F|` for every planted source and target word.
    pub fn uniform(e_words: &[&str], f_words: &[&str]) -> Self {
        let p = 1.0 / f_words.len() as f64;
        Self::from_entries(
            e_words
                .iter()
                .flat_map(|e| f_words.iter().map(move |f| (*e, *f, p))),
        )
    }

    pub fn prob(&self, f: &str, e: &str) -> f64 {
        let Some(&ei) = self.e_index.get(e) else {
            return 0.0;
        };
        self.rows[ei as usize]
            .iter()
            .find(|(fi, _)| self.f_vocab[*fi as usize] == f)
            .map_or(0.0, |c| c.1)
    }

    /// `argmax_f t(f|e)`, ties to the lexicographically smallest `f`.
    pub fn best_translation(&self, e: &str) -> Option<&str> {
        let &ei = self.e_index.get(e)?;
        let mut best: Option<(&str, f64)> = None;
        for &(fi, p) in &self.rows[ei as usize] {
            let f = self.f_vocab[fi as usize].as_str();
            best = match best {
                Some((bf, bp)) if bp > p || (bp == p && bf <= f) => Some((bf, bp)),
                _ => Some((f, p)),
            };
        }
        best.map(|b| b.0)
    }

    /// Sum of each row; 1 for every trained row.
    pub fn row_sums(&self) -> impl Iterator<Item = (&str, f64)> {
        self.e_vocab
            .iter()
            .zip(&self.rows)
            .filter(|(_, r)| !r.is_empty())
            .map(|(e, r)| (e.as_str(), r.iter().map(|c| c.1).sum()))
    }

    pub fn e_vocab(&self) -> &[String] {
        &self.e_vocab
    }

    pub fn f_vocab(&self) -> &[String] {
        &self.f_vocab
    }
}

#[derive(Default)]
struct Builder {
    e_vocab: Vec<String>,
    f_vocab: Vec<String>,
    e_index: HashMap<String, u32>,
    f_index: HashMap<String, u32>,
}

impl Builder {
    fn with_null() -> Self {
        let mut b = Builder::default();
        b.e(NULL_WORD);
        b
    }

    fn e(&mut self, w: &str) -> u32 {
        if let Some(&i) = self.e_index.get(w) {
            return i;
        }
        let i = self.e_vocab.len() as u32;
        self.e_vocab.push(w.to_owned());
        self.e_index.insert(w.to_owned(), i);
        i
    }

    fn f(&mut self, w: &str) -> u32 {
        if let Some(&i) = self.f_index.get(w) {
            return i;
        }
        let i = self.f_vocab.len() as u32;
        self.f_vocab.push(w.to_owned());
        self.f_index.insert(w.to_owned(), i);
        i
    }

    fn into_table(self, rows: Vec<Vec<(u32, f64)>>) -> TranslationTable {
        TranslationTable {
            e_vocab: self.e_vocab,
            f_vocab: self.f_vocab,
            e_index: self.e_index,
            rows,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model1Fit {
    pub table: TranslationTable,
    /// Entry `i` is the data log-likelihood after `i` EM updates.
    pub log_likelihood: Vec<f64>,
    /// `exp(-LL / f_tokens)` per entry of `log_likelihood`.
    pub perplexity: Vec<f64>,
    pub f_tokens: u64,
}

struct Encoded {
    /// `(f ids, e ids)`; e ids include the null word at position 0.
    pairs: Vec<(Vec<u32>, Vec<u32>)>,
    builder: Builder,
}

fn encode<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Encoded {
    let mut builder = Builder::with_null();
    let mut out = Vec::new();
    for (input, target) in pairs {
        let fs: Vec<u32> = input.split_whitespace().map(|w| builder.f(w)).collect();
        let mut es = vec![0u32];
        es.extend(target.split_whitespace().map(|w| builder.e(w)));
        out.push((fs, es));
    }
    Encoded {
        pairs: out,
        builder,
    }
}

type Cell = (u32, u32);

struct Partial {
    counts: HashMap<Cell, f64>,
    totals: Vec<f64>,
    ll: f64,
}

fn e_step(
    pairs: &[(Vec<u32>, Vec<u32>)],
    t: &HashMap<Cell, f64>,
    init: f64,
    n_e: usize,
    collect: bool,
) -> Partial {
    let lookup = |e: u32, f: u32| t.get(&(e, f)).copied().unwrap_or(init);
    let mut counts = HashMap::new();
    let mut totals = if collect { vec![0.0; n_e] } else { Vec::new() };
    let mut ll = 0.0;
    for (fs, es) in pairs {
        let norm = es.len() as f64;
        for &f in fs {
            let denom: f64 = es.iter().map(|&e| lookup(e, f)).sum();
            ll += (denom / norm).ln();
            if collect {
                for &e in es {
                    let share = lookup(e, f) / denom;
                    *counts.entry((e, f)).or_insert(0.0) += share;
                    totals[e as usize] += share;
                }
            }
        }
    }
    Partial { counts, totals, ll }
}

fn run_chunks(
    pairs: &[(Vec<u32>, Vec<u32>)],
    t: &HashMap<Cell, f64>,
    init: f64,
    n_e: usize,
    collect: bool,
) -> Vec<Partial> {
    pairs
        .par_chunks(CHUNK)
        .map(|chunk| e_step(chunk, t, init, n_e, collect))
        .collect()
}

/// Trains on `(input, target)` text pairs for `iterations` EM rounds.
/// Pairs whose input is empty contribute nothing.
pub fn train_model1_texts<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    iterations: usize,
) -> Result<Model1Fit, ProbeError> {
    if iterations == 0 {
        return Err(ProbeError::NoIterations);
    }
    let Encoded { pairs, builder } = encode(pairs);
    if pairs.is_empty() {
        return Err(ProbeError::NoPairs);
    }
    let n_e = builder.e_vocab.len();
    let n_f = builder.f_vocab.len().max(1);
    let f_tokens: u64 = pairs.iter().map(|p| p.0.len() as u64).sum();

    let mut t: HashMap<Cell, f64> = HashMap::new();
    let mut init = 1.0 / n_f as f64;
    let mut log_likelihood = Vec::with_capacity(iterations + 1);

    for _ in 0..iterations {
        let partials = run_chunks(&pairs, &t, init, n_e, true);
        let mut counts: HashMap<Cell, f64> = HashMap::new();
        let mut totals = vec![0.0; n_e];
        let mut ll = 0.0;
        // merge in chunk order: each cell receives its additions in a fixed order
        for part in partials {
            ll += part.ll;
            for (cell, c) in part.counts {
                *counts.entry(cell).or_insert(0.0) += c;
            }
            for (acc, x) in totals.iter_mut().zip(&part.totals) {
                *acc += x;
            }
        }
        log_likelihood.push(ll);
        for (cell, c) in counts.iter_mut() {
            *c /= totals[cell.0 as usize];
        }
        t = counts;
        init = 0.0;
    }
    let final_ll: f64 = run_chunks(&pairs, &t, init, n_e, false)
        .iter()
        .map(|p| p.ll)
        .sum();
    log_likelihood.push(final_ll);

    for w in log_likelihood.windows(2) {
        if w[1] < w[0] - LL_SLACK * w[0].abs() {
            return Err(ProbeError::LikelihoodDecreased {
                before: w[0],
                after: w[1],
            });
        }
    }

    let mut rows = vec![Vec::new(); n_e];
    for ((e, f), p) in t {
        rows[e as usize].push((f, p));
    }
    for row in &mut rows {
        row.sort_by_key(|c| c.0);
    }
    let perplexity = log_likelihood
        .iter()
        .map(|ll| (-ll / f_tokens.max(1) as f64).exp())
        .collect();

    Ok(Model1Fit {
        table: builder.into_table(rows),
        log_likelihood,
        perplexity,
        f_tokens,
    })
}

/// Trains with target text as `e` and mixed input as `f`.
pub fn train_model1(pairs: &[PseudoPair], iterations: usize) -> Result<Model1Fit, ProbeError> {
    train_model1_texts(
        pairs
            .iter()
            .map(|p| (p.input_text.as_str(), p.target_text.as_str())),
        iterations,
    )
}

/// Share of planted source words whose best translation in `table` is a
/// planted translation. 0 for an empty planted dictionary.
pub fn precision_at_1(table: &TranslationTable, planted: &BilingualDictionary) -> f64 {
    if planted.is_empty() {
        return 0.0;
    }
    let hits = planted
        .iter()
        .filter(|(e, translations)| {
            table
                .best_translation(e)
                .is_some_and(|best| translations.iter().any(|t| t == best))
        })
        .count();
    hits as f64 / planted.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub precision_at_1: f64,
    pub perplexity_per_iteration: Vec<f64>,
    pub log_likelihood_per_iteration: Vec<f64>,
    pub pairs: usize,
    pub iterations: usize,
}

impl ProbeReport {
    pub fn new(fit: &Model1Fit, planted: &BilingualDictionary, pairs: usize) -> Self {
        ProbeReport {
            precision_at_1: precision_at_1(&fit.table, planted),
            perplexity_per_iteration: fit.perplexity.clone(),
            log_likelihood_per_iteration: fit.log_likelihood.clone(),
            pairs,
            iterations: fit.log_likelihood.len() - 1,
        }
    }
}
