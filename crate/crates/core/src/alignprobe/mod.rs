//! Alignment probe: does mixed-language data carry a bilingual alignment
//! signal that a plain denoising corpus lacks?
//!
//! A synthetic language with a planted lexicon is pushed through the
//! pipeline twice, once with dictionary replacement and once without, and
//! IBM Model 1 is trained on each dataset. Precision@1 of the learned
//! table against the planted lexicon measures how much of the lexicon the
//! data exposes.

mod model1;
mod synth;

pub use model1::{
    precision_at_1, train_model1, train_model1_texts, Model1Fit, ProbeReport, TranslationTable,
    NULL_WORD,
};
pub use synth::{synth_corpus, SynthSpec, ZipfSampler, SOURCE_LANG, TARGET_LANG};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::{calibrate_replace_prob, CalibrationError, CalibrationResult};
use crate::noise::NoiseConfig;
use crate::pipeline::{generate_pair, PipelineConfig, PseudoPair};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
    #[error("no training pairs")]
    NoPairs,
    #[error("at least one EM iteration is required")]
    NoIterations,
    #[error("EM log-likelihood decreased from {before} to {after}")]
    LikelihoodDecreased { before: f64, after: f64 },
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("calibration could not reach the target ratio (coverage {coverage})")]
    Infeasible { coverage: f64 },
}

/// One mixed-vs-plain comparison on a synthetic language pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSetting {
    pub synth: SynthSpec,
    pub noise: NoiseConfig,
    pub target_ratio: f64,
    pub em_iterations: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ProbeSetting {
    fn default() -> Self {
        ProbeSetting {
            synth: SynthSpec::default(),
            noise: NoiseConfig::default(),
            target_ratio: 0.30,
            em_iterations: 10,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeComparison {
    pub calibration: CalibrationResult,
    pub mixed: ProbeReport,
    /// Same corpus and noise, replacement disabled.
    pub plain: ProbeReport,
}

impl ProbeComparison {
    pub fn margin(&self) -> f64 {
        self.mixed.precision_at_1 - self.plain.precision_at_1
    }
}

impl ProbeSetting {
    pub fn run(&self) -> Result<ProbeComparison, ProbeError> {
        let (corpus, planted) = synth_corpus(&self.synth)?;
        let base = PipelineConfig {
            noise: self.noise.clone(),
            seed: self.seed,
            ..Default::default()
        };
        let calibration =
            calibrate_replace_prob(&corpus, &planted, &base, self.target_ratio, self.workers)?;
        if !calibration.feasible {
            return Err(ProbeError::Infeasible {
                coverage: calibration.coverage,
            });
        }

        let mut mixed_cfg = base.clone();
        mixed_cfg.mix.replace_prob = calibration.replace_prob;
        let mut plain_cfg = mixed_cfg.clone();
        plain_cfg.mix.replacement_enabled = false;

        let gen = |cfg: &PipelineConfig| -> Vec<PseudoPair> {
            corpus
                .paragraphs
                .iter()
                .map(|p| generate_pair(p, &planted, cfg))
                .collect()
        };
        let mixed_pairs = gen(&mixed_cfg);
        let plain_pairs = gen(&plain_cfg);
        let mixed_fit = train_model1(&mixed_pairs, self.em_iterations)?;
        let plain_fit = train_model1(&plain_pairs, self.em_iterations)?;

        Ok(ProbeComparison {
            calibration,
            mixed: ProbeReport::new(&mixed_fit, &planted, mixed_pairs.len()),
            plain: ProbeReport::new(&plain_fit, &planted, plain_pairs.len()),
        })
    }
}
