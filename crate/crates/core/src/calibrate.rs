//! Search for the replacement probability that hits a target mixing ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::dictionary::BilingualDictionary;
use crate::pipeline::{simulate, PipelineConfig, PipelineError};

/// Targets within this distance of the coverage bound are infeasible.
pub const FEASIBILITY_MARGIN: f64 = 0.01;
pub const RATIO_TOLERANCE: f64 = 0.005;
pub const MAX_ITERATIONS: u32 = 25;
/// Smallest sample for which sampling noise stays under the tolerance.
pub const RECOMMENDED_SAMPLE: usize = 2000;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration sample is empty")]
    EmptySample,
    #[error("target ratio {0} is outside [0, 1]")]
    TargetOutOfRange(f64),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(
        "mixing ratio is not monotone in replace_prob: p={p_low} gave {r_low}, p={p_high} gave {r_high}"
    )]
    NonMonotone {
        p_low: f64,
        r_low: f64,
        p_high: f64,
        r_high: f64,
    },
    #[error("no probability within {tolerance} of {target} after {iterations} iterations (best {best_ratio} at p={best_prob})")]
    NotConverged {
        target: f64,
        tolerance: f64,
        iterations: u32,
        best_prob: f64,
        best_ratio: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub replace_prob: f64,
    pub achieved_ratio: f64,
    /// Covered share of unmasked tokens in the noised sample.
    pub coverage: f64,
    pub feasible: bool,
    pub iterations: u32,
    pub target_ratio: f64,
}

/// Bisects `replace_prob` against the empirical mixing ratio of the full
/// pipeline on `sample`.
///
/// Noise, deletion settings and the seed come from `base`; replacement is
/// forced on. The search starts from `target / coverage` and stops once
/// the achieved ratio is within [`RATIO_TOLERANCE`] of the target.
pub fn calibrate_replace_prob(
    sample: &Corpus,
    dict: &BilingualDictionary,
    base: &PipelineConfig,
    target_ratio: f64,
    workers: usize,
) -> Result<CalibrationResult, CalibrationError> {
    if !(0.0..=1.0).contains(&target_ratio) {
        return Err(CalibrationError::TargetOutOfRange(target_ratio));
    }
    if sample.is_empty() {
        return Err(CalibrationError::EmptySample);
    }

    let eval = |p: f64| -> Result<(f64, f64), CalibrationError> {
        let mut cfg = base.clone();
        cfg.mix.replacement_enabled = true;
        cfg.mix.replace_prob = p;
        let r = simulate(sample, dict, &cfg, workers)?;
        Ok((r.mixing_ratio(), r.coverage().unwrap_or(0.0)))
    };

    // at p = 1 every covered unmasked token is replaced, so ratio == coverage
    let (ratio_at_one, coverage) = eval(1.0)?;

    if target_ratio == 0.0 {
        return Ok(CalibrationResult {
            replace_prob: 0.0,
            achieved_ratio: 0.0,
            coverage,
            feasible: true,
            iterations: 0,
            target_ratio,
        });
    }
    if target_ratio > coverage - FEASIBILITY_MARGIN {
        return Ok(CalibrationResult {
            replace_prob: 1.0,
            achieved_ratio: ratio_at_one,
            coverage,
            feasible: false,
            iterations: 0,
            target_ratio,
        });
    }

    let mut seen: Vec<(f64, f64)> = vec![(0.0, 0.0), (1.0, ratio_at_one)];
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut p = (target_ratio / coverage).clamp(0.0, 1.0);
    let mut best = (p, f64::NAN);

    for iteration in 1..=MAX_ITERATIONS {
        let (ratio, _) = eval(p)?;
        for &(q, rq) in &seen {
            if (q < p && rq > ratio) || (q > p && rq < ratio) {
                let ((p_low, r_low), (p_high, r_high)) =
                    if q < p { ((q, rq), (p, ratio)) } else { ((p, ratio), (q, rq)) };
                return Err(CalibrationError::NonMonotone {
                    p_low,
                    r_low,
                    p_high,
                    r_high,
                });
            }
        }
        seen.push((p, ratio));
        if best.1.is_nan() || (ratio - target_ratio).abs() < (best.1 - target_ratio).abs() {
            best = (p, ratio);
        }
        if (ratio - target_ratio).abs() <= RATIO_TOLERANCE {
            return Ok(CalibrationResult {
                replace_prob: p,
                achieved_ratio: ratio,
                coverage,
                feasible: true,
                iterations: iteration,
                target_ratio,
            });
        }
        if ratio < target_ratio {
            lo = p;
        } else {
            hi = p;
        }
        p = 0.5 * (lo + hi);
    }

    Err(CalibrationError::NotConverged {
        target: target_ratio,
        tolerance: RATIO_TOLERANCE,
        iterations: MAX_ITERATIONS,
        best_prob: best.0,
        best_ratio: best.1,
    })
}
