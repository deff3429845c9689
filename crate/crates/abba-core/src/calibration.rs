//! Score-to-probability calibration for semi-supervised estimation.
//!
//! A label machine emits an uncalibrated score per utterance; a degree-3
//! polynomial fitted by least squares against annotated examples maps that
//! score onto a true-positive probability. The polynomial is not guaranteed
//! monotone or bounded, so outputs are clamped to [0, 1] and monotonicity is
//! reported as a diagnostic rather than enforced.

use std::collections::HashMap;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::Dataset;

const MIN_PAIRS: usize = 8;
const MONOTONE_GRID: usize = 1000;

/// Fitted cubic mapping from machine score to TP probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    /// c0 + c1 s + c2 s^2 + c3 s^3, in raw score units.
    pub coefficients: [f64; 4],
    /// Score range observed at fit time; applications clamp into it.
    pub score_domain: (f64, f64),
    /// Whether the fitted derivative is non-negative across the domain.
    #[serde(rename = "monotone")]
    pub monotone_on_domain: bool,
}

impl CalibrationModel {
    /// Least-squares cubic fit of binary labels on machine scores, optionally
    /// weighted. Needs at least 8 pairs with both classes present.
    pub fn fit(pairs: &[(f64, u8)], weights: Option<&[f64]>) -> Result<Self> {
        if pairs.len() < MIN_PAIRS {
            return Err(Error::Calibration(format!(
                "need at least {MIN_PAIRS} pairs, got {}",
                pairs.len()
            )));
        }
        if let Some(w) = weights {
            if w.len() != pairs.len() {
                return Err(Error::Calibration(format!(
                    "{} weights for {} pairs",
                    w.len(),
                    pairs.len()
                )));
            }
            if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::Calibration(
                    "weights must be finite and >= 0".to_owned(),
                ));
            }
        }
        let mut pos = 0usize;
        let mut neg = 0usize;
        for &(score, label) in pairs {
            if !score.is_finite() {
                return Err(Error::Calibration(format!("non-finite score {score}")));
            }
            match label {
                0 => neg += 1,
                1 => pos += 1,
                other => {
                    return Err(Error::Calibration(format!(
                        "label must be 0 or 1, got {other}"
                    )))
                }
            }
        }
        if pos == 0 || neg == 0 {
            return Err(Error::Calibration(
                "both label classes must be present to fit a mapping".to_owned(),
            ));
        }

        let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if span <= 1e-9 * lo.abs().max(hi.abs()).max(1.0) {
            return Err(Error::Calibration(
                "degenerate input: all scores are (nearly) identical".to_owned(),
            ));
        }

        // Fit in u = (2s - lo - hi) / (hi - lo) in [-1, 1] for conditioning,
        // then expand the polynomial back into raw score units.
        let scale = 2.0 / span;
        let shift = -(lo + hi) / span;
        let mut xtx = [[0.0f64; 4]; 4];
        let mut xty = [0.0f64; 4];
        for (i, &(score, label)) in pairs.iter().enumerate() {
            let w = weights.map_or(1.0, |ws| ws[i]);
            let u = scale * score + shift;
            let basis = [1.0, u, u * u, u * u * u];
            for r in 0..4 {
                for c in 0..4 {
                    xtx[r][c] += w * basis[r] * basis[c];
                }
                xty[r] += w * basis[r] * label as f64;
            }
        }
        let m = Matrix4::from_fn(|r, c| xtx[r][c]);
        let rhs = Vector4::from_row_slice(&xty);
        let b = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Calibration("singular normal equations".to_owned()))?;

        let (a, t) = (scale, shift);
        let coefficients = [
            b[0] + b[1] * t + b[2] * t * t + b[3] * t * t * t,
            a * (b[1] + 2.0 * b[2] * t + 3.0 * b[3] * t * t),
            a * a * (b[2] + 3.0 * b[3] * t),
            a * a * a * b[3],
        ];

        let mut model = CalibrationModel {
            coefficients,
            score_domain: (lo, hi),
            monotone_on_domain: false,
        };
        model.monotone_on_domain = model.derivative_non_negative_on_domain();
        Ok(model)
    }

    fn derivative_non_negative_on_domain(&self) -> bool {
        let [_, c1, c2, c3] = self.coefficients;
        let (lo, hi) = self.score_domain;
        (0..MONOTONE_GRID).all(|i| {
            let s = lo + (hi - lo) * i as f64 / (MONOTONE_GRID - 1) as f64;
            c1 + 2.0 * c2 * s + 3.0 * c3 * s * s >= 0.0
        })
    }

    /// Evaluates the mapping. Scores outside the fit domain are clamped to
    /// it (a cubic extrapolates wildly), and the value is clamped to [0, 1].
    pub fn apply(&self, machine_score: f64) -> f64 {
        let (lo, hi) = self.score_domain;
        let s = machine_score.clamp(lo, hi);
        let [c0, c1, c2, c3] = self.coefficients;
        let p = c0 + s * (c1 + s * (c2 + s * c3));
        p.clamp(0.0, 1.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: CalibrationModel = serde_json::from_str(json)?;
        let (lo, hi) = model.score_domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Calibration(format!(
                "invalid score_domain [{lo}, {hi}]"
            )));
        }
        Ok(model)
    }
}

const MISSING_LIST_CAP: usize = 10;

/// Fills `soft_tp_prob` on every record from its machine score through the
/// model. Hard labels are untouched. Every record id must have a score.
pub fn annotate_soft(
    dataset: &Dataset,
    model: &CalibrationModel,
    machine_scores: &HashMap<String, f64>,
) -> Result<Dataset> {
    let mut missing = Vec::new();
    let mut missing_count = 0usize;
    for rec in dataset.records() {
        if !machine_scores.contains_key(&rec.id) {
            missing_count += 1;
            if missing.len() < MISSING_LIST_CAP {
                missing.push(rec.id.clone());
            }
        }
    }
    if missing_count > 0 {
        return Err(Error::MissingMachineScores {
            count: missing_count,
            first: missing,
        });
    }
    let records = dataset
        .records()
        .iter()
        .map(|rec| {
            let mut rec = rec.clone();
            rec.soft_tp_prob = Some(model.apply(machine_scores[&rec.id]));
            rec
        })
        .collect();
    Ok(Dataset::from_validated(records))
}
