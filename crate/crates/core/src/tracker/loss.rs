//! Tracking losses.

use serde::{Deserialize, Serialize};

use super::{PixelPoint, TrackerError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Decay of earlier refinement iterations, in (0, 1).
    pub chi: f64,
    /// Weight of the objectness term.
    pub alpha: f64,
    /// Weight of the refinement term.
    pub beta: f64,
    /// Points tracked per frame.
    pub n_points: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            chi: 0.8,
            alpha: 1.0,
            beta: 0.5,
            n_points: 4,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(TrackerError::LossConfig("chi: must lie in (0, 1)".into()));
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(TrackerError::LossConfig("alpha/beta: must be >= 0".into()));
        }
        if !(self.alpha + self.beta > 0.0) {
            return Err(TrackerError::LossConfig("alpha + beta: must be > 0".into()));
        }
        if self.n_points == 0 {
            return Err(TrackerError::LossConfig("n_points: must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean Chebyshev distance between predicted and ground-truth points.
pub fn objectness_loss(estimates: &[PixelPoint], gts: &[PixelPoint]) -> Result<f64, TrackerError> {
    if estimates.len() != gts.len() {
        return Err(TrackerError::LengthMismatch(estimates.len(), gts.len()));
    }
    if estimates.is_empty() {
        return Err(TrackerError::Empty("objectness_loss needs at least one point"));
    }
    let total: f64 = estimates.iter().zip(gts).map(|(p, g)| p.chebyshev(g)).sum();
    Ok(total / estimates.len() as f64)
}

/// `sum_i chi^(N-i) * loss_i`; the last iteration has weight 1.
pub fn refinement_loss(per_iter_losses: &[f64], chi: f64) -> Result<f64, TrackerError> {
    if per_iter_losses.is_empty() {
        return Err(TrackerError::Empty("refinement_loss needs at least one iteration"));
    }
    if !(chi > 0.0 && chi < 1.0) {
        return Err(TrackerError::LossConfig("chi: must lie in (0, 1)".into()));
    }
    // Horner from the first iteration: ((l1*chi + l2)*chi + l3)...
    Ok(per_iter_losses.iter().fold(0.0, |acc, &l| acc * chi + l))
}

/// `mean_j (alpha * E_s[j] + beta * E_r[j])`.
pub fn combined_loss(
    per_point_es: &[f64],
    per_point_er: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<f64, TrackerError> {
    if per_point_es.len() != per_point_er.len() {
        return Err(TrackerError::LengthMismatch(per_point_es.len(), per_point_er.len()));
    }
    if per_point_es.is_empty() {
        return Err(TrackerError::Empty("combined_loss needs at least one point"));
    }
    let total: f64 = per_point_es
        .iter()
        .zip(per_point_er)
        .map(|(s, r)| alpha * s + beta * r)
        .sum();
    Ok(total / per_point_es.len() as f64)
}
