//! Score-level loss terms and their subgradients.
//!
//! Every loss is a plain sum over samples; averaging happens in the trainer.
//! At a kink the subgradient takes the flat side (component 0).

use crate::error::{Error, Result};

/// Margins of the Δ-insensitive universum loss written as two hinges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversumMargins {
    delta: f64,
    epsilon1: f64,
    epsilon2: f64,
}

impl UniversumMargins {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || delta.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "universum insensitivity delta must be >= 0, got {delta}"
            )));
        }
        Ok(Self {
            delta,
            epsilon1: 1.0 - delta,
            epsilon2: -1.0 - delta,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Margin of the `+1` artificial copy, `1 - delta`.
    pub fn epsilon1(&self) -> f64 {
        self.epsilon1
    }

    /// Margin of the `-1` artificial copy, `-1 - delta`.
    pub fn epsilon2(&self) -> f64 {
        self.epsilon2
    }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// One-class hinge `Σ [1 - s]₊`.
pub fn hinge_train_loss(scores: &[f64]) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let grad = scores
        .iter()
        .map(|&s| {
            loss += relu(1.0 - s);
            if s < 1.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect();
    (loss, grad)
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Smooth surrogate `Σ log(1 + exp(1 - s))`, an upper bound on the hinge.
pub fn softplus_train_loss(scores: &[f64]) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let grad = scores
        .iter()
        .map(|&s| {
            loss += softplus(1.0 - s);
            // -sigmoid(1 - s), written to stay finite for large |s|
            let z = s - 1.0;
            if z >= 0.0 {
                let e = (-z).exp();
                -e / (1.0 + e)
            } else {
                -1.0 / (1.0 + z.exp())
            }
        })
        .collect();
    (loss, grad)
}

/// Δ-insensitive universum loss `Σ [|1 - s| - Δ]₊`.
pub fn universum_loss(scores: &[f64], margins: &UniversumMargins) -> (f64, Vec<f64>) {
    let delta = margins.delta();
    let mut loss = 0.0;
    let grad = scores
        .iter()
        .map(|&s| {
            let dev = (1.0 - s).abs() - delta;
            loss += relu(dev);
            if dev > 0.0 {
                if s > 1.0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                0.0
            }
        })
        .collect();
    (loss, grad)
}

/// The same loss as [`universum_loss`] written as `Σ [ε₁ - s]₊ + [ε₂ + s]₊`,
/// i.e. every universum sample is duplicated with labels +1 and -1.
pub fn universum_loss_two_hinge(scores: &[f64], margins: &UniversumMargins) -> (f64, Vec<f64>) {
    let (e1, e2) = (margins.epsilon1(), margins.epsilon2());
    let mut loss = 0.0;
    let grad = scores
        .iter()
        .map(|&s| {
            let pos = e1 - s;
            let neg = e2 + s;
            loss += relu(pos) + relu(neg);
            let mut g = 0.0;
            if pos > 0.0 {
                g -= 1.0;
            }
            if neg > 0.0 {
                g += 1.0;
            }
            g
        })
        .collect();
    (loss, grad)
}

/// Cost-sensitive binary hinge: `c_pos Σ [1 - s]₊` over positives plus
/// `c_neg Σ [1 + s]₊` over negatives.
pub fn binary_cost_sensitive_loss(
    scores_pos: &[f64],
    scores_neg: &[f64],
    c_pos: f64,
    c_neg: f64,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if !(c_pos > 0.0 && c_neg > 0.0) || !c_pos.is_finite() || !c_neg.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "class costs must be positive, got c_pos={c_pos}, c_neg={c_neg}"
        )));
    }
    let (lp, gp) = hinge_train_loss(scores_pos);
    let mut ln = 0.0;
    let gn = scores_neg
        .iter()
        .map(|&s| {
            ln += relu(1.0 + s);
            if s > -1.0 {
                c_neg
            } else {
                0.0
            }
        })
        .collect();
    let gp = gp.into_iter().map(|g| g * c_pos).collect();
    Ok((c_pos * lp + c_neg * ln, gp, gn))
}
