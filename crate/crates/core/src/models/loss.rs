//! Cross-entropy with a confidence penalty: `CE - beta * H(p)`.

use crate::error::{Error, Result};

const DIST_TOL: f64 = 1e-9;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `sum_c p_c ln p_c` with the `0 ln 0 = 0` convention.
pub fn neg_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum()
}

pub fn entropy(probs: &[f64]) -> f64 {
    -neg_entropy(probs)
}

pub fn check_distribution(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty".into()));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!("entry {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution(format!("sums to {sum}")));
    }
    Ok(())
}

/// `-ln p[target] + beta * sum_c p_c ln p_c`. With `beta = 0` this is plain
/// cross-entropy.
pub fn loss_conf_penalty(probs: &[f64], target: usize, beta: f64) -> Result<f64> {
    check_distribution(probs)?;
    if target >= probs.len() {
        return Err(Error::InvalidDistribution(format!(
            "target {target} outside {} classes",
            probs.len()
        )));
    }
    Ok(-probs[target].ln() + beta * neg_entropy(probs))
}

/// Loss and its gradient with respect to the logits.
///
/// `d/dz_j = p_j - [j = target] + beta * p_j * (ln p_j - sum_c p_c ln p_c)`.
pub fn conf_penalty_from_logits(logits: &[f64], target: usize, beta: f64) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let log_p: Vec<f64> = logits.iter().map(|&z| z - log_z).collect();
    let probs: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
    let plogp: f64 = probs.iter().zip(&log_p).map(|(p, l)| p * l).sum();
    let loss = -log_p[target] + beta * plogp;
    let grad = probs
        .iter()
        .zip(&log_p)
        .enumerate()
        .map(|(j, (&p, &lp))| {
            let ce = p - if j == target { 1.0 } else { 0.0 };
            ce + beta * p * (lp - plogp)
        })
        .collect();
    (loss, grad)
}
