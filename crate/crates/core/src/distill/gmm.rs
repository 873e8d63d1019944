//! Two-component 1-d Gaussian mixture over per-sample losses, fitted by EM.
//!
//! E-step: `r_ik = pi_k N(x_i | mu_k, s2_k) / sum_k' pi_k' N(x_i | mu_k', s2_k')`.
//! M-step: `pi_k = sum_i r_ik / N`, `mu_k = sum_i r_ik x_i / sum_i r_ik`,
//! `s2_k = sum_i r_ik (x_i - mu_k)^2 / sum_i r_ik`, floored.
//! The "good" component is the one with the smaller mean loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmmInit {
    /// Sort the losses and seed each component from one half.
    #[default]
    MedianSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub max_iter: usize,
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    pub var_floor: f64,
    pub init: GmmInit,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            max_iter: 100,
            tol: 1e-6,
            var_floor: 1e-6,
            init: GmmInit::MedianSplit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    /// Log-likelihood of the data under the parameters at each iteration;
    /// the last entry belongs to the returned parameters.
    pub log_likelihood: Vec<f64>,
    /// Index of the component with the smaller mean.
    pub good: usize,
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

fn log_joint(x: f64, weights: &[f64; 2], means: &[f64; 2], vars: &[f64; 2]) -> [f64; 2] {
    [0, 1].map(|k| {
        if weights[k] > 0.0 {
            weights[k].ln() + log_normal(x, means[k], vars[k])
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Normalised posterior and the log evidence for one point.
fn posterior_and_evidence(
    x: f64,
    weights: &[f64; 2],
    means: &[f64; 2],
    vars: &[f64; 2],
) -> ([f64; 2], f64) {
    let a = log_joint(x, weights, means, vars);
    let m = a[0].max(a[1]);
    let lse = m + ((a[0] - m).exp() + (a[1] - m).exp()).ln();
    ([(a[0] - lse).exp(), (a[1] - lse).exp()], lse)
}

impl GmmModel {
    /// Posterior over both components at `x`; sums to one.
    pub fn responsibilities(&self, x: f64) -> [f64; 2] {
        posterior_and_evidence(x, &self.weights, &self.means, &self.variances).0
    }

    pub fn log_likelihood_of(&self, data: &[f64]) -> f64 {
        data.iter()
            .map(|&x| posterior_and_evidence(x, &self.weights, &self.means, &self.variances).1)
            .sum()
    }

    pub fn iterations(&self) -> usize {
        self.log_likelihood.len()
    }
}

/// Posterior probability that `loss` came from the good component.
pub fn gmm_goodness(gmm: &GmmModel, loss: f64) -> f64 {
    gmm.responsibilities(loss)[gmm.good]
}

fn mean_var(xs: &[f64], floor: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.max(floor))
}

pub fn gmm_fit(losses: &[f64], cfg: &GmmConfig) -> Result<GmmModel> {
    let n = losses.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if losses.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }
    if !(cfg.var_floor > 0.0) {
        return Err(Error::config("variance floor must be positive"));
    }
    let GmmInit::MedianSplit = cfg.init;
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let half = n / 2;
    let (lo, hi) = sorted.split_at(half);
    let (m0, v0) = mean_var(lo, cfg.var_floor);
    let (m1, v1) = mean_var(hi, cfg.var_floor);
    let mut weights = [half as f64 / n as f64, (n - half) as f64 / n as f64];
    let mut means = [m0, m1];
    let mut vars = [v0, v1];

    let mut trace: Vec<f64> = Vec::new();
    let mut resp = vec![[0.0; 2]; n];
    for it in 0..=cfg.max_iter {
        let mut ll = 0.0;
        for (r, &x) in resp.iter_mut().zip(losses) {
            let (post, lse) = posterior_and_evidence(x, &weights, &means, &vars);
            *r = post;
            ll += lse;
        }
        let converged = trace.last().is_some_and(|&prev| ll - prev < cfg.tol);
        trace.push(ll);
        if converged || it == cfg.max_iter {
            break;
        }
        for k in 0..2 {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk <= f64::MIN_POSITIVE {
                weights[k] = 0.0;
                continue;
            }
            let mu = resp.iter().zip(losses).map(|(r, &x)| r[k] * x).sum::<f64>() / nk;
            let var = resp
                .iter()
                .zip(losses)
                .map(|(r, &x)| r[k] * (x - mu) * (x - mu))
                .sum::<f64>()
                / nk;
            weights[k] = nk / n as f64;
            means[k] = mu;
            vars[k] = var.max(cfg.var_floor);
        }
    }
    let good = if means[1] < means[0] { 1 } else { 0 };
    Ok(GmmModel {
        weights,
        means,
        variances: vars,
        log_likelihood: trace,
        good,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_cluster_fit() {
        let g = gmm_fit(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0], &GmmConfig::default()).unwrap();
        assert_eq!(g.means, [0.0, 10.0]);
        assert_eq!(g.weights, [0.5, 0.5]);
        assert_eq!(g.variances, [1e-6, 1e-6]);
        assert_eq!(g.good, 0);
    }

    #[test]
    fn identical_losses_terminate_at_floor() {
        let g = gmm_fit(&[2.5; 7], &GmmConfig::default()).unwrap();
        assert!(g.means.iter().all(|m| (m - 2.5).abs() < 1e-12));
        assert_eq!(g.variances, [1e-6, 1e-6]);
        assert!(g.iterations() <= 3);
        assert!((g.weights[0] + g.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            gmm_fit(&[1.0], &GmmConfig::default()),
            Err(Error::TooFewSamples(1))
        ));
        assert!(matches!(
            gmm_fit(&[1.0, f64::NAN], &GmmConfig::default()),
            Err(Error::NonFiniteLoss)
        ));
    }

    fn symmetric_model() -> GmmModel {
        GmmModel {
            weights: [0.5, 0.5],
            means: [1.0, 3.0],
            variances: [0.5, 0.5],
            log_likelihood: vec![],
            good: 0,
        }
    }

    #[test]
    fn goodness_limits_and_symmetry() {
        let g = symmetric_model();
        assert!((gmm_goodness(&g, 2.0) - 0.5).abs() < 1e-15);
        assert!(gmm_goodness(&g, -50.0) > 1.0 - 1e-12);
        assert!(gmm_goodness(&g, 60.0) < 1e-12);
        for x in [-3.0, 0.2, 1.7, 2.9, 8.0] {
            let r = g.responsibilities(x);
            assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
        }
    }
}
