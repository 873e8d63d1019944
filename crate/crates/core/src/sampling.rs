//! Balanced multinomial mixing of datasets of different sizes.
//!
//! With `f_i = n_i / sum_j n_j`, dataset `i` is drawn with probability
//! `p_i = f_i^alpha / sum_j f_j^alpha`. `alpha = 1` is proportional sampling,
//! `alpha = 0` is uniform over datasets, and values in between upweight the
//! smaller datasets.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixturePlan {
    pub sizes: Vec<usize>,
    pub alpha: f64,
    pub fractions: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl MixturePlan {
    pub fn new(sizes: &[usize], alpha: f64) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::EmptySizes);
        }
        if let Some(i) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::ZeroSize(i));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::config(format!(
                "sampling factor must be >= 0, got {alpha}"
            )));
        }
        let total: f64 = sizes.iter().map(|&n| n as f64).sum();
        let fractions: Vec<f64> = sizes.iter().map(|&n| n as f64 / total).collect();
        let powered: Vec<f64> = fractions.iter().map(|f| f.powf(alpha)).collect();
        let z: f64 = powered.iter().sum();
        Ok(MixturePlan {
            sizes: sizes.to_vec(),
            alpha,
            fractions,
            probabilities: powered.into_iter().map(|p| p / z).collect(),
        })
    }
}

pub fn mixture_weights(sizes: &[usize], alpha: f64) -> Result<Vec<f64>> {
    Ok(MixturePlan::new(sizes, alpha)?.probabilities)
}

/// Endless stream of batches of `(dataset index, sample index)` draws: each
/// element picks a dataset from the mixture, then a member uniformly with
/// replacement.
pub struct MixtureStream {
    sizes: Vec<usize>,
    pick: WeightedIndex<f64>,
    batch: usize,
    rng: Rng,
}

impl MixtureStream {
    pub fn new(sizes: &[usize], alpha: f64, batch: usize, seed: u64) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::EmptyDataset);
        }
        if batch == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        let plan = MixturePlan::new(sizes, alpha)?;
        let pick = WeightedIndex::new(&plan.probabilities)
            .map_err(|e| Error::config(format!("mixture weights: {e}")))?;
        Ok(MixtureStream {
            sizes: sizes.to_vec(),
            pick,
            batch,
            rng: rng_from(seed),
        })
    }

    pub fn draw(&mut self) -> (usize, usize) {
        let d = self.pick.sample(&mut self.rng);
        (d, self.rng.gen_range(0..self.sizes[d]))
    }
}

impl Iterator for MixtureStream {
    type Item = Vec<(usize, usize)>;

    fn next(&mut self) -> Option<Self::Item> {
        Some((0..self.batch).map(|_| self.draw()).collect())
    }
}

/// `steps` batches drawn from datasets of the given sizes.
pub fn sample_stream(
    sizes: &[usize],
    alpha: f64,
    batch: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<(usize, usize)>>> {
    Ok(MixtureStream::new(sizes, alpha, batch, seed)?
        .take(steps)
        .collect())
}

/// Like [`sample_stream`] but resolves the draws against the datasets.
pub fn mix_batches<'a, T>(
    datasets: &[&'a [T]],
    alpha: f64,
    batch: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<&'a T>>> {
    let sizes: Vec<usize> = datasets.iter().map(|d| d.len()).collect();
    Ok(sample_stream(&sizes, alpha, batch, steps, seed)?
        .into_iter()
        .map(|b| b.into_iter().map(|(d, i)| &datasets[d][i]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_batches_resolves_members() {
        let a = ["a0", "a1"];
        let b = ["b0"];
        let batches = mix_batches(&[&a[..], &b[..]], 1.0, 3, 5, 1).unwrap();
        assert!(batches
            .iter()
            .flatten()
            .all(|s| ["a0", "a1", "b0"].contains(s)));
    }

    #[test]
    fn proportional_and_uniform_endpoints() {
        let w = mixture_weights(&[100, 300], 1.0).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-15 && (w[1] - 0.75).abs() < 1e-15);
        let u = mixture_weights(&[3, 70, 1000], 0.0).unwrap();
        assert!(u.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn paper_setting_value() {
        // f = (1/4, 3/4), alpha = 0.7; evaluated with mpmath at 30 digits.
        let w = mixture_weights(&[100, 300], 0.7).unwrap();
        assert!((w[0] - 0.316_689_276_594_554).abs() < 1e-14);
        assert!((w[1] - 0.683_310_723_405_446_1).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert!(matches!(mixture_weights(&[], 0.7), Err(Error::EmptySizes)));
        assert!(matches!(
            mixture_weights(&[4, 0], 0.7),
            Err(Error::ZeroSize(1))
        ));
        assert!(matches!(
            sample_stream(&[4, 0], 0.7, 2, 2, 0),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn single_dataset_and_determinism() {
        let s = sample_stream(&[5], 0.7, 4, 10, 3).unwrap();
        assert!(s.iter().flatten().all(|&(d, i)| d == 0 && i < 5));
        assert_eq!(s, sample_stream(&[5], 0.7, 4, 10, 3).unwrap());
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|b| b.len() == 4));
    }
}
