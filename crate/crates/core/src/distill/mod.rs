//! Pseudo-label filtering: single-model distillation by confidence rank or by
//! loss clustering, and two-model agreement.

mod gmm;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use gmm::{gmm_fit, gmm_goodness, GmmConfig, GmmInit, GmmModel};

use crate::data::{LabelVocab, LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::rng::ceil_percent;

/// A sample with model-assigned labels, the model's confidence and the
/// cross-entropy of the sample against those labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabeled {
    pub sample: Sample,
    pub labels: Vec<usize>,
    pub confidence: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabeledSet {
    vocab: LabelVocab,
    entries: Vec<PseudoLabeled>,
}

impl PseudoLabeledSet {
    pub fn new(vocab: LabelVocab, entries: Vec<PseudoLabeled>) -> Self {
        PseudoLabeledSet { vocab, entries }
    }

    pub fn vocab(&self) -> &LabelVocab {
        &self.vocab
    }

    pub fn entries(&self) -> &[PseudoLabeled] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.loss).collect()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.sample.id.as_str()).collect()
    }

    fn filtered(&self, keep: impl Fn(usize, &PseudoLabeled) -> bool) -> Self {
        PseudoLabeledSet {
            vocab: self.vocab.clone(),
            entries: self
                .entries
                .iter()
                .enumerate()
                .filter(|(i, e)| keep(*i, e))
                .map(|(_, e)| e.clone())
                .collect(),
        }
    }

    /// The entries as a labeled dataset carrying their pseudo labels.
    pub fn to_dataset(&self) -> Result<LabeledDataset> {
        LabeledDataset::new(
            self.vocab.clone(),
            self.entries.iter().map(|e| e.sample.clone()).collect(),
            Some(self.entries.iter().map(|e| e.labels.clone()).collect()),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistillMethod {
    /// Keep the top eta% entries by confidence.
    #[default]
    Confidence,
    /// Keep entries whose good-component posterior is at least the threshold.
    Clustering,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    pub method: DistillMethod,
    /// One factor per co-teaching epoch: a percentage for confidence
    /// distillation, a posterior threshold for clustering.
    pub factors: Vec<f64>,
    pub gmm: GmmConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            method: DistillMethod::Confidence,
            factors: vec![80.0, 100.0, 100.0],
            gmm: GmmConfig::default(),
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        for &f in &self.factors {
            validate_factor(self.method, f)?;
        }
        Ok(())
    }
}

fn validate_factor(method: DistillMethod, factor: f64) -> Result<()> {
    let ok = match method {
        DistillMethod::Confidence => factor > 0.0 && factor <= 100.0,
        DistillMethod::Clustering => factor > 0.0 && factor < 1.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!(
            "distillation factor {factor} out of range for {method:?}"
        )))
    }
}

/// The `ceil(eta/100 * N)` most confident entries, returned in input order.
/// Ties keep the earlier entry.
pub fn distil_confidence(set: &PseudoLabeledSet, eta: f64) -> Result<PseudoLabeledSet> {
    validate_factor(DistillMethod::Confidence, eta)?;
    let n = set.len();
    let keep = ceil_percent(eta, n).min(n);
    if keep == n {
        return Ok(set.clone());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        set.entries[b]
            .confidence
            .total_cmp(&set.entries[a].confidence)
            .then(a.cmp(&b))
    });
    let mut chosen = vec![false; n];
    for &i in &order[..keep] {
        chosen[i] = true;
    }
    Ok(set.filtered(|i, _| chosen[i]))
}

/// Entries whose goodness posterior under `gmm` is at least `threshold`.
pub fn distil_clustering(
    set: &PseudoLabeledSet,
    gmm: &GmmModel,
    threshold: f64,
) -> PseudoLabeledSet {
    set.filtered(|_, e| gmm_goodness(gmm, e.loss) >= threshold)
}

/// Single-model distillation with the configured method. Clustering fits a
/// fresh mixture to the set's losses; sets with fewer than two entries pass
/// through unchanged since there is nothing to cluster.
pub fn distil(
    set: &PseudoLabeledSet,
    method: DistillMethod,
    factor: f64,
    gmm_cfg: &GmmConfig,
) -> Result<PseudoLabeledSet> {
    match method {
        DistillMethod::Confidence => distil_confidence(set, factor),
        DistillMethod::Clustering => {
            validate_factor(method, factor)?;
            if set.len() < 2 {
                return Ok(set.clone());
            }
            let gmm = gmm_fit(&set.losses(), gmm_cfg)?;
            Ok(distil_clustering(set, &gmm, factor))
        }
    }
}

/// Entries of `a` whose sample id also appears in `b` with an identical
/// label sequence. Labels and scores are taken from `a`.
pub fn agreement(a: &PseudoLabeledSet, b: &PseudoLabeledSet) -> Result<PseudoLabeledSet> {
    if a.vocab != b.vocab {
        return Err(Error::MismatchedVocab);
    }
    let by_id: HashMap<&str, &[usize]> = b
        .entries
        .iter()
        .map(|e| (e.sample.id.as_str(), e.labels.as_slice()))
        .collect();
    Ok(a.filtered(|_, e| by_id.get(e.sample.id.as_str()) == Some(&e.labels.as_slice())))
}
