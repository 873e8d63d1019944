//! Task models: the trainable classifier contract, two hashed linear
//! stand-ins, confidence-penalized SGD training, confidence scoring and
//! pseudo-labeling.

mod features;
pub mod linear;
pub mod loss;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Sample};
use crate::distill::{PseudoLabeled, PseudoLabeledSet};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
pub use linear::{FeatureConfig, Gradient, Position, SparseLinear};
pub use loss::{entropy, loss_conf_penalty, softmax};

/// A trainable classifier producing one class distribution per output
/// position: one per token for tagging models, one per sample otherwise.
pub trait TaskModel: Clone + Send + Sync {
    fn num_classes(&self) -> usize;

    fn predict(&self, sample: &Sample) -> Vec<Vec<f64>>;

    /// One SGD step on `batch`; returns the batch loss before the update.
    fn train_step(&mut self, batch: &[(&Sample, &[usize])], cfg: &TrainConfig) -> Result<f64>;

    fn save(&self, path: &Path) -> Result<()>;

    fn load(path: &Path) -> Result<Self>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    /// Weight of the entropy bonus; only used when `penalty` is set.
    pub beta: f64,
    pub penalty: bool,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub log_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5.0,
            batch_size: 8,
            steps: 1000,
            beta: 1.0,
            penalty: true,
            clip_norm: Some(1.0),
            log_interval: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn effective_beta(&self) -> f64 {
        if self.penalty {
            self.beta
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.beta < 0.0 {
            return Err(Error::config("penalty weight must be non-negative"));
        }
        if self.log_interval == 0 {
            return Err(Error::config("log interval must be at least 1"));
        }
        Ok(())
    }
}

fn linear_step(
    head: &mut SparseLinear,
    encoded: &[Vec<Vec<u32>>],
    batch: &[(&Sample, &[usize])],
    cfg: &TrainConfig,
) -> Result<f64> {
    let samples: Vec<Vec<Position<'_>>> = encoded
        .iter()
        .zip(batch)
        .map(|(feats, (s, labels))| {
            if feats.len() != labels.len() {
                return Err(Error::LabelLengthMismatch(s.id.clone()));
            }
            feats
                .iter()
                .zip(labels.iter())
                .map(|(f, &target)| {
                    if target >= head.classes() {
                        Err(Error::UnknownLabel {
                            id: s.id.clone(),
                            name: format!("#{target}"),
                        })
                    } else {
                        Ok(Position {
                            features: f,
                            target,
                        })
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (loss, grad) = head.loss_and_gradient(&samples, cfg.effective_beta());
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    head.apply(&grad, cfg.learning_rate, cfg.clip_norm);
    if !head.params_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(loss)
}

/// Sentence-level classifier over hashed bags of n-grams.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSoftmaxModel {
    features: FeatureConfig,
    head: SparseLinear,
}

impl LinearSoftmaxModel {
    pub fn new(features: FeatureConfig, classes: usize, seed: u64) -> Self {
        let head = SparseLinear::new(classes, features.hash_bits, features.init_scale, seed);
        LinearSoftmaxModel { features, head }
    }

    pub fn encode(&self, sample: &Sample) -> Vec<u32> {
        features::sentence_features(sample, &self.features)
    }

    pub fn head(&self) -> &SparseLinear {
        &self.head
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.features
    }
}

impl TaskModel for LinearSoftmaxModel {
    fn num_classes(&self) -> usize {
        self.head.classes()
    }

    fn predict(&self, sample: &Sample) -> Vec<Vec<f64>> {
        vec![self.head.probs(&self.encode(sample))]
    }

    fn train_step(&mut self, batch: &[(&Sample, &[usize])], cfg: &TrainConfig) -> Result<f64> {
        let encoded: Vec<Vec<Vec<u32>>> = batch.iter().map(|(s, _)| vec![self.encode(s)]).collect();
        linear_step(&mut self.head, &encoded, batch, cfg)
    }

    fn save(&self, path: &Path) -> Result<()> {
        linear::write_checkpoint(
            path,
            header(0, &self.features, &self.head),
            &self.head,
            self.features.init_scale,
        )
    }

    fn load(path: &Path) -> Result<Self> {
        let (features, head) = load_linear(path, 0)?;
        Ok(LinearSoftmaxModel { features, head })
    }
}

/// Token tagger: one distribution per token from hashed window n-grams.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenTaggerModel {
    features: FeatureConfig,
    head: SparseLinear,
}

impl TokenTaggerModel {
    pub fn new(features: FeatureConfig, classes: usize, seed: u64) -> Self {
        let head = SparseLinear::new(classes, features.hash_bits, features.init_scale, seed);
        TokenTaggerModel { features, head }
    }

    pub fn encode(&self, sample: &Sample) -> Vec<Vec<u32>> {
        features::tagger_features(sample, &self.features)
    }

    pub fn head(&self) -> &SparseLinear {
        &self.head
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.features
    }
}

impl TaskModel for TokenTaggerModel {
    fn num_classes(&self) -> usize {
        self.head.classes()
    }

    fn predict(&self, sample: &Sample) -> Vec<Vec<f64>> {
        self.encode(sample)
            .iter()
            .map(|f| self.head.probs(f))
            .collect()
    }

    fn train_step(&mut self, batch: &[(&Sample, &[usize])], cfg: &TrainConfig) -> Result<f64> {
        let encoded: Vec<Vec<Vec<u32>>> = batch.iter().map(|(s, _)| self.encode(s)).collect();
        linear_step(&mut self.head, &encoded, batch, cfg)
    }

    fn save(&self, path: &Path) -> Result<()> {
        linear::write_checkpoint(
            path,
            header(1, &self.features, &self.head),
            &self.head,
            self.features.init_scale,
        )
    }

    fn load(path: &Path) -> Result<Self> {
        let (features, head) = load_linear(path, 1)?;
        Ok(TokenTaggerModel { features, head })
    }
}

fn header(kind: u8, f: &FeatureConfig, head: &SparseLinear) -> linear::Header {
    linear::Header {
        model_kind: kind,
        classes: head.classes() as u32,
        bits: f.hash_bits,
        ngram_order: f.ngram_order as u32,
        window: f.window as u32,
    }
}

fn load_linear(path: &Path, kind: u8) -> Result<(FeatureConfig, SparseLinear)> {
    let (h, init_scale, head) = linear::read_checkpoint(path)?;
    if h.model_kind != kind {
        return Err(Error::BadCheckpoint {
            path: path.to_path_buf(),
            reason: format!(
                "checkpoint holds model kind {}, expected {kind}",
                h.model_kind
            ),
        });
    }
    let features = FeatureConfig {
        hash_bits: h.bits,
        ngram_order: h.ngram_order as usize,
        window: h.window as usize,
        init_scale,
    };
    Ok((features, head))
}

/// Mean loss per logging interval.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: usize,
    pub interval_losses: Vec<f64>,
}

/// Runs `train_step` over a sequence of batches, logging interval means.
pub fn train_batches<'a, M, I>(model: &mut M, batches: I, cfg: &TrainConfig) -> Result<TrainLog>
where
    M: TaskModel,
    I: IntoIterator<Item = Vec<(&'a Sample, &'a [usize])>>,
{
    cfg.validate()?;
    let mut log = TrainLog::default();
    let mut acc = 0.0;
    let mut in_interval = 0usize;
    for batch in batches.into_iter().take(cfg.steps) {
        acc += model.train_step(&batch, cfg)?;
        in_interval += 1;
        log.steps += 1;
        if in_interval == cfg.log_interval {
            log.interval_losses.push(acc / in_interval as f64);
            acc = 0.0;
            in_interval = 0;
        }
    }
    if in_interval > 0 {
        log.interval_losses.push(acc / in_interval as f64);
    }
    Ok(log)
}

/// Shuffled mini-batches over `examples`, reshuffling at every pass.
pub fn shuffled_batches<'a>(
    examples: &'a [(&'a Sample, &'a [usize])],
    batch_size: usize,
    seed: u64,
) -> impl Iterator<Item = Vec<(&'a Sample, &'a [usize])>> + 'a {
    let mut rng = rng_from(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut cursor = order.len();
    std::iter::from_fn(move || {
        if examples.is_empty() {
            return None;
        }
        let mut batch = Vec::with_capacity(batch_size);
        while batch.len() < batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(examples[order[cursor]]);
            cursor += 1;
        }
        Some(batch)
    })
}

/// SGD on the confidence-penalized loss over a labeled dataset.
pub fn train_model<M: TaskModel>(
    model: &mut M,
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    if !data.is_labeled() {
        return Err(Error::UnlabeledData);
    }
    if cfg.steps == 0 {
        return Ok(TrainLog::default());
    }
    let examples = data.labeled_pairs();
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    train_batches(
        model,
        shuffled_batches(&examples, cfg.batch_size, cfg.seed),
        cfg,
    )
}

/// Trains three models, each built by `make(seed)` and fed its own batch
/// order, on the same source data with the confidence penalty enabled.
pub fn train_warmup<M, F>(
    data: &LabeledDataset,
    make: F,
    cfg: &TrainConfig,
    seeds: [u64; 3],
) -> Result<[M; 3]>
where
    M: TaskModel,
    F: Fn(u64) -> M + Sync,
{
    if seeds[0] == seeds[1] || seeds[0] == seeds[2] || seeds[1] == seeds[2] {
        return Err(Error::DuplicateSeeds);
    }
    let mut cfg = cfg.clone();
    cfg.penalty = true;
    let results: Vec<Result<M>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = TrainConfig {
                    seed: derive_seed(cfg.seed, &[seed]),
                    ..cfg.clone()
                };
                let make = &make;
                scope.spawn(move || {
                    let mut m = make(seed);
                    train_model(&mut m, data, &cfg)?;
                    Ok(m)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("warm-up thread panicked"))
            .collect()
    });
    let mut it = results.into_iter();
    let mut next = || it.next().expect("three results");
    Ok([next()?, next()?, next()?])
}

fn max_prob(dist: &[f64]) -> f64 {
    dist.iter().copied().fold(0.0, f64::max)
}

fn argmax(dist: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > dist[best] {
            best = i;
        }
    }
    best
}

/// Mean over output positions of the top class probability.
pub fn confidence_from_distributions(dists: &[Vec<f64>]) -> f64 {
    if dists.is_empty() {
        return 0.0;
    }
    dists.iter().map(|d| max_prob(d)).sum::<f64>() / dists.len() as f64
}

pub fn confidence_score<M: TaskModel>(model: &M, sample: &Sample) -> f64 {
    confidence_from_distributions(&model.predict(sample))
}

/// Argmax labels, confidence, and the plain cross-entropy of the sample
/// against its own argmax labels (mean over positions).
pub fn pseudo_label_sample<M: TaskModel>(model: &M, sample: &Sample) -> PseudoLabeled {
    let dists = model.predict(sample);
    let labels: Vec<usize> = dists.iter().map(|d| argmax(d)).collect();
    let loss = if dists.is_empty() {
        0.0
    } else {
        dists.iter().map(|d| -max_prob(d).ln()).sum::<f64>() / dists.len() as f64
    };
    PseudoLabeled {
        sample: sample.clone(),
        labels,
        confidence: confidence_from_distributions(&dists),
        loss,
    }
}

pub fn pseudo_label<M: TaskModel>(model: &M, data: &LabeledDataset) -> PseudoLabeledSet {
    PseudoLabeledSet::new(
        data.vocab().clone(),
        data.samples()
            .iter()
            .map(|s| pseudo_label_sample(model, s))
            .collect(),
    )
}

pub fn predict_labels<M: TaskModel>(model: &M, sample: &Sample) -> Vec<usize> {
    model.predict(sample).iter().map(|d| argmax(d)).collect()
}

/// Mean entropy of the predicted distributions over every output position.
pub fn mean_predictive_entropy<M: TaskModel>(model: &M, data: &LabeledDataset) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in data.samples() {
        for d in model.predict(s) {
            total += entropy(&d);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelVocab;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn small_features() -> FeatureConfig {
        FeatureConfig {
            hash_bits: 10,
            ..FeatureConfig::default()
        }
    }

    fn toy_pairs() -> LabeledDataset {
        let vocab = LabelVocab::sentence(&["pos", "neg"]).unwrap();
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let (word, y) = if i % 2 == 0 { ("good", 0) } else { ("bad", 1) };
            samples.push(Sample::pair(
                format!("s{i}"),
                toks(&format!("it is {word}")),
                toks("ok"),
            ));
            labels.push(vec![y]);
        }
        LabeledDataset::new(vocab, samples, Some(labels)).unwrap()
    }

    #[test]
    fn zero_steps_leave_parameters_unchanged() {
        let data = toy_pairs();
        let mut m = LinearSoftmaxModel::new(small_features(), 2, 3);
        let before = m.clone();
        let cfg = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        train_model(&mut m, &data, &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn training_reduces_loss_on_separable_data() {
        let data = toy_pairs();
        let mut m = LinearSoftmaxModel::new(small_features(), 2, 3);
        let cfg = TrainConfig {
            steps: 500,
            penalty: false,
            ..TrainConfig::default()
        };
        let log = train_model(&mut m, &data, &cfg).unwrap();
        assert!(log.interval_losses.last().unwrap() < log.interval_losses.first().unwrap());
        assert_eq!(log.steps, 500);
        assert_eq!(log.interval_losses.len(), 10);
    }

    #[test]
    fn unlabeled_training_fails() {
        let data = toy_pairs().without_labels();
        let mut m = LinearSoftmaxModel::new(small_features(), 2, 3);
        assert!(matches!(
            train_model(&mut m, &data, &TrainConfig::default()),
            Err(Error::UnlabeledData)
        ));
    }

    #[test]
    fn warmup_seeds() {
        let data = toy_pairs();
        let cfg = TrainConfig {
            steps: 30,
            ..TrainConfig::default()
        };
        let make = |seed| LinearSoftmaxModel::new(small_features(), 2, seed);
        let fresh = [make(1), make(2), make(3)];
        assert_ne!(fresh[0], fresh[1]);
        assert_ne!(fresh[1], fresh[2]);
        let a = train_warmup(&data, make, &cfg, [1, 2, 3]).unwrap();
        let b = train_warmup(&data, make, &cfg, [1, 2, 3]).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            train_warmup(&data, make, &cfg, [1, 1, 3]),
            Err(Error::DuplicateSeeds)
        ));
    }

    #[test]
    fn confidence_rules() {
        assert!(
            (confidence_from_distributions(&[vec![0.7, 0.3], vec![0.4, 0.6]]) - 0.65).abs() < 1e-15
        );
        assert_eq!(confidence_from_distributions(&[vec![0.1, 0.8, 0.1]]), 0.8);
        let u = vec![1.0 / 3.0; 3];
        assert!((confidence_from_distributions(&[u.clone(), u]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pseudo_labels_are_argmax_with_ce_loss() {
        let data = toy_pairs();
        let mut m = TokenTaggerModel::new(small_features(), 3, 5);
        // Give the tagger something non-uniform to say.
        let tag_vocab = LabelVocab::iob2(&["O", "B-X", "I-X"]).unwrap();
        let tagged = LabeledDataset::new(
            tag_vocab,
            vec![Sample::tagging("t", toks("mr smith went home"))],
            Some(vec![vec![0, 1, 0, 0]]),
        )
        .unwrap();
        let cfg = TrainConfig {
            steps: 20,
            ..TrainConfig::default()
        };
        train_model(&mut m, &tagged, &cfg).unwrap();
        let set = pseudo_label(&m, &tagged.without_labels());
        assert_eq!(set.len(), 1);
        let e = &set.entries()[0];
        let dists = m.predict(&e.sample);
        for (d, &l) in dists.iter().zip(&e.labels) {
            assert!(d.iter().all(|&p| p <= d[l]));
        }
        let expected: f64 = dists.iter().map(|d| -max_prob(d).ln()).sum::<f64>() / 4.0;
        assert!((e.loss - expected).abs() < 1e-15);
        let s = pseudo_label(&LinearSoftmaxModel::new(small_features(), 2, 1), &data);
        assert_eq!(s.len(), data.len());
    }

    #[test]
    fn predictions_are_distributions() {
        let m = TokenTaggerModel::new(small_features(), 5, 11);
        for d in m.predict(&Sample::tagging("a", toks("x y z"))) {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(d.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_kind_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        let m = TokenTaggerModel::new(small_features(), 3, 9);
        m.save(&p).unwrap();
        assert_eq!(TokenTaggerModel::load(&p).unwrap(), m);
        assert!(matches!(
            LinearSoftmaxModel::load(&p),
            Err(Error::BadCheckpoint { .. })
        ));
        std::fs::write(&p, b"garbage").unwrap();
        assert!(TokenTaggerModel::load(&p).is_err());
    }
}
