//! The co-teaching loop: warm-up, then for each epoch and each ordered pair
//! of peer models `(k, j)`, distil and augment the data, keep what the peers
//! agree on, and train the third model `l` on the epoch's dataset roles.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, Sample};
use crate::distill::{agreement, distil, DistillConfig, PseudoLabeledSet};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::models::{pseudo_label, train_batches, train_warmup, TaskModel, TrainConfig};
use crate::rng::derive_seed;
use crate::sampling::mix_batches;
use crate::vicinity::{gen_lm, GenConfig, MaskedLM};

const TAG_WARMUP: u64 = 1;
const TAG_GEN_SOURCE: u64 = 2;
const TAG_GEN_TARGET: u64 = 3;
const TAG_MIX: u64 = 4;
const TAG_INIT: u64 = 5;

/// The four training datasets an epoch can draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Labeled source data.
    Source,
    /// Target samples selected by agreement.
    TargetSelected,
    /// Source vicinity samples with agreed pseudo labels.
    SourceAug,
    /// Target vicinity samples with agreed pseudo labels.
    TargetAug,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub epoch: usize,
    pub roles: Vec<Role>,
}

/// Roles mixed into training at epoch `e` (1-based).
pub fn epoch_datasets(e: usize) -> Result<Vec<Role>> {
    use Role::*;
    match e {
        1 => Ok(vec![Source, TargetSelected]),
        2 => Ok(vec![TargetAug]),
        3 => Ok(vec![Source, TargetSelected, SourceAug, TargetAug]),
        _ => Err(Error::EpochOutOfRange(e)),
    }
}

pub fn epoch_plan(e: usize) -> Result<EpochPlan> {
    Ok(EpochPlan {
        epoch: e,
        roles: epoch_datasets(e)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoteachConfig {
    pub epochs: usize,
    /// `distill.factors` holds one factor per epoch.
    pub distill: DistillConfig,
    pub gen: GenConfig,
    pub alpha: f64,
    pub warmup: TrainConfig,
    /// Adaptation training; `steps` is replaced by `ceil(mix size / batch)`.
    pub adapt: TrainConfig,
    /// When false, model `k`'s distilled sets are used without the peer check.
    pub agreement: bool,
    /// Record the call trace without updating any weights.
    pub dry_run: bool,
    pub seed: u64,
}

impl Default for CoteachConfig {
    fn default() -> Self {
        CoteachConfig {
            epochs: 3,
            distill: DistillConfig::default(),
            gen: GenConfig::default(),
            alpha: 0.7,
            warmup: TrainConfig::default(),
            adapt: TrainConfig {
                penalty: false,
                batch_size: 4,
                ..TrainConfig::default()
            },
            agreement: true,
            dry_run: false,
            seed: 0,
        }
    }
}

impl CoteachConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("at least one co-teaching epoch is required"));
        }
        if self.epochs > 3 {
            return Err(Error::EpochOutOfRange(self.epochs));
        }
        if self.distill.factors.len() != self.epochs {
            return Err(Error::ConfigArityMismatch {
                expected: self.epochs,
                got: self.distill.factors.len(),
            });
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("sampling factor must be >= 0"));
        }
        self.distill.validate()?;
        self.gen.validate()?;
        self.warmup.validate()?;
        self.adapt.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistilInput {
    /// The unlabeled target set.
    Target,
    /// Vicinity samples of the source set.
    SourceGen,
    /// Vicinity samples of the target set.
    TargetGen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    Distil {
        input: DistilInput,
        model: usize,
        /// Served from the per-model cache (the model had not changed).
        cached: bool,
        kept: usize,
        total: usize,
    },
    GenLm {
        input: Side,
        produced: usize,
    },
    Agreement {
        output: Role,
        size: usize,
    },
    Train {
        model: usize,
        roles: Vec<Role>,
        mix_size: usize,
        steps: usize,
    },
}

/// One orchestrator call. Models are numbered 1..=3; `j` is absent for the
/// per-`k` target distillation that precedes the inner loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub epoch: usize,
    pub k: usize,
    pub j: Option<usize>,
    #[serde(flatten)]
    pub op: Op,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSizes {
    pub target_k: usize,
    pub source_gen: usize,
    pub source_k: usize,
    pub source_j: usize,
    pub source_aug: usize,
    pub target_j: usize,
    pub target_selected: usize,
    pub target_gen: usize,
    pub target_gen_k: usize,
    pub target_gen_j: usize,
    pub target_aug: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub k: usize,
    pub j: usize,
    pub l: usize,
    pub sizes: StageSizes,
    pub mix_size: usize,
    pub steps: usize,
    pub mean_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub factor: f64,
    pub roles: Vec<Role>,
    pub rounds: Vec<RoundReport>,
    /// Dev score of each model after the epoch.
    pub dev: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub model: usize,
    /// 0 is the warm-up checkpoint.
    pub epoch: usize,
    pub dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub init: [u64; 3],
    pub warmup: [u64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: CoteachConfig,
    pub seeds: Seeds,
    pub sizes: InputSizes,
    pub warmup_dev: [f64; 3],
    pub epochs: Vec<EpochReport>,
    pub selected: Vec<Selection>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSizes {
    pub source: usize,
    pub target: usize,
    pub dev: usize,
}

pub struct MultimixOutput<M> {
    pub warmup: [M; 3],
    /// Per model, the checkpoint with the best dev score.
    pub selected: [M; 3],
    /// The models after the last epoch.
    pub last: [M; 3],
    pub report: RunReport,
}

/// The three agreed datasets of one `(k, j)` round.
#[derive(Clone, Debug)]
pub struct RoundData {
    pub source_aug: PseudoLabeledSet,
    pub target_selected: PseudoLabeledSet,
    pub target_aug: PseudoLabeledSet,
    pub sizes: StageSizes,
}

/// Holds the per-epoch inputs and the target distillation cache, which is
/// keyed by model and invalidated whenever that model is trained.
pub struct Coteacher<'a, L: ?Sized> {
    cfg: &'a CoteachConfig,
    source: &'a LabeledDataset,
    target: LabeledDataset,
    lm: &'a L,
    versions: [u64; 3],
    cache: HashMap<usize, (u64, PseudoLabeledSet)>,
    trace: Vec<TraceEvent>,
}

impl<'a, L: MaskedLM + ?Sized> Coteacher<'a, L> {
    pub fn new(
        cfg: &'a CoteachConfig,
        source: &'a LabeledDataset,
        target: &LabeledDataset,
        lm: &'a L,
    ) -> Result<Self> {
        cfg.validate()?;
        if !source.is_labeled() {
            return Err(Error::UnlabeledData);
        }
        if source.is_empty() || target.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if source.vocab() != target.vocab() {
            return Err(Error::MismatchedVocab);
        }
        Ok(Coteacher {
            cfg,
            source,
            target: target.without_labels(),
            lm,
            versions: [0; 3],
            cache: HashMap::new(),
            trace: Vec::new(),
        })
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceEvent> {
        self.trace
    }

    /// Marks model `m` (0-based) as changed.
    pub fn touch(&mut self, m: usize) {
        self.versions[m] += 1;
    }

    fn factor(&self, e: usize) -> f64 {
        self.cfg.distill.factors[e - 1]
    }

    fn push(&mut self, e: usize, k: usize, j: Option<usize>, op: Op) {
        self.trace.push(TraceEvent {
            epoch: e,
            k: k + 1,
            j: j.map(|j| j + 1),
            op,
        });
    }

    fn distil_with<M: TaskModel>(
        &self,
        data: &LabeledDataset,
        model: &M,
        e: usize,
    ) -> Result<(PseudoLabeledSet, usize)> {
        let labeled = pseudo_label(model, data);
        let total = labeled.len();
        let kept = distil(
            &labeled,
            self.cfg.distill.method,
            self.factor(e),
            &self.cfg.distill.gmm,
        )?;
        Ok((kept, total))
    }

    /// Distils the target set with model `m`, reusing the last result while
    /// the model is unchanged.
    pub fn distil_target<M: TaskModel>(
        &mut self,
        models: &[M; 3],
        m: usize,
        e: usize,
        k: usize,
        j: Option<usize>,
    ) -> Result<PseudoLabeledSet> {
        let version = self.versions[m];
        let (set, cached) = match self.cache.get(&m) {
            Some((v, set)) if *v == version => (set.clone(), true),
            _ => {
                let (set, _) = self.distil_with(&self.target, &models[m], e)?;
                self.cache.insert(m, (version, set.clone()));
                (set, false)
            }
        };
        let total = self.target.len();
        self.push(
            e,
            k,
            j,
            Op::Distil {
                input: DistilInput::Target,
                model: m + 1,
                cached,
                kept: set.len(),
                total,
            },
        );
        Ok(set)
    }

    /// Starts epoch `e`: the distillation factor may change, so the cache is
    /// dropped.
    pub fn begin_epoch(&mut self) {
        self.cache.clear();
    }

    fn generate(&mut self, side: Side, e: usize, k: usize, j: usize) -> Result<LabeledDataset> {
        let (data, tag) = match side {
            Side::Source => (self.source.without_labels(), TAG_GEN_SOURCE),
            Side::Target => (self.target.clone(), TAG_GEN_TARGET),
        };
        let gen = GenConfig {
            seed: derive_seed(self.cfg.seed, &[tag, e as u64, k as u64, j as u64]),
            ..self.cfg.gen.clone()
        };
        let out = gen_lm(&data, self.lm, &gen)?;
        self.push(
            e,
            k,
            Some(j),
            Op::GenLm {
                input: side,
                produced: out.len(),
            },
        );
        Ok(out)
    }

    fn distil_generated<M: TaskModel>(
        &mut self,
        data: &LabeledDataset,
        input: DistilInput,
        models: &[M; 3],
        m: usize,
        e: usize,
        k: usize,
        j: usize,
    ) -> Result<PseudoLabeledSet> {
        let (set, total) = self.distil_with(data, &models[m], e)?;
        self.push(
            e,
            k,
            Some(j),
            Op::Distil {
                input,
                model: m + 1,
                cached: false,
                kept: set.len(),
                total,
            },
        );
        Ok(set)
    }

    fn agree(
        &mut self,
        a: PseudoLabeledSet,
        b: Option<PseudoLabeledSet>,
        output: Role,
        e: usize,
        k: usize,
        j: usize,
    ) -> Result<PseudoLabeledSet> {
        let Some(b) = b else { return Ok(a) };
        let out = agreement(&a, &b)?;
        self.push(
            e,
            k,
            Some(j),
            Op::Agreement {
                output,
                size: out.len(),
            },
        );
        Ok(out)
    }

    /// One inner iteration for peers `k` and `j` (0-based), given model `k`'s
    /// distilled target set.
    pub fn round<M: TaskModel>(
        &mut self,
        models: &[M; 3],
        e: usize,
        k: usize,
        j: usize,
        target_k: &PseudoLabeledSet,
    ) -> Result<RoundData> {
        let peer = self.cfg.agreement;
        let mut sizes = StageSizes {
            target_k: target_k.len(),
            ..StageSizes::default()
        };

        let source_gen = self.generate(Side::Source, e, k, j)?;
        sizes.source_gen = source_gen.len();
        let source_k =
            self.distil_generated(&source_gen, DistilInput::SourceGen, models, k, e, k, j)?;
        sizes.source_k = source_k.len();
        let source_j = if peer {
            let s =
                self.distil_generated(&source_gen, DistilInput::SourceGen, models, j, e, k, j)?;
            sizes.source_j = s.len();
            Some(s)
        } else {
            None
        };
        let source_aug = self.agree(source_k, source_j, Role::SourceAug, e, k, j)?;
        sizes.source_aug = source_aug.len();

        let target_j = if peer {
            let s = self.distil_target(models, j, e, k, Some(j))?;
            sizes.target_j = s.len();
            Some(s)
        } else {
            None
        };
        let target_selected =
            self.agree(target_k.clone(), target_j, Role::TargetSelected, e, k, j)?;
        sizes.target_selected = target_selected.len();

        let target_gen = self.generate(Side::Target, e, k, j)?;
        sizes.target_gen = target_gen.len();
        let target_gen_k =
            self.distil_generated(&target_gen, DistilInput::TargetGen, models, k, e, k, j)?;
        sizes.target_gen_k = target_gen_k.len();
        let target_gen_j = if peer {
            let s =
                self.distil_generated(&target_gen, DistilInput::TargetGen, models, j, e, k, j)?;
            sizes.target_gen_j = s.len();
            Some(s)
        } else {
            None
        };
        let target_aug = self.agree(target_gen_k, target_gen_j, Role::TargetAug, e, k, j)?;
        sizes.target_aug = target_aug.len();

        Ok(RoundData {
            source_aug,
            target_selected,
            target_aug,
            sizes,
        })
    }

    /// Trains model `l` on the roles active at epoch `e`, mixed with the
    /// sampling factor. Returns (mix size, steps, mean loss).
    pub fn train<M: TaskModel>(
        &mut self,
        model: &mut M,
        data: &RoundData,
        e: usize,
        k: usize,
        j: usize,
        l: usize,
    ) -> Result<(usize, usize, Option<f64>)> {
        let roles = epoch_datasets(e)?;
        let owned: Vec<Vec<(&Sample, &[usize])>> = roles
            .iter()
            .map(|role| match role {
                Role::Source => self.source.labeled_pairs(),
                Role::TargetSelected => pairs(&data.target_selected),
                Role::SourceAug => pairs(&data.source_aug),
                Role::TargetAug => pairs(&data.target_aug),
            })
            .collect();
        let mix_size: usize = owned.iter().map(Vec::len).sum();
        let batch = self.cfg.adapt.batch_size;
        let steps = mix_size.div_ceil(batch);
        self.trace.push(TraceEvent {
            epoch: e,
            k: k + 1,
            j: Some(j + 1),
            op: Op::Train {
                model: l + 1,
                roles: roles.clone(),
                mix_size,
                steps,
            },
        });
        if self.cfg.dry_run || steps == 0 {
            return Ok((mix_size, steps, None));
        }
        let nonempty: Vec<&[(&Sample, &[usize])]> = owned
            .iter()
            .filter(|v| !v.is_empty())
            .map(Vec::as_slice)
            .collect();
        let seed = derive_seed(self.cfg.seed, &[TAG_MIX, e as u64, k as u64, j as u64]);
        let batches = mix_batches(&nonempty, self.cfg.alpha, batch, steps, seed)?;
        let cfg = TrainConfig {
            steps,
            penalty: false,
            ..self.cfg.adapt.clone()
        };
        let log = train_batches(
            model,
            batches
                .into_iter()
                .map(|b| b.into_iter().copied().collect()),
            &cfg,
        )?;
        self.touch(l);
        let mean = if log.interval_losses.is_empty() {
            None
        } else {
            Some(log.interval_losses.iter().sum::<f64>() / log.interval_losses.len() as f64)
        };
        Ok((mix_size, steps, mean))
    }
}

fn pairs(set: &PseudoLabeledSet) -> Vec<(&Sample, &[usize])> {
    set.entries()
        .iter()
        .map(|e| (&e.sample, e.labels.as_slice()))
        .collect()
}

/// Seeds used to initialise the three models.
pub fn init_seeds(master: u64) -> [u64; 3] {
    [1u64, 2, 3].map(|i| derive_seed(master, &[TAG_INIT, i]))
}

fn save_all<M: TaskModel>(models: &[M; 3], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, m) in models.iter().enumerate() {
        m.save(&dir.join((i + 1).to_string()))?;
    }
    Ok(())
}

/// Warm-up followed by the co-teaching epochs. `make(seed)` builds a fresh
/// model; `dev` is read only for checkpoint selection. With `checkpoints`,
/// models are written to `warmup/{1,2,3}`, `epoch{e}/{1,2,3}` and the
/// selected ones to `best/{1,2,3}`.
pub fn run_multimix<M, L, F>(
    source: &LabeledDataset,
    target: &LabeledDataset,
    lm: &L,
    cfg: &CoteachConfig,
    dev: &LabeledDataset,
    make: F,
    checkpoints: Option<&Path>,
) -> Result<MultimixOutput<M>>
where
    M: TaskModel,
    L: MaskedLM + ?Sized,
    F: Fn(u64) -> M + Sync,
{
    let mut co = Coteacher::new(cfg, source, target, lm)?;
    if !dev.is_labeled() {
        return Err(Error::UnlabeledData);
    }
    let init = init_seeds(cfg.seed);
    let warm_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, &[TAG_WARMUP]),
        ..cfg.warmup.clone()
    };
    let warmup: [M; 3] = if cfg.dry_run {
        init.map(&make)
    } else {
        train_warmup(source, &make, &warm_cfg, init)?
    };
    if let Some(dir) = checkpoints {
        save_all(&warmup, &dir.join("warmup"))?;
    }
    let score = |ms: &[M; 3]| -> Result<[f64; 3]> {
        Ok([
            evaluate(&ms[0], dev)?,
            evaluate(&ms[1], dev)?,
            evaluate(&ms[2], dev)?,
        ])
    };
    let warmup_dev = score(&warmup)?;
    let mut best: Vec<(usize, f64, M)> = warmup
        .iter()
        .zip(warmup_dev)
        .map(|(m, s)| (0, s, m.clone()))
        .collect();

    let mut models = warmup.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for e in 1..=cfg.epochs {
        co.begin_epoch();
        let mut rounds = Vec::with_capacity(6);
        for k in 0..3 {
            let target_k = co.distil_target(&models, k, e, k, None)?;
            for j in 0..3 {
                if j == k {
                    continue;
                }
                let l = 3 - k - j;
                let data = co.round(&models, e, k, j, &target_k)?;
                let (mix_size, steps, mean_loss) = co.train(&mut models[l], &data, e, k, j, l)?;
                rounds.push(RoundReport {
                    k: k + 1,
                    j: j + 1,
                    l: l + 1,
                    sizes: data.sizes,
                    mix_size,
                    steps,
                    mean_loss,
                });
            }
        }
        let dev_scores = score(&models)?;
        for (i, &s) in dev_scores.iter().enumerate() {
            if s > best[i].1 {
                best[i] = (e, s, models[i].clone());
            }
        }
        if let Some(dir) = checkpoints {
            save_all(&models, &dir.join(format!("epoch{e}")))?;
        }
        epochs.push(EpochReport {
            epoch: e,
            factor: cfg.distill.factors[e - 1],
            roles: epoch_datasets(e)?,
            rounds,
            dev: dev_scores,
        });
    }

    let selected: Vec<Selection> = best
        .iter()
        .enumerate()
        .map(|(i, (e, s, _))| Selection {
            model: i + 1,
            epoch: *e,
            dev: *s,
        })
        .collect();
    let mut it = best.into_iter().map(|(_, _, m)| m);
    let selected_models = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
    if let Some(dir) = checkpoints {
        save_all(&selected_models, &dir.join("best"))?;
    }
    let report = RunReport {
        config: cfg.clone(),
        seeds: Seeds {
            master: cfg.seed,
            init,
            warmup: init.map(|s| derive_seed(warm_cfg.seed, &[s])),
        },
        sizes: InputSizes {
            source: source.len(),
            target: target.len(),
            dev: dev.len(),
        },
        warmup_dev,
        epochs,
        selected,
        trace: co.into_trace(),
    };
    Ok(MultimixOutput {
        warmup,
        selected: selected_models,
        last: models,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelVocab;
    use crate::models::{predict_labels, FeatureConfig, TokenTaggerModel};
    use crate::vicinity::fit_ngram_lm;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn vocab() -> LabelVocab {
        LabelVocab::iob2(&["O", "B-PER", "I-PER"]).unwrap()
    }

    fn source() -> LabeledDataset {
        let rows = [
            ("alice met bob today", vec![1, 0, 1, 0]),
            ("bob saw carol", vec![1, 0, 1]),
            ("we met alice smith", vec![0, 0, 1, 2]),
            ("carol called dave", vec![1, 0, 1]),
            ("the cat sat", vec![0, 0, 0]),
            ("dave met erin jones today", vec![1, 0, 1, 2, 0]),
        ];
        let (samples, labels): (Vec<_>, Vec<_>) = rows
            .iter()
            .enumerate()
            .map(|(i, (t, l))| (Sample::tagging(format!("s{i}"), toks(t)), l.clone()))
            .unzip();
        LabeledDataset::new(vocab(), samples, Some(labels)).unwrap()
    }

    fn target() -> LabeledDataset {
        let rows = [
            "alice saw dave",
            "erin met bob",
            "the dog sat today",
            "carol met alice jones",
        ];
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, t)| Sample::tagging(format!("t{i}"), toks(t)))
            .collect();
        LabeledDataset::unlabeled(vocab(), samples).unwrap()
    }

    fn dev() -> LabeledDataset {
        LabeledDataset::new(
            vocab(),
            vec![Sample::tagging("d0", toks("bob met carol"))],
            Some(vec![vec![1, 0, 1]]),
        )
        .unwrap()
    }

    fn make(seed: u64) -> TokenTaggerModel {
        TokenTaggerModel::new(FeatureConfig::default(), 3, seed)
    }

    fn small_cfg() -> CoteachConfig {
        let mut cfg = CoteachConfig::default();
        cfg.warmup.steps = 40;
        cfg.adapt.batch_size = 4;
        cfg.seed = 11;
        cfg
    }

    fn corpus_lm() -> crate::vicinity::NGramMaskedLM {
        let mut corpus: Vec<Vec<String>> = source()
            .samples()
            .iter()
            .map(|s| s.parts()[0].to_vec())
            .collect();
        corpus.extend(target().samples().iter().map(|s| s.parts()[0].to_vec()));
        fit_ngram_lm(&corpus, 3, 0.1).unwrap()
    }

    #[test]
    fn epoch_roles() {
        use Role::*;
        assert_eq!(epoch_datasets(1).unwrap(), vec![Source, TargetSelected]);
        assert_eq!(epoch_datasets(2).unwrap(), vec![TargetAug]);
        assert_eq!(
            epoch_datasets(3).unwrap(),
            vec![Source, TargetSelected, SourceAug, TargetAug]
        );
        assert!(matches!(epoch_datasets(0), Err(Error::EpochOutOfRange(0))));
        assert!(matches!(epoch_datasets(4), Err(Error::EpochOutOfRange(4))));
    }

    #[test]
    fn config_arity() {
        let mut cfg = CoteachConfig::default();
        cfg.distill.factors = vec![80.0, 100.0];
        assert!(matches!(
            cfg.validate(),
            Err(Error::ConfigArityMismatch {
                expected: 3,
                got: 2
            })
        ));
        cfg.epochs = 2;
        assert!(cfg.validate().is_ok());
        cfg.epochs = 4;
        assert!(matches!(cfg.validate(), Err(Error::EpochOutOfRange(4))));
    }

    #[test]
    fn agreed_sets_are_agreed_by_both_peers() {
        let cfg = small_cfg();
        let src = source();
        let lm = corpus_lm();
        let models = train_warmup(&src, make, &cfg.warmup, init_seeds(3)).unwrap();
        let mut co = Coteacher::new(&cfg, &src, &target(), &lm).unwrap();
        let tk = co.distil_target(&models, 0, 1, 0, None).unwrap();
        let data = co.round(&models, 1, 0, 1, &tk).unwrap();
        for set in [&data.source_aug, &data.target_selected, &data.target_aug] {
            for e in set.entries() {
                assert_eq!(predict_labels(&models[0], &e.sample), e.labels);
                assert_eq!(predict_labels(&models[1], &e.sample), e.labels);
            }
        }
        // ceil(0.8 * 4) = 4
        assert_eq!(data.sizes.target_k, 4);
    }

    #[test]
    fn cache_follows_model_changes() {
        let cfg = small_cfg();
        let src = source();
        let lm = corpus_lm();
        let models = [make(1), make(2), make(3)];
        let mut co = Coteacher::new(&cfg, &src, &target(), &lm).unwrap();
        let a = co.distil_target(&models, 1, 1, 0, None).unwrap();
        let b = co.distil_target(&models, 1, 1, 0, Some(1)).unwrap();
        assert_eq!(a, b);
        co.touch(1);
        co.distil_target(&models, 1, 1, 0, None).unwrap();
        let cached: Vec<bool> = co
            .trace()
            .iter()
            .map(|t| match t.op {
                Op::Distil { cached, .. } => cached,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(cached, vec![false, true, false]);
    }

    #[test]
    fn dry_run_leaves_weights_alone_and_is_deterministic() {
        let cfg = CoteachConfig {
            dry_run: true,
            ..small_cfg()
        };
        let lm = corpus_lm();
        let a = run_multimix(&source(), &target(), &lm, &cfg, &dev(), make, None).unwrap();
        let init = init_seeds(cfg.seed).map(make);
        for (m, i) in a.last.iter().zip(&init) {
            assert_eq!(m.head(), i.head());
        }
        let b = run_multimix(&source(), &target(), &lm, &cfg, &dev(), make, None).unwrap();
        assert_eq!(a.report, b.report);
        let trains = a
            .report
            .trace
            .iter()
            .filter(|t| matches!(t.op, Op::Train { .. }))
            .count();
        assert_eq!(trains, 18);
    }

    #[test]
    fn full_run_writes_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg();
        let lm = corpus_lm();
        let out = run_multimix(
            &source(),
            &target(),
            &lm,
            &cfg,
            &dev(),
            make,
            Some(dir.path()),
        )
        .unwrap();
        for sub in ["warmup", "epoch1", "epoch2", "epoch3", "best"] {
            for i in 1..=3 {
                assert!(
                    dir.path().join(sub).join(i.to_string()).is_file(),
                    "{sub}/{i}"
                );
            }
        }
        assert_eq!(out.report.epochs.len(), 3);
        assert!(out.report.epochs.iter().all(|e| e.rounds.len() == 6));
        let again = run_multimix(&source(), &target(), &lm, &cfg, &dev(), make, None).unwrap();
        assert_eq!(
            serde_json::to_string(&out.report).unwrap(),
            serde_json::to_string(&again.report).unwrap()
        );
    }

    #[test]
    fn no_agreement_skips_peer_calls() {
        let cfg = CoteachConfig {
            dry_run: true,
            agreement: false,
            ..small_cfg()
        };
        let lm = corpus_lm();
        let out = run_multimix(&source(), &target(), &lm, &cfg, &dev(), make, None).unwrap();
        assert!(!out
            .report
            .trace
            .iter()
            .any(|t| matches!(t.op, Op::Agreement { .. })));
    }
}
