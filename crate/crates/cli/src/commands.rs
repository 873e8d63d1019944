use std::path::{Path, PathBuf};

use multimix::coteach::{run_multimix, RunReport};
use multimix::data::{load_jsonl, save_jsonl, LabelVocab, LabeledDataset, SampleKind};
use multimix::distill::{distil, gmm_fit, gmm_goodness};
use multimix::metrics::{evaluate, mean_std, micro_f1, MeanStd, Prf};
use multimix::models::{predict_labels, pseudo_label, LinearSoftmaxModel, TaskModel, TokenTaggerModel};
use multimix::synth::{gen_pair_benchmark, gen_tagging_benchmark, Benchmark};
use multimix::vicinity::{corpus_from, fit_ngram_lm, gen_lm, NGramMaskedLM};
use multimix::Error;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, TaskKind};
use crate::Failure;

/// The four datasets of a run. `target` never carries labels.
pub struct RunData {
    pub source: LabeledDataset,
    pub target: LabeledDataset,
    pub dev: LabeledDataset,
    pub test: LabeledDataset,
}

/// Scores of the three models on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub per_model: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl ModelScores {
    fn new(per_model: Vec<f64>) -> Self {
        let MeanStd { mean, std } = mean_std(&per_model);
        ModelScores { per_model, mean, std }
    }
}

/// Target test scores: warm-up, dev-selected and last-epoch models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub metric: String,
    pub warmup: ModelScores,
    pub multimix: ModelScores,
    pub last: ModelScores,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub run: RunReport,
    pub test: TestMetrics,
}

fn expected_kind(task: TaskKind) -> SampleKind {
    match task {
        TaskKind::Tagging => SampleKind::Tagging,
        TaskKind::Pair => SampleKind::Pair,
    }
}

fn metric_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Tagging => "micro_f1",
        TaskKind::Pair => "accuracy",
    }
}

fn load(path: &Path, vocab: &LabelVocab, task: TaskKind) -> Result<LabeledDataset, Failure> {
    let data = load_jsonl(path, vocab)?;
    match data.kind() {
        Some(k) if k != expected_kind(task) => Err(Failure::Runtime(Error::ConfigInvalid(format!(
            "{} holds {k:?} samples but the task is {task:?}",
            path.display()
        )))),
        _ => Ok(data),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, Failure> {
    p.as_deref()
        .ok_or_else(|| Failure::Usage(format!("data.{name} is required")))
}

pub fn synth_benchmark(cfg: &RunConfig) -> Result<Benchmark, Failure> {
    let synth = cfg.synth.clone().unwrap_or_default();
    Ok(match cfg.task {
        TaskKind::Tagging => gen_tagging_benchmark(&synth)?,
        TaskKind::Pair => gen_pair_benchmark(&synth)?,
    })
}

/// Data from the configured files, or from the synthetic generator when
/// no source file is given and `synth` is set.
pub fn load_run_data(cfg: &RunConfig) -> Result<RunData, Failure> {
    let d = &cfg.data;
    if d.source_train.is_none() && cfg.synth.is_some() {
        let b = synth_benchmark(cfg)?;
        return Ok(RunData {
            source: b.source_train,
            target: b.target_train,
            dev: b.target_dev,
            test: b.target_test,
        });
    }
    let vocab = cfg.vocab()?;
    let paths = [
        required(&d.source_train, "source_train")?,
        required(&d.target_train, "target_train")?,
        required(&d.target_dev, "target_dev")?,
        required(&d.target_test, "target_test")?,
    ];
    let [source, target, dev, test] = paths.map(|p| load(p, &vocab, cfg.task));
    Ok(RunData {
        source: source?,
        target: target?.without_labels(),
        dev: dev?,
        test: test?,
    })
}

fn lm_for(cfg: &RunConfig, base: &[&LabeledDataset]) -> Result<NGramMaskedLM, Failure> {
    if let Some(p) = &cfg.lm.path {
        return Ok(NGramMaskedLM::load(p)?);
    }
    let vocab = cfg.vocab()?;
    let extra: Vec<LabeledDataset> = cfg
        .data
        .lm_corpus
        .iter()
        .map(|p| load_jsonl(p, &vocab).map(|d| d.without_labels()))
        .collect::<Result<_, _>>()?;
    let mut all: Vec<&LabeledDataset> = base.to_vec();
    all.extend(extra.iter());
    Ok(fit_ngram_lm(&corpus_from(&all), cfg.lm.order, cfg.lm.lambda)?)
}

fn scores<M: TaskModel>(models: &[M], data: &LabeledDataset) -> Result<ModelScores, Failure> {
    let per_model = models.iter().map(|m| evaluate(m, data)).collect::<Result<Vec<_>, _>>()?;
    Ok(ModelScores::new(per_model))
}

fn run_typed<M, F>(cfg: &RunConfig, data: &RunData, lm: &NGramMaskedLM, make: F, checkpoints: Option<&Path>) -> Result<Report, Failure>
where
    M: TaskModel,
    F: Fn(u64) -> M + Sync,
{
    let out = run_multimix(&data.source, &data.target, lm, &cfg.coteach, &data.dev, make, checkpoints)?;
    let test = TestMetrics {
        metric: metric_name(cfg.task).to_string(),
        warmup: scores(&out.warmup, &data.test)?,
        multimix: scores(&out.selected, &data.test)?,
        last: scores(&out.last, &data.test)?,
    };
    Ok(Report {
        config: cfg.clone(),
        run: out.report,
        test,
    })
}

/// Warm-up plus co-teaching, scored on the target test set. Checkpoints
/// go under `checkpoints` when given.
pub fn run_experiment(cfg: &RunConfig, data: &RunData, checkpoints: Option<&Path>) -> Result<(Report, NGramMaskedLM), Failure> {
    let lm = lm_for(cfg, &[&data.source, &data.target])?;
    let classes = data.source.vocab().len();
    let feat = cfg.features.clone();
    let report = match cfg.task {
        TaskKind::Tagging => run_typed(cfg, data, &lm, |s| TokenTaggerModel::new(feat.clone(), classes, s), checkpoints)?,
        TaskKind::Pair => run_typed(cfg, data, &lm, |s| LinearSoftmaxModel::new(feat.clone(), classes, s), checkpoints)?,
    };
    Ok((report, lm))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn io_failure(path: &Path, source: std::io::Error) -> Failure {
    Failure::Runtime(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

/// Writes `report.json`, `metrics.json`, `lm.json` and `checkpoints/`.
pub fn cmd_run(cfg: &RunConfig, out: &Path) -> Result<Report, Failure> {
    let data = load_run_data(cfg)?;
    create_dir(out)?;
    let (report, lm) = run_experiment(cfg, &data, Some(&out.join("checkpoints")))?;
    lm.save(&out.join("lm.json"))?;
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("metrics.json"), &report.test)?;
    Ok(report)
}

fn input(cfg: &RunConfig) -> Result<LabeledDataset, Failure> {
    load(required(&cfg.data.input, "input")?, &cfg.vocab()?, cfg.task)
}

/// Vicinity samples of `data.input`, written to `augmented.jsonl`.
pub fn cmd_augment(cfg: &RunConfig, out: &Path) -> Result<usize, Failure> {
    let data = input(cfg)?;
    let lm = lm_for(cfg, &[&data])?;
    let gen = multimix::vicinity::GenConfig {
        seed: cfg.coteach.seed,
        ..cfg.coteach.gen.clone()
    };
    let augmented = gen_lm(&data, &lm, &gen)?;
    create_dir(out)?;
    save_jsonl(&augmented, out.join("augmented.jsonl"))?;
    if cfg.lm.path.is_none() {
        lm.save(&out.join("lm.json"))?;
    }
    Ok(augmented.len())
}

#[derive(Serialize)]
struct LossRow<'a> {
    id: &'a str,
    length: usize,
    loss: f64,
    confidence: f64,
    goodness: Option<f64>,
}

fn distil_typed<M: TaskModel>(cfg: &RunConfig, data: &LabeledDataset, out: &Path) -> Result<(usize, usize), Failure> {
    let path = cfg
        .models
        .first()
        .ok_or_else(|| Failure::Usage("models must name a checkpoint".into()))?;
    let model = M::load(path)?;
    let dcfg = &cfg.coteach.distill;
    let factor = match (cfg.distill_factor, dcfg.factors.first()) {
        (Some(f), _) | (None, Some(&f)) => f,
        (None, None) => return Err(Failure::Usage("no distillation factor".into())),
    };
    let set = pseudo_label(&model, &data.without_labels());
    let kept = distil(&set, dcfg.method, factor, &dcfg.gmm)?;
    let losses = set.losses();
    let gmm = gmm_fit(&losses, &dcfg.gmm).ok();
    create_dir(out)?;
    save_jsonl(&kept.to_dataset()?, out.join("distilled.jsonl"))?;
    let csv_path = out.join("loss_stats.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io_failure(&csv_path, e.into()))?;
    for e in set.entries() {
        w.serialize(LossRow {
            id: &e.sample.id,
            length: e.sample.len(),
            loss: e.loss,
            confidence: e.confidence,
            goodness: gmm.as_ref().map(|g| gmm_goodness(g, e.loss)),
        })
        .map_err(|e| io_failure(&csv_path, e.into()))?;
    }
    w.flush().map_err(|e| io_failure(&csv_path, e))?;
    Ok((kept.len(), set.len()))
}

/// Pseudo-labels `data.input` with the first checkpoint in `models` and
/// keeps the distilled part. Returns `(kept, total)`.
pub fn cmd_distill(cfg: &RunConfig, out: &Path) -> Result<(usize, usize), Failure> {
    let data = input(cfg)?;
    match cfg.task {
        TaskKind::Tagging => distil_typed::<TokenTaggerModel>(cfg, &data, out),
        TaskKind::Pair => distil_typed::<LinearSoftmaxModel>(cfg, &data, out),
    }
}

/// Writes every split as `{name}.jsonl` plus `manifest.json`.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Benchmark, Failure> {
    let b = synth_benchmark(cfg)?;
    create_dir(out)?;
    for (name, data) in b.splits() {
        save_jsonl(data, out.join(format!("{name}.jsonl")))?;
    }
    write_json(&out.join("manifest.json"), &b.manifest)?;
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub metric: String,
    pub scores: ModelScores,
    /// Span precision/recall/F1 per model, tagging only.
    pub prf: Option<Vec<Prf>>,
}

/// A directory stands for its `1`, `2` and `3` checkpoints.
fn checkpoint_paths(models: &[PathBuf]) -> Vec<PathBuf> {
    models
        .iter()
        .flat_map(|p| {
            if p.is_dir() {
                (1..=3).map(|i| p.join(i.to_string())).collect()
            } else {
                vec![p.clone()]
            }
        })
        .collect()
}

fn eval_typed<M: TaskModel>(cfg: &RunConfig, data: &LabeledDataset) -> Result<EvalMetrics, Failure> {
    let paths = checkpoint_paths(&cfg.models);
    if paths.is_empty() {
        return Err(Failure::Usage("models must name at least one checkpoint".into()));
    }
    let models = paths.iter().map(|p| M::load(p)).collect::<Result<Vec<M>, _>>()?;
    let prf = match cfg.task {
        TaskKind::Tagging => Some(
            models
                .iter()
                .map(|m| {
                    let pred: Vec<Vec<usize>> = data.samples().iter().map(|s| predict_labels(m, s)).collect();
                    micro_f1(data, &pred)
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        TaskKind::Pair => None,
    };
    Ok(EvalMetrics {
        metric: metric_name(cfg.task).to_string(),
        scores: scores(&models, data)?,
        prf,
    })
}

/// Scores the checkpoints in `models` on the labeled `data.input`.
pub fn cmd_eval(cfg: &RunConfig, out: &Path) -> Result<EvalMetrics, Failure> {
    let data = input(cfg)?;
    let metrics = match cfg.task {
        TaskKind::Tagging => eval_typed::<TokenTaggerModel>(cfg, &data)?,
        TaskKind::Pair => eval_typed::<LinearSoftmaxModel>(cfg, &data)?,
    };
    create_dir(out)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(metrics)
}
