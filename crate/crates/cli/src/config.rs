use std::path::{Path, PathBuf};

use multimix::coteach::CoteachConfig;
use multimix::data::LabelVocab;
use multimix::models::FeatureConfig;
use multimix::synth::{pair_vocab, tag_vocab, SynthConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    Tagging,
    Pair,
}

/// Dataset files. Relative paths are taken from the config file's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub source_train: Option<PathBuf>,
    pub target_train: Option<PathBuf>,
    pub target_dev: Option<PathBuf>,
    pub target_test: Option<PathBuf>,
    /// Extra corpora for the masked LM; source and target train are always used.
    pub lm_corpus: Vec<PathBuf>,
    /// Input of `augment`, `distill` and `eval`.
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub order: usize,
    pub lambda: f64,
    /// A saved LM to use instead of fitting one.
    pub path: Option<PathBuf>,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 3,
            lambda: 0.1,
            path: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    /// Label names; defaults to the synthetic benchmark's set for the task.
    pub labels: Option<Vec<String>>,
    pub data: DataPaths,
    /// Generates the benchmark in memory when no data paths are given.
    pub synth: Option<SynthConfig>,
    pub features: FeatureConfig,
    pub lm: LmConfig,
    pub coteach: CoteachConfig,
    /// Checkpoints read by `distill` (first one) and `eval` (all).
    pub models: Vec<PathBuf>,
    /// Factor for `distill`; defaults to the first per-epoch factor.
    pub distill_factor: Option<f64>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn vocab(&self) -> Result<LabelVocab, Failure> {
        match (&self.labels, self.task) {
            (Some(names), TaskKind::Tagging) => Ok(LabelVocab::iob2(names)?),
            (Some(names), TaskKind::Pair) => Ok(LabelVocab::sentence(names)?),
            (None, TaskKind::Tagging) => Ok(tag_vocab()),
            (None, TaskKind::Pair) => Ok(pair_vocab()),
        }
    }

    /// Resolves every relative path against `base`.
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.data;
        for p in [&mut d.source_train, &mut d.target_train, &mut d.target_dev, &mut d.target_test, &mut d.input]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        d.lm_corpus.iter_mut().for_each(fix);
        self.lm.path.iter_mut().for_each(fix);
        self.models.iter_mut().for_each(fix);
    }
}

/// Reads the JSON config, applies `key.path=value` overrides and the seed
/// flag, and resolves relative paths. A value that parses as JSON is used
/// as such, anything else as a string.
pub fn load_config(path: &Path, sets: &[String], seed: Option<u64>) -> Result<(RunConfig, u64), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
    let mut keys = Vec::new();
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("override {s:?} is not key=value")))?;
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, key, v)?;
        keys.push(key);
    }
    if let Some(seed) = seed {
        set_path(&mut value, "seed", seed.into())?;
    }
    let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| Failure::Usage(format!("config: {e}")))?;
    let echoed = serde_json::to_value(&cfg).expect("config serializes");
    for key in keys {
        if lookup(&echoed, key).is_none() {
            return Err(Failure::Usage(format!("unknown config key {key:?}")));
        }
    }
    let seed = cfg
        .seed
        .ok_or_else(|| Failure::Usage("no seed: pass --seed or set \"seed\" in the config".into()))?;
    cfg.coteach.seed = seed;
    if let Some(s) = cfg.synth.as_mut() {
        s.seed = seed;
    }
    cfg.rebase(path.parent().unwrap_or(Path::new("")));
    Ok((cfg, seed))
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<(), Failure> {
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Failure::Usage(format!("bad override key {key:?}")));
        }
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Failure::Usage(format!("override {key:?} descends into a non-object")))?;
        if parts.peek().is_none() {
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        node = obj.entry(part).or_insert(Value::Null);
    }
    Ok(())
}

fn lookup<'a>(root: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(root, |node, part| node.get(part))
}
