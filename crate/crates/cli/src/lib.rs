//! Experiment harness for multimix: JSON run configs, the `run`, `augment`,
//! `distill`, `synth` and `eval` commands, and their output files.

pub mod commands;
pub mod config;

use std::fmt;

pub use commands::{
    cmd_augment, cmd_distill, cmd_eval, cmd_run, cmd_synth, load_run_data, run_experiment, EvalMetrics, ModelScores,
    Report, RunData, TestMetrics,
};
pub use config::{load_config, DataPaths, LmConfig, RunConfig, TaskKind};
pub use multimix::metrics::{accuracy, mean_std, micro_f1, MeanStd, Prf};

/// Usage errors exit with 1, module errors with 2.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(multimix::Error),
}

impl From<multimix::Error> for Failure {
    fn from(e: multimix::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for Failure {}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    /// Error variant name, e.g. `EmptyDataset`, or `Usage`.
    pub fn kind(&self) -> String {
        match self {
            Failure::Usage(_) => "Usage".into(),
            Failure::Runtime(e) => {
                let dbg = format!("{e:?}");
                dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
            }
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
