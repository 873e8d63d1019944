use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use multimix_cli::{cmd_augment, cmd_distill, cmd_eval, cmd_run, cmd_synth, load_config, Failure, RunConfig};

#[derive(Parser)]
#[command(name = "multimix", version, about = "Co-teaching cross-lingual adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warm-up, co-teaching and test evaluation
    Run(Args),
    /// Masked-LM vicinity samples of data.input
    Augment(Args),
    /// Pseudo-label data.input and keep the distilled part
    Distill(Args),
    /// Write the synthetic benchmark
    Synth(Args),
    /// Score checkpoints on data.input
    Eval(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Dot-path override, e.g. coteach.alpha=0.5 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn config(a: &Args) -> Result<RunConfig, Failure> {
    load_config(&a.config, &a.sets, a.seed).map(|(cfg, _)| cfg)
}

fn execute(command: Command) -> Result<String, Failure> {
    Ok(match command {
        Command::Run(a) => {
            let t = cmd_run(&config(&a)?, &a.out)?.test;
            format!(
                "{}: warm-up {:.4} ± {:.4}, multimix {:.4} ± {:.4}",
                t.metric, t.warmup.mean, t.warmup.std, t.multimix.mean, t.multimix.std
            )
        }
        Command::Augment(a) => format!("{} vicinity samples", cmd_augment(&config(&a)?, &a.out)?),
        Command::Distill(a) => {
            let (kept, total) = cmd_distill(&config(&a)?, &a.out)?;
            format!("kept {kept} of {total}")
        }
        Command::Synth(a) => format!("{} splits", cmd_synth(&config(&a)?, &a.out)?.splits().len()),
        Command::Eval(a) => {
            let m = cmd_eval(&config(&a)?, &a.out)?;
            format!("{}: {:.4} ± {:.4}", m.metric, m.scores.mean, m.scores.std)
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
