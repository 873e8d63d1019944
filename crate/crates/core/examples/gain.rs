//! Warm-up versus co-teaching on the synthetic benchmarks.
//!
//! cargo run --release -p multimix --example gain -- [tagging|pair] [seeds] [phi]

use std::time::Instant;

use multimix::coteach::{run_multimix, CoteachConfig};
use multimix::metrics::{evaluate, mean_std};
use multimix::models::{FeatureConfig, LinearSoftmaxModel, TaskModel, TokenTaggerModel};
use multimix::synth::{gen_pair_benchmark, gen_tagging_benchmark, Benchmark, SynthConfig};
use multimix::vicinity::{corpus_from, fit_ngram_lm};

fn run<M: TaskModel>(
    b: &Benchmark,
    cfg: &CoteachConfig,
    make: impl Fn(u64) -> M + Sync,
) -> (f64, f64) {
    let corpus = corpus_from(&[&b.source_train, &b.target_train]);
    let lm = fit_ngram_lm(&corpus, 3, 0.1).unwrap();
    let out = run_multimix(
        &b.source_train,
        &b.target_train,
        &lm,
        cfg,
        &b.target_dev,
        make,
        None,
    )
    .unwrap();
    let score = |ms: &[M; 3]| {
        mean_std(
            &ms.iter()
                .map(|m| evaluate(m, &b.target_test).unwrap())
                .collect::<Vec<_>>(),
        )
        .mean
    };
    for e in &out.report.epochs {
        let r = &e.rounds[0];
        eprintln!(
            "  epoch {} dev {:?} sizes {:?} mix {}",
            e.epoch, e.dev, r.sizes, r.mix_size
        );
    }
    eprintln!(
        "  selected {:?}",
        out.report
            .selected
            .iter()
            .map(|s| s.epoch)
            .collect::<Vec<_>>()
    );
    (score(&out.warmup), score(&out.selected))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let task = args.get(1).map(String::as_str).unwrap_or("tagging");
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let agreement = args.get(3).map(|s| s != "phi").unwrap_or(true);
    let start = Instant::now();
    let (mut base, mut mm) = (Vec::new(), Vec::new());
    for seed in 0..seeds {
        let synth = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let cfg = CoteachConfig {
            seed,
            agreement,
            ..CoteachConfig::default()
        };
        let feat = FeatureConfig::default();
        let (w, s) = match task {
            "pair" => {
                let b = gen_pair_benchmark(&synth).unwrap();
                run(&b, &cfg, |s| LinearSoftmaxModel::new(feat.clone(), 3, s))
            }
            _ => {
                let b = gen_tagging_benchmark(&synth).unwrap();
                run(&b, &cfg, |s| TokenTaggerModel::new(feat.clone(), 7, s))
            }
        };
        eprintln!(
            "seed {seed}: warm-up {w:.4} multimix {s:.4} ({:.1?})",
            start.elapsed()
        );
        base.push(w);
        mm.push(s);
    }
    let (b, m) = (mean_std(&base).mean, mean_std(&mm).mean);
    println!(
        "{task}: warm-up {b:.4} multimix {m:.4} gain {:+.2} points in {:.1?}",
        100.0 * (m - b),
        start.elapsed()
    );
}
