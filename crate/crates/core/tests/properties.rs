use std::collections::HashSet;

use multimix::data::{read_jsonl, subsample, write_jsonl, LabelVocab, LabeledDataset, Sample};
use multimix::distill::{
    agreement, distil, distil_clustering, distil_confidence, gmm_fit, DistillMethod, GmmConfig,
    PseudoLabeled, PseudoLabeledSet,
};
use multimix::models::{confidence_from_distributions, loss_conf_penalty, softmax};
use multimix::sampling::mixture_weights;
use multimix::vicinity::{fit_ngram_lm, successive_cross, successive_max, GenConfig, MaskedLM};
use proptest::prelude::*;

const TAGS: [&str; 5] = ["O", "B-PER", "I-PER", "B-LOC", "I-LOC"];

fn tag_vocab() -> LabelVocab {
    LabelVocab::iob2(&TAGS).unwrap()
}

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,6}"
}

fn tagged_dataset() -> impl Strategy<Value = LabeledDataset> {
    prop::collection::vec(prop::collection::vec((word(), 0usize..5), 1..8), 1..12).prop_map(
        |rows| {
            let samples = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    Sample::tagging(format!("s{i}"), r.iter().map(|(w, _)| w.clone()).collect())
                })
                .collect();
            let labels = rows
                .iter()
                .map(|r| r.iter().map(|&(_, l)| l).collect())
                .collect();
            LabeledDataset::new(tag_vocab(), samples, Some(labels)).unwrap()
        },
    )
}

fn pool() -> impl Strategy<Value = PseudoLabeledSet> {
    prop::collection::vec((0.34f64..1.0, 0usize..3), 2..60).prop_map(|rows| {
        let entries = rows
            .into_iter()
            .enumerate()
            .map(|(i, (c, l))| PseudoLabeled {
                sample: Sample::pair(format!("p{i}"), vec!["a".into()], vec!["b".into()]),
                labels: vec![l],
                confidence: c,
                loss: -c.ln(),
            })
            .collect();
        PseudoLabeledSet::new(LabelVocab::sentence(&["x", "y", "z"]).unwrap(), entries)
    })
}

proptest! {
    #[test]
    fn jsonl_round_trip(d in tagged_dataset()) {
        let mut buf = Vec::new();
        write_jsonl(&d, &mut buf).unwrap();
        let back = read_jsonl(buf.as_slice(), &tag_vocab()).unwrap();
        prop_assert_eq!(&back, &d);
        let mut again = Vec::new();
        write_jsonl(&back, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn subsample_is_a_ceil_sized_subset(d in tagged_dataset(), p in 1.0f64..100.0, seed in any::<u64>()) {
        let s = subsample(&d, p, seed).unwrap();
        prop_assert_eq!(s.len(), ((p * d.len() as f64) / 100.0).ceil() as usize);
        let ids: HashSet<&str> = d.samples().iter().map(|x| x.id.as_str()).collect();
        prop_assert!(s.samples().iter().all(|x| ids.contains(x.id.as_str())));
        prop_assert_eq!(subsample(&d, 100.0, seed).unwrap(), d);
    }

    #[test]
    fn softmax_is_a_distribution(z in prop::collection::vec(-50.0f64..50.0, 2..10)) {
        let p = softmax(&z);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let c = confidence_from_distributions(std::slice::from_ref(&p));
        prop_assert!(c >= 1.0 / p.len() as f64 - 1e-12 && c <= 1.0);
    }

    #[test]
    fn zero_beta_is_cross_entropy(z in prop::collection::vec(-5.0f64..5.0, 2..8), t in 0usize..8) {
        let p = softmax(&z);
        let t = t % p.len();
        prop_assert_eq!(loss_conf_penalty(&p, t, 0.0).unwrap(), -p[t].ln());
    }

    #[test]
    fn mixture_weights_normalise_and_upweight_small_sets(
        sizes in prop::collection::vec(1usize..1000, 2..5),
        alpha in 0.0f64..1.0,
        scale in 2usize..7,
    ) {
        let p = mixture_weights(&sizes, alpha).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let scaled: Vec<usize> = sizes.iter().map(|n| n * scale).collect();
        let q = mixture_weights(&scaled, alpha).unwrap();
        prop_assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-12));
        let total: usize = sizes.iter().sum();
        for i in 0..sizes.len() {
            for j in 0..sizes.len() {
                if sizes[i] < sizes[j] {
                    let fi = sizes[i] as f64 / total as f64;
                    let fj = sizes[j] as f64 / total as f64;
                    prop_assert!(p[i] / fi > p[j] / fj);
                }
            }
        }
    }

    #[test]
    fn gmm_fit_invariants(xs in prop::collection::vec(0.0f64..5.0, 2..80)) {
        let cfg = GmmConfig::default();
        let g = gmm_fit(&xs, &cfg).unwrap();
        prop_assert!(g.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        prop_assert!((g.weights[0] + g.weights[1] - 1.0).abs() < 1e-12);
        prop_assert!(g.variances.iter().all(|&v| v >= cfg.var_floor));
        for &x in &xs {
            let r = g.responsibilities(x);
            prop_assert!((r[0] + r[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn confidence_distillation_is_ceil_sized_and_downward_closed(set in pool(), eta in 1.0f64..100.0) {
        let kept = distil_confidence(&set, eta).unwrap();
        prop_assert_eq!(kept.len(), ((eta * set.len() as f64) / 100.0).ceil() as usize);
        let ids: HashSet<&str> = kept.ids().into_iter().collect();
        let min_kept = kept.entries().iter().map(|e| e.confidence).fold(f64::INFINITY, f64::min);
        for e in set.entries() {
            if !ids.contains(e.sample.id.as_str()) {
                prop_assert!(e.confidence <= min_kept);
            }
        }
    }

    #[test]
    fn no_filtering_endpoints_and_idempotent_agreement(set in pool()) {
        let gmm = GmmConfig::default();
        prop_assert_eq!(&distil(&set, DistillMethod::Confidence, 100.0, &gmm).unwrap(), &set);
        let fitted = gmm_fit(&set.losses(), &gmm).unwrap();
        prop_assert_eq!(&distil_clustering(&set, &fitted, 0.0), &set);
        prop_assert_eq!(&agreement(&set, &set).unwrap(), &set);
    }

    #[test]
    fn generation_keeps_length_and_unmasked_tokens(
        corpus in prop::collection::vec(prop::collection::vec("[a-e]", 1..9), 1..10),
        seed in any::<u64>(),
        percent in 1.0f64..100.0,
    ) {
        let lm = fit_ngram_lm(&corpus, 3, 0.1).unwrap();
        let cfg = GenConfig { mask_percent: percent, delta: 2, seed, ..GenConfig::default() };
        for (i, toks) in corpus.iter().enumerate() {
            let s = Sample::tagging(format!("c{i}"), toks.clone());
            let out = successive_max(&lm, &s, &cfg).unwrap();
            prop_assert_eq!(out.len(), 2);
            let masked = ((percent * toks.len() as f64) / 100.0).round().clamp(1.0, toks.len() as f64) as usize;
            for v in &out {
                let t = v.parts()[0];
                prop_assert_eq!(t.len(), toks.len());
                prop_assert!(t.iter().zip(toks).filter(|(a, b)| a != b).count() <= masked);
            }
            prop_assert_eq!(successive_max(&lm, &s, &cfg).unwrap(), out);
            prop_assert_eq!(successive_cross(&lm, &s, &cfg).unwrap().len(), cfg.delta_cross.0 * cfg.delta_cross.1);
        }
    }

    #[test]
    fn masked_distributions_are_valid_for_unseen_contexts(
        corpus in prop::collection::vec(prop::collection::vec("[a-e]", 1..6), 1..6),
        probe in prop::collection::vec("[a-z]", 1..6),
        pos in 0usize..6,
    ) {
        let lm = fit_ngram_lm(&corpus, 3, 0.1).unwrap();
        let pos = pos % probe.len();
        let d = lm.predict_distribution(&probe, pos).unwrap();
        prop_assert_eq!(d.len(), lm.vocab().len());
        prop_assert!(d.iter().all(|&p| p >= 0.0));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn training_is_reproducible() {
    use multimix::models::{train_model, FeatureConfig, TokenTaggerModel, TrainConfig};
    use multimix::synth::{gen_tagging_benchmark, SynthConfig};

    let b = gen_tagging_benchmark(&SynthConfig {
        train_size: 60,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        steps: 50,
        ..TrainConfig::default()
    };
    let run = || {
        let mut m = TokenTaggerModel::new(FeatureConfig::default(), b.vocab.len(), 11);
        let log = train_model(&mut m, &b.source_train, &cfg).unwrap();
        (m, log)
    };
    let (a, la) = run();
    let (c, lc) = run();
    assert_eq!(a, c);
    assert_eq!(la, lc);
}
