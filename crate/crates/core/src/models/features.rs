use std::collections::HashSet;

use super::linear::{hash_feature, FeatureConfig};
use crate::data::{Sample, Text};

const BOS: &str = "<s>";
const EOS: &str = "</s>";

fn padded(tokens: &[String], pad: usize) -> Vec<&str> {
    let mut out = Vec::with_capacity(tokens.len() + 2 * pad);
    out.extend(std::iter::repeat_n(BOS, pad));
    out.extend(tokens.iter().map(String::as_str));
    out.extend(std::iter::repeat_n(EOS, pad));
    out
}

/// Positioned n-grams inside a `±window` span around every token.
pub(crate) fn tagger_features(sample: &Sample, cfg: &FeatureConfig) -> Vec<Vec<u32>> {
    let tokens: Vec<String> = sample.parts().into_iter().flatten().cloned().collect();
    let w = cfg.window;
    let seq = padded(&tokens, w);
    let order = cfg.ngram_order.max(1);
    let mut key = String::new();
    (0..tokens.len())
        .map(|t| {
            let center = t + w;
            let mut feats = Vec::new();
            for n in 1..=order.min(2 * w + 1) {
                for start in (center - w)..=(center + w + 1 - n) {
                    key.clear();
                    key.push_str(&format!("t{n}@{}:", start as isize - center as isize));
                    for (i, tok) in seq[start..start + n].iter().enumerate() {
                        if i > 0 {
                            key.push('|');
                        }
                        key.push_str(tok);
                    }
                    feats.push(hash_feature(&key, cfg.hash_bits));
                }
            }
            feats
        })
        .collect()
}

fn bag_of_ngrams(prefix: &str, tokens: &[String], order: usize, bits: u32, out: &mut Vec<u32>) {
    let seq = padded(tokens, 1);
    for n in 1..=order.max(1) {
        for win in seq.windows(n) {
            if n == 1 && (win[0] == BOS || win[0] == EOS) {
                continue;
            }
            let key = format!("{prefix}{n}:{}", win.join("|"));
            out.push(hash_feature(&key, bits));
        }
    }
}

/// Bag of n-grams per part. Pairs additionally get lexical-overlap features
/// between the second part and the first.
pub(crate) fn sentence_features(sample: &Sample, cfg: &FeatureConfig) -> Vec<u32> {
    let mut feats = Vec::new();
    match &sample.text {
        Text::Tagging(tokens) => {
            bag_of_ngrams("s", tokens, cfg.ngram_order, cfg.hash_bits, &mut feats)
        }
        Text::Pair(a, b) => {
            bag_of_ngrams("a", a, cfg.ngram_order, cfg.hash_bits, &mut feats);
            bag_of_ngrams("b", b, cfg.ngram_order, cfg.hash_bits, &mut feats);
            let in_a: HashSet<&str> = a.iter().map(String::as_str).collect();
            let novel: Vec<&String> = b.iter().filter(|t| !in_a.contains(t.as_str())).collect();
            let covered = b.len() - novel.len();
            let bucket = (5 * covered) / b.len().max(1);
            feats.push(hash_feature(&format!("ovl:{bucket}"), cfg.hash_bits));
            feats.push(hash_feature(
                &format!("novel:{}", novel.len().min(4)),
                cfg.hash_bits,
            ));
            for t in novel {
                feats.push(hash_feature(&format!("bnew:{t}"), cfg.hash_bits));
            }
        }
    }
    feats
}
