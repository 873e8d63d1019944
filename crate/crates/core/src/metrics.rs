//! Evaluation: exact-match span micro-F1 for IOB2 tagging, accuracy for
//! sentence classification, and mean ± population std aggregation.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{parse_iob2, Iob2Tag, LabelScheme, LabelVocab, LabeledDataset};
use crate::error::{Error, Result};
use crate::models::{predict_labels, TaskModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `(start, end_exclusive, type)`
type Span<'a> = (usize, usize, &'a str);

/// Spans of one sequence. With `strict`, an `I-X` that does not continue an
/// `X` span is an error; otherwise it opens a new span.
fn spans<'a>(
    vocab: &'a LabelVocab,
    labels: &[usize],
    strict: bool,
    id: &str,
) -> Result<Vec<Span<'a>>> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, &l) in labels.iter().enumerate() {
        if l >= vocab.len() {
            return Err(Error::UnknownLabel {
                id: id.to_string(),
                name: format!("#{l}"),
            });
        }
        let tag = parse_iob2(vocab.name(l))
            .ok_or_else(|| Error::SchemeViolation(vocab.name(l).to_string()))?;
        match tag {
            Iob2Tag::Outside => {
                if let Some((s, t)) = open.take() {
                    out.push((s, i, t));
                }
            }
            Iob2Tag::Begin(t) => {
                if let Some((s, pt)) = open.take() {
                    out.push((s, i, pt));
                }
                open = Some((i, t));
            }
            Iob2Tag::Inside(t) => match open {
                Some((_, pt)) if pt == t => {}
                _ => {
                    if strict {
                        return Err(Error::SchemeViolation(format!(
                            "{id}: I-{t} at position {i} does not continue a {t} span"
                        )));
                    }
                    if let Some((s, pt)) = open.take() {
                        out.push((s, i, pt));
                    }
                    open = Some((i, t));
                }
            },
        }
    }
    if let Some((s, t)) = open {
        out.push((s, labels.len(), t));
    }
    Ok(out)
}

/// Micro-averaged exact span match. Both sides empty counts as perfect.
pub fn micro_f1(gold: &LabeledDataset, pred: &[Vec<usize>]) -> Result<Prf> {
    if gold.vocab().scheme() != LabelScheme::Iob2 {
        return Err(Error::SchemeViolation(
            "micro-F1 needs an IOB2 vocabulary".into(),
        ));
    }
    let labels = gold.labels().ok_or(Error::UnlabeledData)?;
    if labels.len() != pred.len() {
        return Err(Error::LengthMismatch(labels.len(), pred.len()));
    }
    let vocab = gold.vocab();
    let (mut n_gold, mut n_pred, mut hits) = (0usize, 0usize, 0usize);
    for ((g, p), s) in labels.iter().zip(pred).zip(gold.samples()) {
        if g.len() != p.len() {
            return Err(Error::LengthMismatch(g.len(), p.len()));
        }
        let gs = spans(vocab, g, true, &s.id)?;
        let ps = spans(vocab, p, false, &s.id)?;
        let set: HashSet<&Span> = gs.iter().collect();
        hits += ps.iter().filter(|sp| set.contains(sp)).count();
        n_gold += gs.len();
        n_pred += ps.len();
    }
    if n_gold == 0 && n_pred == 0 {
        return Ok(Prf {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        });
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(hits, n_pred);
    let recall = ratio(hits, n_gold);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision,
        recall,
        f1,
    })
}

pub fn accuracy(gold: &[usize], pred: &[usize]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch(gold.len(), pred.len()));
    }
    if gold.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(gold.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / gold.len() as f64)
}

/// Micro-F1 for IOB2 datasets, accuracy otherwise.
pub fn evaluate<M: TaskModel>(model: &M, data: &LabeledDataset) -> Result<f64> {
    let labels = data.labels().ok_or(Error::UnlabeledData)?;
    let pred: Vec<Vec<usize>> = data
        .samples()
        .iter()
        .map(|s| predict_labels(model, s))
        .collect();
    match data.vocab().scheme() {
        LabelScheme::Iob2 => Ok(micro_f1(data, &pred)?.f1),
        LabelScheme::Sentence => {
            let g: Vec<usize> = labels.iter().map(|l| l[0]).collect();
            let p: Vec<usize> = pred.iter().map(|l| l[0]).collect();
            accuracy(&g, &p)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> MeanStd {
    if xs.is_empty() {
        return MeanStd {
            mean: f64::NAN,
            std: f64::NAN,
        };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}
