//! Vicinity sampling: virtual sentences generated around an original sample
//! by masking a fraction of its tokens and infilling them one at a time with
//! a masked language model.

mod ngram;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use ngram::{fit_ngram_lm, NGramMaskedLM, UNK};

use crate::data::{LabeledDataset, Sample, Text};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, derive_seed_str, rng_from, Rng};

pub trait MaskedLM: Send + Sync {
    fn vocab(&self) -> &[String];

    fn unknown_token(&self) -> &str;

    /// Distribution over [`vocab`](MaskedLM::vocab) for the slot at `pos`;
    /// the token currently at `pos` is treated as masked.
    fn predict_distribution(&self, tokens: &[String], pos: usize) -> Result<Vec<f64>>;

    /// The `s` most probable tokens, probability-descending, ties broken by
    /// token order.
    fn top_candidates(
        &self,
        tokens: &[String],
        pos: usize,
        s: usize,
    ) -> Result<Vec<(String, f64)>> {
        let dist = self.predict_distribution(tokens, pos)?;
        let mut idx: Vec<usize> = (0..dist.len()).collect();
        let vocab = self.vocab();
        idx.sort_by(|&a, &b| {
            dist[b]
                .total_cmp(&dist[a])
                .then_with(|| vocab[a].cmp(&vocab[b]))
        });
        Ok(idx
            .into_iter()
            .take(s)
            .map(|i| (vocab[i].clone(), dist[i]))
            .collect())
    }
}

pub fn predict_masked<L: MaskedLM + ?Sized>(
    lm: &L,
    tokens: &[String],
    pos: usize,
    s: usize,
) -> Result<Vec<(String, f64)>> {
    lm.top_candidates(tokens, pos, s)
}

/// Every token list in the datasets (both parts of pair samples).
pub fn corpus_from(datasets: &[&LabeledDataset]) -> Vec<Vec<String>> {
    datasets
        .iter()
        .flat_map(|d| d.samples())
        .flat_map(|s| s.parts().into_iter().map(<[String]>::to_vec))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    #[default]
    Max,
    Cross,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Percentage of tokens masked per variant.
    pub mask_percent: f64,
    pub mode: GenMode,
    /// Variants per sample in `Max` mode.
    pub delta: usize,
    /// Variants of the first and second part in `Cross` mode.
    pub delta_cross: (usize, usize),
    /// Candidates per mask; the replacement is drawn uniformly from the top
    /// `candidates` (1 means argmax).
    pub candidates: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            mask_percent: 30.0,
            mode: GenMode::Max,
            delta: 3,
            delta_cross: (2, 2),
            candidates: 1,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_percent > 0.0 && self.mask_percent <= 100.0) {
            return Err(Error::config("mask percent must be in (0, 100]"));
        }
        if self.delta == 0 || self.delta_cross.0 == 0 || self.delta_cross.1 == 0 {
            return Err(Error::config("diversification factors must be >= 1"));
        }
        if self.candidates == 0 {
            return Err(Error::config("candidates per mask must be >= 1"));
        }
        Ok(())
    }

    pub fn variants_per_sample(&self) -> usize {
        match self.mode {
            GenMode::Max => self.delta,
            GenMode::Cross => self.delta_cross.0 * self.delta_cross.1,
        }
    }
}

/// `max(1, round(P * T / 100))`, rounding halves up, capped at `T`.
pub fn mask_count(len: usize, percent: f64) -> usize {
    if len == 0 {
        return 0;
    }
    ((percent * len as f64 / 100.0).round() as usize).clamp(1, len)
}

/// Distinct positions in `0..len`, ascending.
pub fn mask_positions(len: usize, percent: f64, rng: &mut Rng) -> Vec<usize> {
    let m = mask_count(len, percent);
    let mut idx = rand::seq::index::sample(rng, len, m).into_vec();
    idx.sort_unstable();
    idx
}

/// Replaces `positions` of `tokens` left to right, each prediction seeing the
/// replacements already made.
fn fill_successively<L: MaskedLM + ?Sized>(
    lm: &L,
    tokens: &mut [String],
    positions: &[usize],
    candidates: usize,
    rng: &mut Rng,
) -> Result<()> {
    for &pos in positions {
        let top = lm.top_candidates(tokens, pos, candidates)?;
        let pick = if candidates == 1 {
            top.into_iter().next()
        } else {
            top.choose(rng).cloned()
        };
        if let Some((tok, _)) = pick {
            tokens[pos] = tok;
        }
    }
    Ok(())
}

/// `count` variants of `tokens[range]`, each from a fresh mask set drawn
/// inside the range; the whole sequence is the LM context.
fn part_variants<L: MaskedLM + ?Sized>(
    lm: &L,
    tokens: &[String],
    range: std::ops::Range<usize>,
    count: usize,
    cfg: &GenConfig,
    rng: &mut Rng,
) -> Result<Vec<Vec<String>>> {
    (0..count)
        .map(|_| {
            if range.is_empty() {
                return Ok(Vec::new());
            }
            let positions: Vec<usize> = mask_positions(range.len(), cfg.mask_percent, rng)
                .into_iter()
                .map(|p| p + range.start)
                .collect();
            let mut work = tokens.to_vec();
            fill_successively(lm, &mut work, &positions, cfg.candidates, rng)?;
            Ok(work[range.clone()].to_vec())
        })
        .collect()
}

fn virtual_sample(original: &Sample, suffix: String, text: Text) -> Sample {
    Sample {
        id: format!("{}#{suffix}", original.id),
        text,
        origin_id: Some(original.id.clone()),
    }
}

/// `delta` variants, each masking `P%` of the sample's tokens afresh and
/// infilling them with the LM argmax (or a top-S draw) left to right.
pub fn successive_max<L: MaskedLM + ?Sized>(
    lm: &L,
    sample: &Sample,
    cfg: &GenConfig,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let mut rng = rng_from(derive_seed_str(cfg.seed, &sample.id));
    (0..cfg.delta)
        .map(|v| {
            let text = match &sample.text {
                Text::Tagging(tokens) => {
                    let positions = mask_positions(tokens.len(), cfg.mask_percent, &mut rng);
                    let mut work = tokens.clone();
                    fill_successively(lm, &mut work, &positions, cfg.candidates, &mut rng)?;
                    Text::Tagging(work)
                }
                Text::Pair(a, b) => {
                    // Mask over the concatenation; each part is its own LM context.
                    let positions = mask_positions(a.len() + b.len(), cfg.mask_percent, &mut rng);
                    let (pa, pb): (Vec<usize>, Vec<usize>) =
                        positions.into_iter().partition(|&p| p < a.len());
                    let pb: Vec<usize> = pb.into_iter().map(|p| p - a.len()).collect();
                    let mut wa = a.clone();
                    let mut wb = b.clone();
                    fill_successively(lm, &mut wa, &pa, cfg.candidates, &mut rng)?;
                    fill_successively(lm, &mut wb, &pb, cfg.candidates, &mut rng)?;
                    Text::Pair(wa, wb)
                }
            };
            Ok(virtual_sample(sample, format!("m{v}"), text))
        })
        .collect()
}

/// Splits the sample in two (premise/hypothesis for pairs, at `T/2` for
/// tagging), makes `delta1` and `delta2` successive-max variants of the two
/// parts and returns all `delta1 * delta2` recombinations.
pub fn successive_cross<L: MaskedLM + ?Sized>(
    lm: &L,
    sample: &Sample,
    cfg: &GenConfig,
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let base = derive_seed_str(cfg.seed, &sample.id);
    let mut rng_a = rng_from(derive_seed(base, &[1]));
    let mut rng_b = rng_from(derive_seed(base, &[2]));
    let (d1, d2) = cfg.delta_cross;
    let (first, second) = match &sample.text {
        Text::Tagging(tokens) => {
            let h = tokens.len() / 2;
            (
                part_variants(lm, tokens, 0..h, d1, cfg, &mut rng_a)?,
                part_variants(lm, tokens, h..tokens.len(), d2, cfg, &mut rng_b)?,
            )
        }
        Text::Pair(a, b) => (
            part_variants(lm, a, 0..a.len(), d1, cfg, &mut rng_a)?,
            part_variants(lm, b, 0..b.len(), d2, cfg, &mut rng_b)?,
        ),
    };
    let mut out = Vec::with_capacity(d1 * d2);
    for (i, pa) in first.iter().enumerate() {
        for (j, pb) in second.iter().enumerate() {
            let text = match &sample.text {
                Text::Tagging(_) => Text::Tagging(pa.iter().chain(pb).cloned().collect()),
                Text::Pair(..) => Text::Pair(pa.clone(), pb.clone()),
            };
            out.push(virtual_sample(sample, format!("x{i}.{j}"), text));
        }
    }
    Ok(out)
}

/// Generates virtual samples for every member of `data`. The result is
/// unlabeled; each sample's `origin_id` names its original.
pub fn gen_lm<L: MaskedLM + ?Sized>(
    data: &LabeledDataset,
    lm: &L,
    cfg: &GenConfig,
) -> Result<LabeledDataset> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let mut out = Vec::with_capacity(data.len() * cfg.variants_per_sample());
    for s in data.samples() {
        let variants = match cfg.mode {
            GenMode::Max => successive_max(lm, s, cfg)?,
            GenMode::Cross => successive_cross(lm, s, cfg)?,
        };
        out.extend(variants);
    }
    LabeledDataset::unlabeled(data.vocab().clone(), out)
}
