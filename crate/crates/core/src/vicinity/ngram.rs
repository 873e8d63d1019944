//! Bidirectional n-gram stand-in for a masked language model.
//!
//! For a masked slot the left and right contexts of every length `1..order`
//! are looked up; counts of the slot token are summed per side and the
//! unnormalised score is `(c_left + lambda) * (c_right + lambda)`. Contexts
//! never seen in the corpus therefore give a uniform distribution.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MaskedLM;
use crate::error::{Error, Result};

pub const UNK: &str = "<unk>";
const BOS: u32 = u32::MAX - 1;
const EOS: u32 = u32::MAX;

type Table = HashMap<Vec<u32>, HashMap<u32, u32>>;

#[derive(Clone, Debug)]
pub struct NGramMaskedLM {
    order: usize,
    lambda: f64,
    /// Sorted lexicographically, so id order is token order.
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    unk: u32,
    left: Table,
    right: Table,
}

pub fn fit_ngram_lm(corpus: &[Vec<String>], order: usize, lambda: f64) -> Result<NGramMaskedLM> {
    if order < 2 {
        return Err(Error::config(format!(
            "n-gram order must be >= 2, got {order}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!(
            "smoothing constant must be > 0, got {lambda}"
        )));
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let mut vocab: Vec<String> = corpus.iter().flatten().cloned().collect();
    vocab.push(UNK.to_string());
    vocab.sort();
    vocab.dedup();
    let index: HashMap<String, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    let unk = index[UNK];
    let mut left: Table = HashMap::new();
    let mut right: Table = HashMap::new();
    for sent in corpus {
        let ids: Vec<u32> = sent.iter().map(|t| index[t]).collect();
        for (i, &w) in ids.iter().enumerate() {
            for n in 1..order {
                *left
                    .entry(left_context(&ids, i, n))
                    .or_default()
                    .entry(w)
                    .or_default() += 1;
                *right
                    .entry(right_context(&ids, i, n))
                    .or_default()
                    .entry(w)
                    .or_default() += 1;
            }
        }
    }
    Ok(NGramMaskedLM {
        order,
        lambda,
        vocab,
        index,
        unk,
        left,
        right,
    })
}

fn left_context(ids: &[u32], pos: usize, n: usize) -> Vec<u32> {
    (0..n)
        .rev()
        .map(|k| if pos > k { ids[pos - k - 1] } else { BOS })
        .collect()
}

fn right_context(ids: &[u32], pos: usize, n: usize) -> Vec<u32> {
    (0..n)
        .map(|k| ids.get(pos + k + 1).copied().unwrap_or(EOS))
        .collect()
}

impl NGramMaskedLM {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn id(&self, tok: &str) -> u32 {
        self.index.get(tok).copied().unwrap_or(self.unk)
    }

    /// Summed counts per candidate id, `(left, right)`.
    fn candidate_counts(&self, tokens: &[String], pos: usize) -> BTreeMap<u32, (u32, u32)> {
        let ids: Vec<u32> = tokens.iter().map(|t| self.id(t)).collect();
        let mut counts: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
        for n in 1..self.order {
            if let Some(m) = self.left.get(&left_context(&ids, pos, n)) {
                for (&w, &c) in m {
                    counts.entry(w).or_default().0 += c;
                }
            }
            if let Some(m) = self.right.get(&right_context(&ids, pos, n)) {
                for (&w, &c) in m {
                    counts.entry(w).or_default().1 += c;
                }
            }
        }
        counts
    }

    /// Candidate scores sorted by score descending then token order, plus the
    /// normaliser over the whole vocabulary.
    fn ranked(&self, tokens: &[String], pos: usize) -> Result<(Vec<(u32, f64)>, f64)> {
        if pos >= tokens.len() {
            return Err(Error::IndexOutOfRange {
                pos,
                len: tokens.len(),
            });
        }
        let l = self.lambda;
        let mut scored: Vec<(u32, f64)> = self
            .candidate_counts(tokens, pos)
            .into_iter()
            .map(|(w, (cl, cr))| (w, (cl as f64 + l) * (cr as f64 + l)))
            .collect();
        let rest = (self.vocab.len() - scored.len()) as f64 * l * l;
        let z = scored.iter().map(|(_, s)| s).sum::<f64>() + rest;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok((scored, z))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let sorted = |t: &Table| {
            let mut rows: Vec<(Vec<u32>, Vec<(u32, u32)>)> = t
                .iter()
                .map(|(k, m)| {
                    let mut v: Vec<(u32, u32)> = m.iter().map(|(&a, &b)| (a, b)).collect();
                    v.sort_unstable();
                    (k.clone(), v)
                })
                .collect();
            rows.sort();
            rows
        };
        let stored = StoredLm {
            format: FORMAT.to_string(),
            version: LM_VERSION,
            order: self.order,
            lambda: self.lambda,
            vocab: self.vocab.clone(),
            left: sorted(&self.left),
            right: sorted(&self.right),
        };
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        serde_json::to_writer(&mut out, &stored).map_err(|e| Error::io(path, e.into()))?;
        out.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let stored: StoredLm =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::BadCheckpoint {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        if stored.format != FORMAT || stored.version != LM_VERSION {
            return Err(Error::BadCheckpoint {
                path: path.to_path_buf(),
                reason: "not a version-1 n-gram LM file".into(),
            });
        }
        let index: HashMap<String, u32> = stored
            .vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let unk = *index.get(UNK).ok_or_else(|| Error::BadCheckpoint {
            path: path.to_path_buf(),
            reason: "vocabulary lacks the unknown symbol".into(),
        })?;
        let table = |rows: Vec<(Vec<u32>, Vec<(u32, u32)>)>| -> Table {
            rows.into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect()
        };
        Ok(NGramMaskedLM {
            order: stored.order,
            lambda: stored.lambda,
            vocab: stored.vocab,
            index,
            unk,
            left: table(stored.left),
            right: table(stored.right),
        })
    }

    /// Count of `token` directly after `left` and before `right` contexts,
    /// for inspection and tests.
    pub fn context_count(&self, left: &[&str], token: &str, right: &[&str]) -> (u32, u32) {
        let w = self.id(token);
        let l: Vec<u32> = left.iter().map(|t| self.id(t)).collect();
        let r: Vec<u32> = right.iter().map(|t| self.id(t)).collect();
        let get = |t: &Table, k: &Vec<u32>| t.get(k).and_then(|m| m.get(&w)).copied().unwrap_or(0);
        (get(&self.left, &l), get(&self.right, &r))
    }
}

impl PartialEq for NGramMaskedLM {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
            && self.lambda == other.lambda
            && self.vocab == other.vocab
            && self.left == other.left
            && self.right == other.right
    }
}

const FORMAT: &str = "multimix-ngram-lm";
const LM_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StoredLm {
    format: String,
    version: u32,
    order: usize,
    lambda: f64,
    vocab: Vec<String>,
    left: Vec<(Vec<u32>, Vec<(u32, u32)>)>,
    right: Vec<(Vec<u32>, Vec<(u32, u32)>)>,
}

impl MaskedLM for NGramMaskedLM {
    fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn unknown_token(&self) -> &str {
        UNK
    }

    fn predict_distribution(&self, tokens: &[String], pos: usize) -> Result<Vec<f64>> {
        let (scored, z) = self.ranked(tokens, pos)?;
        let base = self.lambda * self.lambda / z;
        let mut dist = vec![base; self.vocab.len()];
        for (w, s) in scored {
            dist[w as usize] = s / z;
        }
        Ok(dist)
    }

    fn top_candidates(
        &self,
        tokens: &[String],
        pos: usize,
        s: usize,
    ) -> Result<Vec<(String, f64)>> {
        let (scored, z) = self.ranked(tokens, pos)?;
        let mut out: Vec<(String, f64)> = scored
            .iter()
            .take(s)
            .map(|&(w, sc)| (self.vocab[w as usize].clone(), sc / z))
            .collect();
        if out.len() < s {
            // Remaining slots go to unseen tokens, all tied at the smoothing mass.
            let seen: std::collections::HashSet<u32> = scored.iter().map(|&(w, _)| w).collect();
            let base = self.lambda * self.lambda / z;
            out.extend(
                (0..self.vocab.len() as u32)
                    .filter(|w| !seen.contains(w))
                    .take(s - out.len())
                    .map(|w| (self.vocab[w as usize].clone(), base)),
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn counts_single_sentence() {
        let lm = fit_ngram_lm(&[toks("a b c")], 2, 0.1).unwrap();
        assert_eq!(lm.context_count(&["a"], "b", &["c"]), (1, 1));
        assert_eq!(lm.vocab(), &["<unk>", "a", "b", "c"]);
        let top = lm.top_candidates(&toks("a x c"), 1, 1).unwrap();
        assert_eq!(top[0].0, "b");
    }

    #[test]
    fn refit_is_identical() {
        let corpus = vec![toks("a b c d"), toks("b c a")];
        assert_eq!(
            fit_ngram_lm(&corpus, 3, 0.1).unwrap(),
            fit_ngram_lm(&corpus, 3, 0.1).unwrap()
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(fit_ngram_lm(&[], 3, 0.1), Err(Error::EmptyCorpus)));
        assert!(matches!(
            fit_ngram_lm(&[vec![]], 3, 0.1),
            Err(Error::EmptyCorpus)
        ));
        assert!(fit_ngram_lm(&[toks("a")], 1, 0.1).is_err());
        assert!(fit_ngram_lm(&[toks("a")], 2, 0.0).is_err());
        let lm = fit_ngram_lm(&[toks("a b")], 2, 0.1).unwrap();
        assert!(matches!(
            lm.predict_distribution(&toks("a b"), 2),
            Err(Error::IndexOutOfRange { pos: 2, len: 2 })
        ));
    }

    #[test]
    fn unseen_context_is_uniform() {
        let lm = fit_ngram_lm(&[toks("a b c")], 2, 0.1).unwrap();
        let d = lm.predict_distribution(&toks("q z q"), 1).unwrap();
        let v = lm.vocab().len() as f64;
        assert!(d.iter().all(|p| (p - 1.0 / v).abs() < 1e-15));
        let top = lm.top_candidates(&toks("q z q"), 1, 2).unwrap();
        assert_eq!(top[0].0, "<unk>");
        assert_eq!(top[1].0, "a");
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lm.json");
        let lm = fit_ngram_lm(&[toks("a b c d"), toks("d c b")], 3, 0.1).unwrap();
        lm.save(&p).unwrap();
        assert_eq!(NGramMaskedLM::load(&p).unwrap(), lm);
    }
}
