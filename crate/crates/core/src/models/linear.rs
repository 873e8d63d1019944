//! Hashed sparse linear softmax head shared by the built-in models.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::loss::{conf_penalty_from_logits, softmax};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, rng_from};

/// Feature-extraction settings common to both built-in models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Hash space is `2^hash_bits` buckets.
    pub hash_bits: u32,
    /// Highest n-gram order extracted (1 = unigrams only).
    pub ngram_order: usize,
    /// Token window half-width for the tagger.
    pub window: usize,
    /// Initial weights are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            hash_bits: 15,
            ngram_order: 1,
            window: 2,
            init_scale: 0.01,
        }
    }
}

pub fn hash_feature(name: &str, bits: u32) -> u32 {
    let mask = if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    };
    (fnv1a(name.as_bytes()) as u32) & mask
}

/// One output position: its active feature buckets and its target class.
pub struct Position<'a> {
    pub features: &'a [u32],
    pub target: usize,
}

/// Sparse gradient: per-bucket class gradients.
#[derive(Clone, Debug, Default)]
pub struct Gradient {
    pub weights: BTreeMap<u32, Vec<f64>>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        let w: f64 = self
            .weights
            .values()
            .flat_map(|v| v.iter())
            .map(|g| g * g)
            .sum();
        w.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseLinear {
    classes: usize,
    bits: u32,
    /// Row-major by bucket: `weights[bucket * classes + class]`.
    weights: Vec<f64>,
}

impl SparseLinear {
    pub fn new(classes: usize, bits: u32, init_scale: f64, seed: u64) -> Self {
        let dim = 1usize << bits;
        let mut rng = rng_from(seed);
        let weights = (0..dim * classes)
            .map(|_| {
                if init_scale > 0.0 {
                    rng.gen_range(-init_scale..=init_scale)
                } else {
                    0.0
                }
            })
            .collect();
        SparseLinear {
            classes,
            bits,
            weights,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn weight(&self, bucket: u32, class: usize) -> f64 {
        self.weights[bucket as usize * self.classes + class]
    }

    pub fn weight_mut(&mut self, bucket: u32, class: usize) -> &mut f64 {
        &mut self.weights[bucket as usize * self.classes + class]
    }

    pub fn params_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn logits(&self, features: &[u32]) -> Vec<f64> {
        let mut z = vec![0.0; self.classes];
        for &f in features {
            let row = &self.weights[f as usize * self.classes..(f as usize + 1) * self.classes];
            for (zc, w) in z.iter_mut().zip(row) {
                *zc += w;
            }
        }
        z
    }

    pub fn probs(&self, features: &[u32]) -> Vec<f64> {
        softmax(&self.logits(features))
    }

    /// Mean per-sample loss over `samples`, where a sample's loss is the
    /// mean over its positions.
    pub fn batch_loss(&self, samples: &[Vec<Position<'_>>], beta: f64) -> f64 {
        self.loss_and_gradient(samples, beta).0
    }

    pub fn loss_and_gradient(&self, samples: &[Vec<Position<'_>>], beta: f64) -> (f64, Gradient) {
        let mut grad = Gradient {
            weights: BTreeMap::new(),
        };
        let mut total = 0.0;
        let n = samples.len().max(1) as f64;
        for positions in samples {
            if positions.is_empty() {
                continue;
            }
            let scale = 1.0 / (positions.len() as f64 * n);
            let mut sample_loss = 0.0;
            for pos in positions {
                let (loss, dz) =
                    conf_penalty_from_logits(&self.logits(pos.features), pos.target, beta);
                sample_loss += loss;
                for &f in pos.features {
                    let row = grad
                        .weights
                        .entry(f)
                        .or_insert_with(|| vec![0.0; self.classes]);
                    for (r, d) in row.iter_mut().zip(&dz) {
                        *r += d * scale;
                    }
                }
            }
            total += sample_loss / positions.len() as f64;
        }
        (total / n, grad)
    }

    /// Plain SGD update with optional global-norm clipping.
    pub fn apply(&mut self, grad: &Gradient, learning_rate: f64, clip_norm: Option<f64>) {
        let mut step = learning_rate;
        if let Some(max) = clip_norm {
            let norm = grad.norm();
            if norm > max && norm > 0.0 {
                step *= max / norm;
            }
        }
        for (&f, g) in &grad.weights {
            let base = f as usize * self.classes;
            for (c, gc) in g.iter().enumerate() {
                self.weights[base + c] -= step * gc;
            }
        }
    }
}

const MAGIC: &[u8; 8] = b"MMXMODEL";
const VERSION: u32 = 2;

/// Checkpoint header. Parameter arrays follow it as little-endian f64.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Header {
    pub model_kind: u8,
    pub classes: u32,
    pub bits: u32,
    pub ngram_order: u32,
    pub window: u32,
}

pub(crate) fn write_checkpoint(
    path: &Path,
    header: Header,
    head: &SparseLinear,
    init_scale: f64,
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut buf = Vec::with_capacity(48 + 8 * head.weights.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(header.model_kind);
    for v in [
        header.classes,
        header.bits,
        header.ngram_order,
        header.window,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&init_scale.to_le_bytes());
    for w in &head.weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    out.write_all(&buf).map_err(io)?;
    out.flush().map_err(io)
}

pub(crate) fn read_checkpoint(path: &Path) -> Result<(Header, f64, SparseLinear)> {
    let bad = |reason: &str| Error::BadCheckpoint {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 37 || &bytes[..8] != MAGIC {
        return Err(bad("not a model checkpoint"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    if u32_at(8) != VERSION {
        return Err(bad("unsupported checkpoint version"));
    }
    let header = Header {
        model_kind: bytes[12],
        classes: u32_at(13),
        bits: u32_at(17),
        ngram_order: u32_at(21),
        window: u32_at(25),
    };
    let init_scale = f64::from_le_bytes(bytes[29..37].try_into().unwrap());
    if header.bits > 28 || header.classes < 2 {
        return Err(bad("implausible header"));
    }
    let classes = header.classes as usize;
    let dim = 1usize << header.bits;
    let expected = 37 + 8 * dim * classes;
    if bytes.len() != expected {
        return Err(bad("truncated parameter block"));
    }
    let weights: Vec<f64> = bytes[37..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((
        header,
        init_scale,
        SparseLinear {
            classes,
            bits: header.bits,
            weights,
        },
    ))
}
