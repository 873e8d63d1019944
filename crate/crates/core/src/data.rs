//! Samples, label vocabularies, labeled/unlabeled datasets and their JSONL form.
//!
//! One JSON object per line with the fields `id`, `kind` (`"tagging"` or
//! `"pair"`), `tokens` (tagging) or `part_a`/`part_b` (pair), optional
//! `labels` (a list of tag names for tagging, a single class name for pair)
//! and optional `origin_id` linking a generated sample to its source.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{ceil_percent, rng_from};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Tagging,
    Pair,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Text {
    Tagging(Vec<String>),
    Pair(Vec<String>, Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub text: Text,
    pub origin_id: Option<String>,
}

impl Sample {
    pub fn tagging(id: impl Into<String>, tokens: Vec<String>) -> Self {
        Sample {
            id: id.into(),
            text: Text::Tagging(tokens),
            origin_id: None,
        }
    }

    pub fn pair(id: impl Into<String>, part_a: Vec<String>, part_b: Vec<String>) -> Self {
        Sample {
            id: id.into(),
            text: Text::Pair(part_a, part_b),
            origin_id: None,
        }
    }

    pub fn kind(&self) -> SampleKind {
        match self.text {
            Text::Tagging(_) => SampleKind::Tagging,
            Text::Pair(..) => SampleKind::Pair,
        }
    }

    /// Total number of tokens across all parts.
    pub fn len(&self) -> usize {
        self.parts().iter().map(|p| p.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The token lists making up this sample: one for tagging, two for pair.
    pub fn parts(&self) -> Vec<&[String]> {
        match &self.text {
            Text::Tagging(t) => vec![t.as_slice()],
            Text::Pair(a, b) => vec![a.as_slice(), b.as_slice()],
        }
    }

    /// Number of label indices a labeled copy of this sample carries.
    pub fn label_len(&self) -> usize {
        match &self.text {
            Text::Tagging(t) => t.len(),
            Text::Pair(..) => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidSample {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        for part in self.parts() {
            if part.is_empty() {
                return Err(invalid("empty token list"));
            }
            for tok in part {
                if tok.is_empty() {
                    return Err(invalid("empty token"));
                }
                if tok.chars().any(char::is_whitespace) {
                    return Err(invalid("token contains whitespace"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelScheme {
    Iob2,
    Sentence,
}

/// Parsed form of an IOB2 tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Iob2Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

pub fn parse_iob2(name: &str) -> Option<Iob2Tag<'_>> {
    if name == "O" {
        return Some(Iob2Tag::Outside);
    }
    let (prefix, ty) = name.split_once('-')?;
    if ty.is_empty() {
        return None;
    }
    match prefix {
        "B" => Some(Iob2Tag::Begin(ty)),
        "I" => Some(Iob2Tag::Inside(ty)),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocab {
    names: Vec<String>,
    scheme: LabelScheme,
}

impl LabelVocab {
    pub fn new(names: Vec<String>, scheme: LabelScheme) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::InvalidVocab(format!(
                "need at least 2 classes, got {}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidVocab(format!("duplicate class {n:?}")));
            }
        }
        if scheme == LabelScheme::Iob2 {
            let mut begins = HashSet::new();
            let mut insides = HashSet::new();
            let mut outside = false;
            for n in &names {
                match parse_iob2(n) {
                    Some(Iob2Tag::Outside) => outside = true,
                    Some(Iob2Tag::Begin(t)) => {
                        begins.insert(t);
                    }
                    Some(Iob2Tag::Inside(t)) => {
                        insides.insert(t);
                    }
                    None => return Err(Error::InvalidVocab(format!("{n:?} is not an IOB2 tag"))),
                }
            }
            if !outside {
                return Err(Error::InvalidVocab("IOB2 vocabulary lacks O".into()));
            }
            if begins != insides {
                return Err(Error::InvalidVocab(
                    "every entity type needs both B- and I- tags".into(),
                ));
            }
        }
        Ok(LabelVocab { names, scheme })
    }

    pub fn iob2<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names.iter().map(|s| s.as_ref().to_string()).collect(),
            LabelScheme::Iob2,
        )
    }

    pub fn sentence<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names.iter().map(|s| s.as_ref().to_string()).collect(),
            LabelScheme::Sentence,
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }
}

/// A validated dataset. Labels are either attached to every sample or absent.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    vocab: LabelVocab,
    samples: Vec<Sample>,
    labels: Option<Vec<Vec<usize>>>,
}

impl LabeledDataset {
    pub fn new(
        vocab: LabelVocab,
        samples: Vec<Sample>,
        labels: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let mut ids = HashSet::with_capacity(samples.len());
        let kind = samples.first().map(Sample::kind);
        for s in &samples {
            s.validate()?;
            if Some(s.kind()) != kind {
                return Err(Error::MixedKinds(s.id.clone()));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != samples.len() {
                return Err(Error::LengthMismatch(labels.len(), samples.len()));
            }
            for (s, l) in samples.iter().zip(labels) {
                if l.len() != s.label_len() {
                    return Err(Error::LabelLengthMismatch(s.id.clone()));
                }
                if let Some(&bad) = l.iter().find(|&&c| c >= vocab.len()) {
                    return Err(Error::UnknownLabel {
                        id: s.id.clone(),
                        name: format!("#{bad}"),
                    });
                }
            }
        }
        Ok(LabeledDataset {
            vocab,
            samples,
            labels,
        })
    }

    pub fn unlabeled(vocab: LabelVocab, samples: Vec<Sample>) -> Result<Self> {
        Self::new(vocab, samples, None)
    }

    pub fn vocab(&self) -> &LabelVocab {
        &self.vocab
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&[Vec<usize>]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn kind(&self) -> Option<SampleKind> {
        self.samples.first().map(Sample::kind)
    }

    /// Same samples with labels dropped.
    pub fn without_labels(&self) -> Self {
        LabeledDataset {
            vocab: self.vocab.clone(),
            samples: self.samples.clone(),
            labels: None,
        }
    }

    /// `(sample, labels)` pairs; empty when the dataset is unlabeled.
    pub fn labeled_pairs(&self) -> Vec<(&Sample, &[usize])> {
        match &self.labels {
            Some(labels) => self
                .samples
                .iter()
                .zip(labels)
                .map(|(s, l)| (s, l.as_slice()))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Members at `indices`, in the order given.
    pub fn select(&self, indices: &[usize]) -> Self {
        LabeledDataset {
            vocab: self.vocab.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LabelField {
    One(String),
    Many(Vec<String>),
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    kind: SampleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    part_a: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    part_b: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<LabelField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin_id: Option<String>,
}

fn record_to_sample(rec: Record, line: usize) -> Result<(Sample, Option<LabelField>)> {
    let malformed = |reason: &str| Error::MalformedLine {
        line,
        reason: reason.to_string(),
    };
    let text = match rec.kind {
        SampleKind::Tagging => {
            if rec.part_a.is_some() || rec.part_b.is_some() {
                return Err(malformed("tagging record must not carry part_a/part_b"));
            }
            Text::Tagging(rec.tokens.ok_or_else(|| malformed("missing tokens"))?)
        }
        SampleKind::Pair => {
            if rec.tokens.is_some() {
                return Err(malformed("pair record must not carry tokens"));
            }
            Text::Pair(
                rec.part_a.ok_or_else(|| malformed("missing part_a"))?,
                rec.part_b.ok_or_else(|| malformed("missing part_b"))?,
            )
        }
    };
    let sample = Sample {
        id: rec.id,
        text,
        origin_id: rec.origin_id,
    };
    Ok((sample, rec.labels))
}

fn resolve_labels(sample: &Sample, field: LabelField, vocab: &LabelVocab) -> Result<Vec<usize>> {
    let names = match (sample.kind(), field) {
        (SampleKind::Pair, LabelField::One(n)) => vec![n],
        (_, LabelField::Many(ns)) => ns,
        (SampleKind::Tagging, LabelField::One(_)) => {
            return Err(Error::LabelLengthMismatch(sample.id.clone()))
        }
    };
    if names.len() != sample.label_len() {
        return Err(Error::LabelLengthMismatch(sample.id.clone()));
    }
    names
        .into_iter()
        .map(|n| {
            vocab.index(&n).ok_or_else(|| Error::UnknownLabel {
                id: sample.id.clone(),
                name: n,
            })
        })
        .collect()
}

pub fn load_jsonl(path: impl AsRef<Path>, vocab: &LabelVocab) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(BufReader::new(file), vocab).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_jsonl(reader: impl BufRead, vocab: &LabelVocab) -> Result<LabeledDataset> {
    let mut samples = Vec::new();
    let mut labels: Vec<Vec<usize>> = Vec::new();
    let mut labeled: Option<bool> = None;
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: lineno,
            reason: e.to_string(),
        })?;
        let (sample, field) = record_to_sample(rec, lineno)?;
        sample.validate()?;
        if !ids.insert(sample.id.clone()) {
            return Err(Error::DuplicateId(sample.id));
        }
        match (labeled, field.is_some()) {
            (None, has) => labeled = Some(has),
            (Some(a), b) if a != b => return Err(Error::PartialLabels(sample.id)),
            _ => {}
        }
        if let Some(field) = field {
            labels.push(resolve_labels(&sample, field, vocab)?);
        }
        samples.push(sample);
    }
    let labels = labeled.unwrap_or(false).then_some(labels);
    LabeledDataset::new(vocab.clone(), samples, labels)
}

pub fn save_jsonl(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_jsonl(dataset, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_jsonl(dataset: &LabeledDataset, out: &mut impl Write) -> std::io::Result<()> {
    let vocab = dataset.vocab();
    for (i, s) in dataset.samples().iter().enumerate() {
        let (tokens, part_a, part_b) = match &s.text {
            Text::Tagging(t) => (Some(t.clone()), None, None),
            Text::Pair(a, b) => (None, Some(a.clone()), Some(b.clone())),
        };
        let labels = dataset.labels().map(|l| {
            let names: Vec<String> = l[i].iter().map(|&c| vocab.name(c).to_string()).collect();
            match s.kind() {
                SampleKind::Pair => LabelField::One(names.into_iter().next().unwrap_or_default()),
                SampleKind::Tagging => LabelField::Many(names),
            }
        });
        let rec = Record {
            id: s.id.clone(),
            kind: s.kind(),
            tokens,
            part_a,
            part_b,
            labels,
            origin_id: s.origin_id.clone(),
        };
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Draws `ceil(percent/100 * N)` samples without replacement, keeping the
/// original relative order.
pub fn subsample(dataset: &LabeledDataset, percent: f64, seed: u64) -> Result<LabeledDataset> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::config(format!(
            "subsample percent must be in (0, 100], got {percent}"
        )));
    }
    let n = dataset.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = ceil_percent(percent, n).clamp(1, n);
    let mut rng = rng_from(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(dataset.select(&idx))
}
