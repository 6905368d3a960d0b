//! Labelled input sets and the seeded synthetic generators used for
//! desk-scale experiments.

use std::borrow::Cow;

use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("{inputs} input values is not a multiple of input_size {input_size}")]
    RaggedInputs { inputs: usize, input_size: usize },
    #[error("{inputs} inputs but {labels} labels")]
    LabelCount { inputs: usize, labels: usize },
    #[error("label {label} at record {index} is not below num_classes {num_classes}")]
    LabelOutOfRange { index: usize, label: u32, num_classes: u32 },
    #[error("{ids} input ids for {inputs} inputs")]
    IdCount { inputs: usize, ids: usize },
    #[error("non-finite input value at record {index}")]
    NonFinite { index: usize },
    #[error("input_size and num_classes must be positive")]
    ZeroDimension,
    #[error("synthetic datasets need at least 2 points, got {0}")]
    TooSmall(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_size: usize,
    num_classes: u32,
    inputs: Vec<f32>,
    labels: Vec<u32>,
    input_ids: Option<Vec<String>>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        input_size: usize,
        num_classes: u32,
        inputs: Vec<f32>,
        labels: Vec<u32>,
        input_ids: Option<Vec<String>>,
        provenance: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        if input_size == 0 || num_classes == 0 {
            return Err(DatasetError::ZeroDimension);
        }
        if !inputs.len().is_multiple_of(input_size) {
            return Err(DatasetError::RaggedInputs { inputs: inputs.len(), input_size });
        }
        let count = inputs.len() / input_size;
        if labels.len() != count {
            return Err(DatasetError::LabelCount { inputs: count, labels: labels.len() });
        }
        if let Some(ids) = &input_ids {
            if ids.len() != count {
                return Err(DatasetError::IdCount { inputs: count, ids: ids.len() });
            }
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(DatasetError::LabelOutOfRange { index, label, num_classes });
        }
        if let Some(pos) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { index: pos / input_size });
        }
        Ok(Self { input_size, num_classes, inputs, labels, input_ids, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.inputs[i * self.input_size..(i + 1) * self.input_size]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn inputs(&self) -> &[f32] {
        &self.inputs
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Explicit ids, if any were recorded.
    pub fn explicit_ids(&self) -> Option<&[String]> {
        self.input_ids.as_deref()
    }

    /// The record's id: the explicit one, or its index rendered as text.
    pub fn id(&self, i: usize) -> Cow<'_, str> {
        match &self.input_ids {
            Some(ids) => Cow::Borrowed(&ids[i]),
            None => Cow::Owned(i.to_string()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f32], u32)> + '_ {
        self.inputs.chunks_exact(self.input_size).zip(self.labels.iter().copied())
    }

    /// Records `start..end` as a new dataset; ids are kept (materialised if implicit).
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        let ids = (start..end).map(|i| self.id(i).into_owned()).collect();
        Dataset {
            input_size: self.input_size,
            num_classes: self.num_classes,
            inputs: self.inputs[start * self.input_size..end * self.input_size].to_vec(),
            labels: self.labels[start..end].to_vec(),
            input_ids: Some(ids),
            provenance: self.provenance.clone(),
        }
    }

    /// Splits off the last `test_count` records.
    pub fn split_tail(&self, test_count: usize) -> (Dataset, Dataset) {
        let cut = self.len().saturating_sub(test_count);
        let mut head = self.slice(0, cut);
        let mut tail = self.slice(cut, self.len());
        head.provenance = format!("{} [0..{cut})", self.provenance);
        tail.provenance = format!("{} [{cut}..{})", self.provenance, self.len());
        (head, tail)
    }

    /// Concatenation; ids are materialised so records stay distinguishable.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset, DatasetError> {
        let first = parts.first().ok_or(DatasetError::ZeroDimension)?;
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        let mut ids = Vec::new();
        for p in parts {
            if p.input_size != first.input_size {
                return Err(DatasetError::RaggedInputs { inputs: p.input_size, input_size: first.input_size });
            }
            inputs.extend_from_slice(&p.inputs);
            labels.extend_from_slice(&p.labels);
            ids.extend((0..p.len()).map(|i| p.id(i).into_owned()));
        }
        let num_classes = parts.iter().map(|p| p.num_classes).max().unwrap_or(1);
        let provenance = parts.iter().map(|p| p.provenance.as_str()).collect::<Vec<_>>().join(" + ");
        Dataset::new(first.input_size, num_classes, inputs, labels, Some(ids), provenance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Blobs,
    Moons,
}

impl std::str::FromStr for SyntheticKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "blobs" => Ok(Self::Blobs),
            "moons" => Ok(Self::Moons),
            other => Err(format!("unknown dataset kind {other:?} (expected blobs or moons)")),
        }
    }
}

pub const BLOB_CENTERS: [(f64, f64); 2] = [(0.25, 0.25), (0.75, 0.75)];
pub const BLOB_SIGMA: f64 = 0.08;
const MOON_NOISE: f64 = 0.1;

/// Two-class 2-D data in `[0,1]²`, labels alternating `0,1,0,1,…`.
///
/// Blobs draw `center + σ·N(0, I)` and clamp to the unit square. Moons place
/// points on two interleaved half circles (parameter evenly spaced per class),
/// add Gaussian noise, then min-max scale each axis onto `[0,1]`.
pub fn make_synthetic_dataset(kind: SyntheticKind, n: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if n < 2 {
        return Err(DatasetError::TooSmall(n));
    }
    let mut rng = SplitMix64::new(seed);
    let mut points = Vec::with_capacity(n);
    let labels: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
    match kind {
        SyntheticKind::Blobs => {
            for &label in &labels {
                let (cx, cy) = BLOB_CENTERS[label as usize];
                let (zx, zy) = rng.normal_pair();
                points.push(((cx + BLOB_SIGMA * zx).clamp(0.0, 1.0), (cy + BLOB_SIGMA * zy).clamp(0.0, 1.0)));
            }
        }
        SyntheticKind::Moons => {
            let per_class = [n.div_ceil(2), n / 2];
            let mut seen = [0usize; 2];
            for &label in &labels {
                let c = label as usize;
                let denom = (per_class[c].max(2) - 1) as f64;
                let t = std::f64::consts::PI * seen[c] as f64 / denom;
                seen[c] += 1;
                let (x, y) = if c == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
                let (zx, zy) = rng.normal_pair();
                points.push((x + MOON_NOISE * zx, y + MOON_NOISE * zy));
            }
            let scale = |sel: fn(&(f64, f64)) -> f64, pts: &[(f64, f64)]| {
                let lo = pts.iter().map(sel).fold(f64::INFINITY, f64::min);
                let hi = pts.iter().map(sel).fold(f64::NEG_INFINITY, f64::max);
                (lo, (hi - lo).max(f64::MIN_POSITIVE))
            };
            let (xlo, xr) = scale(|p| p.0, &points);
            let (ylo, yr) = scale(|p| p.1, &points);
            for p in &mut points {
                *p = (((p.0 - xlo) / xr).clamp(0.0, 1.0), ((p.1 - ylo) / yr).clamp(0.0, 1.0));
            }
        }
    }
    let inputs = points.iter().flat_map(|&(x, y)| [x as f32, y as f32]).collect();
    let name = match kind {
        SyntheticKind::Blobs => "blobs",
        SyntheticKind::Moons => "moons",
    };
    Dataset::new(2, 2, inputs, labels, None, format!("synthetic:{name} n={n} seed={seed}"))
}
