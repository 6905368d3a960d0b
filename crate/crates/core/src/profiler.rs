//! Per-neuron activation bounds observed on the training set.
//!
//! The bounds `[low, high]` split each neuron's output range into the major
//! function region (inside) and the two corner-case regions (strictly
//! outside).

use std::cmp::Ordering;
use std::thread;

use thiserror::Error;

use crate::dataset::Dataset;
use crate::hash::{Digest, Fnv1a64};
use crate::nn::{ActivationTrace, EngineError, Model, NeuronId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("cannot profile an empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("trace layer sizes {actual:?} do not match profile {expected:?}")]
    Shape { expected: Vec<usize>, actual: Vec<usize> },
    #[error("non-finite activation for neuron {0}")]
    NonFinite(NeuronId),
    #[error("neuron {0} is not in the profile")]
    UnknownNeuron(NeuronId),
    #[error("neuron {neuron}: low {low} exceeds high {high}")]
    InvertedBounds { neuron: NeuronId, low: f32, high: f32 },
    #[error("section count must be at least 1")]
    ZeroSections,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub low: f32,
    pub high: f32,
}

/// Where a value falls relative to a neuron's training bounds.
///
/// Variants are ordered along the real line, so `Ord` follows the value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    LowerCorner,
    Section(u32),
    UpperCorner,
}

impl Region {
    fn rank(self) -> (u8, u32) {
        match self {
            Region::LowerCorner => (0, 0),
            Region::Section(i) => (1, i),
            Region::UpperCorner => (2, 0),
        }
    }
}

impl PartialOrd for Region {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Region {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl Bounds {
    /// Classifies `value` against `[low, high]` split into `k` equal sections.
    ///
    /// Corners are strict: a value equal to a bound lands in the outermost
    /// section. A degenerate `low == high` neuron has one point-sized section.
    pub fn region(&self, value: f32, k: u32) -> Region {
        debug_assert!(k >= 1);
        if value < self.low {
            return Region::LowerCorner;
        }
        if value > self.high {
            return Region::UpperCorner;
        }
        if self.low == self.high {
            return Region::Section(0);
        }
        let width = (f64::from(self.high) - f64::from(self.low)) / f64::from(k);
        let idx = ((f64::from(value) - f64::from(self.low)) / width).floor();
        Region::Section((idx as u32).min(k - 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronProfile {
    model_id: Digest,
    count: u64,
    layers: Vec<Vec<Bounds>>,
}

impl NeuronProfile {
    pub fn from_parts(model_id: Digest, count: u64, layers: Vec<Vec<Bounds>>) -> Result<Self, ProfileError> {
        for (l, layer) in layers.iter().enumerate() {
            for (i, b) in layer.iter().enumerate() {
                let neuron = NeuronId::new(l, i);
                if !b.low.is_finite() || !b.high.is_finite() {
                    return Err(ProfileError::NonFinite(neuron));
                }
                if b.low > b.high {
                    return Err(ProfileError::InvertedBounds { neuron, low: b.low, high: b.high });
                }
            }
        }
        Ok(Self { model_id, count, layers })
    }

    pub fn model_id(&self) -> Digest {
        self.model_id
    }

    /// Number of training inputs the bounds were taken over.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn layers(&self) -> &[Vec<Bounds>] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn bounds(&self, n: NeuronId) -> Result<Bounds, ProfileError> {
        self.layers.get(n.layer).and_then(|l| l.get(n.index)).copied().ok_or(ProfileError::UnknownNeuron(n))
    }

    pub fn region_of(&self, n: NeuronId, value: f32, k: u32) -> Result<Region, ProfileError> {
        if k == 0 {
            return Err(ProfileError::ZeroSections);
        }
        Ok(self.bounds(n)?.region(value, k))
    }

    /// FNV-1a over model id and the bit patterns of every bound; binds
    /// coverage states to the exact profile they were computed against.
    pub fn digest(&self) -> Digest {
        let mut h = Fnv1a64::default();
        h.write(b"DGPF");
        h.write(&self.model_id.0.to_le_bytes());
        h.write_u32(self.layers.len() as u32);
        for layer in &self.layers {
            h.write_u32(layer.len() as u32);
            for b in layer {
                h.write_f32(b.low);
                h.write_f32(b.high);
            }
        }
        Digest(h.finish())
    }
}

/// Running min/max over traces. Merging two builders is the monoid that lets
/// profiling fan out across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileBuilder {
    layer_sizes: Vec<usize>,
    count: u64,
    low: Vec<f32>,
    high: Vec<f32>,
}

impl ProfileBuilder {
    pub fn new(layer_sizes: Vec<usize>) -> Self {
        let n: usize = layer_sizes.iter().sum();
        Self { layer_sizes, count: 0, low: vec![f32::INFINITY; n], high: vec![f32::NEG_INFINITY; n] }
    }

    pub fn observe(&mut self, trace: &ActivationTrace) -> Result<(), ProfileError> {
        if trace.layer_sizes() != self.layer_sizes {
            return Err(ProfileError::Shape { expected: self.layer_sizes.clone(), actual: trace.layer_sizes() });
        }
        if let Some((n, _)) = trace.neurons().find(|(_, v)| !v.is_finite()) {
            return Err(ProfileError::NonFinite(n));
        }
        for (slot, &v) in trace.layers.iter().flatten().enumerate() {
            self.low[slot] = self.low[slot].min(v);
            self.high[slot] = self.high[slot].max(v);
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ProfileBuilder) {
        assert_eq!(self.layer_sizes, other.layer_sizes, "merging builders of different shapes");
        for (a, &b) in self.low.iter_mut().zip(&other.low) {
            *a = a.min(b);
        }
        for (a, &b) in self.high.iter_mut().zip(&other.high) {
            *a = a.max(b);
        }
        self.count += other.count;
    }

    pub fn finish(self, model_id: Digest) -> Result<NeuronProfile, ProfileError> {
        if self.count == 0 {
            return Err(ProfileError::EmptyTrainingSet);
        }
        let mut flat = self.low.iter().zip(&self.high).map(|(&low, &high)| Bounds { low, high });
        let layers = self.layer_sizes.iter().map(|&n| flat.by_ref().take(n).collect()).collect();
        NeuronProfile::from_parts(model_id, self.count, layers)
    }
}

/// Profiles `model` over every input of `training_set`.
pub fn profile(model: &Model, training_set: &Dataset) -> Result<NeuronProfile, ProfileError> {
    profile_sharded(model, training_set, 1)
}

/// As [`profile`], fanning the forwards out over `shards` threads. The result
/// does not depend on the shard count.
pub fn profile_sharded(model: &Model, training_set: &Dataset, shards: usize) -> Result<NeuronProfile, ProfileError> {
    if training_set.is_empty() {
        return Err(ProfileError::EmptyTrainingSet);
    }
    let n = training_set.len();
    let shards = shards.clamp(1, n);
    let chunk = n.div_ceil(shards);
    let run = |start: usize, end: usize| -> Result<ProfileBuilder, ProfileError> {
        let mut b = ProfileBuilder::new(model.layer_sizes());
        for i in start..end {
            b.observe(&model.capture(String::new(), training_set.input(i))?)?;
        }
        Ok(b)
    };
    let parts: Vec<Result<ProfileBuilder, ProfileError>> = if shards == 1 {
        vec![run(0, n)]
    } else {
        thread::scope(|s| {
            let handles: Vec<_> =
                (0..n).step_by(chunk).map(|start| s.spawn(move || run(start, (start + chunk).min(n)))).collect();
            handles.into_iter().map(|h| h.join().expect("profile worker panicked")).collect()
        })
    };
    let mut total = ProfileBuilder::new(model.layer_sizes());
    for p in parts {
        total.merge(&p?);
    }
    total.finish(model.model_id())
}
