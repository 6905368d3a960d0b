//! Mergeable accumulation of the coverage criteria over activation traces.
//!
//! A [`CoverageState`] records, per neuron, which of its `k` training-range
//! sections have been hit, whether either corner region has been reached,
//! whether it has ever ranked in its layer's top-k, and whether it crossed
//! the scaled neuron-coverage threshold. Globally it keeps the set of
//! distinct per-layer top-k patterns. Every field only grows, so states form
//! a commutative monoid under [`CoverageState::merge`], with a fresh state as
//! the identity.
//!
//! Criteria reported, with `N` the set of neurons:
//!
//! | name | value |
//! |------|-------|
//! | KMNC | covered sections / (k · \|N\|) |
//! | NBC  | (upper-corner + lower-corner neurons) / (2 · \|N\|) |
//! | SNAC | upper-corner neurons / \|N\| |
//! | TKNC | neurons ever in their layer's top-k / \|N\| |
//! | TKNP | distinct top-k patterns |
//! | NC   | neurons whose layer-scaled output exceeded the threshold / \|N\| |

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::Digest;
use crate::nn::{ActivationTrace, Model, NeuronId};
use crate::profiler::{Bounds, NeuronProfile, Region};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverageError {
    #[error("{what} mismatch: {left} vs {right}")]
    Binding { what: &'static str, left: String, right: String },
    #[error("invalid coverage config: {0}")]
    Config(String),
    #[error("trace {input_id:?} has layer sizes {actual:?}, expected {expected:?}")]
    TraceShape { input_id: String, expected: Vec<usize>, actual: Vec<usize> },
    #[error("trace {input_id:?}: non-finite activation {value} at neuron {neuron}")]
    NonFinite { input_id: String, neuron: NeuronId, value: f32 },
}

fn binding(what: &'static str, left: impl ToString, right: impl ToString) -> CoverageError {
    CoverageError::Binding { what, left: left.to_string(), right: right.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub k_sections: u32,
    pub top_k: u32,
    pub nc_threshold: f64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self { k_sections: 1000, top_k: 1, nc_threshold: 0.75 }
    }
}

impl CoverageConfig {
    pub fn validate(&self, layer_sizes: &[usize]) -> Result<(), CoverageError> {
        if self.k_sections == 0 {
            return Err(CoverageError::Config("k_sections must be at least 1".into()));
        }
        if self.top_k == 0 {
            return Err(CoverageError::Config("top_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.nc_threshold) {
            return Err(CoverageError::Config(format!("nc_threshold {} is outside [0, 1]", self.nc_threshold)));
        }
        let narrowest = layer_sizes.iter().copied().min().unwrap_or(0);
        if self.top_k as usize > narrowest {
            return Err(CoverageError::Config(format!(
                "top_k {} exceeds the narrowest layer ({narrowest} neurons)",
                self.top_k
            )));
        }
        Ok(())
    }
}

/// Fixed-size dense bitset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSet {
    len: usize,
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn count_range(&self, start: usize, end: usize) -> u64 {
        (start..end).filter(|&i| self.get(i)).count() as u64
    }

    pub fn union_with(&mut self, other: &BitSet) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Little-endian packing, bit `i` at byte `i / 8`, position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    /// Inverse of [`BitSet::to_bytes`]; `None` if the length is wrong or
    /// padding bits past `len` are set.
    pub fn from_bytes(len: usize, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut s = Self::new(len);
        for (wi, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            s.words[wi] = u64::from_le_bytes(buf);
        }
        if !len.is_multiple_of(64) {
            let last = s.words.last().copied().unwrap_or(0);
            if last >> (len % 64) != 0 {
                return None;
            }
        }
        Some(s)
    }
}

/// Canonical encoding of one input's top-k sets: for each layer in order, a
/// little-endian `u32` count followed by the sorted `u32` neuron indices.
pub fn encode_pattern(per_layer: &[Vec<u32>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(per_layer.iter().map(|l| 4 + 4 * l.len()).sum());
    for layer in per_layer {
        let mut sorted = layer.clone();
        sorted.sort_unstable();
        out.extend_from_slice(&(sorted.len() as u32).to_le_bytes());
        for i in sorted {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

/// Indices of the `k` largest values, ties going to the lower index.
pub fn top_k_indices(values: &[f32], k: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..values.len() as u32).collect();
    idx.sort_by(|&a, &b| {
        values[b as usize].partial_cmp(&values[a as usize]).expect("finite activations").then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageState {
    model_id: Digest,
    profile_hash: Digest,
    config: CoverageConfig,
    layer_sizes: Vec<usize>,
    bounds: Arc<Vec<Bounds>>,
    sections: BitSet,
    upper: BitSet,
    lower: BitSet,
    topk: BitSet,
    nc: BitSet,
    patterns: BTreeSet<Vec<u8>>,
    inputs_seen: u64,
}

/// Raw per-neuron accumulator contents, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StateParts {
    pub sections: BitSet,
    pub upper: BitSet,
    pub lower: BitSet,
    pub topk: BitSet,
    pub nc: BitSet,
    pub patterns: BTreeSet<Vec<u8>>,
    pub inputs_seen: u64,
}

impl CoverageState {
    /// An empty state bound to `model`, `profile` and `config`.
    pub fn new(model: &Model, profile: &NeuronProfile, config: CoverageConfig) -> Result<Self, CoverageError> {
        if model.model_id() != profile.model_id() {
            return Err(binding("model_id", model.model_id(), profile.model_id()));
        }
        if model.layer_sizes() != profile.layer_sizes() {
            return Err(binding(
                "layer sizes",
                format!("{:?}", model.layer_sizes()),
                format!("{:?}", profile.layer_sizes()),
            ));
        }
        Self::from_profile(profile, config)
    }

    /// An empty state bound to the model the profile was built from.
    pub fn from_profile(profile: &NeuronProfile, config: CoverageConfig) -> Result<Self, CoverageError> {
        let layer_sizes = profile.layer_sizes();
        config.validate(&layer_sizes)?;
        let n = profile.neuron_count();
        Ok(Self {
            model_id: profile.model_id(),
            profile_hash: profile.digest(),
            config,
            bounds: Arc::new(profile.layers().iter().flatten().copied().collect()),
            layer_sizes,
            sections: BitSet::new(n * config.k_sections as usize),
            upper: BitSet::new(n),
            lower: BitSet::new(n),
            topk: BitSet::new(n),
            nc: BitSet::new(n),
            patterns: BTreeSet::new(),
            inputs_seen: 0,
        })
    }

    /// Rebuilds a state from stored parts, checking sizes against the profile.
    pub fn from_parts(
        profile: &NeuronProfile,
        config: CoverageConfig,
        parts: StateParts,
    ) -> Result<Self, CoverageError> {
        let mut s = Self::from_profile(profile, config)?;
        let n = s.neuron_count();
        let sizes_ok = parts.sections.len() == s.sections.len()
            && [&parts.upper, &parts.lower, &parts.topk, &parts.nc].iter().all(|b| b.len() == n);
        if !sizes_ok {
            return Err(binding("state size", n, parts.upper.len()));
        }
        s.sections = parts.sections;
        s.upper = parts.upper;
        s.lower = parts.lower;
        s.topk = parts.topk;
        s.nc = parts.nc;
        s.patterns = parts.patterns;
        s.inputs_seen = parts.inputs_seen;
        Ok(s)
    }

    pub fn parts(&self) -> StateParts {
        StateParts {
            sections: self.sections.clone(),
            upper: self.upper.clone(),
            lower: self.lower.clone(),
            topk: self.topk.clone(),
            nc: self.nc.clone(),
            patterns: self.patterns.clone(),
            inputs_seen: self.inputs_seen,
        }
    }

    pub fn model_id(&self) -> Digest {
        self.model_id
    }

    pub fn profile_hash(&self) -> Digest {
        self.profile_hash
    }

    pub fn config(&self) -> CoverageConfig {
        self.config
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn neuron_count(&self) -> usize {
        self.bounds.len()
    }

    pub fn inputs_seen(&self) -> u64 {
        self.inputs_seen
    }

    pub fn patterns(&self) -> &BTreeSet<Vec<u8>> {
        &self.patterns
    }

    /// Folds one input's activations into the state. The trace is fully
    /// validated before anything is recorded.
    pub fn update(&mut self, trace: &ActivationTrace) -> Result<(), CoverageError> {
        if trace.layers.len() != self.layer_sizes.len()
            || trace.layers.iter().zip(&self.layer_sizes).any(|(l, &s)| l.len() != s)
        {
            return Err(CoverageError::TraceShape {
                input_id: trace.input_id.clone(),
                expected: self.layer_sizes.clone(),
                actual: trace.layer_sizes(),
            });
        }
        if let Some((neuron, value)) = trace.neurons().find(|(_, v)| !v.is_finite()) {
            return Err(CoverageError::NonFinite { input_id: trace.input_id.clone(), neuron, value });
        }

        let k = self.config.k_sections;
        let top_k = self.config.top_k as usize;
        let mut pattern = Vec::with_capacity(trace.layers.len());
        let mut base = 0usize;
        for values in &trace.layers {
            for (i, &v) in values.iter().enumerate() {
                let slot = base + i;
                match self.bounds[slot].region(v, k) {
                    Region::LowerCorner => self.lower.set(slot),
                    Region::UpperCorner => self.upper.set(slot),
                    Region::Section(s) => self.sections.set(slot * k as usize + s as usize),
                }
            }

            let (lo, hi) =
                values.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if hi > lo {
                let span = f64::from(hi) - f64::from(lo);
                for (i, &v) in values.iter().enumerate() {
                    if (f64::from(v) - f64::from(lo)) / span > self.config.nc_threshold {
                        self.nc.set(base + i);
                    }
                }
            }

            let top = top_k_indices(values, top_k);
            for &i in &top {
                self.topk.set(base + i as usize);
            }
            pattern.push(top);
            base += values.len();
        }
        self.patterns.insert(encode_pattern(&pattern));
        self.inputs_seen += 1;
        Ok(())
    }

    pub fn check_compatible(&self, other: &CoverageState) -> Result<(), CoverageError> {
        if self.model_id != other.model_id {
            return Err(binding("model_id", self.model_id, other.model_id));
        }
        if self.profile_hash != other.profile_hash {
            return Err(binding("profile hash", self.profile_hash, other.profile_hash));
        }
        if self.config != other.config {
            return Err(binding("config", format!("{:?}", self.config), format!("{:?}", other.config)));
        }
        Ok(())
    }

    /// In-place union with `other`.
    pub fn merge_from(&mut self, other: &CoverageState) -> Result<(), CoverageError> {
        self.check_compatible(other)?;
        self.sections.union_with(&other.sections);
        self.upper.union_with(&other.upper);
        self.lower.union_with(&other.lower);
        self.topk.union_with(&other.topk);
        self.nc.union_with(&other.nc);
        self.patterns.extend(other.patterns.iter().cloned());
        self.inputs_seen += other.inputs_seen;
        Ok(())
    }

    pub fn merge(a: &CoverageState, b: &CoverageState) -> Result<CoverageState, CoverageError> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }

    pub fn report(&self) -> CoverageReport {
        let n = self.neuron_count() as u64;
        let counts = CoverageCounts {
            neurons: n,
            sections_total: n * u64::from(self.config.k_sections),
            sections_covered: self.sections.count_ones(),
            upper_corner_neurons: self.upper.count_ones(),
            lower_corner_neurons: self.lower.count_ones(),
            topk_neurons: self.topk.count_ones(),
            nc_neurons: self.nc.count_ones(),
        };
        CoverageReport::from_counts(
            self.model_id,
            self.profile_hash,
            self.config,
            counts,
            self.patterns.len() as u64,
            self.inputs_seen,
        )
    }

    /// Covered section count for one neuron.
    pub fn sections_covered(&self, neuron_slot: usize) -> u64 {
        let k = self.config.k_sections as usize;
        self.sections.count_range(neuron_slot * k, (neuron_slot + 1) * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageCounts {
    pub neurons: u64,
    pub sections_total: u64,
    pub sections_covered: u64,
    pub upper_corner_neurons: u64,
    pub lower_corner_neurons: u64,
    pub topk_neurons: u64,
    pub nc_neurons: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub model_id: Digest,
    pub profile_hash: Digest,
    pub config: CoverageConfig,
    pub inputs_seen: u64,
    pub kmnc: f64,
    pub nbc: f64,
    pub snac: f64,
    pub tknc: f64,
    pub tknp: u64,
    pub nc: f64,
    pub counts: CoverageCounts,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl CoverageReport {
    pub fn from_counts(
        model_id: Digest,
        profile_hash: Digest,
        config: CoverageConfig,
        counts: CoverageCounts,
        tknp: u64,
        inputs_seen: u64,
    ) -> Self {
        let n = counts.neurons;
        Self {
            model_id,
            profile_hash,
            config,
            inputs_seen,
            kmnc: ratio(counts.sections_covered, counts.sections_total),
            nbc: ratio(counts.upper_corner_neurons + counts.lower_corner_neurons, 2 * n),
            snac: ratio(counts.upper_corner_neurons, n),
            tknc: ratio(counts.topk_neurons, n),
            tknp,
            nc: ratio(counts.nc_neurons, n),
            counts,
        }
    }

    /// True when every ratio is exactly what its counts imply.
    pub fn is_consistent(&self) -> bool {
        let again =
            Self::from_counts(self.model_id, self.profile_hash, self.config, self.counts, self.tknp, self.inputs_seen);
        again == *self
    }

    /// `(name, value)` for each criterion, in display order.
    pub fn criteria(&self) -> [(&'static str, f64); 6] {
        [
            ("KMNC", self.kmnc),
            ("NBC", self.nbc),
            ("SNAC", self.snac),
            ("TKNC", self.tknc),
            ("TKNP", self.tknp as f64),
            ("NC", self.nc),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageDelta {
    pub kmnc: f64,
    pub nbc: f64,
    pub snac: f64,
    pub tknc: f64,
    pub tknp: i64,
    pub nc: f64,
    pub inputs_seen: i64,
}

impl CoverageDelta {
    pub fn criteria(&self) -> [(&'static str, f64); 6] {
        [
            ("KMNC", self.kmnc),
            ("NBC", self.nbc),
            ("SNAC", self.snac),
            ("TKNC", self.tknc),
            ("TKNP", self.tknp as f64),
            ("NC", self.nc),
        ]
    }
}

/// Per-criterion `extended − base`; both reports must share model, profile
/// and config.
pub fn diff(base: &CoverageReport, extended: &CoverageReport) -> Result<CoverageDelta, CoverageError> {
    if base.model_id != extended.model_id {
        return Err(binding("model_id", base.model_id, extended.model_id));
    }
    if base.profile_hash != extended.profile_hash {
        return Err(binding("profile hash", base.profile_hash, extended.profile_hash));
    }
    if base.config != extended.config {
        return Err(binding("config", format!("{:?}", base.config), format!("{:?}", extended.config)));
    }
    Ok(CoverageDelta {
        kmnc: extended.kmnc - base.kmnc,
        nbc: extended.nbc - base.nbc,
        snac: extended.snac - base.snac,
        tknc: extended.tknc - base.tknc,
        tknp: extended.tknp as i64 - base.tknp as i64,
        nc: extended.nc - base.nc,
        inputs_seen: extended.inputs_seen as i64 - base.inputs_seen as i64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::Digest;
    use proptest::prelude::*;

    fn profile(layers: Vec<Vec<(f32, f32)>>) -> NeuronProfile {
        NeuronProfile::from_parts(
            Digest(1),
            1,
            layers.into_iter().map(|l| l.into_iter().map(|(low, high)| Bounds { low, high }).collect()).collect(),
        )
        .unwrap()
    }

    fn trace(layers: Vec<Vec<f32>>) -> ActivationTrace {
        ActivationTrace { input_id: "t".into(), layers }
    }

    fn cfg(k: u32, top_k: u32) -> CoverageConfig {
        CoverageConfig { k_sections: k, top_k, nc_threshold: 0.75 }
    }

    #[test]
    fn fresh_state_reports_zero() {
        let p = profile(vec![vec![(0.0, 1.0); 3]]);
        let s = CoverageState::from_profile(&p, CoverageConfig { top_k: 1, ..Default::default() }).unwrap();
        let r = s.report();
        assert_eq!((r.kmnc, r.nbc, r.snac, r.tknc, r.nc, r.tknp), (0.0, 0.0, 0.0, 0.0, 0.0, 0));
        assert_eq!(s, CoverageState::from_profile(&p, CoverageConfig::default()).unwrap());
    }

    #[test]
    fn interior_values_leave_corners_empty() {
        let p = profile(vec![vec![(0.0, 1.0), (-1.0, 1.0)]]);
        let mut s = CoverageState::from_profile(&p, cfg(10, 1)).unwrap();
        s.update(&trace(vec![vec![0.5, 0.0]])).unwrap();
        s.update(&trace(vec![vec![0.0, 1.0]])).unwrap();
        let r = s.report();
        assert_eq!((r.nbc, r.snac), (0.0, 0.0));
        assert!(r.kmnc > 0.0);
    }

    #[test]
    fn one_section_per_neuron() {
        let p = profile(vec![vec![(0.0, 10.0); 4]]);
        let mut s = CoverageState::from_profile(&p, cfg(5, 1)).unwrap();
        s.update(&trace(vec![vec![1.0, 3.0, 5.0, 9.0]])).unwrap();
        let r = s.report();
        assert_eq!(r.counts.sections_covered, 4);
        assert_eq!(r.kmnc, 0.2);
    }

    #[test]
    fn corner_formulas() {
        let p = profile(vec![vec![(0.0, 1.0); 4]]);
        let mut s = CoverageState::from_profile(&p, cfg(4, 1)).unwrap();
        s.update(&trace(vec![vec![0.5, 1.5, 0.5, 0.5]])).unwrap();
        let r = s.report();
        assert_eq!(r.nbc, 0.125);
        assert_eq!(r.snac, 0.25);
        s.update(&trace(vec![vec![-0.5, 0.5, 0.5, 0.5]])).unwrap();
        let r = s.report();
        assert_eq!(r.nbc, 0.25);
        assert_eq!(r.snac, 0.25);
    }

    #[test]
    fn top_k_coverage_two_layers() {
        let p = profile(vec![vec![(0.0, 1.0); 3], vec![(0.0, 1.0); 3]]);
        let mut s = CoverageState::from_profile(&p, cfg(2, 1)).unwrap();
        s.update(&trace(vec![vec![0.1, 0.9, 0.3], vec![0.7, 0.2, 0.1]])).unwrap();
        let r = s.report();
        assert_eq!(r.tknc, 2.0 / 6.0);
        assert_eq!(r.tknp, 1);
    }

    #[test]
    fn pattern_dedup() {
        let p = profile(vec![vec![(0.0, 1.0); 3], vec![(0.0, 1.0); 2]]);
        let mut s = CoverageState::from_profile(&p, cfg(2, 1)).unwrap();
        let t = trace(vec![vec![0.1, 0.9, 0.3], vec![0.7, 0.2]]);
        s.update(&t).unwrap();
        s.update(&t).unwrap();
        assert_eq!(s.report().tknp, 1);
        s.update(&trace(vec![vec![0.95, 0.9, 0.3], vec![0.7, 0.2]])).unwrap();
        assert_eq!(s.report().tknp, 2);
        assert_eq!(s.inputs_seen(), 3);
    }

    #[test]
    fn ties_resolve_to_lower_index() {
        assert_eq!(top_k_indices(&[0.0, 0.0, 0.0], 2), vec![0, 1]);
        assert_eq!(top_k_indices(&[0.0, 1.0, 1.0, -0.0], 1), vec![1]);
        assert_eq!(top_k_indices(&[-0.0, 0.0], 1), vec![0]);
    }

    #[test]
    fn pattern_encoding_is_order_independent() {
        assert_eq!(encode_pattern(&[vec![2, 0], vec![1]]), encode_pattern(&[vec![0, 2], vec![1]]));
        assert_eq!(encode_pattern(&[vec![1, 0]]), vec![2, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0]);
        // Length prefixes keep layer boundaries unambiguous.
        assert_ne!(encode_pattern(&[vec![1], vec![]]), encode_pattern(&[vec![], vec![1]]));
    }

    #[test]
    fn nc_scales_per_layer() {
        let p = profile(vec![vec![(0.0, 1.0); 4]]);
        let mut s = CoverageState::from_profile(&p, cfg(1, 1)).unwrap();
        // scaled: 0, 0.5, 0.8, 1.0 against 0.75
        s.update(&trace(vec![vec![2.0, 4.0, 5.2, 6.0]])).unwrap();
        assert_eq!(s.report().counts.nc_neurons, 2);
        // constant layer: nothing crosses
        let mut s = CoverageState::from_profile(&p, cfg(1, 1)).unwrap();
        s.update(&trace(vec![vec![3.0; 4]])).unwrap();
        assert_eq!(s.report().counts.nc_neurons, 0);
    }

    #[test]
    fn update_errors_leave_state_untouched() {
        let p = profile(vec![vec![(0.0, 1.0); 2]]);
        let mut s = CoverageState::from_profile(&p, cfg(3, 1)).unwrap();
        let before = s.clone();
        assert!(matches!(s.update(&trace(vec![vec![0.5]])), Err(CoverageError::TraceShape { .. })));
        let err = s.update(&trace(vec![vec![0.5, f32::NAN]])).unwrap_err();
        assert!(matches!(err, CoverageError::NonFinite { neuron: NeuronId { layer: 0, index: 1 }, .. }));
        assert_eq!(s, before);
    }

    #[test]
    fn config_validation() {
        let p = profile(vec![vec![(0.0, 1.0); 2], vec![(0.0, 1.0); 3]]);
        assert!(CoverageState::from_profile(&p, cfg(0, 1)).is_err());
        assert!(CoverageState::from_profile(&p, cfg(1, 3)).is_err());
        assert!(CoverageState::from_profile(&p, cfg(1, 2)).is_ok());
        let bad = CoverageConfig { nc_threshold: 1.5, ..cfg(1, 1) };
        assert!(CoverageState::from_profile(&p, bad).is_err());
    }

    #[test]
    fn merge_and_diff_require_same_binding() {
        let p = profile(vec![vec![(0.0, 1.0); 2]]);
        let q = profile(vec![vec![(0.0, 2.0); 2]]);
        let a = CoverageState::from_profile(&p, cfg(3, 1)).unwrap();
        let b = CoverageState::from_profile(&q, cfg(3, 1)).unwrap();
        let c = CoverageState::from_profile(&p, cfg(4, 1)).unwrap();
        assert!(matches!(CoverageState::merge(&a, &b), Err(CoverageError::Binding { what: "profile hash", .. })));
        assert!(matches!(CoverageState::merge(&a, &c), Err(CoverageError::Binding { what: "config", .. })));
        assert!(diff(&a.report(), &b.report()).is_err());
        let d = diff(&a.report(), &a.report()).unwrap();
        assert_eq!(d.criteria().iter().map(|c| c.1).sum::<f64>(), 0.0);
    }

    #[test]
    fn bitset_bytes() {
        let mut b = BitSet::new(10);
        b.set(0);
        b.set(9);
        assert_eq!(b.to_bytes(), vec![0b1, 0b10]);
        assert_eq!(BitSet::from_bytes(10, &b.to_bytes()), Some(b));
        assert_eq!(BitSet::from_bytes(10, &[0, 0b100]), None);
        assert_eq!(BitSet::from_bytes(10, &[0]), None);
    }

    fn arb_trace(sizes: Vec<usize>) -> impl Strategy<Value = ActivationTrace> {
        sizes
            .into_iter()
            .map(|n| prop::collection::vec(-2.0f32..3.0, n))
            .collect::<Vec<_>>()
            .prop_map(|layers| ActivationTrace { input_id: String::new(), layers })
    }

    proptest! {
        #[test]
        fn update_is_monotone(traces in prop::collection::vec(arb_trace(vec![3, 4]), 1..30)) {
            let p = profile(vec![vec![(0.0, 1.0), (-1.0, 1.0), (0.5, 0.5)], vec![(0.0, 2.0); 4]]);
            let mut s = CoverageState::from_profile(&p, cfg(7, 2)).unwrap();
            let mut prev = s.report();
            for t in &traces {
                s.update(t).unwrap();
                let r = s.report();
                for ((_, a), (_, b)) in prev.criteria().iter().zip(r.criteria().iter()) {
                    prop_assert!(b >= a);
                }
                for (_, v) in r.criteria().iter().filter(|c| c.0 != "TKNP") {
                    prop_assert!((0.0..=1.0).contains(v));
                }
                prop_assert!(r.tknp <= r.inputs_seen);
                prop_assert!(r.is_consistent());
                prev = r;
            }
        }

        #[test]
        fn order_does_not_matter(
            traces in prop::collection::vec(arb_trace(vec![3, 4]), 1..20),
            seed in any::<u64>(),
        ) {
            let p = profile(vec![vec![(0.0, 1.0); 3], vec![(0.0, 2.0); 4]]);
            let mut a = CoverageState::from_profile(&p, cfg(5, 1)).unwrap();
            let mut b = a.clone();
            let mut shuffled = traces.clone();
            crate::rng::SplitMix64::new(seed).shuffle(&mut shuffled);
            for t in &traces { a.update(t).unwrap(); }
            for t in &shuffled { b.update(t).unwrap(); }
            prop_assert_eq!(a, b);
        }

        #[test]
        fn bitset_round_trip(len in 0usize..300, bits in prop::collection::vec(any::<u16>(), 0..40)) {
            let mut b = BitSet::new(len);
            for i in bits { if len > 0 { b.set(i as usize % len); } }
            prop_assert_eq!(BitSet::from_bytes(len, &b.to_bytes()), Some(b));
        }
    }
}
