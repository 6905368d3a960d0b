//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the coverage accumulator or the
//! backprop path it checks.

#![allow(dead_code)]

use std::collections::HashSet;

use dnncov::nn::{Activation, LayerSpec};
use dnncov::profiler::Bounds;
use dnncov::rng::SplitMix64;
use dnncov::{ActivationTrace, CoverageConfig, Dataset, Model, NeuronProfile, Tensor};

pub fn random_model(rng: &mut SplitMix64, input_size: usize, widths: &[usize], acts: &[Activation]) -> Model {
    let mut sizes = vec![input_size];
    sizes.extend_from_slice(widths);
    let layers = sizes
        .windows(2)
        .zip(acts)
        .map(|(w, &act)| {
            let weights = (0..w[0] * w[1]).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
            let bias = (0..w[1]).map(|_| rng.uniform(-0.5, 0.5) as f32).collect();
            LayerSpec::dense(act, Tensor::new(vec![w[0], w[1]], weights).unwrap(), Tensor::row(bias).unwrap()).unwrap()
        })
        .collect();
    Model::new(layers).unwrap()
}

pub fn random_activation(rng: &mut SplitMix64) -> Activation {
    [Activation::Relu, Activation::Sigmoid, Activation::Identity][rng.below(3)]
}

pub fn random_inputs(rng: &mut SplitMix64, n: usize, dim: usize, lo: f64, hi: f64) -> Dataset {
    let inputs = (0..n * dim).map(|_| rng.uniform(lo, hi) as f32).collect();
    Dataset::new(dim, 1, inputs, vec![0; n], None, "random").unwrap()
}

// ---------------------------------------------------------------------------
// Coverage: recompute every criterion from scratch over a list of traces.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCounts {
    pub neurons: u64,
    pub sections_covered: u64,
    pub upper: u64,
    pub lower: u64,
    pub topk: u64,
    pub nc: u64,
    pub tknp: u64,
}

impl OracleCounts {
    pub fn ratios(&self, k: u32) -> [f64; 5] {
        let n = self.neurons;
        [
            self.sections_covered as f64 / (n * u64::from(k)) as f64,
            (self.upper + self.lower) as f64 / (2 * n) as f64,
            self.upper as f64 / n as f64,
            self.topk as f64 / n as f64,
            self.nc as f64 / n as f64,
        ]
    }
}

enum Place {
    Below,
    Above,
    Section(u32),
}

fn place(b: Bounds, v: f32, k: u32) -> Place {
    if v < b.low {
        Place::Below
    } else if v > b.high {
        Place::Above
    } else if b.low == b.high {
        Place::Section(0)
    } else {
        let w = (b.high as f64 - b.low as f64) / k as f64;
        let i = ((v as f64 - b.low as f64) / w).floor() as u32;
        Place::Section(i.min(k - 1))
    }
}

/// Selection of the `k` largest, repeatedly taking the first maximum.
fn top_k_by_selection(values: &[f32], k: usize) -> Vec<u32> {
    let mut taken = vec![false; values.len()];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for (i, &v) in values.iter().enumerate() {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|b| v > values[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b as u32);
    }
    out.sort_unstable();
    out
}

pub fn brute_force(profile: &NeuronProfile, cfg: &CoverageConfig, traces: &[ActivationTrace]) -> OracleCounts {
    let layers = profile.layers();
    let mut sections: Vec<Vec<HashSet<u32>>> = layers.iter().map(|l| vec![HashSet::new(); l.len()]).collect();
    let mut upper = HashSet::new();
    let mut lower = HashSet::new();
    let mut topk = HashSet::new();
    let mut nc = HashSet::new();
    let mut patterns: HashSet<Vec<Vec<u32>>> = HashSet::new();
    for t in traces {
        let mut pattern = Vec::new();
        for (l, values) in t.layers.iter().enumerate() {
            for (i, &v) in values.iter().enumerate() {
                match place(layers[l][i], v, cfg.k_sections) {
                    Place::Below => {
                        lower.insert((l, i));
                    }
                    Place::Above => {
                        upper.insert((l, i));
                    }
                    Place::Section(s) => {
                        sections[l][i].insert(s);
                    }
                }
            }
            let lo = values.iter().copied().fold(f32::INFINITY, f32::min) as f64;
            let hi = values.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
            if hi > lo {
                for (i, &v) in values.iter().enumerate() {
                    if (v as f64 - lo) / (hi - lo) > cfg.nc_threshold {
                        nc.insert((l, i));
                    }
                }
            }
            let top = top_k_by_selection(values, cfg.top_k as usize);
            for &i in &top {
                topk.insert((l, i));
            }
            pattern.push(top);
        }
        patterns.insert(pattern);
    }
    OracleCounts {
        neurons: profile.neuron_count() as u64,
        sections_covered: sections.iter().flatten().map(|s| s.len() as u64).sum(),
        upper: upper.len() as u64,
        lower: lower.len() as u64,
        topk: topk.len() as u64,
        nc: nc.len() as u64,
        tknp: patterns.len() as u64,
    }
}

// ---------------------------------------------------------------------------
// Gradients: a plain f64 re-implementation of the loss, differentiated
// numerically.

#[derive(Clone)]
pub struct ShadowLayer {
    pub act: Activation,
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

pub fn shadow(model: &Model) -> Vec<ShadowLayer> {
    model
        .layers()
        .iter()
        .map(|l| ShadowLayer {
            act: l.activation(),
            n_in: l.input_size(),
            n_out: l.output_size(),
            w: l.weights().data().iter().map(|&v| v as f64).collect(),
            b: l.bias().data().iter().map(|&v| v as f64).collect(),
        })
        .collect()
}

/// Loss and the sign pattern of every relu pre-activation (to spot kinks).
#[allow(clippy::needless_range_loop)]
pub fn shadow_loss(layers: &[ShadowLayer], x: &[f64], label: usize) -> (f64, Vec<bool>) {
    let mut h = x.to_vec();
    let mut mask = Vec::new();
    for l in layers {
        let mut z = l.b.clone();
        for i in 0..l.n_in {
            for j in 0..l.n_out {
                z[j] += h[i] * l.w[i * l.n_out + j];
            }
        }
        h = z
            .iter()
            .map(|&v| match l.act {
                Activation::Relu => {
                    mask.push(v > 0.0);
                    v.max(0.0)
                }
                Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
                Activation::Identity => v,
            })
            .collect();
    }
    let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + h.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    (lse - h[label], mask)
}

pub const FD_STEP: f64 = 1e-3;

/// Central difference `(f(+h) - f(-h)) / 2h` at `h = FD_STEP`. `None` when a
/// relu changes state inside the stencil, where the loss is not
/// differentiable.
pub fn central_difference(f: impl Fn(f64) -> (f64, Vec<bool>)) -> Option<f64> {
    let h = FD_STEP;
    let (_, base) = f(0.0);
    let (plus, mp) = f(h);
    let (minus, mm) = f(-h);
    if mp != base || mm != base {
        return None;
    }
    Some((plus - minus) / (2.0 * h))
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(1e-8)
}

pub struct GradCheck {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub worst: f64,
}

/// Compares every weight, bias and input gradient of `model` at `(x, label)`
/// against the finite-difference oracle.
pub fn check_gradients(model: &Model, x: &[f32], label: u32) -> GradCheck {
    let analytic = model.loss_and_gradients_f64(x, label).unwrap();
    let base = shadow(model);
    let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let y = label as usize;
    let mut out = GradCheck { checked: 0, skipped_kinks: 0, worst: 0.0 };
    let mut record = |a: f64, n: Option<f64>| match n {
        Some(n) => {
            out.checked += 1;
            out.worst = out.worst.max(relative_error(a, n));
        }
        None => out.skipped_kinks += 1,
    };

    let (loss, _) = shadow_loss(&base, &x64, y);
    assert!((loss - analytic.loss).abs() <= 1e-12 * loss.abs().max(1.0));

    for li in 0..base.len() {
        for p in 0..base[li].w.len() {
            let n = central_difference(|d| {
                let mut m = base.clone();
                m[li].w[p] += d;
                shadow_loss(&m, &x64, y)
            });
            record(analytic.weight_grads[li][p], n);
        }
        for p in 0..base[li].b.len() {
            let n = central_difference(|d| {
                let mut m = base.clone();
                m[li].b[p] += d;
                shadow_loss(&m, &x64, y)
            });
            record(analytic.bias_grads[li][p], n);
        }
    }
    for i in 0..x64.len() {
        let n = central_difference(|d| {
            let mut xp = x64.clone();
            xp[i] += d;
            shadow_loss(&base, &xp, y)
        });
        record(analytic.input_grad[i], n);
    }
    out
}
