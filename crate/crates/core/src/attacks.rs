//! Gradient-sign adversarial inputs: FGSM and its iterated, projected
//! variant BIM.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::nn::{EngineError, Model};
use crate::numerics::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("invalid attack config: {0}")]
    Config(String),
    #[error("input value {value} at position {index} lies outside [{min}, {max}]")]
    OutOfDomain { index: usize, value: f32, min: f32, max: f32 },
    #[error("cannot attack an empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMethod {
    Fgsm,
    Bim,
}

impl FromStr for AttackMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fgsm" => Ok(Self::Fgsm),
            "bim" => Ok(Self::Bim),
            other => Err(format!("unknown attack {other:?} (expected fgsm or bim)")),
        }
    }
}

impl fmt::Display for AttackMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMethod::Fgsm => "fgsm",
            AttackMethod::Bim => "bim",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    /// L∞ budget.
    pub epsilon: f32,
    /// BIM step size.
    pub alpha: f32,
    /// BIM step count.
    pub iterations: u32,
    pub clip_min: f32,
    pub clip_max: f32,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self { epsilon: 0.3, alpha: 0.05, iterations: 10, clip_min: 0.0, clip_max: 1.0 }
    }
}

impl AttackConfig {
    pub fn validate(&self, method: AttackMethod) -> Result<(), AttackError> {
        let err = |m: String| Err(AttackError::Config(m));
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return err(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if !(self.clip_min.is_finite() && self.clip_max.is_finite() && self.clip_min < self.clip_max) {
            return err(format!("clip range [{}, {}] is empty or non-finite", self.clip_min, self.clip_max));
        }
        if method == AttackMethod::Bim {
            if !(self.alpha.is_finite() && self.alpha > 0.0) {
                return err(format!("alpha must be positive, got {}", self.alpha));
            }
            if self.epsilon > 0.0 && self.alpha > self.epsilon {
                return err(format!("alpha {} exceeds epsilon {}", self.alpha, self.epsilon));
            }
            if self.iterations == 0 {
                return err("iterations must be at least 1".into());
            }
        }
        Ok(())
    }

    fn check_domain(&self, input: &[f32]) -> Result<(), AttackError> {
        match input.iter().position(|&v| !(v >= self.clip_min && v <= self.clip_max)) {
            Some(index) => {
                Err(AttackError::OutOfDomain { index, value: input[index], min: self.clip_min, max: self.clip_max })
            }
            None => Ok(()),
        }
    }
}

/// Three-valued sign; an exactly-zero gradient takes no step.
fn sign(g: f64) -> f32 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn gradient_signs(model: &Model, x: &[f32], label: u32) -> Result<Vec<f32>, AttackError> {
    let g = model.loss_and_gradients_f64(x, label)?;
    Ok(g.input_grad.iter().map(|&v| sign(v)).collect())
}

/// `clip(x + ε·sign(∇ₓ loss))`.
pub fn fgsm(model: &Model, input: &Tensor, label: u32, cfg: &AttackConfig) -> Result<Tensor, AttackError> {
    cfg.validate(AttackMethod::Fgsm)?;
    Ok(Tensor::new(input.shape().to_vec(), fgsm_slice(model, input.data(), label, cfg)?).expect("shape preserved"))
}

fn fgsm_slice(model: &Model, x: &[f32], label: u32, cfg: &AttackConfig) -> Result<Vec<f32>, AttackError> {
    cfg.check_domain(x)?;
    let signs = gradient_signs(model, x, label)?;
    Ok(x.iter().zip(&signs).map(|(&v, &s)| (v + cfg.epsilon * s).clamp(cfg.clip_min, cfg.clip_max)).collect())
}

/// `iterations` FGSM steps of size α, each projected back into the ε-ball
/// around the original input and into the clip range.
pub fn bim(model: &Model, input: &Tensor, label: u32, cfg: &AttackConfig) -> Result<Tensor, AttackError> {
    cfg.validate(AttackMethod::Bim)?;
    Ok(Tensor::new(input.shape().to_vec(), bim_slice(model, input.data(), label, cfg)?).expect("shape preserved"))
}

fn bim_slice(model: &Model, x: &[f32], label: u32, cfg: &AttackConfig) -> Result<Vec<f32>, AttackError> {
    cfg.check_domain(x)?;
    let lo: Vec<f32> = x.iter().map(|&v| v - cfg.epsilon).collect();
    let hi: Vec<f32> = x.iter().map(|&v| v + cfg.epsilon).collect();
    let mut cur = x.to_vec();
    for _ in 0..cfg.iterations {
        let signs = gradient_signs(model, &cur, label)?;
        for (i, v) in cur.iter_mut().enumerate() {
            let stepped = (*v + cfg.alpha * signs[i]).clamp(lo[i], hi[i]);
            *v = stepped.clamp(cfg.clip_min, cfg.clip_max);
        }
    }
    Ok(cur)
}

/// One adversarial input per record, order preserved, labels kept, ids
/// suffixed with `#<method>`.
pub fn attack_suite(
    model: &Model,
    data: &Dataset,
    method: AttackMethod,
    cfg: &AttackConfig,
) -> Result<Dataset, AttackError> {
    if data.is_empty() {
        return Err(AttackError::EmptyDataset);
    }
    cfg.validate(method)?;
    let mut inputs = Vec::with_capacity(data.inputs().len());
    let mut ids = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let x = data.input(i);
        let adv = match method {
            AttackMethod::Fgsm => fgsm_slice(model, x, data.label(i), cfg)?,
            AttackMethod::Bim => bim_slice(model, x, data.label(i), cfg)?,
        };
        inputs.extend(adv);
        ids.push(format!("{}#{method}", data.id(i)));
    }
    let provenance = match method {
        AttackMethod::Fgsm => format!("{} | fgsm eps={}", data.provenance(), cfg.epsilon),
        AttackMethod::Bim => {
            format!("{} | bim eps={} alpha={} iters={}", data.provenance(), cfg.epsilon, cfg.alpha, cfg.iterations)
        }
    };
    Ok(Dataset::new(data.input_size(), data.num_classes(), inputs, data.labels().to_vec(), Some(ids), provenance)?)
}
