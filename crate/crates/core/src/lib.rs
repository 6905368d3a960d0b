//! Coverage analysis for feedforward neural networks.
//!
//! The crate measures how thoroughly a set of inputs exercises a network's
//! neurons, at several granularities: k-multisection coverage of each
//! neuron's training range, boundary and strong-activation coverage of the
//! corner regions beyond it, top-k neuron coverage and patterns, and the
//! classic thresholded neuron coverage as a baseline.
//!
//! Pipeline: build or [`nn::train_sgd`] a [`nn::Model`], [`profiler::profile`]
//! it on training data, then fold activation traces into a
//! [`coverage::CoverageState`] and read off a [`coverage::CoverageReport`].
//! [`attacks`] generates FGSM/BIM suites whose coverage can be compared with
//! [`coverage::diff`]. All artifacts persist through [`io`].

pub mod attacks;
pub mod coverage;
pub mod dataset;
pub mod hash;
pub mod io;
pub mod nn;
pub mod numerics;
pub mod profiler;
pub mod rng;

pub use coverage::{CoverageConfig, CoverageDelta, CoverageReport, CoverageState};
pub use dataset::Dataset;
pub use hash::Digest;
pub use nn::{ActivationTrace, Model, NeuronId};
pub use numerics::Tensor;
pub use profiler::{NeuronProfile, Region};
