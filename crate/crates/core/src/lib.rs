//! Desk-scale laboratory for single-frame infrared small target detection.
//!
//! The pieces, bottom to top:
//!
//! - a dense f64 tensor engine with tape-based reverse-mode autodiff
//!   ([`tensor`], [`kernels`], [`graph`]), every kernel pinned by
//!   finite-difference and naive-loop oracles in the test suite;
//! - a densely nested encoder-decoder segmentation network with channel and
//!   spatial attention and a multi-scale fusion head ([`net`]);
//! - a deterministic training loop: Adagrad, per-step cosine schedule,
//!   soft-IoU loss, flip/blur/crop augmentation ([`train`]);
//! - a synthetic scene generator that composites small targets onto
//!   procedural backgrounds at controlled local signal-to-clutter ratios
//!   ([`synth`]);
//! - thresholding + 8-connected clustering ([`postproc`]), target-level
//!   metrics ([`metrics`]), classic filtering baselines ([`baselines`]),
//!   and the evaluation pipeline that ties them together ([`eval`]).
//!
//! Everything is CPU-only and reproducible: a (seed, config, data) triple
//! determines results bit-for-bit.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod net;
pub mod parallel;
pub mod params;
pub mod postproc;
pub mod raster;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, ErrorKind, Result};

/// f64 tensor: the concrete type every shipped code path uses.
pub type Tensor = tensor::TensorBase<f64>;
/// f64 autodiff tape.
pub type Graph = graph::GraphBase<f64>;
/// f64 single-channel raster.
pub type Image = raster::ImageBase<f64>;
