//! Hypothesis transfer learning for windowed biosignal classification.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece:
//! feature extraction, kernels, the least-squares SVM base learner, MultiKT
//! and prior-feature transfer, multi-kernel adaptive learning, the synthetic
//! cohort generator and the three evaluation protocols. File formats and the
//! command-line driver live in the `htl` crate.
#![no_std]

extern crate alloc;

pub mod error;
pub mod features;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod lssvm;
pub mod mkal;
pub mod rng;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
pub use linalg::Matrix;
