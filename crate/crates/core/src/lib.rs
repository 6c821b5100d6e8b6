//! Joint Bayesian deconvolution and segmentation of speckle-dominated images.
//!
//! The reflectivity `x` behind an observation `y = Hx + n` is modeled as a
//! mixture of zero-mean generalized Gaussian classes whose labels follow a
//! Potts Markov random field. A hybrid Gibbs sampler draws the noise
//! variance, the class shape and scale parameters, the labels and the
//! reflectivity in turn; the retained draws give MMSE and marginal MAP
//! estimates.

// `!(a > b)` is the NaN-rejecting form used by every parameter check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod convolution;
pub mod diagnostics;
pub mod display;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod gibbs;
pub mod grid;
pub mod metrics;
pub mod phantoms;
pub mod potts;

pub use error::{Error, Result};
