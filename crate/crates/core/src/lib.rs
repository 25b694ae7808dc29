//! Self-similar measures on ℝ^k: construction, dimension exponents, Fourier
//! transforms of the measure and of its nonlinear images with certified error
//! bounds, closed-form decay exponents, and convolution experiments.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod dimension;
pub mod error;
pub mod fourier;
pub mod ifs;
pub mod lab;
pub mod numerics;

pub use error::{FractalError, Result};
