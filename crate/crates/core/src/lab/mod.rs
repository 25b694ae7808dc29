//! Numerical experiments: empirical decay rates of pushforward transforms
//! and densities of products and ratios of self-similar random variables.

mod convolution;
mod decay;

pub use convolution::{
    convolve_logs, multiplicative_convolution, radial_projection_experiment, write_density_csv, ConvolutionExperiment,
    DensityPoint, GridConfig, LogFactor, Parseval, ProductSample,
};
pub use decay::{measure_decay_slope, write_octaves_csv, DecayConfig, DecayExperiment, OctaveResult, RELIABLE_FRACTION};
