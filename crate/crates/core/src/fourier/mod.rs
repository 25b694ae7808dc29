//! Fourier transforms of self-similar measures and of their images under
//! smooth maps, each value returned with an error bound.

mod batch;
mod curvature;
mod maps;
mod mu_hat;
mod pushforward;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FractalError, Result};
use crate::ifs::Budget;

pub use batch::{batch_mu_hat, batch_pushforward, write_samples_csv};
pub use curvature::{
    curvature_diagnostic, holomorphic_hessian_identity, quadratic_directional_hessian, CurvatureReport,
    HolomorphicHessian,
};
pub use maps::{
    GenericMap, HessianFn, HolomorphicMap, JacobianFn, MapBounds, MapKind, MapSpec, Monomial, PolynomialMap,
    PushforwardMap, QuadraticMap, QuadraticTerm, StatedBound, ValueFn,
};
pub use mu_hat::{mu_hat, mu_hat_with};
pub use pushforward::{graph_lift_hat_order0, pushforward_hat, pushforward_hat_order0, pushforward_hat_order1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExactRecursion,
    Order0,
    Order1,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ExactRecursion => "exact_recursion",
            Scheme::Order0 => "order0",
            Scheme::Order1 => "order1",
        }
    }
}

/// A transform value at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencySample {
    pub xi: Vec<f64>,
    pub value: Complex64,
    /// Bound for `|value − true transform|`. Certified when `certified` is
    /// true; otherwise it relies on estimated derivative bounds.
    pub error_bound: f64,
    pub scheme: Scheme,
    pub leaves_used: u64,
    pub certified: bool,
}

impl FrequencySample {
    pub(crate) fn origin(xi: &[f64], scheme: Scheme) -> Self {
        FrequencySample {
            xi: xi.to_vec(),
            value: Complex64::new(1.0, 0.0),
            error_bound: 0.0,
            scheme,
            leaves_used: 0,
            certified: true,
        }
    }
}

/// Accuracy and resource settings shared by the evaluators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub tol: f64,
    pub budget: Budget,
    /// For homogeneous IFSs, evaluate μ̂ as the finite product
    /// `Π M(Aʲξ)·μ̂(Aⁿξ)` instead of walking the cylinder tree.
    pub homogeneous_fast_path: bool,
}

impl EvalOptions {
    pub fn new(tol: f64) -> Self {
        EvalOptions {
            tol,
            budget: Budget::default(),
            homogeneous_fast_path: false,
        }
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_fast_path(mut self, on: bool) -> Self {
        self.homogeneous_fast_path = on;
        self
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(FractalError::config(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Reduces a phase measured in turns to `[-1/2, 1/2]`.
#[inline]
pub(crate) fn reduce_turns(t: f64) -> f64 {
    t - t.round()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Flips the frequency so its first non-zero component is positive.
/// Returns whether it was flipped; the caller conjugates the result, which
/// makes `value(−ξ) = conj(value(ξ))` hold exactly.
pub(crate) fn canonicalize(xi: &mut [f64]) -> bool {
    let flip = xi.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0);
    if flip {
        xi.iter_mut().for_each(|v| *v = -*v);
    }
    flip
}

/// Bound on accumulated floating-point error of a tree or product walk of
/// depth `depth` at frequency size `xi_norm`, with `scale` bounding the
/// magnitude of all points involved and `r_max` the largest ratio.
///
/// Phases are reduced modulo one turn at every step, so each step adds a few
/// ulps of `|ξ|·scale` (composed translations) plus ulps of the rescaled
/// frequency `r^j|ξ|`, whose relative error grows by one ulp per level;
/// the latter sums to at most `|ξ|·scale/(1 − r_max)²`.
pub(crate) fn roundoff_bound(depth: usize, xi_norm: f64, scale: f64, r_max: f64) -> f64 {
    let d = (depth + 1) as f64;
    let geometric = 1.0 / ((1.0 - r_max) * (1.0 - r_max));
    // The cruder `(d+1)²` count is also valid and wins for shallow walks.
    let steps = (d + xi_norm * scale * (d + geometric)).min(d * d * (1.0 + xi_norm * scale));
    let phase = 2.0 * std::f64::consts::PI * 8.0 * f64::EPSILON * steps;
    phase + 8.0 * f64::EPSILON * d
}

/// CSV header for samples of dimension `k`.
pub(crate) fn csv_header(k: usize, out: &mut impl Write) -> std::io::Result<()> {
    for j in 0..k {
        if k == 1 {
            write!(out, "xi,")?;
        } else {
            write!(out, "xi_{},", j + 1)?;
        }
    }
    writeln!(out, "re,im,abs,error_bound,scheme,leaves_used")
}
