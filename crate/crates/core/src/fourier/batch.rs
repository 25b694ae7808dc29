//! Parallel evaluation over frequency lists.

use std::io::Write;

use rayon::prelude::*;

use super::{
    csv_header, mu_hat_with, pushforward_hat, pushforward_hat_order0, pushforward_hat_order1, EvalOptions,
    FrequencySample, PushforwardMap, Scheme,
};
use crate::error::{FractalError, Result};
use crate::ifs::SelfSimilarIfs;

/// μ̂ at every frequency, in input order. Each value is computed
/// independently, so results do not depend on the thread count.
pub fn batch_mu_hat(ifs: &SelfSimilarIfs, xis: &[Vec<f64>], opts: &EvalOptions) -> Result<Vec<FrequencySample>> {
    xis.par_iter().map(|xi| mu_hat_with(ifs, xi, opts)).collect()
}

/// Pushforward transform at every frequency. `scheme = None` picks order 1
/// when a Hessian bound is available.
pub fn batch_pushforward(
    ifs: &SelfSimilarIfs,
    map: &PushforwardMap,
    xis: &[Vec<f64>],
    opts: &EvalOptions,
    scheme: Option<Scheme>,
) -> Result<Vec<FrequencySample>> {
    let eval = match scheme {
        None => pushforward_hat,
        Some(Scheme::Order0) => pushforward_hat_order0,
        Some(Scheme::Order1) => pushforward_hat_order1,
        Some(Scheme::ExactRecursion) => {
            return Err(FractalError::config("exact recursion applies to μ̂ only, not to pushforwards"))
        }
    };
    xis.par_iter().map(|xi| eval(ifs, map, xi, opts)).collect()
}

/// Writes `xi..., re, im, abs, error_bound, scheme, leaves_used` rows.
pub fn write_samples_csv(samples: &[FrequencySample], out: &mut impl Write) -> std::io::Result<()> {
    let k = samples.first().map_or(1, |s| s.xi.len());
    csv_header(k, out)?;
    for s in samples {
        for x in &s.xi {
            write!(out, "{x},")?;
        }
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.value.re,
            s.value.im,
            s.value.norm(),
            s.error_bound,
            s.scheme.as_str(),
            s.leaves_used
        )?;
    }
    Ok(())
}
