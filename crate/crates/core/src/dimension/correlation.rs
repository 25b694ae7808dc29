//! Pair-correlation estimate of the correlation dimension.

use serde::Serialize;

use crate::error::{FractalError, Result};
use crate::ifs::SelfSimilarIfs;
use crate::numerics::least_squares_line;

/// Dyadic scales `2^{-coarse} … 2^{-fine}` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScaleRange {
    pub coarse: u32,
    pub fine: u32,
}

impl ScaleRange {
    pub fn new(coarse: u32, fine: u32) -> Self {
        ScaleRange { coarse, fine }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// `(j, log₂ C(2^{-j}))` for every scale with at least one close pair.
    pub points: Vec<(u32, f64)>,
    pub n_pairs: usize,
}

pub const MIN_PAIRS: usize = 10_000;

/// Slope of `log₂ C(r)` against `log₂ r`, where `C(r)` is the fraction of
/// independent μ×μ sample pairs at distance at most `r`.
///
/// Scales where no pair is close enough are dropped; fewer than three
/// usable scales is a configuration error.
pub fn correlation_dimension_estimate(
    ifs: &SelfSimilarIfs,
    n_pairs: usize,
    scales: ScaleRange,
    seed: u64,
) -> Result<CorrelationEstimate> {
    if n_pairs < MIN_PAIRS {
        return Err(FractalError::config(format!(
            "correlation estimate needs at least {MIN_PAIRS} pairs, got {n_pairs}"
        )));
    }
    if scales.fine < scales.coarse + 2 {
        return Err(FractalError::config(format!(
            "correlation fit needs at least 3 scales, got 2^-{}..2^-{}",
            scales.coarse, scales.fine
        )));
    }
    let k = ifs.ambient_dim();
    let pts = ifs.sample_support(2 * n_pairs, seed);
    let levels = (scales.coarse..=scales.fine).collect::<Vec<_>>();
    let mut counts = vec![0u64; levels.len()];
    for pair in pts.chunks_exact(2 * k) {
        let d = pair[..k]
            .iter()
            .zip(&pair[k..])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        for (c, &j) in counts.iter_mut().zip(&levels) {
            if d <= (-(j as f64)).exp2() {
                *c += 1;
            } else {
                break;
            }
        }
    }
    let points: Vec<(u32, f64)> = levels
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&j, &c)| (j, (c as f64 / n_pairs as f64).log2()))
        .collect();
    if points.len() < 3 {
        return Err(FractalError::config(format!(
            "only {} scales have close pairs; increase n_pairs or use coarser scales",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|&(j, _)| -(j as f64)).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let fit = least_squares_line(&xs, &ys).ok_or_else(|| FractalError::Internal("degenerate fit".into()))?;
    Ok(CorrelationEstimate {
        estimate: fit.slope,
        stderr: fit.slope_stderr,
        points,
        n_pairs,
    })
}
