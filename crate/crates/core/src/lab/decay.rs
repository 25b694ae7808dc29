//! Empirical decay rate of `|μ̂_f|` from per-octave maxima.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FractalError, Result};
use crate::fourier::{batch_pushforward, curvature_diagnostic, CurvatureReport, EvalOptions, PushforwardMap, Scheme};
use crate::ifs::{substream, Budget, SelfSimilarIfs};
use crate::numerics::least_squares_line;

/// An octave whose largest error bound exceeds this fraction of its
/// envelope is flagged unreliable.
pub const RELIABLE_FRACTION: f64 = 0.1;

const CURVATURE_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    /// First and last octave `j`; frequencies are drawn from `[2^j, 2^{j+1})`.
    pub octaves: (u32, u32),
    pub samples_per_octave: usize,
    #[serde(default)]
    pub seed: u64,
    /// Absolute error tolerance for every sample.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub scheme: Option<Scheme>,
}

fn default_tol() -> f64 {
    1e-4
}

impl DecayConfig {
    pub fn new(first: u32, last: u32, samples_per_octave: usize) -> Self {
        DecayConfig {
            octaves: (first, last),
            samples_per_octave,
            seed: 0,
            tol: default_tol(),
            scheme: None,
        }
    }

    fn check(&self) -> Result<()> {
        let (a, b) = self.octaves;
        if b < a + 2 {
            return Err(FractalError::config(format!("need at least 3 octaves, got {a}..{b}")));
        }
        if b > 40 {
            return Err(FractalError::config(format!("octave {b} is beyond double-precision phase accuracy")));
        }
        if self.samples_per_octave == 0 {
            return Err(FractalError::config("samples_per_octave must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OctaveResult {
    pub octave: u32,
    pub max_abs: f64,
    pub quantile95: f64,
    pub max_error: f64,
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayExperiment {
    pub config: DecayConfig,
    pub octaves: Vec<OctaveResult>,
    /// Least-squares slope of `log₂(max |μ̂_f|)` against the octave index.
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    pub rms_residual: f64,
    /// `−fitted_slope`, comparable with a decay exponent σ.
    pub envelope_exponent: f64,
    pub theoretical_sigma: Option<f64>,
    pub curvature: Option<CurvatureReport>,
    pub notes: Vec<String>,
}

/// Frequencies `2^{j+u}`, `u` uniform in `[0, 1)`, from the octave's own RNG
/// stream; for vector-valued maps the direction is uniform on the sphere.
fn octave_frequencies(cfg: &DecayConfig, octave: u32, d: usize) -> Vec<Vec<f64>> {
    let mut rng = substream(cfg.seed, octave as u64);
    (0..cfg.samples_per_octave)
        .map(|_| {
            let r = (octave as f64 + rng.random::<f64>()).exp2();
            if d == 1 {
                return vec![r];
            }
            loop {
                let v: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-3 && n <= 1.0 {
                    return v.into_iter().map(|x| r * x / n).collect();
                }
            }
        })
        .collect()
}

/// Samples `|μ̂_f|` at log-uniform frequencies in every octave and fits the
/// decay of the per-octave maximum.
pub fn measure_decay_slope(
    ifs: &SelfSimilarIfs,
    map: &PushforwardMap,
    cfg: &DecayConfig,
    theoretical_sigma: Option<f64>,
    budget: Budget,
) -> Result<DecayExperiment> {
    cfg.check()?;
    let mut notes = Vec::new();
    let curvature = if map.out_dim() == 1 {
        let c = curvature_diagnostic(ifs, map, CURVATURE_SAMPLES, cfg.seed)?;
        if c.vanishing {
            notes.push(format!(
                "curvature vanishes on the support (min |det Hess f| = {:e}); decay is not expected",
                c.min_abs_hessian_det
            ));
        }
        Some(c)
    } else {
        notes.push("curvature check skipped for vector-valued map".into());
        None
    };
    let opts = EvalOptions::new(cfg.tol).with_budget(budget).with_fast_path(true);
    let mut octaves = Vec::new();
    for j in cfg.octaves.0..=cfg.octaves.1 {
        let xis = octave_frequencies(cfg, j, map.out_dim());
        let samples = batch_pushforward(ifs, map, &xis, &opts, cfg.scheme)?;
        let mut abs: Vec<f64> = samples.iter().map(|s| s.value.norm()).collect();
        abs.sort_by(f64::total_cmp);
        let max_abs = *abs.last().expect("at least one sample");
        let q_idx = ((0.95 * abs.len() as f64).ceil() as usize).clamp(1, abs.len()) - 1;
        let max_error = samples.iter().map(|s| s.error_bound).fold(0.0, f64::max);
        let unreliable = max_error > RELIABLE_FRACTION * max_abs;
        if unreliable {
            notes.push(format!("octave {j}: error bound {max_error:e} exceeds 10% of the envelope {max_abs:e}"));
        }
        if samples.iter().any(|s| !s.certified) {
            notes.push(format!("octave {j}: error bounds rest on estimated derivative bounds"));
        }
        octaves.push(OctaveResult {
            octave: j,
            max_abs,
            quantile95: abs[q_idx],
            max_error,
            unreliable,
        });
    }
    let xs: Vec<f64> = octaves.iter().map(|o| o.octave as f64).collect();
    let ys: Vec<f64> = octaves.iter().map(|o| o.max_abs.max(f64::MIN_POSITIVE).log2()).collect();
    let fit = least_squares_line(&xs, &ys).ok_or_else(|| FractalError::Internal("degenerate slope fit".into()))?;
    if let Some(s) = theoretical_sigma {
        if -fit.slope < s {
            notes.push(format!(
                "empirical envelope exponent {} is below the theoretical exponent {s}",
                -fit.slope
            ));
        }
    }
    Ok(DecayExperiment {
        config: *cfg,
        octaves,
        fitted_slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        rms_residual: fit.rms_residual,
        envelope_exponent: -fit.slope,
        theoretical_sigma,
        curvature,
        notes,
    })
}

/// Per-octave CSV: `octave,max_abs,quantile95,max_error,unreliable`.
pub fn write_octaves_csv(exp: &DecayExperiment, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "octave,max_abs,quantile95,max_error,unreliable")?;
    for o in &exp.octaves {
        writeln!(out, "{},{},{},{},{}", o.octave, o.max_abs, o.quantile95, o.max_error, o.unreliable)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_identity_decays_like_sinc() {
        let ifs = SelfSimilarIfs::uniform_unit();
        let cfg = DecayConfig::new(4, 12, 32);
        let e = measure_decay_slope(&ifs, &PushforwardMap::identity_1d(), &cfg, None, Budget::default()).unwrap();
        assert!((e.fitted_slope + 1.0).abs() < 0.1, "{}", e.fitted_slope);
        assert!(e.curvature.unwrap().vanishing);
    }

    #[test]
    fn constant_map_does_not_decay() {
        let ifs = SelfSimilarIfs::cantor();
        let cfg = DecayConfig::new(4, 8, 8);
        let e = measure_decay_slope(&ifs, &PushforwardMap::univariate(&[0.25]), &cfg, None, Budget::default()).unwrap();
        assert!(e.fitted_slope.abs() < 1e-9);
        assert!(e.octaves.iter().all(|o| (o.max_abs - 1.0).abs() < 1e-9));
    }

    #[test]
    fn rejects_short_ranges() {
        let ifs = SelfSimilarIfs::cantor();
        let cfg = DecayConfig::new(4, 5, 8);
        assert!(measure_decay_slope(&ifs, &PushforwardMap::square(1), &cfg, None, Budget::default()).is_err());
    }
}
