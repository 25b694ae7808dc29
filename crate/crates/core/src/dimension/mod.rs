//! Dimension exponents of self-similar measures and their consistency checks.

mod correlation;
mod profile;

use serde::{Deserialize, Serialize};

use crate::error::{FractalError, Result};
use crate::ifs::{Separation, SelfSimilarIfs};
use crate::numerics::{bisect_newton, RootOptions};

pub use correlation::{correlation_dimension_estimate, CorrelationEstimate, ScaleRange};
pub use profile::{build_profile, DimensionProfile, ProfileOverrides, TabulatedExponent};

/// Where an exponent value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ExactUnderSeparation,
    Estimated,
    UserSupplied,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    pub value: f64,
    pub provenance: Provenance,
}

impl Exponent {
    pub fn exact(value: f64) -> Self {
        Exponent {
            value,
            provenance: Provenance::ExactUnderSeparation,
        }
    }

    pub fn estimated(value: f64) -> Self {
        Exponent {
            value,
            provenance: Provenance::Estimated,
        }
    }

    pub fn user(value: f64) -> Self {
        Exponent {
            value,
            provenance: Provenance::UserSupplied,
        }
    }
}

fn check_ratios(ratios: &[f64]) -> Result<()> {
    if ratios.len() < 2 {
        return Err(FractalError::invalid(format!("need at least 2 ratios, got {}", ratios.len())));
    }
    if let Some(r) = ratios.iter().find(|&&r| !(r > 0.0 && r < 1.0)) {
        return Err(FractalError::invalid(format!("ratio {r} is not in (0, 1)")));
    }
    Ok(())
}

fn check_weights(weights: &[f64], ratios: &[f64]) -> Result<()> {
    check_ratios(ratios)?;
    if weights.len() != ratios.len() {
        return Err(FractalError::invalid(format!(
            "{} weights for {} ratios",
            weights.len(),
            ratios.len()
        )));
    }
    if let Some(p) = weights.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(FractalError::invalid(format!("weight {p} is not in (0, 1)")));
    }
    Ok(())
}

/// The `s ≥ 0` with `Σ rᵢ^s = 1`.
///
/// At `s = log N / log(1/r_max)` every term is at most `1/N`, so the root is
/// bracketed by `[0, log N / log(1/r_max)]`.
pub fn similarity_dimension_set(ratios: &[f64]) -> Result<f64> {
    check_ratios(ratios)?;
    let r_max = ratios.iter().copied().fold(0.0, f64::max);
    let hi = (ratios.len() as f64).ln() / -r_max.ln();
    let f = |s: f64| ratios.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
    let df = |s: f64| ratios.iter().map(|r| r.powf(s) * r.ln()).sum::<f64>();
    bisect_newton(f, df, 0.0, hi, RootOptions::default())
        .ok_or_else(|| FractalError::Internal("similarity dimension root not bracketed".into()))
}

/// `κ_sim = (Σ pᵢ log pᵢ) / (Σ pᵢ log rᵢ)`.
pub fn similarity_dimension_measure(weights: &[f64], ratios: &[f64]) -> Result<f64> {
    check_weights(weights, ratios)?;
    let num: f64 = weights.iter().map(|p| p * p.ln()).sum();
    let den: f64 = weights.iter().zip(ratios).map(|(p, r)| p * r.ln()).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LqSpectrum {
    pub q: f64,
    /// Solution `T` of `Σ pᵢ^q rᵢ^{−T} = 1`.
    pub tau: f64,
    /// `min(T/(q−1), k)`.
    pub d_q: f64,
}

/// Moran-type `L^q` spectrum; equals the true `d_q` under separation.
pub fn lq_spectrum(weights: &[f64], ratios: &[f64], q: f64, ambient_dim: usize) -> Result<LqSpectrum> {
    check_weights(weights, ratios)?;
    if !(q > 1.0 && q.is_finite()) {
        return Err(FractalError::config(format!("q must be a finite number above 1, got {q}")));
    }
    let pq: Vec<f64> = weights.iter().map(|p| p.powf(q)).collect();
    let g = |t: f64| pq.iter().zip(ratios).map(|(a, r)| a * r.powf(-t)).sum::<f64>() - 1.0;
    let dg = |t: f64| pq.iter().zip(ratios).map(|(a, r)| -a * r.powf(-t) * r.ln()).sum::<f64>();
    // g(0) = Σ pᵢ^q − 1 < 0 and g increases without bound.
    let mut hi = 1.0;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(FractalError::Internal("L^q root not bracketed".into()));
        }
    }
    let tau = bisect_newton(g, dg, 0.0, hi, RootOptions::default())
        .ok_or_else(|| FractalError::Internal("L^q root not bracketed".into()))?;
    Ok(LqSpectrum {
        q,
        tau,
        d_q: (tau / (q - 1.0)).min(ambient_dim as f64),
    })
}

/// `lim_{q→∞} T(q)/(q−1) = min log pᵢ / log rᵢ`, capped at `k`.
pub fn frostman_exponent_formula(weights: &[f64], ratios: &[f64], ambient_dim: usize) -> Result<f64> {
    check_weights(weights, ratios)?;
    Ok(weights
        .iter()
        .zip(ratios)
        .map(|(p, r)| p.ln() / r.ln())
        .fold(f64::INFINITY, f64::min)
        .min(ambient_dim as f64))
}

/// Whether the Moran-type formulas give the true exponents: on the line
/// under ESC, in any dimension under SSC or OSC.
pub(crate) fn formulas_exact(ifs: &SelfSimilarIfs) -> bool {
    let sep = ifs.declared_separation();
    sep.is_open_set_or_stronger() || (ifs.ambient_dim() == 1 && sep.implies_esc())
}

/// Assouad dimension of the support.
///
/// Under SSC/OSC this is the similarity dimension. Otherwise the ambient
/// dimension is the only safe value, returned with a warning, unless the
/// caller supplies one.
pub fn assouad_dimension(
    ifs: &SelfSimilarIfs,
    declared: Separation,
    user: Option<f64>,
) -> Result<(Exponent, Option<String>)> {
    if let Some(v) = user {
        return Ok((Exponent::user(v), None));
    }
    if declared.is_open_set_or_stronger() {
        return Ok((Exponent::exact(similarity_dimension_set(&ifs.ratios())?), None));
    }
    let k = ifs.ambient_dim() as f64;
    Ok((
        Exponent::estimated(k),
        Some(format!(
            "kappa_star set to ambient dimension {k}: no SSC/OSC declared, so the Assouad dimension may exceed the similarity dimension"
        )),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG2_LOG3: f64 = 0.630_929_753_571_457_4;

    #[test]
    fn moran_examples() {
        let s = similarity_dimension_set(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((s - LOG2_LOG3).abs() < 1e-12);
        assert!((similarity_dimension_set(&[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-12);
        assert!((similarity_dimension_set(&[0.25, 0.25]).unwrap() - 0.5).abs() < 1e-12);
        assert!(similarity_dimension_set(&[0.5]).is_err());
        assert!(similarity_dimension_set(&[0.5, 1.0]).is_err());
    }

    #[test]
    fn measure_dimension_examples() {
        let v = similarity_dimension_measure(&[0.5, 0.5], &[1.0 / 3.0; 2]).unwrap();
        assert!((v - LOG2_LOG3).abs() < 1e-14);
        let v = similarity_dimension_measure(&[0.25, 0.75], &[1.0 / 3.0; 2]).unwrap();
        let entropy = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((v - entropy / 3f64.ln()).abs() < 1e-14);
        assert!((v - 0.5120).abs() < 5e-4);
        let v = similarity_dimension_measure(&[0.5, 0.5], &[0.5, 0.25]).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn lq_examples() {
        let l = lq_spectrum(&[0.5, 0.5], &[1.0 / 3.0; 2], 2.0, 1).unwrap();
        assert!((l.tau - LOG2_LOG3).abs() < 1e-12 && (l.d_q - LOG2_LOG3).abs() < 1e-12);
        let l = lq_spectrum(&[0.5, 0.5], &[0.5; 2], 2.0, 1).unwrap();
        assert!((l.tau - 1.0).abs() < 1e-12);
        let l = lq_spectrum(&[0.25, 0.75], &[1.0 / 3.0; 2], 2.0, 1).unwrap();
        assert!((l.tau - 1.6f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!(lq_spectrum(&[0.5, 0.5], &[0.5; 2], 1.0, 1).is_err());
    }

    #[test]
    fn frostman_formula() {
        let d = frostman_exponent_formula(&[0.25, 0.75], &[1.0 / 3.0; 2], 1).unwrap();
        assert!((d - (4.0f64 / 3.0).ln() / 3f64.ln()).abs() < 1e-15);
        let d = frostman_exponent_formula(&[0.5, 0.5], &[1.0 / 3.0; 2], 1).unwrap();
        assert!((d - LOG2_LOG3).abs() < 1e-15);
    }

    #[test]
    fn assouad_cases() {
        let cantor = SelfSimilarIfs::cantor();
        let (e, w) = assouad_dimension(&cantor, Separation::Strong, None).unwrap();
        assert!((e.value - LOG2_LOG3).abs() < 1e-12 && w.is_none());
        let overlapping = SelfSimilarIfs::on_line(&[(0.6, 0.0), (0.6, 0.4)], &[0.5, 0.5]).unwrap();
        let (e, w) = assouad_dimension(&overlapping, Separation::None, None).unwrap();
        assert_eq!(e, Exponent::estimated(1.0));
        assert!(w.is_some());
        let (e, _) = assouad_dimension(&overlapping, Separation::None, Some(0.9)).unwrap();
        assert_eq!(e, Exponent::user(0.9));
    }
}
