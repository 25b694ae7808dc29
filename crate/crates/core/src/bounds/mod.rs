//! Closed-form Fourier decay exponents for nonlinear images of self-similar
//! measures, and the arithmetic conditions built on them.

mod conditions;

use serde::Serialize;

use crate::dimension::DimensionProfile;
use crate::error::{FractalError, Result};

pub use conditions::{
    high_dim_condition, log_pushforward_sigma, prop48_conditions, symmetric_thresholds, three_set_condition,
    two_set_condition, ConditionReport, Thresholds,
};

/// Two sides closer than this count as equal; strict inequalities then fail
/// with a "boundary" note.
pub const BOUNDARY_EPS: f64 = 1e-12;

/// Earlier published exponent for `x ↦ x²` of the middle-third Cantor
/// measure, reported next to ours for comparison.
pub const CANTOR_BASELINE: f64 = 0.016;

const SIGMA_FORMULA: &str = "sigma_p = (d_q + kappa_p - k) / (2p - k + 2 kappa_* + kappa_p - d_q), q = p/(p-1)";

/// `q = p/(p − 1)`, with `q = ∞` at `p = 1`.
pub fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

struct Inputs {
    d_q: f64,
    kappa_p: f64,
}

fn inputs(profile: &DimensionProfile, p: f64) -> Result<Inputs> {
    if !(1.0..=2.0).contains(&p) {
        return Err(FractalError::config(format!("p must lie in [1, 2], got {p}")));
    }
    let q = dual_exponent(p);
    let kappa_p = profile
        .kappa_p(p)
        .ok_or_else(|| FractalError::MissingExponent(format!("kappa_p at p = {p}")))?;
    let d_q = profile
        .d_q(q)
        .ok_or_else(|| FractalError::MissingExponent(format!("d_q at q = {q}")))?;
    Ok(Inputs { d_q, kappa_p })
}

/// `max(0, (d_q + κ_p − k)/(2p − k + 2κ_* + κ_p − d_q))`.
pub fn sigma_p(profile: &DimensionProfile, p: f64) -> Result<f64> {
    let Inputs { d_q, kappa_p, .. } = inputs(profile, p)?;
    let k = profile.k as f64;
    let num = d_q + kappa_p - k;
    if num <= 0.0 {
        return Ok(0.0);
    }
    let den = 2.0 * p - k + 2.0 * profile.kappa_star.value + kappa_p - d_q;
    if den <= 0.0 {
        return Err(FractalError::InconsistentProfile {
            violated: "2p - k + 2 kappa_* + kappa_p - d_q > 0".into(),
            detail: format!("denominator {den} at p = {p}"),
        });
    }
    Ok(num / den)
}

/// The γ at which the two competing exponents in the decay argument balance:
/// `γ = 2 − (d_q + κ_p − k)/(p + κ_* + κ_p − k)`, so that `(2 − γ)/γ = σ_p`.
pub fn compute_gamma(profile: &DimensionProfile, p: f64) -> Result<f64> {
    let Inputs { d_q, kappa_p, .. } = inputs(profile, p)?;
    let k = profile.k as f64;
    let num = d_q + kappa_p - k;
    if num <= 0.0 {
        return Err(FractalError::NotApplicable(format!(
            "d_q + kappa_p - k = {num} is not positive at p = {p}"
        )));
    }
    Ok(2.0 - num / (p + profile.kappa_star.value + kappa_p - k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaEntry {
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
}

/// Side conditions of the decay theorem that the profile cannot decide.
/// `None` means not checked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Hypotheses {
    /// The map's Hessian determinant does not vanish on the support.
    pub curvature_nonvanishing: Option<bool>,
    /// The rotation semigroup is non-expanding (automatic for `k ≤ 2`).
    pub non_expanding: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayBound {
    pub sigma_p_table: Vec<SigmaEntry>,
    /// Supremum of admissible decay exponents; every smaller positive value works.
    pub sigma: f64,
    pub best_p: f64,
    /// Balancing parameter at `best_p`, when `sigma > 0`.
    pub gamma: Option<f64>,
    pub applicable: bool,
    /// `κ₂/2`, the largest exponent one could hope for.
    pub conjectural_ceiling: f64,
    pub formula: &'static str,
    pub notes: Vec<String>,
}

fn is_cantor_profile(profile: &DimensionProfile) -> bool {
    let s = 2f64.ln() / 3f64.ln();
    profile.k == 1 && (profile.kappa2.value - s).abs() < 1e-9 && (profile.kappa_star.value - s).abs() < 1e-9
}

/// Decay exponent of `f(μ)` for a curved map `f`, maximised over every `p`
/// the profile has exponents for. Hypotheses are taken as unchecked.
pub fn theorem11_sigma(profile: &DimensionProfile) -> DecayBound {
    decay_bound(profile, &Hypotheses::default())
}

pub fn decay_bound(profile: &DimensionProfile, hyp: &Hypotheses) -> DecayBound {
    let k = profile.k as f64;
    let mut notes = Vec::new();
    let mut table = Vec::new();
    for p in profile.tabulated_p() {
        match sigma_p(profile, p) {
            Ok(sigma) => table.push(SigmaEntry {
                p,
                q: dual_exponent(p),
                sigma,
            }),
            Err(e) => notes.push(format!("p = {p} skipped: {e}")),
        }
    }
    if profile.kappa1.is_none() {
        notes.push("kappa_1 not supplied; the p = 1 branch is omitted".into());
    }
    let (best_p, sigma) = table
        .iter()
        .fold((2.0, 0.0), |(bp, bs), e| if e.sigma > bs { (e.p, e.sigma) } else { (bp, bs) });
    let gamma = if sigma > 0.0 { compute_gamma(profile, best_p).ok() } else { None };

    let mut applicable = true;
    if profile.kappa2.value <= k / 2.0 {
        applicable = false;
        notes.push(format!(
            "kappa_2 = {} <= k/2 = {}: no decay can be inferred, the support may lie in a subspace on which the map is linear",
            profile.kappa2.value,
            k / 2.0
        ));
    }
    match hyp.curvature_nonvanishing {
        Some(true) => {}
        Some(false) => {
            applicable = false;
            notes.push("Hessian determinant of the map vanishes on the support".into());
        }
        None => {
            applicable = false;
            notes.push("curvature of the map not verified".into());
        }
    }
    let non_expanding = hyp.non_expanding.or((profile.k <= 2).then_some(true));
    match non_expanding {
        Some(true) => {}
        Some(false) => {
            applicable = false;
            notes.push("rotation semigroup is expanding".into());
        }
        None => {
            applicable = false;
            notes.push("non-expanding condition not verified".into());
        }
    }
    if is_cantor_profile(profile) {
        notes.push(format!(
            "middle-third Cantor measure: earlier published bound for x^2 is {CANTOR_BASELINE}"
        ));
    }
    notes.push(format!(
        "conjectural ceiling kappa_2/2 = {}",
        profile.kappa2.value / 2.0
    ));
    DecayBound {
        sigma_p_table: table,
        sigma,
        best_p,
        gamma,
        applicable,
        conjectural_ceiling: profile.kappa2.value / 2.0,
        formula: SIGMA_FORMULA,
        notes,
    }
}

/// Decay exponent for pushforwards `ℝ² → ℝ²` whose derivatives of order
/// `l` are non-degenerate (holomorphic case).
///
/// Basic: `d_∞(κ₂ − 1)/(κ_* l)`. Refined: `(κ₂ − 1)/(1 + κ_* + (l − 2)κ_*/d_∞)`.
pub fn vdc_exponent(profile: &DimensionProfile, l: u32, refined: bool) -> Result<f64> {
    if profile.k != 2 {
        return Err(FractalError::Unsupported(format!(
            "this exponent is for measures on the plane, got k = {}",
            profile.k
        )));
    }
    if l < 2 {
        return Err(FractalError::config(format!("derivative order must be at least 2, got {l}")));
    }
    let (k2, ks, dinf) = (profile.kappa2.value, profile.kappa_star.value, profile.d_inf.value);
    if k2 <= 1.0 {
        return Err(FractalError::NotApplicable(format!("kappa_2 = {k2} must exceed 1")));
    }
    if refined {
        let eta = (l - 2) as f64;
        if eta > 0.0 && dinf <= 0.0 {
            return Err(FractalError::NotApplicable("refined exponent needs d_inf > 0".into()));
        }
        let extra = if eta > 0.0 { eta * ks / dinf } else { 0.0 };
        Ok((k2 - 1.0) / (1.0 + ks + extra))
    } else {
        Ok(dinf * (k2 - 1.0) / (ks * l as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> DimensionProfile {
        DimensionProfile::ad_regular(1, 2f64.ln() / 3f64.ln())
    }

    #[test]
    fn sigma_examples() {
        let s = 2f64.ln() / 3f64.ln();
        let v = sigma_p(&cantor(), 2.0).unwrap();
        assert!((v - (2.0 * s - 1.0) / (3.0 + 2.0 * s)).abs() < 1e-15);
        assert!((v - 0.061442).abs() < 1e-6);
        assert_eq!(sigma_p(&DimensionProfile::ad_regular(1, 0.5), 2.0).unwrap(), 0.0);
        let full = DimensionProfile::ad_regular(1, 1.0).with_kappa1(1.0);
        assert!((sigma_p(&full, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(sigma_p(&cantor(), 1.0), Err(FractalError::MissingExponent(_))));
        assert!(sigma_p(&cantor(), 1.5).is_err());
    }

    #[test]
    fn theorem_report() {
        let r = theorem11_sigma(&cantor());
        assert!((r.sigma - 0.061442).abs() < 1e-6);
        assert_eq!(r.best_p, 2.0);
        assert!(r.notes.iter().any(|n| n.contains("0.016")));
        assert!(!r.applicable, "curvature unchecked");
        let h = Hypotheses {
            curvature_nonvanishing: Some(true),
            non_expanding: None,
        };
        assert!(decay_bound(&cantor(), &h).applicable);

        let b5 = DimensionProfile::ad_regular(1, 4f64.ln() / 5f64.ln());
        let want = (2.0 * 4f64.ln() - 5f64.ln()) / (2.0 * 4f64.ln() + 3.0 * 5f64.ln());
        assert!((theorem11_sigma(&b5).sigma - want).abs() < 1e-15);
        assert!((want - 0.153028).abs() < 1e-6);

        let small = DimensionProfile::manual(1, 0.4, 0.4, 0.4);
        let r = decay_bound(&small, &h);
        assert!(!r.applicable);
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.gamma, None);
    }

    #[test]
    fn gamma_examples() {
        let s = 2f64.ln() / 3f64.ln();
        let g = compute_gamma(&cantor(), 2.0).unwrap();
        assert!((g - (2.0 - (2.0 * s - 1.0) / (1.0 + 2.0 * s))).abs() < 1e-15);
        assert!((g - 1.884228).abs() < 1e-6);
        assert!(((2.0 - g) / g - sigma_p(&cantor(), 2.0).unwrap()).abs() < 1e-15);
        let one = DimensionProfile::ad_regular(1, 1.0);
        let g = compute_gamma(&one, 2.0).unwrap();
        assert!((g - 5.0 / 3.0).abs() < 1e-15);
        assert!((sigma_p(&one, 2.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            compute_gamma(&DimensionProfile::ad_regular(1, 0.5), 2.0),
            Err(FractalError::NotApplicable(_))
        ));
    }

    #[test]
    fn vdc_examples() {
        let p = DimensionProfile::ad_regular(2, 1.2);
        assert!((vdc_exponent(&p, 2, false).unwrap() - 0.1).abs() < 1e-15);
        let r = vdc_exponent(&p, 2, true).unwrap();
        assert!((r - 0.2 / 2.2).abs() < 1e-15);
        assert!((r - sigma_p(&p, 2.0).unwrap()).abs() < 1e-12);
        assert!(matches!(
            vdc_exponent(&DimensionProfile::ad_regular(2, 1.0), 2, false),
            Err(FractalError::NotApplicable(_))
        ));
        assert!(vdc_exponent(&cantor(), 2, false).is_err());
    }
}
