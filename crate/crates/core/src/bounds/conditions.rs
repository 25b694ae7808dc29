//! Dimension conditions for arithmetic products of self-similar sets and
//! measures, and the symmetric thresholds they imply.

use serde::Serialize;

use super::BOUNDARY_EPS;
use crate::error::{FractalError, Result};
use crate::numerics::{bisect_newton, RootOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: &'static str,
    pub holds: bool,
    /// Left side minus right side of the deciding inequality (the best
    /// one when several variants are tried).
    pub margin: f64,
    /// Which variant decided the verdict, if any held.
    pub which: Option<String>,
    pub notes: Vec<String>,
}

/// `lhs > rhs`, except that near-equality is a boundary case and fails.
fn strict(lhs: f64, rhs: f64, notes: &mut Vec<String>, label: &str) -> bool {
    if (lhs - rhs).abs() <= BOUNDARY_EPS {
        notes.push(format!("boundary: {label} holds with equality, strict inequality fails"));
        false
    } else {
        lhs > rhs
    }
}

fn check_dim(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(FractalError::config(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// `σ(κ) = (κ − ½)/(κ + 3/2)`, the decay exponent for the log-image of an
/// AD-regular measure on the line with correlation dimension `κ`.
fn sigma_of(kappa: f64) -> f64 {
    (kappa - 0.5) / (kappa + 1.5)
}

/// `ab + max(1.5a + b, 1.5b + a) > 2.5`: positive measure for `E·F`.
pub fn two_set_condition(dim_e: f64, dim_f: f64) -> Result<ConditionReport> {
    check_dim("dim E", dim_e)?;
    check_dim("dim F", dim_f)?;
    let lhs = dim_e * dim_f + (1.5 * dim_e + dim_f).max(1.5 * dim_f + dim_e);
    let mut notes = Vec::new();
    let holds = strict(lhs, 2.5, &mut notes, "ab + max(1.5a + b, 1.5b + a) > 2.5");
    Ok(ConditionReport {
        condition: "two_set",
        holds,
        margin: lhs - 2.5,
        which: holds.then(|| "ab + max(1.5a + b, 1.5b + a) > 2.5".to_string()),
        notes,
    })
}

/// `½a + ½b + σ(c) > 1` for some assignment of the three sets to the
/// `σ` slot: non-empty interior for `E·F·G`.
pub fn three_set_condition(dim_e: f64, dim_f: f64, dim_g: f64) -> Result<ConditionReport> {
    let dims = [dim_e, dim_f, dim_g];
    for (n, v) in ["dim E", "dim F", "dim G"].iter().zip(dims) {
        check_dim(n, v)?;
    }
    let names = ['E', 'F', 'G'];
    let mut notes = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    let mut holds = false;
    let mut which = None;
    for slot in [2usize, 0, 1] {
        let c = dims[slot];
        if c <= 0.5 {
            notes.push(format!("{} cannot take the decay role: dimension {c} <= 1/2", names[slot]));
            continue;
        }
        let rest: f64 = dims.iter().enumerate().filter(|(i, _)| *i != slot).map(|(_, v)| 0.5 * v).sum();
        let lhs = rest + sigma_of(c);
        if best.map_or(true, |(m, _)| lhs - 1.0 > m) {
            best = Some((lhs - 1.0, slot));
        }
        let label = format!("decay role on {}", names[slot]);
        if !holds && strict(lhs, 1.0, &mut notes, &label) {
            holds = true;
            which = Some(label);
        }
    }
    Ok(ConditionReport {
        condition: "three_set",
        holds,
        margin: best.map_or(f64::NEG_INFINITY, |(m, _)| m),
        which,
        notes,
    })
}

/// Sufficient conditions for `μ·ν` to have an `L²` density when AD-regularity
/// is not assumed for `μ`. `a = κ₂(μ)`, `b = κ₂(ν)`.
///
/// The second condition comes from `2(2a − 1)/5 + b > 1`, i.e. `4a + 5b > 7`
/// (and symmetrically); 7 is the constant consistent with the `7/9`
/// condition, since `a = b = 7/9` gives exactly `9·7/9 = 7`.
pub fn prop48_conditions(kappa2_mu: f64, kappa2_nu: f64, nu_ad_regular: bool) -> Result<ConditionReport> {
    let (a, b) = (kappa2_mu, kappa2_nu);
    for (n, v) in [("kappa_2(mu)", a), ("kappa_2(nu)", b)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(FractalError::config(format!("{n} must lie in (0, 1], got {v}")));
        }
    }
    let mut notes = vec!["second condition uses 4a + 5b > 7; the variants '> 5' and '> 1' are inconsistent with the 7/9 condition".to_string()];
    let mut which = None;
    let mut margin = f64::NEG_INFINITY;

    let l1 = a.min(b);
    margin = margin.max(l1 - 7.0 / 9.0);
    if strict(l1, 7.0 / 9.0, &mut notes, "min(a, b) > 7/9") {
        which = Some("min(a, b) > 7/9".to_string());
    }
    let l2 = (4.0 * a + 5.0 * b).max(5.0 * a + 4.0 * b);
    margin = margin.max((l2 - 7.0) / 9.0);
    if strict(l2, 7.0, &mut notes, "max(4a + 5b, 5a + 4b) > 7") && which.is_none() {
        which = Some("max(4a + 5b, 5a + 4b) > 7".to_string());
    }
    if nu_ad_regular {
        let l3 = 2.0 * a * b + 3.0 * a + 2.0 * b;
        margin = margin.max((l3 - 5.0) / 7.0);
        if strict(l3, 5.0, &mut notes, "2ab + 3a + 2b > 5") && which.is_none() {
            which = Some("2ab + 3a + 2b > 5 (nu AD-regular)".to_string());
        }
    } else {
        notes.push("third condition needs nu AD-regular; skipped".into());
    }
    Ok(ConditionReport {
        condition: "prop48",
        holds: which.is_some(),
        margin,
        which,
        notes,
    })
}

/// `σ = (κ₂ − ½)/(κ₂ + 3/2)` for the image of a measure on `(0, ∞)` under `log`.
pub fn log_pushforward_sigma(kappa2: f64) -> Result<f64> {
    if !(kappa2 > 0.5) {
        return Err(FractalError::NotApplicable(format!("kappa_2 = {kappa2} must exceed 1/2")));
    }
    if kappa2 > 1.0 {
        return Err(FractalError::config(format!("kappa_2 = {kappa2} exceeds 1 on the line")));
    }
    Ok(sigma_of(kappa2))
}

/// `κ₂ > 2 + k/2` for `k ≥ 5`: the image of an AD-regular non-expanding
/// measure under a map with non-zero Hessian determinant has an `L²` density.
pub fn high_dim_condition(k: usize, kappa2: f64) -> Result<ConditionReport> {
    if k < 5 {
        return Err(FractalError::config(format!("condition is stated for k >= 5, got {k}")));
    }
    let kf = k as f64;
    if !(0.0..=kf).contains(&kappa2) {
        return Err(FractalError::config(format!("kappa_2 must lie in [0, {k}], got {kappa2}")));
    }
    let rhs = 2.0 + kf / 2.0;
    let mut notes = Vec::new();
    let holds = strict(kappa2, rhs, &mut notes, "kappa_2 > 2 + k/2");
    if holds {
        let s = kappa2;
        let tilde = (s - kf / 2.0) / (2.0 + s - kf / 2.0);
        notes.push(format!("decay exponent of the image {tilde} > 1/2, so its density is in L^2"));
    }
    Ok(ConditionReport {
        condition: "high_dim",
        holds,
        margin: kappa2 - rhs,
        which: holds.then(|| "kappa_2 > 2 + k/2".to_string()),
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Common dimension above which two equal-dimension sets have a product of positive measure.
    pub t2: f64,
    /// Common dimension above which three equal-dimension sets have a product with interior.
    pub t3: f64,
}

/// Solves `2σ(κ) + κ = 1` and `σ(κ) + κ = 1` on `(1/2, 1)` by bracketed root finding.
pub fn symmetric_thresholds() -> Thresholds {
    let dsig = |k: f64| 2.0 / ((k + 1.5) * (k + 1.5));
    let opts = RootOptions::default();
    let t2 = bisect_newton(|k| 2.0 * sigma_of(k) + k - 1.0, |k| 2.0 * dsig(k) + 1.0, 0.5, 1.0, opts)
        .expect("2 sigma + kappa - 1 changes sign on [1/2, 1]");
    let t3 = bisect_newton(|k| sigma_of(k) + k - 1.0, |k| dsig(k) + 1.0, 0.5, 1.0, opts)
        .expect("sigma + kappa - 1 changes sign on [1/2, 1]");
    Thresholds { t2, t3 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_set_examples() {
        assert!(two_set_condition(0.8, 0.8).unwrap().holds);
        assert!(two_set_condition(0.7656, 0.7656).unwrap().holds);
        assert!(!two_set_condition(0.5, 0.5).unwrap().holds);
        assert!(two_set_condition(1.2, 0.5).is_err());
    }

    #[test]
    fn three_set_examples() {
        assert!(three_set_condition(0.851, 0.851, 0.851).unwrap().holds);
        assert!(three_set_condition(1.0, 1.0, 0.51).unwrap().holds);
        assert!(!three_set_condition(0.6, 0.6, 0.6).unwrap().holds);
        // the decay role moves to whichever set can take it
        assert!(three_set_condition(0.51, 1.0, 1.0).unwrap().holds);
    }

    #[test]
    fn prop48_examples() {
        let r = prop48_conditions(0.78, 0.78, false).unwrap();
        assert!(r.holds);
        assert_eq!(r.which.as_deref(), Some("min(a, b) > 7/9"));
        let r = prop48_conditions(0.9, 0.7, true).unwrap();
        assert!(r.holds);
        let r = prop48_conditions(0.9, 0.6, true).unwrap();
        // 2·0.54 + 2.7 + 1.2 = 4.98; 4.5 + 2.4 = 6.9
        assert!(!r.holds);
        let b = 7.0 / 9.0;
        let r = prop48_conditions(b, b, false).unwrap();
        assert!(!r.holds);
        assert!(r.notes.iter().any(|n| n.starts_with("boundary")));
    }

    #[test]
    fn thresholds() {
        let t = symmetric_thresholds();
        assert!((t.t2 - (65f64.sqrt() - 5.0) / 4.0).abs() < 1e-12);
        assert!((t.t3 - (41f64.sqrt() - 3.0) / 4.0).abs() < 1e-12);
        assert!((t.t2 * t.t2 + 2.5 * t.t2 - 2.5).abs() < 1e-12);
        assert!((t.t3 * t.t3 + 1.5 * t.t3 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn log_sigma_examples() {
        let s = 2f64.ln() / 3f64.ln();
        assert!((log_pushforward_sigma(s).unwrap() - 0.061442).abs() < 1e-6);
        assert!((log_pushforward_sigma(1.0).unwrap() - 0.2).abs() < 1e-15);
        let k = 0.765564;
        let v = log_pushforward_sigma(k).unwrap();
        assert!((v - 0.117218).abs() < 1e-6);
        assert!((2.0 * v + k - 1.0).abs() < 1e-6);
        assert!(log_pushforward_sigma(0.5).is_err());
    }

    #[test]
    fn high_dim_examples() {
        assert!(high_dim_condition(5, 4.6).unwrap().holds);
        assert!(!high_dim_condition(5, 4.5).unwrap().holds);
        assert!(high_dim_condition(6, 5.2).unwrap().holds);
        assert!(high_dim_condition(4, 3.5).is_err());
    }
}
