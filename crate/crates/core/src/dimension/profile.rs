use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    assouad_dimension, correlation_dimension_estimate, formulas_exact, frostman_exponent_formula, lq_spectrum,
    similarity_dimension_measure, similarity_dimension_set, Exponent, Provenance, ScaleRange,
};
use crate::error::{FractalError, Result};
use crate::ifs::SelfSimilarIfs;

/// Slack for the ordering chain `κ₁ ≤ d_∞ ≤ κ₂ ≤ κ_* ≤ k`.
const CHAIN_SLACK: f64 = 1e-12;
/// Tolerance for the AD-regular equalities.
const AD_TOL: f64 = 1e-9;
/// `q` values tabulated when the `L^q` formula is exact (`p = q/(q−1)`).
const DEFAULT_Q_GRID: [f64; 6] = [3.0, 4.0, 5.0, 6.0, 8.0, 11.0];
/// Pairs used when κ₂ has to be estimated.
const ESTIMATE_PAIRS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabulatedExponent {
    pub order: f64,
    pub value: f64,
    pub provenance: Provenance,
}

/// User-supplied exponent values. `kappa_p` and `d_q` are keyed by the
/// order written as a decimal string (`"1.5"`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub kappa_p: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub d_q: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ad_regular: Option<bool>,
}

impl ProfileOverrides {
    pub fn is_empty(&self) -> bool {
        *self == ProfileOverrides::default()
    }

    fn parsed(map: &BTreeMap<String, f64>, what: &str) -> Result<Vec<(f64, f64)>> {
        map.iter()
            .map(|(k, &v)| {
                k.trim()
                    .parse::<f64>()
                    .map(|o| (o, v))
                    .map_err(|_| FractalError::config(format!("{what} key `{k}` is not a number")))
            })
            .collect()
    }
}

/// Exponents of a measure together with where each value came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionProfile {
    pub k: usize,
    pub kappa2: Exponent,
    pub kappa_star: Exponent,
    pub d_inf: Exponent,
    pub kappa1: Option<Exponent>,
    /// Fourier `l^p` dimensions for `p` strictly between 1 and 2.
    pub kappa_p: Vec<TabulatedExponent>,
    /// `L^q` dimensions for finite `q > 1`, `q ≠ 2`.
    pub d_q: Vec<TabulatedExponent>,
    pub s_sim_set: Option<f64>,
    pub s_sim_meas: Option<f64>,
    pub ad_regular: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn same_order(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

fn upsert(table: &mut Vec<TabulatedExponent>, entry: TabulatedExponent) {
    match table.iter_mut().find(|t| same_order(t.order, entry.order)) {
        Some(t) => *t = entry,
        None => table.push(entry),
    }
    table.sort_by(|a, b| a.order.total_cmp(&b.order));
}

impl DimensionProfile {
    /// A profile entered by hand. Call [`DimensionProfile::validated`] before use.
    pub fn manual(k: usize, kappa2: f64, kappa_star: f64, d_inf: f64) -> Self {
        DimensionProfile {
            k,
            kappa2: Exponent::user(kappa2),
            kappa_star: Exponent::user(kappa_star),
            d_inf: Exponent::user(d_inf),
            kappa1: None,
            kappa_p: Vec::new(),
            d_q: Vec::new(),
            s_sim_set: None,
            s_sim_meas: None,
            ad_regular: false,
            warnings: Vec::new(),
        }
    }

    /// AD-regular profile with all core exponents equal to `s`.
    pub fn ad_regular(k: usize, s: f64) -> Self {
        let mut p = Self::manual(k, s, s, s);
        p.ad_regular = true;
        p.s_sim_set = Some(s);
        p
    }

    pub fn with_kappa1(mut self, v: f64) -> Self {
        self.kappa1 = Some(Exponent::user(v));
        self
    }

    pub fn with_kappa_p(mut self, p: f64, v: f64) -> Self {
        self.set_kappa_p(p, Exponent::user(v));
        self
    }

    pub fn with_d_q(mut self, q: f64, v: f64) -> Self {
        self.set_d_q(q, Exponent::user(v));
        self
    }

    fn set_kappa_p(&mut self, p: f64, e: Exponent) {
        if same_order(p, 1.0) {
            self.kappa1 = Some(e);
        } else if same_order(p, 2.0) {
            self.kappa2 = e;
        } else {
            upsert(
                &mut self.kappa_p,
                TabulatedExponent {
                    order: p,
                    value: e.value,
                    provenance: e.provenance,
                },
            );
        }
    }

    fn set_d_q(&mut self, q: f64, e: Exponent) {
        if same_order(q, 2.0) {
            // d₂ is the correlation dimension κ₂.
            self.kappa2 = e;
        } else if q.is_infinite() {
            self.d_inf = e;
        } else {
            upsert(
                &mut self.d_q,
                TabulatedExponent {
                    order: q,
                    value: e.value,
                    provenance: e.provenance,
                },
            );
        }
    }

    /// Fourier `l^p` dimension, if known (`p = 1` is κ₁, `p = 2` is κ₂).
    pub fn kappa_p(&self, p: f64) -> Option<f64> {
        if same_order(p, 1.0) {
            self.kappa1.map(|e| e.value)
        } else if same_order(p, 2.0) {
            Some(self.kappa2.value)
        } else {
            self.kappa_p.iter().find(|t| same_order(t.order, p)).map(|t| t.value)
        }
    }

    /// `d_q` for `q > 1`; `q = ∞` is the Frostman exponent and `q = 2` is κ₂.
    pub fn d_q(&self, q: f64) -> Option<f64> {
        if q.is_infinite() {
            Some(self.d_inf.value)
        } else if same_order(q, 2.0) {
            Some(self.kappa2.value)
        } else {
            self.d_q.iter().find(|t| same_order(t.order, q)).map(|t| t.value)
        }
    }

    /// All `p ∈ [1, 2]` for which `κ_p` is known.
    pub fn tabulated_p(&self) -> Vec<f64> {
        let mut ps: Vec<f64> = self.kappa1.iter().map(|_| 1.0).collect();
        ps.extend(self.kappa_p.iter().map(|t| t.order).filter(|p| (1.0..=2.0).contains(p)));
        ps.push(2.0);
        ps
    }

    pub fn apply_overrides(&mut self, o: &ProfileOverrides) -> Result<()> {
        if let Some(v) = o.kappa1 {
            self.kappa1 = Some(Exponent::user(v));
        }
        if let Some(v) = o.kappa2 {
            self.kappa2 = Exponent::user(v);
        }
        if let Some(v) = o.kappa_star {
            self.kappa_star = Exponent::user(v);
        }
        if let Some(v) = o.d_inf {
            self.d_inf = Exponent::user(v);
        }
        for (p, v) in ProfileOverrides::parsed(&o.kappa_p, "kappa_p")? {
            if !(1.0..=2.0).contains(&p) {
                return Err(FractalError::config(format!("kappa_p order {p} is outside [1, 2]")));
            }
            self.set_kappa_p(p, Exponent::user(v));
        }
        for (q, v) in ProfileOverrides::parsed(&o.d_q, "d_q")? {
            if !(q > 1.0) {
                return Err(FractalError::config(format!("d_q order {q} must exceed 1")));
            }
            self.set_d_q(q, Exponent::user(v));
        }
        if let Some(flag) = o.ad_regular {
            self.ad_regular = flag;
        }
        Ok(())
    }

    /// Profile built only from user values. `kappa2`, `kappa_star` and `d_inf` are required.
    pub fn from_overrides(k: usize, o: &ProfileOverrides) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| FractalError::MissingExponent(format!("{name} must be supplied when no IFS is given")))
        };
        if k == 0 {
            return Err(FractalError::config("ambient dimension k must be positive"));
        }
        let mut p = Self::manual(k, need(o.kappa2, "kappa2")?, need(o.kappa_star, "kappa_star")?, need(o.d_inf, "d_inf")?);
        p.apply_overrides(o)?;
        p.validated()
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Checks the ordering chain, AD-regular equalities and the monotonicity
    /// of tabulated `l^p` and `L^q` values. The error names the first
    /// violated relation.
    pub fn validate(&self) -> Result<()> {
        let fail = |violated: &str, detail: String| {
            Err(FractalError::InconsistentProfile {
                violated: violated.to_string(),
                detail,
            })
        };
        let k = self.k as f64;
        let named = [
            ("kappa2", Some(self.kappa2.value)),
            ("kappa_star", Some(self.kappa_star.value)),
            ("d_inf", Some(self.d_inf.value)),
            ("kappa1", self.kappa1.map(|e| e.value)),
        ];
        for (name, v) in named {
            if let Some(v) = v {
                if !v.is_finite() {
                    return fail(&format!("{name} finite"), format!("{name} = {v}"));
                }
            }
        }
        if let Some(k1) = self.kappa1 {
            if k1.value < -CHAIN_SLACK {
                return fail("0 <= kappa1", format!("kappa1 = {}", k1.value));
            }
            if k1.value > self.d_inf.value + CHAIN_SLACK {
                return fail("kappa1 <= d_inf", format!("kappa1 = {}, d_inf = {}", k1.value, self.d_inf.value));
            }
        }
        if self.d_inf.value < -CHAIN_SLACK {
            return fail("0 <= d_inf", format!("d_inf = {}", self.d_inf.value));
        }
        if self.d_inf.value > self.kappa2.value + CHAIN_SLACK {
            return fail(
                "d_inf <= kappa2",
                format!("d_inf = {}, kappa2 = {}", self.d_inf.value, self.kappa2.value),
            );
        }
        if self.kappa2.value > self.kappa_star.value + CHAIN_SLACK {
            return fail(
                "kappa2 <= kappa_star",
                format!("kappa2 = {}, kappa_star = {}", self.kappa2.value, self.kappa_star.value),
            );
        }
        if self.kappa_star.value > k + CHAIN_SLACK {
            return fail("kappa_star <= k", format!("kappa_star = {}, k = {}", self.kappa_star.value, self.k));
        }
        if self.ad_regular {
            let s = self.s_sim_set.unwrap_or(self.kappa2.value);
            for (name, v) in [
                ("kappa2", self.kappa2.value),
                ("d_inf", self.d_inf.value),
                ("kappa_star", self.kappa_star.value),
            ] {
                if (v - s).abs() > AD_TOL {
                    return fail(
                        &format!("ad_regular => {name} = s"),
                        format!("{name} = {v}, s = {s}"),
                    );
                }
            }
        }

        // p/q·κ_q ≤ κ_p ≤ κ_q for p ≤ q.
        let mut lp: Vec<(f64, f64)> = self.tabulated_p().into_iter().filter_map(|p| self.kappa_p(p).map(|v| (p, v))).collect();
        lp.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, &(p, kp)) in lp.iter().enumerate() {
            if !kp.is_finite() || kp < -CHAIN_SLACK || kp > k + CHAIN_SLACK {
                return fail("0 <= kappa_p <= k", format!("kappa_{p} = {kp}"));
            }
            for &(q, kq) in &lp[i + 1..] {
                if kp > kq + CHAIN_SLACK {
                    return fail("kappa_p <= kappa_q for p <= q", format!("kappa_{p} = {kp}, kappa_{q} = {kq}"));
                }
                if p / q * kq > kp + CHAIN_SLACK {
                    return fail(
                        "(p/q) kappa_q <= kappa_p for p <= q",
                        format!("kappa_{p} = {kp}, kappa_{q} = {kq}"),
                    );
                }
            }
        }

        // d_q is non-increasing in q, with d₂ = κ₂ and d_∞ as the limit.
        let mut dq: Vec<(f64, f64)> = self.d_q.iter().map(|t| (t.order, t.value)).collect();
        dq.push((2.0, self.kappa2.value));
        dq.push((f64::INFINITY, self.d_inf.value));
        dq.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in dq.windows(2) {
            let ((q1, v1), (q2, v2)) = (w[0], w[1]);
            if !v1.is_finite() || v1 < -CHAIN_SLACK || v1 > k + CHAIN_SLACK {
                return fail("0 <= d_q <= k", format!("d_{q1} = {v1}"));
            }
            if v2 > v1 + CHAIN_SLACK {
                return fail("d_q non-increasing in q", format!("d_{q1} = {v1}, d_{q2} = {v2}"));
            }
        }
        Ok(())
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let prov = |p: Provenance| match p {
            Provenance::ExactUnderSeparation => "exact_under_separation",
            Provenance::Estimated => "estimated",
            Provenance::UserSupplied => "user_supplied",
        };
        let _ = writeln!(out, "{:<12} {:>10}  provenance", "exponent", "value");
        let mut row = |name: &str, e: Exponent| {
            let _ = writeln!(out, "{:<12} {:>10.6}  {}", name, e.value, prov(e.provenance));
        };
        row("kappa2", self.kappa2);
        row("kappa_star", self.kappa_star);
        row("d_inf", self.d_inf);
        match self.kappa1 {
            Some(e) => row("kappa1", e),
            None => {
                let _ = writeln!(out, "{:<12} {:>10}  -", "kappa1", "unset");
            }
        }
        for t in &self.kappa_p {
            let _ = writeln!(out, "{:<12} {:>10.6}  {}", format!("kappa_{}", t.order), t.value, prov(t.provenance));
        }
        for t in &self.d_q {
            let _ = writeln!(out, "{:<12} {:>10.6}  {}", format!("d_{}", t.order), t.value, prov(t.provenance));
        }
        if let Some(s) = self.s_sim_set {
            let _ = writeln!(out, "{:<12} {:>10.6}", "s", s);
        }
        if let Some(s) = self.s_sim_meas {
            let _ = writeln!(out, "{:<12} {:>10.6}", "kappa_sim", s);
        }
        let _ = writeln!(out, "{:<12} {:>10}", "ad_regular", self.ad_regular);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Fills every exponent of the IFS measure: closed forms where the declared
/// separation makes them exact, conservative or estimated values otherwise,
/// then user overrides, then validation.
pub fn build_profile(ifs: &SelfSimilarIfs, overrides: &ProfileOverrides) -> Result<DimensionProfile> {
    let k = ifs.ambient_dim();
    let ratios = ifs.ratios();
    let weights = ifs.weights();
    let s = similarity_dimension_set(&ratios)?;
    let s_meas = similarity_dimension_measure(weights, &ratios)?;
    let sep = ifs.declared_separation();
    let exact = formulas_exact(ifs);
    let natural = weights.iter().zip(&ratios).all(|(p, r)| (p - r.powf(s)).abs() <= AD_TOL);
    let ad_regular = sep.is_open_set_or_stronger() && natural;
    let mut warnings = Vec::new();

    let (kappa_star, warn) = assouad_dimension(ifs, sep, None)?;
    warnings.extend(warn);

    let (kappa2, d_inf, d_q) = if ad_regular {
        let s_cap = s.min(k as f64);
        (Exponent::exact(s_cap), Exponent::exact(s_cap), lq_table(weights, &ratios, k, Provenance::ExactUnderSeparation)?)
    } else if exact {
        let d2 = lq_spectrum(weights, &ratios, 2.0, k)?.d_q;
        let dinf = frostman_exponent_formula(weights, &ratios, k)?;
        (Exponent::exact(d2), Exponent::exact(dinf), lq_table(weights, &ratios, k, Provenance::ExactUnderSeparation)?)
    } else {
        let upper = lq_spectrum(weights, &ratios, 2.0, k)?.d_q;
        let diam = ifs.hull().diameter();
        let coarse = ((1.0 / diam).log2().ceil().max(0.0) as u32) + 3;
        let est = correlation_dimension_estimate(ifs, ESTIMATE_PAIRS, ScaleRange::new(coarse, coarse + 8), 0)?;
        warnings.push(format!(
            "kappa2 estimated by pair correlation ({:.4} ± {:.4}); no separation declared",
            est.estimate, est.stderr
        ));
        warnings.push("d_inf set to 0: no lower bound for the Frostman exponent without separation".into());
        let kappa2 = est.estimate.clamp(0.0, upper).min(kappa_star.value);
        (Exponent::estimated(kappa2), Exponent::estimated(0.0), Vec::new())
    };

    let mut profile = DimensionProfile {
        k,
        kappa2,
        kappa_star,
        d_inf,
        kappa1: None,
        kappa_p: Vec::new(),
        d_q,
        s_sim_set: Some(s),
        s_sim_meas: Some(s_meas),
        ad_regular,
        warnings,
    };
    profile.apply_overrides(overrides)?;
    profile.validated()
}

fn lq_table(weights: &[f64], ratios: &[f64], k: usize, provenance: Provenance) -> Result<Vec<TabulatedExponent>> {
    DEFAULT_Q_GRID
        .iter()
        .map(|&q| {
            Ok(TabulatedExponent {
                order: q,
                value: lq_spectrum(weights, ratios, q, k)?.d_q,
                provenance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::Separation;

    #[test]
    fn cantor_profile() {
        let p = build_profile(&SelfSimilarIfs::cantor(), &ProfileOverrides::default()).unwrap();
        let s = 2f64.ln() / 3f64.ln();
        assert!(p.ad_regular);
        for e in [p.kappa2, p.kappa_star, p.d_inf] {
            assert!((e.value - s).abs() < 1e-12);
            assert_eq!(e.provenance, Provenance::ExactUnderSeparation);
        }
        assert!(p.kappa1.is_none());
    }

    #[test]
    fn missing_digit_profile() {
        let ifs = SelfSimilarIfs::missing_digit(5, &[0, 1, 2, 3]).unwrap();
        let p = build_profile(&ifs, &ProfileOverrides::default()).unwrap();
        let s = 4f64.ln() / 5f64.ln();
        assert!((p.kappa2.value - s).abs() < 1e-12 && (p.kappa_star.value - s).abs() < 1e-12);
        assert!((s - 0.861353).abs() < 1e-6);
    }

    #[test]
    fn non_natural_weights_use_lq_formulas() {
        let ifs = SelfSimilarIfs::on_line(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)], &[0.25, 0.75])
            .unwrap()
            .declare(Separation::Strong);
        let p = build_profile(&ifs, &ProfileOverrides::default()).unwrap();
        assert!(!p.ad_regular);
        assert!((p.kappa2.value - 1.6f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((p.d_inf.value - (4.0f64 / 3.0).ln() / 3f64.ln()).abs() < 1e-12);
        assert!(p.d_q.windows(2).all(|w| w[1].value <= w[0].value));
    }

    #[test]
    fn overlapping_profile_is_conservative() {
        let ifs = SelfSimilarIfs::on_line(&[(0.6, 0.0), (0.6, 0.4)], &[0.5, 0.5]).unwrap();
        let p = build_profile(&ifs, &ProfileOverrides::default()).unwrap();
        assert_eq!(p.kappa_star, Exponent::estimated(1.0));
        assert_eq!(p.kappa2.provenance, Provenance::Estimated);
        assert!(p.kappa2.value > 0.8 && p.kappa2.value <= 1.0);
        assert!(!p.warnings.is_empty());
    }

    #[test]
    fn override_breaking_chain_is_rejected() {
        let ifs = SelfSimilarIfs::on_line(&[(0.6, 0.0), (0.6, 0.4)], &[0.5, 0.5]).unwrap();
        let o = ProfileOverrides {
            kappa1: Some(0.7),
            d_inf: Some(0.6),
            ..Default::default()
        };
        match build_profile(&ifs, &o) {
            Err(FractalError::InconsistentProfile { violated, .. }) => assert_eq!(violated, "kappa1 <= d_inf"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ad_regular_equalities_are_enforced() {
        let o = ProfileOverrides {
            kappa_star: Some(0.9),
            ..Default::default()
        };
        let err = build_profile(&SelfSimilarIfs::cantor(), &o).unwrap_err();
        assert!(err.to_string().contains("ad_regular"), "{err}");
    }

    #[test]
    fn lp_monotonicity() {
        let ok = DimensionProfile::manual(1, 0.8, 0.9, 0.7).with_kappa1(0.5).with_kappa_p(1.5, 0.7);
        assert!(ok.validate().is_ok());
        let bad = DimensionProfile::manual(1, 0.8, 0.9, 0.7).with_kappa_p(1.5, 0.3);
        let err = bad.validate().unwrap_err();
        assert!(err.to_string().contains("(p/q) kappa_q <= kappa_p"), "{err}");
    }

    #[test]
    fn profile_only_from_user_values() {
        let o: ProfileOverrides = serde_json::from_str(r#"{"kappa2":0.8,"kappa_star":0.9,"d_inf":0.7}"#).unwrap();
        let p = DimensionProfile::from_overrides(1, &o).unwrap();
        assert_eq!(p.kappa2, Exponent::user(0.8));
        let missing: ProfileOverrides = serde_json::from_str(r#"{"kappa2":0.8}"#).unwrap();
        assert!(matches!(
            DimensionProfile::from_overrides(1, &missing),
            Err(FractalError::MissingExponent(_))
        ));
    }
}
