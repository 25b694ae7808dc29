//! Self-similar iterated function systems: representation, validation,
//! cylinder decompositions and structural diagnostics.

mod cylinder;
mod file;
mod sampling;
mod structure;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FractalError, Result};

pub use cylinder::{CylinderWord, StoppingDecomposition};
pub use file::{IfsFile, MapEntry, Scalar, WeightSpec};
pub use structure::{porosity_flag, ExpansionVerdict, SeparationReport};
pub(crate) use sampling::substream;

/// Maximum entry of `OᵀO − I` accepted for an orientation matrix.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;
/// Tolerance used when deduplicating orientation products.
pub const DEDUP_TOL: f64 = 1e-8;
/// Default cap on enumerated cylinder leaves.
pub const DEFAULT_LEAF_BUDGET: u64 = 10_000_000;

/// Enumeration limits. Exceeding a limit is an error, never a silent truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_leaves: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_leaves: DEFAULT_LEAF_BUDGET,
        }
    }
}

impl Budget {
    pub fn new(max_leaves: u64) -> Self {
        Budget { max_leaves }
    }

    /// Reads `FRACTAL_FOURIER_BUDGET`, falling back to the default.
    pub fn from_env() -> Result<Self> {
        match std::env::var("FRACTAL_FOURIER_BUDGET") {
            Ok(v) => v
                .trim()
                .parse::<u64>()
                .ok()
                .filter(|&n| n > 0)
                .map(Budget::new)
                .ok_or_else(|| {
                    FractalError::config(format!("FRACTAL_FOURIER_BUDGET must be a positive integer, got `{v}`"))
                }),
            Err(_) => Ok(Budget::default()),
        }
    }

    pub(crate) fn exceeded(&self) -> FractalError {
        FractalError::ResourceExceeded {
            budget: "leaf budget (FRACTAL_FOURIER_BUDGET)",
            limit: self.max_leaves,
        }
    }
}

/// Separation condition declared by the user. Never verified, only trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Separation {
    #[serde(rename = "SSC")]
    Strong,
    #[serde(rename = "OSC")]
    OpenSet,
    #[serde(rename = "ESC")]
    Exponential,
    #[default]
    #[serde(rename = "none")]
    None,
}

impl Separation {
    /// SSC and OSC give `dim = similarity dimension` and AD-regularity for natural weights.
    pub fn is_open_set_or_stronger(self) -> bool {
        matches!(self, Separation::Strong | Separation::OpenSet)
    }

    /// SSC ⇒ OSC ⇒ ESC (on the line).
    pub fn implies_esc(self) -> bool {
        !matches!(self, Separation::None)
    }

    /// SSC and OSC imply the weak separation condition.
    pub fn implies_wsc(self) -> bool {
        self.is_open_set_or_stronger()
    }
}

/// A contracting similarity `x ↦ ratio · orientation · x + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    ratio: f64,
    orientation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl SimilarityMap {
    pub fn new(ratio: f64, orientation: DMatrix<f64>, translation: DVector<f64>) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(FractalError::invalid(format!("ratio {ratio} is not in (0, 1)")));
        }
        let k = translation.len();
        if k == 0 {
            return Err(FractalError::invalid("translation must be non-empty"));
        }
        if orientation.nrows() != k || orientation.ncols() != k {
            return Err(FractalError::invalid(format!(
                "orientation is {}x{} but translation has length {k}",
                orientation.nrows(),
                orientation.ncols()
            )));
        }
        if orientation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(FractalError::invalid("non-finite entry in map"));
        }
        let defect = (orientation.transpose() * &orientation - DMatrix::identity(k, k)).amax();
        if defect > ORTHOGONALITY_TOL {
            return Err(FractalError::invalid(format!(
                "orientation is not orthogonal (max |OᵀO − I| = {defect:.3e})"
            )));
        }
        Ok(SimilarityMap {
            ratio,
            orientation,
            translation,
        })
    }

    /// One-dimensional map `x ↦ ratio·x + translation`.
    pub fn line(ratio: f64, translation: f64) -> Result<Self> {
        Self::new(ratio, DMatrix::identity(1, 1), DVector::from_element(1, translation))
    }

    /// Map without rotation in `ℝ^k`.
    pub fn unrotated(ratio: f64, translation: &[f64]) -> Result<Self> {
        let k = translation.len();
        Self::new(ratio, DMatrix::identity(k, k), DVector::from_column_slice(translation))
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn orientation(&self) -> &DMatrix<f64> {
        &self.orientation
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    /// `r·O`.
    pub fn linear_part(&self) -> DMatrix<f64> {
        &self.orientation * self.ratio
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.orientation * x * self.ratio + &self.translation
    }

    /// The unique fixed point, from `(I − rO) x = t`.
    pub fn fixed_point(&self) -> DVector<f64> {
        let k = self.dim();
        let a = DMatrix::identity(k, k) - self.linear_part();
        // I − rO is invertible because ‖rO‖ = r < 1.
        a.lu()
            .solve(&self.translation)
            .expect("I - rO is nonsingular for a contraction")
    }
}

/// Free-function form of [`SimilarityMap::fixed_point`].
pub fn fixed_point(map: &SimilarityMap) -> DVector<f64> {
    map.fixed_point()
}

/// A ball certified to contain the attractor, together with the barycenter
/// and second moment of the self-similar measure about it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportHull {
    /// Barycenter of μ (solves `m = Σ pᵢ fᵢ(m)`).
    pub center: Vec<f64>,
    /// Radius `R` with `fᵢ(B(c,R)) ⊂ B(c,R)` for all maps.
    pub radius: f64,
    /// Upper bound for `∫ |x − c|² dμ`.
    pub second_moment: f64,
    /// Upper bound for `|c − m|` due to rounding in the linear solve.
    pub center_error: f64,
}

impl SupportHull {
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains_ball(&self, center: &[f64], radius: f64) -> bool {
        let d: f64 = self
            .center
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        d + self.radius <= radius * (1.0 + 1e-12) + 1e-15
    }

    /// Interval `[c − R, c + R]` of a one-dimensional hull.
    pub fn interval(&self) -> (f64, f64) {
        (self.center[0] - self.radius, self.center[0] + self.radius)
    }
}

/// Maps stored as flat row-major arrays for the evaluation loops.
#[derive(Debug, Clone)]
pub(crate) struct FlatMap {
    pub ratio: f64,
    pub weight: f64,
    /// `O` row-major, `k×k`.
    pub orientation: Vec<f64>,
    pub translation: Vec<f64>,
}

impl FlatMap {
    /// `out = r Oᵀ η`.
    #[inline]
    pub fn pull_back_frequency(&self, eta: &[f64], out: &mut [f64]) {
        let k = eta.len();
        if k == 1 {
            out[0] = self.ratio * self.orientation[0] * eta[0];
            return;
        }
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, e) in eta.iter().enumerate() {
                acc += self.orientation[i * k + j] * e;
            }
            *o = self.ratio * acc;
        }
    }

    /// `out = r O x + t`.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let k = x.len();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += self.orientation[i * k + j] * xj;
            }
            *o = self.ratio * acc + self.translation[i];
        }
    }
}

/// A validated self-similar IFS with probability weights.
#[derive(Debug, Clone)]
pub struct SelfSimilarIfs {
    maps: Vec<SimilarityMap>,
    weights: Vec<f64>,
    ambient_dim: usize,
    declared_separation: Separation,
    hull: SupportHull,
    flat: Vec<FlatMap>,
}

impl SelfSimilarIfs {
    pub fn new(maps: Vec<SimilarityMap>, weights: Vec<f64>) -> Result<Self> {
        Self::with_separation(maps, weights, Separation::None)
    }

    pub fn with_separation(maps: Vec<SimilarityMap>, weights: Vec<f64>, declared: Separation) -> Result<Self> {
        if maps.len() < 2 {
            return Err(FractalError::invalid(format!("need at least 2 maps, got {}", maps.len())));
        }
        if weights.len() != maps.len() {
            return Err(FractalError::invalid(format!(
                "{} maps but {} weights",
                maps.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0 && w < 1.0)) {
            return Err(FractalError::invalid(format!("weight {w} is not in (0, 1)")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FractalError::invalid(format!("weights must sum to 1 (sum = {total})")));
        }
        let k = maps[0].dim();
        if let Some(m) = maps.iter().find(|m| m.dim() != k) {
            return Err(FractalError::invalid(format!(
                "maps live in different dimensions ({} and {k})",
                m.dim()
            )));
        }
        let fixed: Vec<DVector<f64>> = maps.iter().map(SimilarityMap::fixed_point).collect();
        let all_shared = fixed.iter().all(|p| (p - &fixed[0]).norm() < 1e-12);
        if all_shared {
            return Err(FractalError::invalid(
                "all maps share a common fixed point; the measure would be a single atom",
            ));
        }
        let flat = maps
            .iter()
            .zip(&weights)
            .map(|(m, &w)| FlatMap {
                ratio: m.ratio,
                weight: w,
                orientation: m.orientation.transpose().as_slice().to_vec(),
                translation: m.translation.as_slice().to_vec(),
            })
            .collect();
        let hull = compute_hull(&maps, &weights);
        Ok(SelfSimilarIfs {
            maps,
            weights,
            ambient_dim: k,
            declared_separation: declared,
            hull,
            flat,
        })
    }

    /// One-dimensional IFS from `(ratio, translation)` pairs and weights.
    pub fn on_line(maps: &[(f64, f64)], weights: &[f64]) -> Result<Self> {
        let maps = maps
            .iter()
            .map(|&(r, t)| SimilarityMap::line(r, t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(maps, weights.to_vec())
    }

    /// Middle-third Cantor IFS `{x/3, x/3 + 2/3}` with equal weights and SSC.
    pub fn cantor() -> Self {
        Self::on_line(&[(1.0 / 3.0, 0.0), (1.0 / 3.0, 2.0 / 3.0)], &[0.5, 0.5])
            .expect("valid")
            .declare(Separation::Strong)
    }

    /// `{x/2, x/2 + 1/2}` with equal weights: Lebesgue measure on `[0, 1]`.
    pub fn uniform_unit() -> Self {
        Self::on_line(&[(0.5, 0.0), (0.5, 0.5)], &[0.5, 0.5])
            .expect("valid")
            .declare(Separation::OpenSet)
    }

    /// Missing-digit IFS in base `b` keeping `digits`, equal weights, OSC.
    pub fn missing_digit(base: u32, digits: &[u32]) -> Result<Self> {
        let b = f64::from(base);
        let maps: Vec<(f64, f64)> = digits.iter().map(|&d| (1.0 / b, f64::from(d) / b)).collect();
        let w = vec![1.0 / digits.len() as f64; digits.len()];
        Ok(Self::on_line(&maps, &w)?.declare(Separation::OpenSet))
    }

    /// Returns a copy of this IFS with every map conjugated by `x ↦ x + shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.ambient_dim {
            return Err(FractalError::invalid("shift dimension mismatch"));
        }
        let s = DVector::from_column_slice(shift);
        let maps = self
            .maps
            .iter()
            .map(|m| {
                // g(x) = f(x − s) + s = rOx + (t + s − rOs)
                let t = &m.translation + &s - m.linear_part() * &s;
                SimilarityMap::new(m.ratio, m.orientation.clone(), t)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_separation(maps, self.weights.clone(), self.declared_separation)
    }

    pub fn declare(mut self, separation: Separation) -> Self {
        self.declared_separation = separation;
        self
    }

    pub fn maps(&self) -> &[SimilarityMap] {
        &self.maps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.ratio).collect()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn declared_separation(&self) -> Separation {
        self.declared_separation
    }

    pub fn hull(&self) -> &SupportHull {
        &self.hull
    }

    pub fn min_ratio(&self) -> f64 {
        self.maps.iter().map(|m| m.ratio).fold(f64::INFINITY, f64::min)
    }

    pub fn max_ratio(&self) -> f64 {
        self.maps.iter().map(|m| m.ratio).fold(0.0, f64::max)
    }

    pub(crate) fn flat(&self) -> &[FlatMap] {
        &self.flat
    }
}

fn compute_hull(maps: &[SimilarityMap], weights: &[f64]) -> SupportHull {
    let k = maps[0].dim();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (m, &p) in maps.iter().zip(weights) {
        a -= m.linear_part() * p;
        b += &m.translation * p;
    }
    let c = a.clone().lu().solve(&b).expect("I - Σ p r O is nonsingular");
    let max_ratio = maps.iter().map(|m| m.ratio).fold(0.0, f64::max);
    // m − c = (I − A)^{-1}((I − A)c − b) and ‖(I − A)^{-1}‖ ≤ 1/(1 − max r).
    let residual = (&a * &c - &b).norm();
    let center_error = residual / (1.0 - max_ratio) + 4.0 * f64::EPSILON * c.norm();

    let mut radius: f64 = 0.0;
    let mut moment_num = 0.0;
    let mut moment_den = 1.0;
    for (m, &p) in maps.iter().zip(weights) {
        let d = (m.apply(&c) - &c).norm();
        radius = radius.max(d / (1.0 - m.ratio));
        moment_num += p * d * d;
        moment_den -= p * m.ratio * m.ratio;
    }
    // Slack covers rounding in the formulas above.
    let radius = radius * (1.0 + 1e-12) + 1e-300;
    let second_moment = (moment_num / moment_den) * (1.0 + 1e-10) + 4.0 * radius * center_error;
    SupportHull {
        center: c.as_slice().to_vec(),
        radius,
        second_moment: second_moment.min(radius * radius),
        center_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn rot2(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn fixed_point_examples() {
        let f = SimilarityMap::line(1.0 / 3.0, 0.0).unwrap();
        assert_eq!(f.fixed_point()[0], 0.0);
        let g = SimilarityMap::line(1.0 / 3.0, 2.0 / 3.0).unwrap();
        assert!((g.fixed_point()[0] - 1.0).abs() < 1e-15);
        let h = SimilarityMap::new(0.5, rot2(FRAC_PI_2), DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        let x = h.fixed_point();
        assert!((h.apply(&x) - &x).norm() <= 1e-10);
        // (I − rO)x = t solved by hand: x = (0.8, 0.4).
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(SimilarityMap::line(1.0, 0.0).is_err());
        assert!(SimilarityMap::line(0.0, 0.0).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(SimilarityMap::new(0.5, skew, DVector::zeros(2)).is_err());
    }

    #[test]
    fn rejects_bad_ifs() {
        let err = SelfSimilarIfs::on_line(&[(0.5, 0.0), (0.5, 0.5)], &[0.5, 0.4]).unwrap_err();
        assert!(err.to_string().contains("sum to 1"));
        assert!(SelfSimilarIfs::on_line(&[(0.5, 0.0)], &[1.0]).is_err());
        // Both maps fix the origin: a point mass.
        assert!(SelfSimilarIfs::on_line(&[(0.5, 0.0), (0.25, 0.0)], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn cantor_hull_is_unit_interval() {
        let ifs = SelfSimilarIfs::cantor();
        let h = ifs.hull();
        assert!((h.center[0] - 0.5).abs() < 1e-15);
        assert!((h.radius - 0.5).abs() < 1e-11);
        // E(x − 1/2)² for the Cantor measure is 1/8.
        assert!((h.second_moment - 0.125).abs() < 1e-9);
        assert!(h.second_moment >= 0.125);
    }

    #[test]
    fn uniform_second_moment() {
        let h = SelfSimilarIfs::uniform_unit().hull().clone();
        assert!((h.second_moment - 1.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn translated_ifs_moves_hull() {
        let ifs = SelfSimilarIfs::uniform_unit().translated(&[1.0]).unwrap();
        let (lo, hi) = ifs.hull().interval();
        assert!((lo - 1.0).abs() < 1e-11 && (hi - 2.0).abs() < 1e-11);
    }
}
