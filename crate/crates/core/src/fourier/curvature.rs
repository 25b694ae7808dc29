//! Curvature checks: Hessian determinants of scalar maps on the support,
//! directional Hessians of quadratic maps, and the holomorphic Hessian identity.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use super::maps::{MapKind, PushforwardMap};
use crate::error::{FractalError, Result};
use crate::ifs::{Budget, SelfSimilarIfs, SimilarityMap};

/// `|det Hess f|` below this counts as vanishing curvature.
pub const VANISHING_THRESHOLD: f64 = 1e-8;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub min_abs_hessian_det: f64,
    pub vanishing: bool,
    pub points_checked: usize,
}

/// Smallest `|det Hess f|` over support points of μ.
///
/// The points are `n_samples` chaos-game samples plus the fixed points of all
/// words of length at most two, which catches degeneracies sitting exactly on
/// a fixed point (a chaos-game sample almost never lands there).
pub fn curvature_diagnostic(
    ifs: &SelfSimilarIfs,
    map: &PushforwardMap,
    n_samples: usize,
    seed: u64,
) -> Result<CurvatureReport> {
    let k = ifs.ambient_dim();
    if map.out_dim() != 1 {
        return Err(FractalError::config(format!(
            "curvature diagnostic needs a scalar map, got {} outputs",
            map.out_dim()
        )));
    }
    if map.in_dim() != k {
        return Err(FractalError::config(format!(
            "map takes {} inputs but the IFS lives in dimension {k}",
            map.in_dim()
        )));
    }
    let mut points = ifs.sample_support(n_samples, seed);
    for depth in 1..=2 {
        for w in ifs.words_at_depth(depth, Budget::default())? {
            let g = SimilarityMap::new(w.ratio, w.orientation.clone(), w.translation.clone())?;
            points.extend(g.fixed_point().iter());
        }
    }
    let mut h = vec![0.0; k * k];
    let mut min_det = f64::INFINITY;
    for x in points.chunks_exact(k) {
        map.directional_hessian(x, &[1.0], &mut h);
        let det = DMatrix::from_row_slice(k, k, &h).determinant().abs();
        min_det = min_det.min(det);
    }
    Ok(CurvatureReport {
        min_abs_hessian_det: min_det,
        vanishing: min_det < VANISHING_THRESHOLD,
        points_checked: points.len() / k,
    })
}

fn check_unit(v: &[f64]) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(FractalError::config(format!("direction must be a unit vector, |v| = {n}")));
    }
    Ok(())
}

/// `Σ vᵢ Sᵢ` for a quadratic map `fᵢ = ½xᵀSᵢx + …`, and its determinant.
/// The matrix does not depend on the base point.
pub fn quadratic_directional_hessian(map: &PushforwardMap, v: &[f64]) -> Result<(DMatrix<f64>, f64)> {
    let MapKind::Quadratic(q) = map.kind() else {
        return Err(FractalError::Unsupported("directional Hessian needs a quadratic map".into()));
    };
    if v.len() != map.out_dim() {
        return Err(FractalError::config(format!(
            "direction has {} components, map has {} outputs",
            v.len(),
            map.out_dim()
        )));
    }
    check_unit(v)?;
    let k = map.in_dim();
    let mut h = DMatrix::zeros(k, k);
    for (i, vi) in v.iter().enumerate() {
        h += q.hessian(i) * *vi;
    }
    let det = h.determinant();
    Ok((h, det))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolomorphicHessian {
    /// Determinant of the Hessian of `v₁U + v₂V` at `z`.
    pub det: f64,
    /// Absolute values of its two eigenvalues, largest first.
    pub eigen_mags: (f64, f64),
    /// `|f″(z)|`, which both magnitudes should equal.
    pub second_derivative_abs: f64,
    /// Determinant of the finite-difference Hessian, for cross-checking.
    pub fd_det: f64,
}

/// Hessian of `v₁·Re f + v₂·Im f` for holomorphic `f` at `z`, where the
/// determinant is `−|f″(z)|²` for every unit `v`.
pub fn holomorphic_hessian_identity(map: &PushforwardMap, z: Complex64, v: [f64; 2]) -> Result<HolomorphicHessian> {
    let MapKind::Holomorphic(f) = map.kind() else {
        return Err(FractalError::Unsupported("holomorphic identity needs a holomorphic map".into()));
    };
    check_unit(&v)?;
    let x = [z.re, z.im];
    let mut h = [0.0; 4];
    map.directional_hessian(&x, &v, &mut h);
    let m = DMatrix::from_row_slice(2, 2, &h);
    let det = m.determinant();
    let eig = SymmetricEigen::new(m).eigenvalues;
    let (a, b) = (eig[0].abs(), eig[1].abs());

    let fd = fd_hessian(map, &x, &v);
    let fd_det = fd[0] * fd[3] - fd[1] * fd[2];
    Ok(HolomorphicHessian {
        det,
        eigen_mags: (a.max(b), a.min(b)),
        second_derivative_abs: f.eval(z).2.norm(),
        fd_det,
    })
}

/// Second differences of the scalar `⟨v, f⟩` from values only.
fn fd_hessian(map: &PushforwardMap, x: &[f64; 2], v: &[f64; 2]) -> [f64; 4] {
    let phi = |p: [f64; 2]| {
        let y = map.value(&p);
        v[0] * y[0] + v[1] * y[1]
    };
    let h = 1e-4 * (1.0 + x[0].abs().max(x[1].abs()));
    let mut out = [0.0; 4];
    let e = [[1.0, 0.0], [0.0, 1.0]];
    for i in 0..2 {
        for j in 0..2 {
            let at = |si: f64, sj: f64| {
                phi([
                    x[0] + h * (si * e[i][0] + sj * e[j][0]),
                    x[1] + h * (si * e[i][1] + sj * e[j][1]),
                ])
            };
            out[i * 2 + j] = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    out
}
