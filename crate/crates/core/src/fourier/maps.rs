//! Smooth maps `f: ℝ^k → ℝ^d` pushed forward through a self-similar measure,
//! with derivative evaluators and derivative bounds on a ball.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FractalError, Result};
use crate::ifs::SelfSimilarIfs;

/// `f(x) → out` (length `d`).
pub type ValueFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Jacobian, `d×k` row-major.
pub type JacobianFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Hessian of `x ↦ ⟨v, f(x)⟩`, `k×k` row-major.
pub type HessianFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Relative tolerance of the finite-difference derivative spot checks.
pub const DERIVATIVE_CHECK_TOL: f64 = 1e-5;
/// Points used by the spot checks.
pub const DERIVATIVE_CHECK_POINTS: usize = 100;
/// Samples used when derivative bounds must be estimated.
pub const BOUND_ESTIMATE_SAMPLES: usize = 10_000;

/// `fᵢ(x) = ½ xᵀSᵢx + Bᵢx + bᵢ` with symmetric `Sᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap {
    hessians: Vec<DMatrix<f64>>,
    linear: DMatrix<f64>,
    constant: DVector<f64>,
}

/// One quadratic term `c · x_p x_q` of output `i` (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticTerm {
    pub p: usize,
    pub q: usize,
    pub c: f64,
}

impl QuadraticMap {
    /// Builds from per-output lists of `c_{i,p,q}` coefficients of `x_p x_q`,
    /// plus optional affine part (`linear` is `d×k` row-major).
    pub fn new(k: usize, terms: &[Vec<QuadraticTerm>], linear: Option<&[f64]>, constant: Option<&[f64]>) -> Result<Self> {
        let d = terms.len();
        if k == 0 || d == 0 {
            return Err(FractalError::config("quadratic map needs at least one input and one output"));
        }
        let mut hessians = Vec::with_capacity(d);
        for (i, list) in terms.iter().enumerate() {
            let mut s = DMatrix::<f64>::zeros(k, k);
            for t in list {
                if t.p >= k || t.q >= k {
                    return Err(FractalError::config(format!(
                        "quadratic output {i}: index ({}, {}) out of range for k = {k}",
                        t.p, t.q
                    )));
                }
                if t.p == t.q {
                    s[(t.p, t.p)] += 2.0 * t.c;
                } else {
                    s[(t.p, t.q)] += t.c;
                    s[(t.q, t.p)] += t.c;
                }
            }
            hessians.push(s);
        }
        let linear = match linear {
            None => DMatrix::zeros(d, k),
            Some(l) if l.len() == d * k => DMatrix::from_row_slice(d, k, l),
            Some(l) => {
                return Err(FractalError::config(format!(
                    "quadratic linear part has {} entries, expected {}",
                    l.len(),
                    d * k
                )))
            }
        };
        let constant = match constant {
            None => DVector::zeros(d),
            Some(c) if c.len() == d => DVector::from_column_slice(c),
            Some(c) => {
                return Err(FractalError::config(format!(
                    "quadratic constant has {} entries, expected {d}",
                    c.len()
                )))
            }
        };
        Ok(QuadraticMap {
            hessians,
            linear,
            constant,
        })
    }

    /// Hessian of output `i`.
    pub fn hessian(&self, i: usize) -> &DMatrix<f64> {
        &self.hessians[i]
    }
}

/// Complex polynomial `f(z) = Σ aₙ zⁿ`, viewed as `(x, y) ↦ (Re f, Im f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphicMap {
    coeffs: Vec<Complex64>,
}

impl HolomorphicMap {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FractalError::config("holomorphic map needs finite coefficients"));
        }
        Ok(HolomorphicMap { coeffs })
    }

    /// `(f(z), f′(z), f″(z))` by Horner's rule.
    pub fn eval(&self, z: Complex64) -> (Complex64, Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let (mut f, mut f1, mut f2) = (zero, zero, zero);
        for &a in self.coeffs.iter().rev() {
            f2 = f2 * z + f1 * 2.0;
            f1 = f1 * z + f;
            f = f * z + a;
        }
        (f, f1, f2)
    }

    fn abs_series(&self, radius: f64, order: u32) -> f64 {
        // Σ n(n−1)…(n−order+1)|aₙ| radius^{n−order}
        self.coeffs
            .iter()
            .enumerate()
            .skip(order as usize)
            .map(|(n, a)| {
                let falling: f64 = (0..order).map(|j| (n as u32 - j) as f64).product();
                falling * a.norm() * radius.powi(n as i32 - order as i32)
            })
            .sum()
    }
}

/// A monomial `coef · Π x_j^{powers_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Real multivariate polynomial map, one list of monomials per output.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    k: usize,
    outputs: Vec<Vec<Monomial>>,
}

impl PolynomialMap {
    pub fn new(k: usize, outputs: Vec<Vec<Monomial>>) -> Result<Self> {
        if k == 0 || outputs.is_empty() {
            return Err(FractalError::config("polynomial map needs at least one input and one output"));
        }
        for (i, out) in outputs.iter().enumerate() {
            for m in out {
                if m.powers.len() != k {
                    return Err(FractalError::config(format!(
                        "polynomial output {i}: monomial has {} powers, expected {k}",
                        m.powers.len()
                    )));
                }
                if !m.coef.is_finite() {
                    return Err(FractalError::config("polynomial coefficients must be finite"));
                }
            }
        }
        Ok(PolynomialMap { k, outputs })
    }

    fn monomial(m: &Monomial, x: &[f64]) -> f64 {
        m.powers.iter().zip(x).fold(m.coef, |acc, (&e, &xj)| acc * xj.powi(e as i32))
    }

    /// `∂_j` of a monomial, scaled: returns coefficient-and-powers form evaluated at x.
    fn d1(m: &Monomial, x: &[f64], j: usize) -> f64 {
        let e = m.powers[j];
        if e == 0 {
            return 0.0;
        }
        m.powers.iter().zip(x).enumerate().fold(m.coef * e as f64, |acc, (l, (&el, &xl))| {
            acc * xl.powi(if l == j { el as i32 - 1 } else { el as i32 })
        })
    }

    fn d2(m: &Monomial, x: &[f64], j: usize, l: usize) -> f64 {
        let mut powers = m.powers.clone();
        let mut coef = m.coef;
        for idx in [j, l] {
            if powers[idx] == 0 {
                return 0.0;
            }
            coef *= powers[idx] as f64;
            powers[idx] -= 1;
        }
        powers.iter().zip(x).fold(coef, |acc, (&e, &xv)| acc * xv.powi(e as i32))
    }
}

/// Closure-backed map. Missing derivatives fall back to finite differences,
/// and its derivative bounds must be supplied or estimated.
#[derive(Clone)]
pub struct GenericMap {
    k: usize,
    d: usize,
    f: ValueFn,
    jacobian: Option<JacobianFn>,
    hessian: Option<HessianFn>,
}

impl fmt::Debug for GenericMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericMap")
            .field("k", &self.k)
            .field("d", &self.d)
            .field("jacobian", &self.jacobian.is_some())
            .field("hessian", &self.hessian.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum MapKind {
    /// `x ↦ |x|²` on ℝ^k.
    Square { dim: usize },
    /// `x ↦ log(sign·(x − shift))` on ℝ.
    Log { shift: f64, sign: f64 },
    Quadratic(QuadraticMap),
    Holomorphic(HolomorphicMap),
    Polynomial(PolynomialMap),
    Generic(GenericMap),
}

/// A derivative bound valid on the ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatedBound {
    pub value: f64,
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Derivative bounds on a region containing the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapBounds {
    /// Bound for the operator norm of the Jacobian.
    pub lipschitz: f64,
    /// Bound for `sup_{|v|=1} ‖Hess⟨v, f⟩‖`, when known.
    pub hessian: Option<f64>,
    /// False when the bounds were estimated from samples.
    pub certified: bool,
}

#[derive(Debug, Clone)]
pub struct PushforwardMap {
    kind: MapKind,
    lipschitz: Option<StatedBound>,
    hessian: Option<StatedBound>,
}

fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

impl PushforwardMap {
    fn from_kind(kind: MapKind) -> Self {
        PushforwardMap {
            kind,
            lipschitz: None,
            hessian: None,
        }
    }

    pub fn square(dim: usize) -> Self {
        Self::from_kind(MapKind::Square { dim })
    }

    /// `x ↦ log(x − shift)`.
    pub fn log(shift: f64) -> Self {
        Self::from_kind(MapKind::Log { shift, sign: 1.0 })
    }

    /// `x ↦ log(sign·(x − shift))` for `sign = ±1`.
    pub fn log_signed(shift: f64, sign: f64) -> Result<Self> {
        if sign != 1.0 && sign != -1.0 {
            return Err(FractalError::config(format!("log sign must be +1 or -1, got {sign}")));
        }
        Ok(Self::from_kind(MapKind::Log { shift, sign }))
    }

    pub fn quadratic(q: QuadraticMap) -> Self {
        Self::from_kind(MapKind::Quadratic(q))
    }

    pub fn holomorphic(h: HolomorphicMap) -> Self {
        Self::from_kind(MapKind::Holomorphic(h))
    }

    pub fn polynomial(p: PolynomialMap) -> Self {
        Self::from_kind(MapKind::Polynomial(p))
    }

    /// One-dimensional polynomial `Σ cₙ xⁿ`.
    pub fn univariate(coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(n, &c)| Monomial {
                coef: c,
                powers: vec![n as u32],
            })
            .collect();
        Self::polynomial(PolynomialMap::new(1, vec![terms]).expect("valid univariate polynomial"))
    }

    pub fn identity_1d() -> Self {
        Self::univariate(&[0.0, 1.0])
    }

    pub fn generic(k: usize, d: usize, f: ValueFn) -> Self {
        Self::from_kind(MapKind::Generic(GenericMap {
            k,
            d,
            f,
            jacobian: None,
            hessian: None,
        }))
    }

    pub fn with_jacobian(mut self, jac: JacobianFn) -> Self {
        if let MapKind::Generic(g) = &mut self.kind {
            g.jacobian = Some(jac);
        }
        self
    }

    pub fn with_hessian(mut self, hess: HessianFn) -> Self {
        if let MapKind::Generic(g) = &mut self.kind {
            g.hessian = Some(hess);
        }
        self
    }

    pub fn with_lipschitz_bound(mut self, bound: StatedBound) -> Self {
        self.lipschitz = Some(bound);
        self
    }

    pub fn with_hessian_bound(mut self, bound: StatedBound) -> Self {
        self.hessian = Some(bound);
        self
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    /// Input dimension `k`.
    pub fn in_dim(&self) -> usize {
        match &self.kind {
            MapKind::Square { dim } => *dim,
            MapKind::Log { .. } => 1,
            MapKind::Quadratic(q) => q.linear.ncols(),
            MapKind::Holomorphic(_) => 2,
            MapKind::Polynomial(p) => p.k,
            MapKind::Generic(g) => g.k,
        }
    }

    /// Output dimension `d`.
    pub fn out_dim(&self) -> usize {
        match &self.kind {
            MapKind::Square { .. } | MapKind::Log { .. } => 1,
            MapKind::Quadratic(q) => q.hessians.len(),
            MapKind::Holomorphic(_) => 2,
            MapKind::Polynomial(p) => p.outputs.len(),
            MapKind::Generic(g) => g.d,
        }
    }

    /// Whether derivative evaluation is exact (not finite differences).
    pub fn has_analytic_derivatives(&self) -> bool {
        match &self.kind {
            MapKind::Generic(g) => g.jacobian.is_some() && g.hessian.is_some(),
            _ => true,
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            MapKind::Square { .. } => out[0] = x.iter().map(|v| v * v).sum(),
            MapKind::Log { shift, sign } => out[0] = (sign * (x[0] - shift)).ln(),
            MapKind::Quadratic(q) => {
                let xv = DVector::from_column_slice(x);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = 0.5 * xv.dot(&(&q.hessians[i] * &xv)) + q.linear.row(i).transpose().dot(&xv) + q.constant[i];
                }
            }
            MapKind::Holomorphic(h) => {
                let (f, _, _) = h.eval(Complex64::new(x[0], x[1]));
                out[0] = f.re;
                out[1] = f.im;
            }
            MapKind::Polynomial(p) => {
                for (o, terms) in out.iter_mut().zip(&p.outputs) {
                    *o = terms.iter().map(|m| PolynomialMap::monomial(m, x)).sum();
                }
            }
            MapKind::Generic(g) => (g.f)(x, out),
        }
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim()];
        self.eval(x, &mut out);
        out
    }

    /// Jacobian `d×k`, row-major.
    pub fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let k = self.in_dim();
        match &self.kind {
            MapKind::Square { .. } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = 2.0 * v;
                }
            }
            MapKind::Log { shift, .. } => out[0] = 1.0 / (x[0] - shift),
            MapKind::Quadratic(q) => {
                let xv = DVector::from_column_slice(x);
                for (i, s) in q.hessians.iter().enumerate() {
                    let row = s * &xv;
                    for j in 0..k {
                        out[i * k + j] = row[j] + q.linear[(i, j)];
                    }
                }
            }
            MapKind::Holomorphic(h) => {
                let (_, d1, _) = h.eval(Complex64::new(x[0], x[1]));
                out.copy_from_slice(&[d1.re, -d1.im, d1.im, d1.re]);
            }
            MapKind::Polynomial(p) => {
                for (i, terms) in p.outputs.iter().enumerate() {
                    for j in 0..k {
                        out[i * k + j] = terms.iter().map(|m| PolynomialMap::d1(m, x, j)).sum();
                    }
                }
            }
            MapKind::Generic(g) => match &g.jacobian {
                Some(jac) => jac(x, out),
                None => self.fd_jacobian(x, out),
            },
        }
    }

    fn fd_jacobian(&self, x: &[f64], out: &mut [f64]) {
        let (k, d) = (self.in_dim(), self.out_dim());
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        for j in 0..k {
            let h = fd_step(x[j]);
            xp[j] = x[j] + h;
            self.eval(&xp, &mut fp);
            xp[j] = x[j] - h;
            self.eval(&xp, &mut fm);
            xp[j] = x[j];
            for i in 0..d {
                out[i * k + j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
    }

    /// Hessian of `⟨v, f⟩` at `x`, `k×k` row-major.
    pub fn directional_hessian(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let k = self.in_dim();
        match &self.kind {
            MapKind::Square { .. } => {
                out.fill(0.0);
                for j in 0..k {
                    out[j * k + j] = 2.0 * v[0];
                }
            }
            MapKind::Log { shift, .. } => out[0] = -v[0] / (x[0] - shift).powi(2),
            MapKind::Quadratic(q) => {
                out.fill(0.0);
                for (vi, s) in v.iter().zip(&q.hessians) {
                    for (o, e) in out.iter_mut().zip(s.transpose().iter()) {
                        *o += vi * e;
                    }
                }
            }
            MapKind::Holomorphic(h) => {
                let (_, _, d2) = h.eval(Complex64::new(x[0], x[1]));
                let (a, b) = (d2.re, d2.im);
                let off = v[1] * a - v[0] * b;
                out.copy_from_slice(&[v[0] * a + v[1] * b, off, off, -v[0] * a - v[1] * b]);
            }
            MapKind::Polynomial(p) => {
                out.fill(0.0);
                for (vi, terms) in v.iter().zip(&p.outputs) {
                    for j in 0..k {
                        for l in 0..k {
                            out[j * k + l] += vi * terms.iter().map(|m| PolynomialMap::d2(m, x, j, l)).sum::<f64>();
                        }
                    }
                }
            }
            MapKind::Generic(g) => match &g.hessian {
                Some(hess) => hess(x, v, out),
                None => self.fd_hessian(x, v, out),
            },
        }
    }

    fn fd_hessian(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let (k, d) = (self.in_dim(), self.out_dim());
        let mut xp = x.to_vec();
        let mut jp = vec![0.0; d * k];
        let mut jm = vec![0.0; d * k];
        for l in 0..k {
            let h = fd_step(x[l]);
            xp[l] = x[l] + h;
            self.jacobian(&xp, &mut jp);
            xp[l] = x[l] - h;
            self.jacobian(&xp, &mut jm);
            xp[l] = x[l];
            for j in 0..k {
                let mut acc = 0.0;
                for i in 0..d {
                    acc += v[i] * (jp[i * k + j] - jm[i * k + j]);
                }
                out[j * k + l] = acc / (2.0 * h);
            }
        }
        // Symmetrize the difference quotient.
        for j in 0..k {
            for l in j + 1..k {
                let m = 0.5 * (out[j * k + l] + out[l * k + j]);
                out[j * k + l] = m;
                out[l * k + j] = m;
            }
        }
    }

    /// Phase `⟨η, f(x)⟩` and its gradient `Df(x)ᵀη`.
    #[inline]
    pub(crate) fn phase_and_gradient(&self, x: &[f64], eta: &[f64], grad: &mut [f64], work: &mut Work) -> f64 {
        match &self.kind {
            MapKind::Square { .. } => {
                let e = eta[0];
                let mut s = 0.0;
                for (g, &xv) in grad.iter_mut().zip(x) {
                    s += xv * xv;
                    *g = 2.0 * e * xv;
                }
                e * s
            }
            MapKind::Log { shift, sign } => {
                let u = x[0] - shift;
                grad[0] = eta[0] / u;
                eta[0] * (sign * u).ln()
            }
            _ => {
                let (k, d) = (self.in_dim(), self.out_dim());
                work.value.resize(d, 0.0);
                work.jac.resize(d * k, 0.0);
                self.eval(x, &mut work.value);
                self.jacobian(x, &mut work.jac);
                for (j, g) in grad.iter_mut().enumerate() {
                    *g = (0..d).map(|i| eta[i] * work.jac[i * k + j]).sum();
                }
                eta.iter().zip(&work.value).map(|(a, b)| a * b).sum()
            }
        }
    }

    /// Certified derivative bounds on `B(center, radius)` for the analytic
    /// kinds; `None` for closure-backed maps.
    pub fn analytic_bounds(&self, center: &[f64], radius: f64) -> Result<Option<MapBounds>> {
        let k = self.in_dim();
        if center.len() != k {
            return Err(FractalError::config(format!(
                "map takes {k} inputs but the support lives in dimension {}",
                center.len()
            )));
        }
        let cn = center.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bounds = match &self.kind {
            MapKind::Square { .. } => MapBounds {
                lipschitz: 2.0 * (cn + radius),
                hessian: Some(2.0),
                certified: true,
            },
            MapKind::Log { shift, sign } => {
                let (lo, hi) = (center[0] - radius, center[0] + radius);
                let dist = if *sign > 0.0 { lo - shift } else { shift - hi };
                if !(dist > 0.0) {
                    return Err(FractalError::SupportNotPositive {
                        lo: sign * (lo - shift),
                        hi: sign * (hi - shift),
                    });
                }
                MapBounds {
                    lipschitz: 1.0 / dist,
                    hessian: Some(1.0 / (dist * dist)),
                    certified: true,
                }
            }
            MapKind::Quadratic(q) => {
                // J(x) = J(c) + [Sᵢ(x − c)]ᵢ, with ‖[Sᵢu]ᵢ‖ ≤ (Σ‖Sᵢ‖²_F)^{1/2}|u|.
                let mut jc = vec![0.0; q.hessians.len() * k];
                self.jacobian(center, &mut jc);
                let jc_f = jc.iter().map(|v| v * v).sum::<f64>().sqrt();
                let s_f = q.hessians.iter().map(|s| s.norm_squared()).sum::<f64>().sqrt();
                MapBounds {
                    lipschitz: jc_f + radius * s_f,
                    hessian: Some(s_f),
                    certified: true,
                }
            }
            MapKind::Holomorphic(h) => {
                let rho = cn + radius;
                MapBounds {
                    lipschitz: h.abs_series(rho, 1),
                    hessian: Some(h.abs_series(rho, 2)),
                    certified: true,
                }
            }
            MapKind::Polynomial(p) => {
                // Every |x_j| on the ball is at most |c_j| + radius.
                let m: Vec<f64> = center.iter().map(|c| c.abs() + radius).collect();
                let abs_mono = |mono: &Monomial| Monomial {
                    coef: mono.coef.abs(),
                    powers: mono.powers.clone(),
                };
                let mut jac_sq = 0.0;
                let mut hess_sq = 0.0;
                for terms in &p.outputs {
                    let abs_terms: Vec<Monomial> = terms.iter().map(abs_mono).collect();
                    for j in 0..k {
                        let dj: f64 = abs_terms.iter().map(|t| PolynomialMap::d1(t, &m, j)).sum();
                        jac_sq += dj * dj;
                        for l in 0..k {
                            let djl: f64 = abs_terms.iter().map(|t| PolynomialMap::d2(t, &m, j, l)).sum();
                            hess_sq += djl * djl;
                        }
                    }
                }
                MapBounds {
                    lipschitz: jac_sq.sqrt(),
                    hessian: Some(hess_sq.sqrt()),
                    certified: true,
                }
            }
            MapKind::Generic(_) => return Ok(None),
        };
        Ok(Some(bounds))
    }

    /// Bounds valid on the support of the IFS measure.
    ///
    /// Stated bounds must hold on a ball containing the support hull.
    /// Analytic kinds fill in whatever is not stated; closure-backed maps
    /// without stated bounds get estimates (flagged uncertified).
    pub fn resolve_bounds(&self, ifs: &SelfSimilarIfs) -> Result<MapBounds> {
        let hull = ifs.hull();
        for (name, b) in [("lipschitz", &self.lipschitz), ("hessian", &self.hessian)] {
            if let Some(b) = b {
                if !(b.value.is_finite() && b.value >= 0.0) {
                    return Err(FractalError::config(format!("{name} bound must be finite and non-negative")));
                }
                if b.center.len() != ifs.ambient_dim() || !hull.contains_ball(&b.center, b.radius) {
                    return Err(FractalError::config(format!(
                        "{name} bound is stated on a ball that does not contain the support hull (centre {:?}, radius {})",
                        hull.center, hull.radius
                    )));
                }
            }
        }
        let analytic = self.analytic_bounds(&hull.center, hull.radius)?;
        let mut out = match analytic {
            Some(b) => b,
            None if self.lipschitz.is_some() => MapBounds {
                lipschitz: f64::INFINITY,
                hessian: None,
                certified: true,
            },
            None => self.estimate_bounds(ifs, 0),
        };
        if let Some(b) = &self.lipschitz {
            out.lipschitz = if out.lipschitz.is_finite() { out.lipschitz.min(b.value) } else { b.value };
        }
        if let Some(b) = &self.hessian {
            out.hessian = Some(out.hessian.map_or(b.value, |h| h.min(b.value)));
        }
        if !out.lipschitz.is_finite() {
            return Err(FractalError::config("no usable Lipschitz bound for the map"));
        }
        Ok(out)
    }

    /// `1.5 ×` the largest Jacobian / Hessian norm seen at sample points of the support.
    pub fn estimate_bounds(&self, ifs: &SelfSimilarIfs, seed: u64) -> MapBounds {
        let (k, d) = (self.in_dim(), self.out_dim());
        let pts = ifs.sample_support(BOUND_ESTIMATE_SAMPLES, seed);
        let mut jac = vec![0.0; d * k];
        let mut hess = vec![0.0; k * k];
        let mut e = vec![0.0; d];
        let (mut lmax, mut hmax) = (0.0f64, 0.0f64);
        for x in pts.chunks_exact(k) {
            self.jacobian(x, &mut jac);
            lmax = lmax.max(jac.iter().map(|v| v * v).sum::<f64>().sqrt());
            let mut h2 = 0.0;
            for i in 0..d {
                e.fill(0.0);
                e[i] = 1.0;
                self.directional_hessian(x, &e, &mut hess);
                h2 += hess.iter().map(|v| v * v).sum::<f64>();
            }
            hmax = hmax.max(h2.sqrt());
        }
        MapBounds {
            lipschitz: 1.5 * lmax,
            hessian: Some(1.5 * hmax),
            certified: false,
        }
    }

    /// Compares supplied Jacobian/Hessian evaluators with finite differences
    /// at support points. Analytic kinds pass trivially.
    pub fn check_derivatives(&self, ifs: &SelfSimilarIfs, seed: u64) -> Result<()> {
        let MapKind::Generic(g) = &self.kind else {
            return Ok(());
        };
        let (k, d) = (g.k, g.d);
        let pts = ifs.sample_support(DERIVATIVE_CHECK_POINTS, seed);
        let mut a = vec![0.0; d * k];
        let mut b = vec![0.0; d * k];
        let mut ha = vec![0.0; k * k];
        let mut hb = vec![0.0; k * k];
        let close = |x: f64, y: f64| (x - y).abs() <= DERIVATIVE_CHECK_TOL * x.abs().max(y.abs()).max(1.0);
        for x in pts.chunks_exact(k) {
            if let Some(jac) = &g.jacobian {
                jac(x, &mut a);
                self.fd_jacobian(x, &mut b);
                if let Some((u, v)) = a.iter().zip(&b).find(|(u, v)| !close(**u, **v)) {
                    return Err(FractalError::config(format!(
                        "supplied Jacobian disagrees with finite differences at {x:?}: {u} vs {v}"
                    )));
                }
            }
            if let Some(hess) = &g.hessian {
                let mut e = vec![0.0; d];
                for i in 0..d {
                    e.fill(0.0);
                    e[i] = 1.0;
                    hess(x, &e, &mut ha);
                    self.fd_hessian(x, &e, &mut hb);
                    if let Some((u, v)) = ha.iter().zip(&hb).find(|(u, v)| !close(**u, **v)) {
                        return Err(FractalError::config(format!(
                            "supplied Hessian disagrees with finite differences at {x:?}: {u} vs {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Scratch buffers for map evaluation inside hot loops.
#[derive(Debug, Default, Clone)]
pub(crate) struct Work {
    value: Vec<f64>,
    jac: Vec<f64>,
}

/// JSON form of a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// `|x|²`.
    Square {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz_bound: Option<StatedBound>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hessian_bound: Option<StatedBound>,
    },
    /// `log(sign·(x − shift))`, sign defaults to +1.
    Log {
        #[serde(default)]
        shift: f64,
        #[serde(default = "one")]
        sign: f64,
    },
    Quadratic {
        /// Per output, the `c_{i,p,q}` coefficients of `x_p x_q`.
        terms: Vec<Vec<QuadraticTerm>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        constant: Option<Vec<f64>>,
    },
    /// Complex polynomial with coefficients `[re, im]` from degree 0 upwards.
    Holomorphic { coefficients: Vec<[f64; 2]> },
    /// Real polynomial, one monomial list per output.
    Custom { outputs: Vec<Vec<Monomial>> },
}

fn one() -> f64 {
    1.0
}

impl MapSpec {
    /// Builds the map for an IFS living in ℝ^k.
    pub fn build(&self, k: usize) -> Result<PushforwardMap> {
        let map = match self {
            MapSpec::Square {
                lipschitz_bound,
                hessian_bound,
            } => {
                let mut m = PushforwardMap::square(k);
                m.lipschitz = lipschitz_bound.clone();
                m.hessian = hessian_bound.clone();
                m
            }
            MapSpec::Log { shift, sign } => PushforwardMap::log_signed(*shift, *sign)?,
            MapSpec::Quadratic {
                terms,
                linear,
                constant,
            } => PushforwardMap::quadratic(QuadraticMap::new(k, terms, linear.as_deref(), constant.as_deref())?),
            MapSpec::Holomorphic { coefficients } => PushforwardMap::holomorphic(HolomorphicMap::new(
                coefficients.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
            )?),
            MapSpec::Custom { outputs } => PushforwardMap::polynomial(PolynomialMap::new(k, outputs.clone())?),
        };
        if map.in_dim() != k {
            return Err(FractalError::config(format!(
                "map takes {} inputs but the IFS lives in dimension {k}",
                map.in_dim()
            )));
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(map: &PushforwardMap, x: &[f64], v: &[f64]) {
        let (k, d) = (map.in_dim(), map.out_dim());
        let mut a = vec![0.0; d * k];
        let mut b = vec![0.0; d * k];
        map.jacobian(x, &mut a);
        map.fd_jacobian(x, &mut b);
        for (u, w) in a.iter().zip(&b) {
            assert!((u - w).abs() < 1e-7 * (1.0 + u.abs()), "jacobian {a:?} vs {b:?}");
        }
        let mut ha = vec![0.0; k * k];
        let mut hb = vec![0.0; k * k];
        map.directional_hessian(x, v, &mut ha);
        map.fd_hessian(x, v, &mut hb);
        for (u, w) in ha.iter().zip(&hb) {
            assert!((u - w).abs() < 1e-6 * (1.0 + u.abs()), "hessian {ha:?} vs {hb:?}");
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let x2 = [0.3, -0.7];
        fd_check(&PushforwardMap::square(2), &x2, &[1.0]);
        fd_check(&PushforwardMap::log(-1.0), &[0.4], &[1.0]);
        let q = QuadraticMap::new(
            2,
            &[
                vec![QuadraticTerm { p: 0, q: 0, c: -1.0 }, QuadraticTerm { p: 1, q: 1, c: 1.0 }],
                vec![QuadraticTerm { p: 0, q: 1, c: 2.0 }],
            ],
            Some(&[1.0, 0.0, 0.0, 3.0]),
            None,
        )
        .unwrap();
        fd_check(&PushforwardMap::quadratic(q), &x2, &[0.6, 0.8]);
        let h = HolomorphicMap::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
            .unwrap();
        fd_check(&PushforwardMap::holomorphic(h), &x2, &[0.6, -0.8]);
        let p = PolynomialMap::new(
            2,
            vec![vec![
                Monomial { coef: 2.0, powers: vec![3, 1] },
                Monomial { coef: -1.0, powers: vec![0, 2] },
            ]],
        )
        .unwrap();
        fd_check(&PushforwardMap::polynomial(p), &x2, &[1.0]);
    }

    #[test]
    fn holomorphic_horner() {
        let h = HolomorphicMap::new(vec![Complex64::new(0.0, 0.0); 3].into_iter().chain([Complex64::new(1.0, 0.0)]).collect()).unwrap();
        let z = Complex64::new(1.0, 2.0);
        let (f, f1, f2) = h.eval(z);
        assert!((f - z * z * z).norm() < 1e-12);
        assert!((f1 - 3.0 * z * z).norm() < 1e-12);
        assert!((f2 - 6.0 * z).norm() < 1e-12);
    }

    #[test]
    fn log_requires_positive_support() {
        let ifs = SelfSimilarIfs::uniform_unit();
        let err = PushforwardMap::log(0.5).resolve_bounds(&ifs).unwrap_err();
        assert!(matches!(err, FractalError::SupportNotPositive { .. }));
        let b = PushforwardMap::log(-1.0).resolve_bounds(&ifs).unwrap();
        assert!((b.lipschitz - 1.0).abs() < 1e-9 && b.certified);
    }

    #[test]
    fn stated_bounds_must_cover_hull() {
        let ifs = SelfSimilarIfs::cantor();
        let small = PushforwardMap::square(1).with_lipschitz_bound(StatedBound {
            value: 2.0,
            center: vec![0.5],
            radius: 0.1,
        });
        assert!(small.resolve_bounds(&ifs).is_err());
        let ok = PushforwardMap::square(1).with_lipschitz_bound(StatedBound {
            value: 2.0,
            center: vec![0.5],
            radius: 1.0,
        });
        assert_eq!(ok.resolve_bounds(&ifs).unwrap().lipschitz, 2.0);
    }

    #[test]
    fn generic_maps_estimate_and_check() {
        let ifs = SelfSimilarIfs::cantor();
        let f: ValueFn = Arc::new(|x, out| out[0] = x[0].sin());
        let good = PushforwardMap::generic(1, 1, f.clone())
            .with_jacobian(Arc::new(|x, out| out[0] = x[0].cos()))
            .with_hessian(Arc::new(|x, v, out| out[0] = -v[0] * x[0].sin()));
        assert!(good.check_derivatives(&ifs, 1).is_ok());
        let b = good.resolve_bounds(&ifs).unwrap();
        assert!(!b.certified);
        assert!(b.lipschitz >= 1.0 && b.lipschitz <= 1.5);
        let bad = PushforwardMap::generic(1, 1, f).with_jacobian(Arc::new(|x, out| out[0] = 1.01 * x[0].cos()));
        assert!(bad.check_derivatives(&ifs, 1).is_err());
    }

    #[test]
    fn map_spec_json() {
        let spec: MapSpec = serde_json::from_str(r#"{"kind":"custom","outputs":[[{"coef":1.0,"powers":[3]}]]}"#).unwrap();
        let m = spec.build(1).unwrap();
        assert_eq!(m.value(&[2.0]), vec![8.0]);
        let spec: MapSpec = serde_json::from_str(r#"{"kind":"log","shift":0.5}"#).unwrap();
        assert!((spec.build(1).unwrap().value(&[1.5])[0]).abs() < 1e-15);
        assert!(serde_json::from_str::<MapSpec>(r#"{"kind":"square","colour":1}"#).is_err());
        assert!(MapSpec::Holomorphic { coefficients: vec![[0.0, 0.0], [1.0, 0.0]] }.build(1).is_err());
    }
}
