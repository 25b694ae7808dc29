//! Transforms of pushforwards `f(μ)` by cylinder quadrature.
//!
//! The support is cut into cylinders `f_w(K)`. Order 0 replaces `f` on each
//! cylinder by its value at the anchor `x_w = f_w(c)`; order 1 replaces it by
//! the tangent plane there and integrates the linear phase exactly with μ̂.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::maps::Work;
use super::mu_hat::{LeafCounter, MuHatEngine};
use super::{canonicalize, dot, norm, reduce_turns, roundoff_bound, EvalOptions, FrequencySample, PushforwardMap, Scheme};
use crate::error::{FractalError, Result};
use crate::ifs::{FlatMap, SelfSimilarIfs};
use crate::numerics::ComplexSum;

/// Composite map `f_w = r O x + t` of one cylinder, with its anchor.
#[derive(Debug, Clone)]
struct Node {
    ratio: f64,
    weight: f64,
    orientation: Vec<f64>,
    translation: Vec<f64>,
    anchor: Vec<f64>,
}

impl Node {
    fn root(k: usize, center: &[f64]) -> Self {
        let mut orientation = vec![0.0; k * k];
        for i in 0..k {
            orientation[i * k + i] = 1.0;
        }
        Node {
            ratio: 1.0,
            weight: 1.0,
            orientation,
            translation: vec![0.0; k],
            anchor: center.to_vec(),
        }
    }

    /// `self ∘ f` written into `out`.
    fn compose(&self, f: &FlatMap, center: &[f64], out: &mut Node) {
        let k = center.len();
        out.ratio = self.ratio * f.ratio;
        out.weight = self.weight * f.weight;
        for i in 0..k {
            for j in 0..k {
                out.orientation[i * k + j] = (0..k).map(|l| self.orientation[i * k + l] * f.orientation[l * k + j]).sum();
            }
            let ot: f64 = (0..k).map(|l| self.orientation[i * k + l] * f.translation[l]).sum();
            out.translation[i] = self.ratio * ot + self.translation[i];
        }
        for i in 0..k {
            let oc: f64 = (0..k).map(|l| out.orientation[i * k + l] * center[l]).sum();
            out.anchor[i] = out.ratio * oc + out.translation[i];
        }
    }

    /// `out = r Oᵀ g`.
    fn pull_back(&self, g: &[f64], out: &mut [f64]) {
        let k = g.len();
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.ratio * (0..k).map(|i| self.orientation[i * k + j] * g[i]).sum::<f64>();
        }
    }
}

/// Depth-first walk over cylinders. `visit(node, forced)` returns whether the
/// node is a leaf; `forced` is set once the preallocated depth is used up.
fn walk_cylinders<F>(ifs: &SelfSimilarIfs, max_depth: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&Node, bool) -> Result<bool>,
{
    let k = ifs.ambient_dim();
    let center = &ifs.hull().center;
    let mut levels = vec![Node::root(k, center); max_depth + 1];
    fn rec<F: FnMut(&Node, bool) -> Result<bool>>(
        flat: &[FlatMap],
        center: &[f64],
        levels: &mut [Node],
        visit: &mut F,
    ) -> Result<()> {
        let (cur, rest) = levels.split_first_mut().expect("non-empty level stack");
        if visit(cur, rest.is_empty())? {
            return Ok(());
        }
        for f in flat {
            cur.compose(f, center, &mut rest[0]);
            rec(flat, center, rest, visit)?;
        }
        Ok(())
    }
    rec(ifs.flat(), center, &mut levels, &mut visit)
}

/// Depth at which every cylinder has ratio at most `ratio`.
fn depth_for_ratio(ifs: &SelfSimilarIfs, ratio: f64) -> usize {
    if ratio >= 1.0 {
        return 0;
    }
    if !(ratio > 0.0) {
        return 200;
    }
    let d = ratio.ln() / ifs.max_ratio().ln();
    (d.ceil() as usize + 1).min(200)
}

struct Prepared<'a> {
    ifs: &'a SelfSimilarIfs,
    map: &'a PushforwardMap,
    lipschitz: f64,
    hessian: Option<f64>,
    certified: bool,
    /// Bound on `|x| + |f(x)|` over the hull.
    scale: f64,
}

impl<'a> Prepared<'a> {
    fn new(ifs: &'a SelfSimilarIfs, map: &'a PushforwardMap, xi_len: usize) -> Result<Self> {
        if map.in_dim() != ifs.ambient_dim() {
            return Err(FractalError::config(format!(
                "map takes {} inputs but the IFS lives in dimension {}",
                map.in_dim(),
                ifs.ambient_dim()
            )));
        }
        if xi_len != map.out_dim() {
            return Err(FractalError::config(format!(
                "frequency has {xi_len} components, map has {} outputs",
                map.out_dim()
            )));
        }
        let bounds = map.resolve_bounds(ifs)?;
        let hull = ifs.hull();
        let fc = norm(&map.value(&hull.center));
        Ok(Prepared {
            ifs,
            map,
            lipschitz: bounds.lipschitz,
            hessian: bounds.hessian,
            certified: bounds.certified,
            scale: norm(&hull.center) + hull.radius + fc + bounds.lipschitz * hull.radius,
        })
    }
}

fn check_frequency(xi: &[f64]) -> Result<()> {
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(FractalError::config("frequency must be finite"));
    }
    Ok(())
}

/// Order-0 transform of the graph measure `(id, f)(μ)` at `(ξx, ξy)`.
///
/// A cylinder is closed once the error of collapsing it onto its anchor is
/// at most the leaf tolerance, so the cut adapts to the local phase gradient.
pub fn graph_lift_hat_order0(
    ifs: &SelfSimilarIfs,
    map: &PushforwardMap,
    xi_x: &[f64],
    xi_y: &[f64],
    opts: &EvalOptions,
) -> Result<FrequencySample> {
    opts.check()?;
    if xi_x.len() != ifs.ambient_dim() {
        return Err(FractalError::config(format!(
            "graph frequency has {} base components, IFS lives in dimension {}",
            xi_x.len(),
            ifs.ambient_dim()
        )));
    }
    check_frequency(xi_x)?;
    check_frequency(xi_y)?;
    let prep = Prepared::new(ifs, map, xi_y.len())?;
    let mut xi: Vec<f64> = xi_x.iter().chain(xi_y).copied().collect();
    if xi.iter().all(|v| *v == 0.0) {
        let mut s = FrequencySample::origin(&xi, Scheme::Order0);
        s.certified = prep.certified;
        return Ok(s);
    }
    let original = xi.clone();
    let flipped = canonicalize(&mut xi);
    let (ex, ey) = xi.split_at(ifs.ambient_dim());
    let (value, error, leaves) = order0_sum(&prep, ex, ey, opts)?;
    Ok(FrequencySample {
        xi: original,
        value: if flipped { value.conj() } else { value },
        error_bound: error,
        scheme: Scheme::Order0,
        leaves_used: leaves,
        certified: prep.certified,
    })
}

fn order0_sum(prep: &Prepared, ex: &[f64], ey: &[f64], opts: &EvalOptions) -> Result<(Complex64, f64, u64)> {
    let ifs = prep.ifs;
    let hull = ifs.hull();
    let (k, tol) = (ifs.ambient_dim(), opts.tol);
    let big_g = norm(ex) + norm(ey) * prep.lipschitz;
    let h_phase = prep.hessian.map(|h| norm(ey) * h);
    let xi_norm = (dot(ex, ex) + dot(ey, ey)).sqrt();

    // The first-order bound alone closes every cylinder by this depth.
    let first_order_ratio = tol / (4.0 * PI * big_g * hull.radius).max(f64::MIN_POSITIVE);
    let max_depth = depth_for_ratio(ifs, first_order_ratio);
    let rounding = roundoff_bound(max_depth, xi_norm, prep.scale, ifs.max_ratio());
    let tol_leaf = if rounding < tol / 2.0 { tol - rounding } else { tol / 2.0 };

    let mut counter = LeafCounter::new(opts.budget);
    let mut sum = ComplexSum::new();
    let mut err = 0.0;
    let mut grad = vec![0.0; k];
    let mut work = Work::default();
    walk_cylinders(ifs, max_depth, |node, forced| {
        let x = &node.anchor;
        let phase = dot(ex, x) + prep.map.phase_and_gradient(x, ey, &mut grad, &mut work);
        grad.iter_mut().zip(ex).for_each(|(g, e)| *g += e);
        let r = node.ratio;
        let mut e = (2.0 * PI * big_g * r * hull.radius).min(2.0);
        if let Some(hp) = h_phase {
            let gn = norm(&grad);
            let second = (2.0 * PI * PI * gn * gn + PI * hp) * r * r * hull.second_moment
                + 2.0 * PI * gn * r * hull.center_error;
            e = e.min(second);
        }
        if e > tol_leaf && !forced {
            return Ok(false);
        }
        counter.take(1)?;
        sum.add_polar(node.weight, -2.0 * PI * reduce_turns(phase));
        err += node.weight * e;
        Ok(true)
    })?;
    Ok((sum.sum(), err * (1.0 + 1e-12) + rounding, counter.used))
}

/// Order-0 transform of `f(μ)` at `ξ`; the graph lift evaluated at `(0, ξ)`.
pub fn pushforward_hat_order0(
    ifs: &SelfSimilarIfs,
    map: &PushforwardMap,
    xi: &[f64],
    opts: &EvalOptions,
) -> Result<FrequencySample> {
    let zero = vec![0.0; ifs.ambient_dim()];
    let mut s = graph_lift_hat_order0(ifs, map, &zero, xi, opts)?;
    s.xi = xi.to_vec();
    Ok(s)
}

/// Order-1 transform of `f(μ)` at `ξ`.
///
/// On each cylinder the phase `⟨ξ, f⟩` is replaced by its tangent plane at
/// the anchor, whose integral is `e^{−2πi(φ(x_w) + g·(t_w − x_w))}·μ̂(r_w O_wᵀ g)`.
/// Half the tolerance goes to the Taylor remainders, half to the inner μ̂
/// values. `leaves_used` counts cylinders; inner μ̂ leaves count against the
/// budget but are not reported.
pub fn pushforward_hat_order1(
    ifs: &SelfSimilarIfs,
    map: &PushforwardMap,
    xi: &[f64],
    opts: &EvalOptions,
) -> Result<FrequencySample> {
    opts.check()?;
    check_frequency(xi)?;
    let prep = Prepared::new(ifs, map, xi.len())?;
    let hess = prep.hessian.ok_or(FractalError::MissingHessianBound)?;
    if xi.iter().all(|v| *v == 0.0) {
        let mut s = FrequencySample::origin(xi, Scheme::Order1);
        s.certified = prep.certified;
        return Ok(s);
    }
    let mut eta = xi.to_vec();
    let flipped = canonicalize(&mut eta);

    let hull = ifs.hull();
    let k = ifs.ambient_dim();
    let tol = opts.tol;
    let h_phase = norm(&eta) * hess;
    let taylor_tol = tol / 2.0;
    let inner_tol = tol / 2.0;
    // Taylor remainder per unit weight is π H_φ r² V.
    let ratio = if h_phase > 0.0 {
        (taylor_tol / (2.0 * PI * h_phase * hull.second_moment.max(f64::MIN_POSITIVE))).sqrt()
    } else {
        1.0
    };
    let max_depth = depth_for_ratio(ifs, ratio);
    let rounding = roundoff_bound(max_depth, norm(&eta), prep.scale, ifs.max_ratio());
    let taylor_leaf = if rounding < taylor_tol / 2.0 { taylor_tol - rounding } else { taylor_tol / 2.0 };

    let engine = MuHatEngine::new(ifs, opts.homogeneous_fast_path);
    let mut counter = LeafCounter::new(opts.budget);
    let mut sum = ComplexSum::new();
    let mut err = 0.0;
    let mut cylinders = 0u64;
    let mut grad = vec![0.0; k];
    let mut inner = vec![0.0; k];
    let mut work = Work::default();
    walk_cylinders(ifs, max_depth, |node, forced| {
        let r = node.ratio;
        let taylor = (PI * h_phase * r * r * hull.second_moment).min(2.0);
        if taylor > taylor_leaf && !forced {
            return Ok(false);
        }
        let x = &node.anchor;
        let phase = prep.map.phase_and_gradient(x, &eta, &mut grad, &mut work);
        let shift: f64 = grad.iter().zip(node.translation.iter().zip(x)).map(|(g, (t, a))| g * (t - a)).sum();
        node.pull_back(&grad, &mut inner);
        counter.take(1)?;
        cylinders += 1;
        let part = engine.eval(&inner, inner_tol, &mut counter)?;
        let rot = Complex64::from_polar(node.weight, -2.0 * PI * reduce_turns(reduce_turns(phase) + reduce_turns(shift)));
        sum.add(rot * part.value);
        err += node.weight * (taylor + part.error);
        Ok(true)
    })?;
    let value = sum.sum();
    Ok(FrequencySample {
        xi: xi.to_vec(),
        value: if flipped { value.conj() } else { value },
        error_bound: err * (1.0 + 1e-12) + rounding,
        scheme: Scheme::Order1,
        leaves_used: cylinders,
        certified: prep.certified,
    })
}

/// Order 1 when a Hessian bound is available, otherwise order 0.
pub fn pushforward_hat(
    ifs: &SelfSimilarIfs,
    map: &PushforwardMap,
    xi: &[f64],
    opts: &EvalOptions,
) -> Result<FrequencySample> {
    match pushforward_hat_order1(ifs, map, xi, opts) {
        Err(FractalError::MissingHessianBound) => pushforward_hat_order0(ifs, map, xi, opts),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::mu_hat;

    fn opts(tol: f64) -> EvalOptions {
        EvalOptions::new(tol)
    }

    #[test]
    fn identity_matches_mu_hat() {
        let ifs = SelfSimilarIfs::cantor();
        let id = PushforwardMap::identity_1d();
        for &xi in &[3.0, 40.5, 700.0] {
            let m = mu_hat(&ifs, &[xi], 1e-8).unwrap();
            let a = pushforward_hat_order0(&ifs, &id, &[xi], &opts(1e-6)).unwrap();
            let b = pushforward_hat_order1(&ifs, &id, &[xi], &opts(1e-6)).unwrap();
            assert!((a.value - m.value).norm() <= a.error_bound + m.error_bound);
            assert!((b.value - m.value).norm() <= b.error_bound + m.error_bound);
            // zero Hessian: a single cylinder, error is the inner μ̂ error
            assert_eq!(b.leaves_used, 1);
        }
    }

    #[test]
    fn constant_map_is_a_point_mass() {
        let ifs = SelfSimilarIfs::cantor();
        let c = PushforwardMap::univariate(&[0.3]);
        let s = pushforward_hat_order0(&ifs, &c, &[12.0], &opts(1e-9)).unwrap();
        let want = Complex64::from_polar(1.0, -2.0 * PI * 12.0 * 0.3);
        assert!((s.value - want).norm() < 1e-12);
        assert!(s.error_bound < 1e-12);
        assert_eq!(s.leaves_used, 1);
    }

    #[test]
    fn origin_and_symmetry() {
        let ifs = SelfSimilarIfs::cantor();
        let sq = PushforwardMap::square(1);
        for s in [
            pushforward_hat_order0(&ifs, &sq, &[0.0], &opts(1e-6)).unwrap(),
            pushforward_hat_order1(&ifs, &sq, &[0.0], &opts(1e-6)).unwrap(),
        ] {
            assert_eq!(s.value, Complex64::new(1.0, 0.0));
            assert_eq!(s.error_bound, 0.0);
        }
        let a = pushforward_hat_order1(&ifs, &sq, &[513.3], &opts(1e-6)).unwrap();
        let b = pushforward_hat_order1(&ifs, &sq, &[-513.3], &opts(1e-6)).unwrap();
        assert_eq!(a.value, b.value.conj());
        let a = pushforward_hat_order0(&ifs, &sq, &[513.3], &opts(1e-6)).unwrap();
        let b = pushforward_hat_order0(&ifs, &sq, &[-513.3], &opts(1e-6)).unwrap();
        assert_eq!(a.value, b.value.conj());
    }

    #[test]
    fn lift_at_zero_base_frequency_is_the_pushforward() {
        let ifs = SelfSimilarIfs::cantor();
        let sq = PushforwardMap::square(1);
        let a = graph_lift_hat_order0(&ifs, &sq, &[0.0], &[300.0], &opts(1e-6)).unwrap();
        let b = pushforward_hat_order0(&ifs, &sq, &[300.0], &opts(1e-6)).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.error_bound, b.error_bound);
    }

    #[test]
    fn lift_with_zero_map_frequency_is_mu_hat() {
        let ifs = SelfSimilarIfs::cantor();
        let sq = PushforwardMap::square(1);
        let a = graph_lift_hat_order0(&ifs, &sq, &[55.0], &[0.0], &opts(1e-7)).unwrap();
        let m = mu_hat(&ifs, &[55.0], 1e-9).unwrap();
        assert!((a.value - m.value).norm() <= a.error_bound + m.error_bound);
    }

    #[test]
    fn orders_agree_and_order1_is_cheaper() {
        let ifs = SelfSimilarIfs::cantor();
        let sq = PushforwardMap::square(1);
        let xi = [16384.0];
        let a = pushforward_hat_order0(&ifs, &sq, &xi, &opts(1e-5)).unwrap();
        let b = pushforward_hat_order1(&ifs, &sq, &xi, &opts(1e-5)).unwrap();
        assert!((a.value - b.value).norm() <= a.error_bound + b.error_bound);
        assert!(a.error_bound <= 1e-5 && b.error_bound <= 1e-5);
        assert!(a.leaves_used >= 10 * b.leaves_used, "{} vs {}", a.leaves_used, b.leaves_used);
    }

    #[test]
    fn order1_needs_hessian() {
        use std::sync::Arc;
        let ifs = SelfSimilarIfs::cantor();
        let f = PushforwardMap::generic(1, 1, Arc::new(|x: &[f64], o: &mut [f64]| o[0] = x[0].sin())).with_lipschitz_bound(
            crate::fourier::StatedBound {
                value: 1.0,
                center: vec![0.5],
                radius: 1.0,
            },
        );
        assert!(matches!(
            pushforward_hat_order1(&ifs, &f, &[10.0], &opts(1e-6)),
            Err(FractalError::MissingHessianBound)
        ));
        let s = pushforward_hat(&ifs, &f, &[10.0], &opts(1e-6)).unwrap();
        assert_eq!(s.scheme, Scheme::Order0);
    }

    #[test]
    fn log_needs_positive_support() {
        let ifs = SelfSimilarIfs::cantor();
        let err = pushforward_hat_order0(&ifs, &PushforwardMap::log(0.0), &[1.0], &opts(1e-6)).unwrap_err();
        assert!(matches!(err, FractalError::SupportNotPositive { .. }));
    }
}
