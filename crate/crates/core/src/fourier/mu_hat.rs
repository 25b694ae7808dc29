//! μ̂ through the one-step relation
//! `μ̂(η) = Σᵢ pᵢ e^{−2πi⟨η,tᵢ⟩} μ̂(rᵢOᵢᵀη)`,
//! unrolled along the cylinder tree until the frequency is small enough
//! for `e^{−2πi⟨η,c⟩}` (with `c` the barycenter) to be an accurate leaf value.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{canonicalize, dot, norm, reduce_turns, roundoff_bound, EvalOptions, FrequencySample, Scheme};
use crate::error::{FractalError, Result};
use crate::ifs::{Budget, SelfSimilarIfs};
use crate::numerics::ComplexSum;

/// Result of one evaluation before it is packaged as a sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Partial {
    pub value: Complex64,
    pub error: f64,
    pub leaves: u64,
}

/// Remaining leaf allowance shared by nested evaluations.
#[derive(Debug)]
pub(crate) struct LeafCounter {
    pub used: u64,
    pub budget: Budget,
}

impl LeafCounter {
    pub fn new(budget: Budget) -> Self {
        LeafCounter { used: 0, budget }
    }

    #[inline]
    pub fn take(&mut self, n: u64) -> Result<()> {
        self.used += n;
        if self.used > self.budget.max_leaves {
            Err(self.budget.exceeded())
        } else {
            Ok(())
        }
    }
}

pub(crate) struct MuHatEngine<'a> {
    ifs: &'a SelfSimilarIfs,
    k: usize,
    center: &'a [f64],
    radius: f64,
    moment: f64,
    center_err: f64,
    /// Bound on `|c| + R + max|tᵢ|`, the size of every point the walk touches.
    scale: f64,
    product_form: bool,
}

impl<'a> MuHatEngine<'a> {
    pub fn new(ifs: &'a SelfSimilarIfs, fast_path: bool) -> Self {
        let hull = ifs.hull();
        let tmax = ifs.maps().iter().map(|m| m.translation().norm()).fold(0.0, f64::max);
        MuHatEngine {
            ifs,
            k: ifs.ambient_dim(),
            center: &hull.center,
            radius: hull.radius,
            moment: hull.second_moment,
            center_err: hull.center_error,
            scale: super::norm(&hull.center) + hull.radius + tmax,
            product_form: fast_path && ifs.is_homogeneous(),
        }
    }

    /// Bound for `|μ̂(η) − e^{−2πi⟨η,c⟩}|` with `n = |η|`.
    ///
    /// `|e^{−ia} − 1| ≤ |a|` gives `2πnR`; expanding to second order, the
    /// linear term integrates to `⟨η, m − c⟩` (`m` the true barycenter) and
    /// the remainder is at most `2π²n²·E|x − c|²`.
    #[inline]
    pub fn leaf_error(&self, n: f64) -> f64 {
        let first = 2.0 * PI * n * self.radius;
        let second = 2.0 * PI * n * self.center_err + 2.0 * PI * PI * n * n * self.moment;
        first.min(second).min(2.0)
    }

    /// Largest `|η|` whose leaf error is at most `tol`.
    fn threshold(&self, tol: f64) -> f64 {
        if tol >= 2.0 {
            return f64::INFINITY;
        }
        let first = tol / (2.0 * PI * self.radius);
        let a = 2.0 * PI * PI * self.moment;
        let b = 2.0 * PI * self.center_err;
        let second = if a > 0.0 {
            (-b + (b * b + 4.0 * a * tol).sqrt()) / (2.0 * a)
        } else {
            tol / b.max(f64::MIN_POSITIVE)
        };
        first.max(second)
    }

    fn depth_needed(&self, xi_norm: f64, tol: f64) -> usize {
        let thr = self.threshold(tol);
        if xi_norm <= thr {
            return 0;
        }
        let d = (xi_norm / thr).ln() / -self.ifs.max_ratio().ln();
        d.ceil() as usize + 1
    }

    /// Evaluates μ̂(η) with total error at most `tol` (floating-point error included).
    pub fn eval(&self, eta: &[f64], tol: f64, counter: &mut LeafCounter) -> Result<Partial> {
        let n = norm(eta);
        if n == 0.0 {
            return Ok(Partial {
                value: Complex64::new(1.0, 0.0),
                error: 0.0,
                leaves: 0,
            });
        }
        let max_depth = self.depth_needed(n, tol / 2.0);
        let rounding = roundoff_bound(max_depth, n, self.scale, self.ifs.max_ratio());
        let tol_leaf = if rounding < tol / 2.0 { tol - rounding } else { tol / 2.0 };
        let (value, leaf_err, leaves) = if self.product_form {
            self.product(eta, tol_leaf, counter)?
        } else {
            self.walk(eta, tol_leaf, max_depth, counter)?
        };
        Ok(Partial {
            value,
            error: leaf_err * (1.0 + 1e-12) + rounding,
            leaves,
        })
    }

    fn walk(&self, eta: &[f64], tol_leaf: f64, max_depth: usize, counter: &mut LeafCounter) -> Result<(Complex64, f64, u64)> {
        let mut scratch = vec![0.0; self.k * (max_depth + 8)];
        let mut state = Walk {
            engine: self,
            tol_leaf,
            sum: ComplexSum::new(),
            err: 0.0,
            leaves: 0,
            counter,
        };
        state.visit(eta, 1.0, 0.0, &mut scratch)?;
        Ok((state.sum.sum(), state.err, state.leaves))
    }

    /// Homogeneous IFS: every child frequency is `Aᵀη`, so
    /// `μ̂(η) = M(η) μ̂(Aᵀη)` with `M(η) = Σ pᵢ e^{−2πi⟨η,tᵢ⟩}`.
    fn product(&self, eta: &[f64], tol_leaf: f64, counter: &mut LeafCounter) -> Result<(Complex64, f64, u64)> {
        let flat = self.ifs.flat();
        let mut cur = eta.to_vec();
        let mut next = vec![0.0; self.k];
        let mut prod = Complex64::new(1.0, 0.0);
        let mut terms = 0u64;
        loop {
            let le = self.leaf_error(norm(&cur)) * prod.norm();
            if le <= tol_leaf {
                let angle = -2.0 * PI * reduce_turns(dot(&cur, self.center));
                return Ok((prod * Complex64::from_polar(1.0, angle), le, terms.max(1)));
            }
            let mut m = ComplexSum::new();
            for f in flat {
                m.add_polar(f.weight, -2.0 * PI * reduce_turns(dot(&cur, &f.translation)));
            }
            prod *= m.sum();
            terms += flat.len() as u64;
            counter.take(flat.len() as u64)?;
            flat[0].pull_back_frequency(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
}

struct Walk<'e, 'a, 'c> {
    engine: &'e MuHatEngine<'a>,
    tol_leaf: f64,
    sum: ComplexSum,
    err: f64,
    leaves: u64,
    counter: &'c mut LeafCounter,
}

impl Walk<'_, '_, '_> {
    fn visit(&mut self, eta: &[f64], weight: f64, phase: f64, scratch: &mut [f64]) -> Result<()> {
        let e = self.engine;
        let le = e.leaf_error(norm(eta));
        // Running out of scratch cannot happen for a correct depth estimate;
        // closing the leaf there keeps the bound honest regardless.
        if le <= self.tol_leaf || scratch.len() < e.k {
            self.counter.take(1)?;
            self.leaves += 1;
            let angle = -2.0 * PI * reduce_turns(phase + dot(eta, e.center));
            self.sum.add_polar(weight, angle);
            self.err += weight * le;
            return Ok(());
        }
        let (child, rest) = scratch.split_at_mut(e.k);
        for f in e.ifs.flat() {
            f.pull_back_frequency(eta, child);
            let ph = reduce_turns(phase + dot(eta, &f.translation));
            self.visit(child, weight * f.weight, ph, rest)?;
        }
        Ok(())
    }
}

/// μ̂(ξ) with default options and tolerance `tol`.
pub fn mu_hat(ifs: &SelfSimilarIfs, xi: &[f64], tol: f64) -> Result<FrequencySample> {
    mu_hat_with(ifs, xi, &EvalOptions::new(tol))
}

pub fn mu_hat_with(ifs: &SelfSimilarIfs, xi: &[f64], opts: &EvalOptions) -> Result<FrequencySample> {
    opts.check()?;
    if xi.len() != ifs.ambient_dim() {
        return Err(FractalError::config(format!(
            "frequency has {} components, IFS lives in dimension {}",
            xi.len(),
            ifs.ambient_dim()
        )));
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(FractalError::config("frequency must be finite"));
    }
    if xi.iter().all(|v| *v == 0.0) {
        return Ok(FrequencySample::origin(xi, Scheme::ExactRecursion));
    }
    let mut eta = xi.to_vec();
    let flipped = canonicalize(&mut eta);
    let engine = MuHatEngine::new(ifs, opts.homogeneous_fast_path);
    let mut counter = LeafCounter::new(opts.budget);
    let p = engine.eval(&eta, opts.tol, &mut counter)?;
    Ok(FrequencySample {
        xi: xi.to_vec(),
        value: if flipped { p.value.conj() } else { p.value },
        error_bound: p.error,
        scheme: Scheme::ExactRecursion,
        leaves_used: p.leaves,
        certified: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor_closed_form(xi: f64) -> Complex64 {
        let mut v = Complex64::from_polar(1.0, -PI * xi);
        let mut s = xi;
        loop {
            s /= 3.0;
            if 2.0 * PI * s.abs() < 1e-12 {
                break;
            }
            v *= (2.0 * PI * s).cos();
        }
        v
    }

    #[test]
    fn origin_is_exact() {
        let s = mu_hat(&SelfSimilarIfs::cantor(), &[0.0], 1e-6).unwrap();
        assert_eq!(s.value, Complex64::new(1.0, 0.0));
        assert_eq!(s.error_bound, 0.0);
    }

    #[test]
    fn cantor_matches_product() {
        let ifs = SelfSimilarIfs::cantor();
        for &xi in &[0.3, 1.0, 7.5, 123.456, -980.0, 9999.0] {
            let s = mu_hat(&ifs, &[xi], 1e-7).unwrap();
            let d = (s.value - cantor_closed_form(xi)).norm();
            assert!(d <= s.error_bound, "xi={xi} diff={d} bound={}", s.error_bound);
            assert!(s.error_bound <= 1e-7);
        }
    }

    #[test]
    fn product_form_agrees_with_walk() {
        let ifs = SelfSimilarIfs::cantor();
        let fast = EvalOptions::new(1e-9).with_fast_path(true);
        for &xi in &[2.5, 77.0, 5000.1] {
            let a = mu_hat(&ifs, &[xi], 1e-9).unwrap();
            let b = mu_hat_with(&ifs, &[xi], &fast).unwrap();
            assert!((a.value - b.value).norm() <= a.error_bound + b.error_bound);
            assert!(b.leaves_used < a.leaves_used);
        }
    }

    #[test]
    fn uniform_kills_integers() {
        let ifs = SelfSimilarIfs::uniform_unit();
        for m in 1..=16 {
            let s = mu_hat(&ifs, &[m as f64], 1e-8).unwrap();
            assert!(s.value.norm() <= s.error_bound, "m={m}");
        }
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        let ifs = SelfSimilarIfs::on_line(&[(0.4, 0.0), (0.3, 0.7)], &[0.6, 0.4]).unwrap();
        let a = mu_hat(&ifs, &[31.7], 1e-6).unwrap();
        let b = mu_hat(&ifs, &[-31.7], 1e-6).unwrap();
        assert_eq!(a.value, b.value.conj());
        assert_eq!(a.error_bound, b.error_bound);
    }

    #[test]
    fn budget_is_enforced() {
        let ifs = SelfSimilarIfs::cantor();
        let opts = EvalOptions::new(1e-10).with_budget(Budget::new(1000));
        let err = mu_hat_with(&ifs, &[1e5], &opts).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
