//! Bracketed root finding: bisection down to a width, then a couple of
//! Newton polish steps that are only kept when they reduce the residual.

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub width: f64,
    pub newton_steps: usize,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            width: 1e-13,
            newton_steps: 2,
            max_iter: 400,
        }
    }
}

/// Finds a root of `f` in `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign.
/// `df` is the derivative used for polishing. Returns `None` if the bracket
/// does not straddle a sign change.
pub fn bisect_newton<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, opts: RootOptions) -> Option<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return None;
    }
    let mut iter = 0;
    while hi - lo > opts.width && iter < opts.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        iter += 1;
    }
    let mut x = 0.5 * (lo + hi);
    let mut fx = f(x);
    for _ in 0..opts.newton_steps {
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let cand = x - fx / d;
        let fc = f(cand);
        if fc.abs() < fx.abs() {
            x = cand;
            fx = fc;
        } else {
            break;
        }
    }
    Some(x)
}
