use std::ops::AddAssign;

use num_complex::Complex64;

/// Compensated summation (Kahan–Babuška / Neumaier).
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Componentwise compensated summation of complex numbers.
#[derive(Debug, Default, Clone, Copy)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn add_polar(&mut self, weight: f64, angle: f64) {
        let (s, c) = angle.sin_cos();
        self.re.add(weight * c);
        self.im.add(weight * s);
    }

    pub fn sum(&self) -> Complex64 {
        Complex64::new(self.re.sum(), self.im.sum())
    }
}

impl AddAssign<Complex64> for ComplexSum {
    fn add_assign(&mut self, rhs: Complex64) {
        self.add(rhs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_is_compensated() {
        let mut s = NeumaierSum::new();
        for x in [1e200, 0.1, 0.2, 0.3, -1e200] {
            s += x;
        }
        assert!((s.sum() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn many_small_terms() {
        let n = 10_000_000;
        let s: NeumaierSum = std::iter::repeat(0.1).take(n).collect();
        assert!((s.sum() - 1_000_000.0).abs() < 1e-8);
    }

    #[test]
    fn complex_sum_polar() {
        let mut s = ComplexSum::new();
        s.add_polar(0.5, 0.0);
        s.add_polar(0.5, std::f64::consts::PI);
        assert!(s.sum().norm() < 1e-16);
    }
}
