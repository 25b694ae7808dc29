//! Products and ratios of random variables with self-similar laws, computed
//! in log coordinates: `log(XY) = log X + log Y`, so the transform of the
//! law of `log(XY)` is the product of the factors' log-pushforward transforms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{FractalError, Result};
use crate::fourier::{batch_pushforward, reduce_turns, EvalOptions, PushforwardMap};
use crate::ifs::{Budget, SelfSimilarIfs};
use crate::numerics::least_squares_line;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Largest frequency used in the inversion.
    #[serde(default = "default_band_limit")]
    pub band_limit: f64,
    /// Frequency step is `1/(oversample · L)` for log-support length `L`.
    #[serde(default = "default_oversample")]
    pub oversample: f64,
    /// Target sup error of the recovered log-density; split evenly across
    /// frequencies and factors to set the per-sample tolerance.
    #[serde(default = "default_accuracy")]
    pub accuracy: f64,
    /// Points of the output density table.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_band_limit() -> f64 {
    256.0
}
fn default_oversample() -> f64 {
    4.0
}
fn default_accuracy() -> f64 {
    0.005
}
fn default_points() -> usize {
    301
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            band_limit: default_band_limit(),
            oversample: default_oversample(),
            accuracy: default_accuracy(),
            points: default_points(),
        }
    }
}

impl GridConfig {
    fn check(&self) -> Result<()> {
        if !(self.band_limit >= 8.0 && self.band_limit.is_finite()) {
            return Err(FractalError::config(format!("band_limit must be at least 8, got {}", self.band_limit)));
        }
        if !(self.oversample >= 2.0) {
            return Err(FractalError::config(format!(
                "oversample must be at least 2 to avoid wrap-around, got {}",
                self.oversample
            )));
        }
        if !(self.accuracy > 0.0) || self.points < 2 {
            return Err(FractalError::config("accuracy must be positive and points at least 2"));
        }
        Ok(())
    }
}

/// One factor `±log(s·(x − shift))` of the sum in log coordinates.
#[derive(Debug, Clone)]
pub struct LogFactor {
    pub ifs: SelfSimilarIfs,
    pub shift: f64,
    /// `−1` when the support lies left of `shift`.
    pub side: f64,
    /// Use `−log` (the factor enters as a divisor).
    pub negate: bool,
}

impl LogFactor {
    /// `log x`, for a measure on `(0, ∞)`.
    pub fn log(ifs: SelfSimilarIfs) -> Result<Self> {
        let (lo, hi) = ifs.hull().interval();
        if ifs.ambient_dim() != 1 || !(lo > 0.0) {
            return Err(FractalError::SupportNotPositive { lo, hi });
        }
        Ok(LogFactor {
            ifs,
            shift: 0.0,
            side: 1.0,
            negate: false,
        })
    }

    fn map(&self) -> Result<PushforwardMap> {
        PushforwardMap::log_signed(self.shift, self.side)
    }

    /// Image interval in log coordinates.
    fn log_interval(&self) -> (f64, f64) {
        let (lo, hi) = self.ifs.hull().interval();
        let (a, b) = if self.side > 0.0 { (lo - self.shift, hi - self.shift) } else { (self.shift - hi, self.shift - lo) };
        let (la, lb) = (a.ln(), b.ln());
        if self.negate {
            (-lb, -la)
        } else {
            (la, lb)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityPoint {
    pub x: f64,
    pub density: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductSample {
    pub xi: f64,
    pub value: Complex64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Parseval {
    pub frequency_side: f64,
    pub space_side: f64,
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvolutionExperiment {
    pub delta: f64,
    pub n_frequencies: usize,
    pub band_limit: f64,
    /// Support of the sum in log coordinates.
    pub log_support: (f64, f64),
    /// Non-negative frequencies only; negative ones are conjugates.
    pub product: Vec<ProductSample>,
    /// Density of `exp` of the sum (the product or ratio variable).
    pub density: Vec<DensityPoint>,
    /// Mass of the recovered density on the support window.
    pub mass: f64,
    pub parseval: Parseval,
    pub max_imag_residue: f64,
    pub min_log_density: f64,
    /// Growth slopes of per-octave `Σ|ĝ|Δ` and `Σ|ĝ|²Δ`; negative slopes
    /// indicate an integrable (resp. square-integrable) transform.
    pub l1_octave_slope: Option<f64>,
    pub l2_octave_slope: Option<f64>,
    /// Extrapolated `∫_{|ξ|>W} |ĝ|` from the L¹ slope; infinite if it does not decay.
    pub tail_estimate: f64,
    pub notes: Vec<String>,
}

/// Law of `X₁·X₂⋯` for independent `Xᵢ` with the given laws on `(0, ∞)`.
pub fn multiplicative_convolution(factors: &[SelfSimilarIfs], grid: &GridConfig, budget: Budget) -> Result<ConvolutionExperiment> {
    let fs = factors.iter().cloned().map(LogFactor::log).collect::<Result<Vec<_>>>()?;
    convolve_logs(&fs, grid, budget)
}

/// Law of `(X − a)/(Y − b)`, whose log is `log(X − a) − log(Y − b)`; the
/// radial direction from `(a, b)` to `(X, Y)` is a smooth function of it.
pub fn radial_projection_experiment(
    ifs_e: &SelfSimilarIfs,
    ifs_f: &SelfSimilarIfs,
    a: f64,
    b: f64,
    grid: &GridConfig,
    budget: Budget,
) -> Result<ConvolutionExperiment> {
    let side = |ifs: &SelfSimilarIfs, c: f64| -> Option<f64> {
        let (lo, hi) = ifs.hull().interval();
        if lo > c {
            Some(1.0)
        } else if hi < c {
            Some(-1.0)
        } else {
            None
        }
    };
    if ifs_e.ambient_dim() != 1 || ifs_f.ambient_dim() != 1 {
        return Err(FractalError::config("radial experiment needs measures on the line"));
    }
    let (Some(se), Some(sf)) = (side(ifs_e, a), side(ifs_f, b)) else {
        return Err(FractalError::CenterInsideSupport { a, b });
    };
    let fs = [
        LogFactor {
            ifs: ifs_e.clone(),
            shift: a,
            side: se,
            negate: false,
        },
        LogFactor {
            ifs: ifs_f.clone(),
            shift: b,
            side: sf,
            negate: true,
        },
    ];
    convolve_logs(&fs, grid, budget)
}

/// Multiplies in an order fixed by the values themselves, so that permuting
/// the factors gives bit-identical products.
fn ordered_product(values: &mut [Complex64]) -> Complex64 {
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    values.iter().fold(Complex64::new(1.0, 0.0), |acc, v| acc * v)
}

pub fn convolve_logs(factors: &[LogFactor], grid: &GridConfig, budget: Budget) -> Result<ConvolutionExperiment> {
    grid.check()?;
    if factors.is_empty() {
        return Err(FractalError::config("at least one factor is required"));
    }
    let (lo, hi) = factors
        .iter()
        .map(LogFactor::log_interval)
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let len = (hi - lo).max(1e-6);
    let delta = 1.0 / (grid.oversample * len);
    let n = (grid.band_limit / delta).ceil() as usize;
    let m = factors.len() as f64;
    // Density error ≤ Δ Σ_{|j| ≤ n} |error_j| ≤ 2W·max error; keep it below accuracy/2.
    let tol = grid.accuracy / (4.0 * grid.band_limit * m);
    let opts = EvalOptions::new(tol).with_budget(budget).with_fast_path(true);
    let xis: Vec<Vec<f64>> = (0..=n).map(|j| vec![j as f64 * delta]).collect();

    let mut per_factor = Vec::with_capacity(factors.len());
    for f in factors {
        let map = f.map()?;
        let mut s = batch_pushforward(&f.ifs, &map, &xis, &opts, None)?;
        if f.negate {
            s.iter_mut().for_each(|v| v.value = v.value.conj());
        }
        per_factor.push(s);
    }
    let mut notes = Vec::new();
    if per_factor.iter().flatten().any(|s| !s.certified) {
        notes.push("some error bounds rest on estimated derivative bounds".into());
    }
    let product: Vec<ProductSample> = (0..=n)
        .map(|j| {
            let mut vals: Vec<Complex64> = per_factor.iter().map(|s| s[j].value).collect();
            let value = ordered_product(&mut vals);
            // exact factors have modulus at most 1, so the product error is at most Π(1 + eᵢ) − 1.
            let err = per_factor.iter().fold(1.0, |acc, s| acc * (1.0 + s[j].error_bound)) - 1.0;
            ProductSample {
                xi: j as f64 * delta,
                value,
                error_bound: err,
            }
        })
        .collect();

    // Inversion on the full period 1/Δ, centred on the log-support.
    let period = 1.0 / delta;
    let size = (2 * n + 1).max(4096).next_power_of_two();
    let u0 = lo - 0.5 * (period - len);
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (j, p) in product.iter().enumerate() {
        let c = p.value * Complex64::from_polar(1.0, 2.0 * PI * reduce_turns(p.xi * u0));
        buf[j] += c;
        if j > 0 {
            buf[size - j] += c.conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(size).process(&mut buf);
    let du = period / size as f64;
    let g: Vec<f64> = buf.iter().map(|z| z.re * delta).collect();
    let max_imag_residue = buf.iter().map(|z| (z.im * delta).abs()).fold(0.0, f64::max);

    let in_support = |u: f64| u >= lo - 1e-12 && u <= hi + 1e-12;
    let mut mass = 0.0;
    let mut min_g = f64::INFINITY;
    for (i, &v) in g.iter().enumerate() {
        let u = u0 + i as f64 * du;
        if in_support(u) {
            mass += v * du;
        }
        min_g = min_g.min(v);
    }
    let space_side: f64 = g.iter().map(|v| v * v).sum::<f64>() * du;
    let frequency_side: f64 =
        delta * (product[0].value.norm_sqr() + 2.0 * product[1..].iter().map(|p| p.value.norm_sqr()).sum::<f64>());
    let parseval = Parseval {
        frequency_side,
        space_side,
        relative_difference: (frequency_side - space_side).abs() / frequency_side.max(f64::MIN_POSITIVE),
    };
    if min_g < -1e-3 {
        notes.push(format!("recovered density undershoots to {min_g:e}"));
    }
    if !(0.98..=1.02).contains(&mass) {
        notes.push(format!("mass on the support window is {mass}, outside [0.98, 1.02]"));
    }

    let (l1_octave_slope, l1_last) = octave_slope(&product, delta, |z| z.norm());
    let (l2_octave_slope, _) = octave_slope(&product, delta, |z| z.norm_sqr());
    let tail_estimate = match (l1_octave_slope, l1_last) {
        (Some(s), Some(last)) if s < 0.0 => {
            let r = s.exp2();
            2.0 * last * r / (1.0 - r)
        }
        _ => f64::INFINITY,
    };
    if !tail_estimate.is_finite() {
        notes.push("transform is not summable at this band limit; density values are unreliable".into());
    }

    let transform_err = delta * (product[0].error_bound + 2.0 * product[1..].iter().map(|p| p.error_bound).sum::<f64>());
    let density = (0..grid.points)
        .map(|i| {
            let u = lo + (hi - lo) * i as f64 / (grid.points - 1) as f64;
            let x = u.exp();
            let gu = log_density_at(&product, delta, u);
            DensityPoint {
                x,
                density: gu / x,
                error_estimate: (transform_err + tail_estimate) / x,
            }
        })
        .collect();

    Ok(ConvolutionExperiment {
        delta,
        n_frequencies: n + 1,
        band_limit: grid.band_limit,
        log_support: (lo, hi),
        product,
        density,
        mass,
        parseval,
        max_imag_residue,
        min_log_density: min_g,
        l1_octave_slope,
        l2_octave_slope,
        tail_estimate,
        notes,
    })
}

/// `g(u) = Δ(ĝ₀ + 2 Re Σ_{j≥1} ĝⱼ e^{2πi jΔu})`, summed directly.
fn log_density_at(product: &[ProductSample], delta: f64, u: f64) -> f64 {
    let mut acc = product[0].value.re;
    for p in &product[1..] {
        let (s, c) = (2.0 * PI * reduce_turns(p.xi * u)).sin_cos();
        acc += 2.0 * (p.value.re * c - p.value.im * s);
    }
    delta * acc
}

/// Slope of `log₂ Σ_{octave} w(ĝ)Δ` over the complete octaves `[2^j, 2^{j+1})`
/// with `j ≥ 0`, and the last octave's sum.
fn octave_slope(product: &[ProductSample], delta: f64, w: impl Fn(Complex64) -> f64) -> (Option<f64>, Option<f64>) {
    let max_xi = product.last().map_or(0.0, |p| p.xi);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last = None;
    let mut j = 0i32;
    while (j as f64 + 1.0).exp2() <= max_xi {
        let (a, b) = ((j as f64).exp2(), (j as f64 + 1.0).exp2());
        let s: f64 = product.iter().filter(|p| p.xi >= a && p.xi < b).map(|p| w(p.value)).sum::<f64>() * delta;
        if s > 0.0 {
            xs.push(j as f64);
            ys.push(s.log2());
            last = Some(s);
        }
        j += 1;
    }
    if xs.len() < 3 {
        return (None, last);
    }
    (least_squares_line(&xs, &ys).map(|f| f.slope), last)
}

/// Density table CSV: `x,density,error_estimate`.
pub fn write_density_csv(exp: &ConvolutionExperiment, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "x,density,error_estimate")?;
    for p in &exp.density {
        writeln!(out, "{},{},{}", p.x, p.density, p.error_estimate)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> GridConfig {
        GridConfig {
            band_limit: 64.0,
            accuracy: 0.05,
            ..GridConfig::default()
        }
    }

    #[test]
    fn rejects_non_positive_support() {
        let err = multiplicative_convolution(&[SelfSimilarIfs::cantor()], &coarse(), Budget::default()).unwrap_err();
        assert!(matches!(err, FractalError::SupportNotPositive { .. }));
    }

    #[test]
    fn centre_inside_support() {
        let u = SelfSimilarIfs::uniform_unit().translated(&[1.0]).unwrap();
        let err = radial_projection_experiment(&u, &u, 1.5, 0.0, &coarse(), Budget::default()).unwrap_err();
        assert!(matches!(err, FractalError::CenterInsideSupport { .. }));
    }

    #[test]
    fn factor_order_does_not_matter() {
        let u = SelfSimilarIfs::uniform_unit().translated(&[1.0]).unwrap();
        let c = SelfSimilarIfs::cantor().translated(&[1.0]).unwrap();
        let a = multiplicative_convolution(&[u.clone(), c.clone()], &coarse(), Budget::default()).unwrap();
        let b = multiplicative_convolution(&[c, u], &coarse(), Budget::default()).unwrap();
        assert_eq!(a.product, b.product);
        assert_eq!(a.product[0].value, Complex64::new(1.0, 0.0));
    }
}
