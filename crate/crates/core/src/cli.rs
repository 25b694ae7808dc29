//! The `fractal-fourier` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{
    decay_bound, high_dim_condition, log_pushforward_sigma, prop48_conditions, sigma_p, symmetric_thresholds,
    three_set_condition, two_set_condition, vdc_exponent, DecayBound, Hypotheses, Thresholds,
};
use crate::config::Scenario;
use crate::dimension::{build_profile, DimensionProfile};
use crate::error::{FractalError, Result};
use crate::fourier::{
    batch_mu_hat, batch_pushforward, curvature_diagnostic, write_samples_csv, EvalOptions, MapSpec, PushforwardMap,
    Scheme,
};
use crate::ifs::{Budget, ExpansionVerdict, SelfSimilarIfs};
use crate::lab::{
    multiplicative_convolution, radial_projection_experiment, write_density_csv, write_octaves_csv,
    ConvolutionExperiment, measure_decay_slope,
};

/// Stdout line that tolerates a closed pipe (`| head`).
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

const CURVATURE_SAMPLES: usize = 2000;
const EXPANSION_DEPTH: usize = 12;
const EXPANSION_CAP: usize = 20_000;

/// Fourier decay, dimension exponents and arithmetic of self-similar measures.
///
/// Exit codes: 0 ok, 2 invalid configuration, 3 inconsistent dimension
/// profile, 4 resource budget exceeded, 5 internal error. The leaf budget
/// defaults to 10^7 and is read from FRACTAL_FOURIER_BUDGET when set.
#[derive(Debug, Parser)]
#[command(name = "fractal-fourier", version)]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Output directory, overriding the scenario's `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dimension profile of the scenario's measure (writes profile.json).
    Dims { scenario: PathBuf },
    /// Decay exponent bounds for the scenario's measure and map (writes bounds.json).
    Bounds {
        scenario: Option<PathBuf>,
        /// Also report the symmetric dimension thresholds for products of two and three sets.
        #[arg(long)]
        thresholds: bool,
    },
    /// Fourier transform of the measure or its pushforward (writes fourier.csv).
    Fourier { scenario: PathBuf },
    /// Per-octave decay experiment (writes decay.json, decay_octaves.csv).
    Decay { scenario: PathBuf },
    /// Density of a product or radial ratio (writes convolution.json, density.csv, transform.csv).
    Convolve { scenario: PathBuf },
    /// Dimension conditions for products of sets and measures.
    #[command(subcommand)]
    ArithCheck(ArithCheck),
}

#[derive(Debug, Subcommand)]
pub enum ArithCheck {
    /// Positive measure of E·F from dim E and dim F.
    TwoSet { dim_e: f64, dim_f: f64 },
    /// Non-empty interior of E·F·G.
    ThreeSet { dim_e: f64, dim_f: f64, dim_g: f64 },
    /// L² density of μ·ν from correlation dimensions.
    Prop48(Prop48Args),
    /// Decay exponent of the log-image of an AD-regular measure.
    LogSigma { kappa2: f64 },
    /// L² density of the image of a measure in dimension k ≥ 5.
    HighDim { k: usize, kappa2: f64 },
    /// Symmetric thresholds for two and three sets.
    Thresholds,
}

#[derive(Debug, Args)]
pub struct Prop48Args {
    pub kappa2_mu: f64,
    pub kappa2_nu: f64,
    /// ν is Ahlfors-David regular.
    #[arg(long)]
    pub nu_ad_regular: bool,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n as usize);
    }
    let pool = builder
        .build()
        .map_err(|e| FractalError::Internal(format!("thread pool: {e}")))?;
    let budget = Budget::from_env()?;
    pool.install(|| dispatch(cli, budget))
}

fn dispatch(cli: &Cli, budget: Budget) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Dims { scenario } => cmd_dims(&Scenario::from_path(scenario)?, out),
        Command::Bounds { scenario, thresholds } => {
            let sc = scenario.as_deref().map(Scenario::from_path).transpose()?;
            cmd_bounds(sc.as_ref(), *thresholds, out)
        }
        Command::Fourier { scenario } => cmd_fourier(&Scenario::from_path(scenario)?, out, budget),
        Command::Decay { scenario } => cmd_decay(&Scenario::from_path(scenario)?, out, budget),
        Command::Convolve { scenario } => cmd_convolve(&Scenario::from_path(scenario)?, out, budget),
        Command::ArithCheck(a) => cmd_arith(a),
    }
}

fn write_file(dir: &Path, name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let io = |source| FractalError::Io {
        path: dir.join(name).display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    let mut buf = Vec::new();
    write(&mut buf).map_err(io)?;
    fs::write(dir.join(name), buf).map_err(io)?;
    eprintln!("wrote {}", dir.join(name).display());
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| FractalError::Internal(format!("serialising {name}: {e}")))?;
    write_file(dir, name, |b| writeln!(b, "{text}"))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| FractalError::Internal(e.to_string()))?;
    say!("{text}");
    Ok(())
}

fn profile_of(sc: &Scenario) -> Result<(SelfSimilarIfs, DimensionProfile)> {
    let (ifs, overrides) = sc.ifs()?;
    let profile = build_profile(&ifs, &overrides)?;
    Ok((ifs, profile))
}

fn map_of(sc: &Scenario, ifs: &SelfSimilarIfs) -> Result<PushforwardMap> {
    let spec = sc.config.map.clone().unwrap_or(MapSpec::Square {
        lipschitz_bound: None,
        hessian_bound: None,
    });
    spec.build(ifs.ambient_dim())
}

fn cmd_dims(sc: &Scenario, out: Option<&Path>) -> Result<()> {
    let (_, profile) = profile_of(sc)?;
    say!("{}", profile.table().trim_end());
    write_json(&sc.output_dir(out), "profile.json", &profile)
}

#[derive(Debug, Serialize)]
struct ExtraSigma {
    p: f64,
    sigma: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct VdcReport {
    l: u32,
    refined: bool,
    exponent: f64,
}

#[derive(Debug, Serialize)]
struct BoundsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    decay: Option<DecayBound>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    p_grid: Vec<ExtraSigma>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vdc: Option<VdcReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thresholds: Option<Thresholds>,
}

/// Curvature and non-expansion, as far as they can be checked numerically.
fn hypotheses(ifs: &SelfSimilarIfs, map: &PushforwardMap, seed: u64) -> Result<Hypotheses> {
    let curvature_nonvanishing = if map.out_dim() == 1 {
        Some(!curvature_diagnostic(ifs, map, CURVATURE_SAMPLES, seed)?.vanishing)
    } else {
        None
    };
    let non_expanding = match ifs.non_expanding_heuristic(EXPANSION_DEPTH, EXPANSION_CAP) {
        ExpansionVerdict::NonExpanding => Some(true),
        ExpansionVerdict::Expanding => Some(false),
        ExpansionVerdict::Inconclusive => None,
    };
    Ok(Hypotheses {
        curvature_nonvanishing,
        non_expanding,
    })
}

fn cmd_bounds(sc: Option<&Scenario>, thresholds: bool, out: Option<&Path>) -> Result<()> {
    if sc.is_none() && !thresholds {
        return Err(FractalError::config("bounds needs a scenario file, --thresholds, or both"));
    }
    let mut report = BoundsReport {
        decay: None,
        p_grid: Vec::new(),
        vdc: None,
        thresholds: None,
    };
    if let Some(sc) = sc {
        let (ifs, profile) = profile_of(sc)?;
        let map = map_of(sc, &ifs)?;
        let hyp = hypotheses(&ifs, &map, sc.config.seed)?;
        let bound = decay_bound(&profile, &hyp);
        say!("sigma        {:.8}", bound.sigma);
        say!("best_p       {}", bound.best_p);
        if let Some(g) = bound.gamma {
            say!("gamma        {g:.6}");
        }
        say!("applicable   {}", bound.applicable);
        say!("formula      {}", bound.formula);
        for n in &bound.notes {
            say!("note: {n}");
        }
        if !bound.applicable {
            eprintln!("warning: the decay bound is not applicable to this measure and map; see notes");
        }
        if let Some(sec) = &sc.config.bounds {
            for &p in &sec.p_grid {
                let r = sigma_p(&profile, p);
                let label = format!("sigma_{p}");
                match &r {
                    Ok(s) => say!("{label:<12} {s:.8}"),
                    Err(e) => say!("{label:<12} unavailable: {e}"),
                }
                report.p_grid.push(ExtraSigma {
                    p,
                    sigma: r.as_ref().ok().copied(),
                    error: r.err().map(|e| e.to_string()),
                });
            }
            if let Some(l) = sec.l {
                let exponent = vdc_exponent(&profile, l, sec.refined)?;
                say!("vdc_exponent {exponent:.6} (l = {l}, refined = {})", sec.refined);
                report.vdc = Some(VdcReport {
                    l,
                    refined: sec.refined,
                    exponent,
                });
            }
        }
        report.decay = Some(bound);
    }
    if thresholds {
        let t = symmetric_thresholds();
        say!("t2           {:.6}", t.t2);
        say!("t3           {:.6}", t.t3);
        report.thresholds = Some(t);
    }
    let dir = match sc {
        Some(sc) => sc.output_dir(out),
        None => out.map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    write_json(&dir, "bounds.json", &report)
}

#[derive(Debug, Serialize)]
struct FourierSummary {
    rows: usize,
    transform: &'static str,
    max_error_bound: f64,
    total_leaves: u64,
    all_certified: bool,
}

fn cmd_fourier(sc: &Scenario, out: Option<&Path>, budget: Budget) -> Result<()> {
    let (ifs, _) = sc.ifs()?;
    let sec = sc.section(&sc.config.fourier, "fourier")?;
    let opts = EvalOptions::new(sec.tol).with_budget(budget).with_fast_path(true);
    let (samples, transform) = match &sc.config.map {
        Some(spec) => {
            let map = spec.build(ifs.ambient_dim())?;
            let xis = sec.frequencies(map.out_dim())?;
            (batch_pushforward(&ifs, &map, &xis, &opts, sec.scheme)?, "pushforward")
        }
        None => {
            if matches!(sec.scheme, Some(Scheme::Order0 | Scheme::Order1)) {
                return Err(FractalError::config("order0/order1 need a `map`; μ̂ uses exact recursion"));
            }
            let xis = sec.frequencies(ifs.ambient_dim())?;
            (batch_mu_hat(&ifs, &xis, &opts)?, "mu_hat")
        }
    };
    let summary = FourierSummary {
        rows: samples.len(),
        transform,
        max_error_bound: samples.iter().map(|s| s.error_bound).fold(0.0, f64::max),
        total_leaves: samples.iter().map(|s| s.leaves_used).sum(),
        all_certified: samples.iter().all(|s| s.certified),
    };
    say!(
        "{} rows of {}, max error bound {:e}, {} leaves",
        summary.rows, summary.transform, summary.max_error_bound, summary.total_leaves
    );
    let dir = sc.output_dir(out);
    write_file(&dir, "fourier.csv", |b| write_samples_csv(&samples, b))?;
    write_json(&dir, "fourier.json", &summary)
}

fn cmd_decay(sc: &Scenario, out: Option<&Path>, budget: Budget) -> Result<()> {
    let (ifs, profile) = profile_of(sc)?;
    let map = map_of(sc, &ifs)?;
    let mut cfg = *sc.section(&sc.config.decay, "decay")?;
    cfg.seed = sc.config.seed;
    let theoretical = decay_bound(&profile, &Hypotheses::default()).sigma;
    let exp = measure_decay_slope(&ifs, &map, &cfg, Some(theoretical), budget)?;
    say!("{:>6} {:>14} {:>14} {:>12}", "octave", "max_abs", "quantile95", "max_error");
    for o in &exp.octaves {
        say!(
            "{:>6} {:>14.6e} {:>14.6e} {:>12.3e}{}",
            o.octave,
            o.max_abs,
            o.quantile95,
            o.max_error,
            if o.unreliable { "  unreliable" } else { "" }
        );
    }
    say!("fitted_slope       {:.6} ± {:.6}", exp.fitted_slope, exp.slope_stderr);
    say!("envelope_exponent  {:.6}", exp.envelope_exponent);
    say!("theoretical_sigma  {theoretical:.8}");
    for n in &exp.notes {
        say!("note: {n}");
    }
    let dir = sc.output_dir(out);
    write_file(&dir, "decay_octaves.csv", |b| write_octaves_csv(&exp, b))?;
    write_json(&dir, "decay.json", &exp)
}

#[derive(Debug, Serialize)]
struct ConvolutionSummary<'a> {
    delta: f64,
    n_frequencies: usize,
    band_limit: f64,
    log_support: (f64, f64),
    mass: f64,
    parseval: crate::lab::Parseval,
    max_imag_residue: f64,
    min_log_density: f64,
    l1_octave_slope: Option<f64>,
    l2_octave_slope: Option<f64>,
    tail_estimate: Option<f64>,
    notes: &'a [String],
}

impl<'a> From<&'a ConvolutionExperiment> for ConvolutionSummary<'a> {
    fn from(e: &'a ConvolutionExperiment) -> Self {
        ConvolutionSummary {
            delta: e.delta,
            n_frequencies: e.n_frequencies,
            band_limit: e.band_limit,
            log_support: e.log_support,
            mass: e.mass,
            parseval: e.parseval,
            max_imag_residue: e.max_imag_residue,
            min_log_density: e.min_log_density,
            l1_octave_slope: e.l1_octave_slope,
            l2_octave_slope: e.l2_octave_slope,
            tail_estimate: e.tail_estimate.is_finite().then_some(e.tail_estimate),
            notes: &e.notes,
        }
    }
}

fn write_transform_csv(e: &ConvolutionExperiment, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "xi,re,im,abs,error_bound")?;
    for p in &e.product {
        writeln!(out, "{},{},{},{},{}", p.xi, p.value.re, p.value.im, p.value.norm(), p.error_bound)?;
    }
    Ok(())
}

fn cmd_convolve(sc: &Scenario, out: Option<&Path>, budget: Budget) -> Result<()> {
    let sec = sc.section(&sc.config.convolve, "convolve")?;
    let factors = sc.factors()?;
    let exp = match sec.center {
        Some((a, b)) => {
            let [e, f] = factors.as_slice() else {
                return Err(FractalError::config("a radial experiment takes exactly two factors"));
            };
            radial_projection_experiment(e, f, a, b, &sec.grid, budget)?
        }
        None => multiplicative_convolution(&factors, &sec.grid, budget)?,
    };
    let summary = ConvolutionSummary::from(&exp);
    say!("frequencies  {} (step {:.6e})", exp.n_frequencies, exp.delta);
    say!("mass         {:.6}", exp.mass);
    say!("parseval     {:.3e} relative difference", exp.parseval.relative_difference);
    if let (Some(a), Some(b)) = (exp.l1_octave_slope, exp.l2_octave_slope) {
        say!("octave slopes L1 {a:.3}, L2 {b:.3}");
    }
    for n in &exp.notes {
        say!("note: {n}");
    }
    let dir = sc.output_dir(out);
    write_file(&dir, "density.csv", |b| write_density_csv(&exp, b))?;
    write_file(&dir, "transform.csv", |b| write_transform_csv(&exp, b))?;
    write_json(&dir, "convolution.json", &summary)
}

fn cmd_arith(a: &ArithCheck) -> Result<()> {
    match a {
        ArithCheck::TwoSet { dim_e, dim_f } => print_json(&two_set_condition(*dim_e, *dim_f)?),
        ArithCheck::ThreeSet { dim_e, dim_f, dim_g } => print_json(&three_set_condition(*dim_e, *dim_f, *dim_g)?),
        ArithCheck::Prop48(p) => print_json(&prop48_conditions(p.kappa2_mu, p.kappa2_nu, p.nu_ad_regular)?),
        ArithCheck::LogSigma { kappa2 } => {
            #[derive(Serialize)]
            struct Out {
                kappa2: f64,
                sigma: f64,
            }
            print_json(&Out {
                kappa2: *kappa2,
                sigma: log_pushforward_sigma(*kappa2)?,
            })
        }
        ArithCheck::HighDim { k, kappa2 } => print_json(&high_dim_condition(*k, *kappa2)?),
        ArithCheck::Thresholds => print_json(&symmetric_thresholds()),
    }
}
