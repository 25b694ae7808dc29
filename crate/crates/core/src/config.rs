//! Scenario files for the command-line tool.
//!
//! A scenario names one IFS (inline or by path), optional exponent
//! overrides, an optional map, a seed and one section per subcommand:
//!
//! ```json
//! {
//!   "ifs": "ifs/cantor.json",
//!   "map": { "kind": "square" },
//!   "seed": 0,
//!   "decay": { "octaves": [8, 18], "samples_per_octave": 64 }
//! }
//! ```
//!
//! Relative paths are resolved against the scenario file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dimension::ProfileOverrides;
use crate::error::{FractalError, Result};
use crate::fourier::{MapSpec, Scheme};
use crate::ifs::{IfsFile, SelfSimilarIfs};
use crate::lab::{DecayConfig, GridConfig};

/// Upper limit on rows of a frequency sweep.
pub const MAX_SWEEP_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IfsSource {
    Path(PathBuf),
    Inline(IfsFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    /// Extra `p` values to evaluate `σ_p` at, beyond those the profile tabulates.
    #[serde(default)]
    pub p_grid: Vec<f64>,
    /// Derivative order for the planar holomorphic exponent (k = 2 only).
    #[serde(default)]
    pub l: Option<u32>,
    #[serde(default)]
    pub refined: bool,
}

/// Either an evenly spaced sweep along `direction` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSection {
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    /// Unit direction of the sweep in frequency space; `e₁` when omitted.
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    #[serde(default)]
    pub values: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_fourier_tol")]
    pub tol: f64,
    #[serde(default)]
    pub scheme: Option<Scheme>,
}

fn default_fourier_tol() -> f64 {
    1e-6
}

impl FourierSection {
    /// Frequencies of length `d`.
    pub fn frequencies(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        if !(self.tol > 0.0) {
            return Err(FractalError::config(format!("fourier.tol must be positive, got {}", self.tol)));
        }
        let sweep = (self.start, self.stop, self.count);
        match (&self.values, sweep) {
            (Some(v), (None, None, None)) => {
                if let Some(bad) = v.iter().find(|x| x.len() != d) {
                    return Err(FractalError::config(format!(
                        "frequency {bad:?} has length {} but the transform lives in dimension {d}",
                        bad.len()
                    )));
                }
                Ok(v.clone())
            }
            (None, (Some(a), Some(b), Some(n))) => {
                if !(a.is_finite() && b.is_finite()) || n == 0 || n > MAX_SWEEP_POINTS {
                    return Err(FractalError::config(format!(
                        "sweep needs finite endpoints and 1..={MAX_SWEEP_POINTS} points, got {a}..{b} x {n}"
                    )));
                }
                let dir = match &self.direction {
                    Some(v) => {
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if v.len() != d || (norm - 1.0).abs() > 1e-9 {
                            return Err(FractalError::config(format!("direction must be a unit vector of length {d}")));
                        }
                        v.clone()
                    }
                    None => {
                        let mut e = vec![0.0; d];
                        e[0] = 1.0;
                        e
                    }
                };
                Ok((0..n)
                    .map(|i| {
                        let t = if n == 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
                        dir.iter().map(|c| c * t).collect()
                    })
                    .collect())
            }
            _ => Err(FractalError::config(
                "fourier needs either `values` or all of `start`, `stop`, `count`",
            )),
        }
    }
}

/// Law of a product of independent factors, or of a radial ratio when
/// `center` is given (exactly two factors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolveSection {
    pub factors: Vec<IfsSource>,
    #[serde(default)]
    pub center: Option<(f64, f64)>,
    #[serde(default)]
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub ifs: Option<IfsSource>,
    /// Takes precedence over exponents stored in the IFS file.
    #[serde(default)]
    pub profile: Option<ProfileOverrides>,
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    #[serde(default)]
    pub fourier: Option<FourierSection>,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
    #[serde(default)]
    pub convolve: Option<ConvolveSection>,
}

/// A parsed scenario together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| FractalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config = serde_json::from_str(&text).map_err(|source| FractalError::Json {
            context: path.display().to_string(),
            source,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Scenario { config, base_dir })
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let config = serde_json::from_str(text).map_err(|source| FractalError::Json {
            context: "scenario".into(),
            source,
        })?;
        Ok(Scenario {
            config,
            base_dir: base_dir.into(),
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn load(&self, src: &IfsSource) -> Result<IfsFile> {
        match src {
            IfsSource::Path(p) => IfsFile::from_path(&self.resolve(p)),
            IfsSource::Inline(f) => Ok(f.clone()),
        }
    }

    /// The IFS and the exponent overrides that apply to it.
    pub fn ifs(&self) -> Result<(SelfSimilarIfs, ProfileOverrides)> {
        let src = self
            .config
            .ifs
            .as_ref()
            .ok_or_else(|| FractalError::config("scenario has no `ifs`"))?;
        let file = self.load(src)?;
        let ifs = file.build()?;
        let overrides = self
            .config
            .profile
            .clone()
            .or(file.exponents)
            .unwrap_or_default();
        Ok((ifs, overrides))
    }

    pub fn factors(&self) -> Result<Vec<SelfSimilarIfs>> {
        let sec = self.section(&self.config.convolve, "convolve")?;
        if sec.factors.is_empty() {
            return Err(FractalError::config("convolve.factors is empty"));
        }
        sec.factors.iter().map(|s| self.load(s)?.build()).collect()
    }

    pub fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T> {
        s.as_ref()
            .ok_or_else(|| FractalError::config(format!("scenario has no `{name}` section")))
    }

    /// Output directory: the override if given, else the scenario's own, else `.`.
    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        match (cli, &self.config.output_dir) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(p)) => self.resolve(p),
            (None, None) => PathBuf::from("."),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_ifs_and_unknown_fields() {
        let s = Scenario::from_json(
            r#"{"ifs": {"ambient_dim": 1, "maps": [{"ratio": "1/3", "translation": [0]}, {"ratio": "1/3", "translation": ["2/3"]}]}}"#,
            ".",
        )
        .unwrap();
        let (ifs, o) = s.ifs().unwrap();
        assert_eq!(ifs.len(), 2);
        assert!(o.is_empty());
        assert!(Scenario::from_json(r#"{"seed": 1, "sede": 2}"#, ".").is_err());
        assert!(Scenario::from_json(r#"{"decay": {"octaves": [1, 4], "samples_per_octave": 2, "x": 1}}"#, ".").is_err());
    }

    #[test]
    fn sweep() {
        let f = FourierSection {
            start: Some(-1.0),
            stop: Some(1.0),
            count: Some(5),
            direction: None,
            values: None,
            tol: 1e-6,
            scheme: None,
        };
        let xs = f.frequencies(2).unwrap();
        assert_eq!(xs.len(), 5);
        assert_eq!(xs[1], vec![-0.5, 0.0]);
        let both = FourierSection {
            values: Some(vec![vec![1.0]]),
            ..f
        };
        assert!(both.frequencies(1).is_err());
    }
}
