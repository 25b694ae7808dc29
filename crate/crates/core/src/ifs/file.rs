//! JSON description of an IFS.
//!
//! ```json
//! {
//!   "ambient_dim": 1,
//!   "maps": [
//!     { "ratio": "1/3", "translation": [0] },
//!     { "ratio": "1/3", "translation": ["2/3"] }
//!   ],
//!   "weights": [0.5, 0.5],
//!   "declared_separation": "SSC"
//! }
//! ```
//!
//! Numbers may be written as JSON numbers or as strings holding a decimal or
//! a fraction `p/q`, so that values like 1/3 are entered without truncation.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Separation, SelfSimilarIfs, SimilarityMap};
use crate::dimension::{similarity_dimension_set, ProfileOverrides};
use crate::error::{FractalError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    pub fn value(&self) -> Result<f64> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Text(s) => parse_scalar(s)
                .ok_or_else(|| FractalError::config(format!("cannot parse `{s}` as a number or fraction"))),
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Number(v)
    }
}

fn parse_scalar(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().ok()?;
        let d: f64 = den.trim().parse().ok()?;
        (d != 0.0).then_some(n / d)
    } else {
        s.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntry {
    pub ratio: Scalar,
    /// Row-major `k×k`; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Vec<Scalar>>,
    pub translation: Vec<Scalar>,
}

/// Explicit weights, or one of `"uniform"` / `"natural"` (`pᵢ = rᵢ^s`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Explicit(Vec<Scalar>),
    Named(String),
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Named("uniform".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsFile {
    pub ambient_dim: usize,
    pub maps: Vec<MapEntry>,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default)]
    pub declared_separation: Separation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ProfileOverrides>,
}

impl IfsFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| FractalError::Json {
            context: "IFS description".into(),
            source,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| FractalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| FractalError::Json {
            context: path.display().to_string(),
            source,
        })
    }

    pub fn build(&self) -> Result<SelfSimilarIfs> {
        let k = self.ambient_dim;
        if k == 0 {
            return Err(FractalError::invalid("ambient_dim must be positive"));
        }
        let mut maps = Vec::with_capacity(self.maps.len());
        for (i, entry) in self.maps.iter().enumerate() {
            let ratio = entry.ratio.value()?;
            let translation = values(&entry.translation)?;
            if translation.len() != k {
                return Err(FractalError::invalid(format!(
                    "map {i}: translation has length {} but ambient_dim is {k}",
                    translation.len()
                )));
            }
            let orientation = match &entry.orientation {
                None => DMatrix::identity(k, k),
                Some(o) => {
                    let o = values(o)?;
                    if o.len() != k * k {
                        return Err(FractalError::invalid(format!(
                            "map {i}: orientation has {} entries, expected {}",
                            o.len(),
                            k * k
                        )));
                    }
                    DMatrix::from_row_slice(k, k, &o)
                }
            };
            let map = SimilarityMap::new(ratio, orientation, DVector::from_vec(translation))
                .map_err(|e| FractalError::invalid(format!("map {i}: {}", strip_prefix(&e))))?;
            maps.push(map);
        }
        let n = maps.len();
        let weights = match &self.weights {
            WeightSpec::Explicit(w) => values(w)?,
            WeightSpec::Named(name) if name == "uniform" => vec![1.0 / n.max(1) as f64; n],
            WeightSpec::Named(name) if name == "natural" => {
                if n < 2 {
                    return Err(FractalError::invalid(format!("need at least 2 maps, got {n}")));
                }
                let ratios: Vec<f64> = maps.iter().map(SimilarityMap::ratio).collect();
                let s = similarity_dimension_set(&ratios)?;
                let w: Vec<f64> = ratios.iter().map(|r| r.powf(s)).collect();
                let total: f64 = w.iter().sum();
                w.iter().map(|x| x / total).collect()
            }
            WeightSpec::Named(other) => {
                return Err(FractalError::config(format!(
                    "weights must be a list, \"uniform\" or \"natural\", got \"{other}\""
                )))
            }
        };
        SelfSimilarIfs::with_separation(maps, weights, self.declared_separation)
    }

    /// Describes an existing IFS (weights written explicitly).
    pub fn describe(ifs: &SelfSimilarIfs) -> Self {
        IfsFile {
            ambient_dim: ifs.ambient_dim(),
            maps: ifs
                .maps()
                .iter()
                .map(|m| MapEntry {
                    ratio: m.ratio().into(),
                    orientation: Some(m.orientation().transpose().iter().map(|&v| v.into()).collect()),
                    translation: m.translation().iter().map(|&v| v.into()).collect(),
                })
                .collect(),
            weights: WeightSpec::Explicit(ifs.weights().iter().map(|&v| v.into()).collect()),
            declared_separation: ifs.declared_separation(),
            exponents: None,
        }
    }
}

fn values(xs: &[Scalar]) -> Result<Vec<f64>> {
    xs.iter().map(Scalar::value).collect()
}

fn strip_prefix(e: &FractalError) -> String {
    match e {
        FractalError::InvalidIfs(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cantor_with_fractions() {
        let f = IfsFile::from_json(
            r#"{"ambient_dim":1,"maps":[{"ratio":"1/3","translation":[0]},{"ratio":"1/3","translation":["2/3"]}],
                "weights":[0.5,0.5],"declared_separation":"SSC"}"#,
        )
        .unwrap();
        let ifs = f.build().unwrap();
        assert_eq!(ifs.ratios(), vec![1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(ifs.maps()[1].translation()[0], 2.0 / 3.0);
        assert_eq!(ifs.declared_separation(), Separation::Strong);
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = IfsFile::from_json(r#"{"ambient_dim":1,"maps":[],"colour":"red"}"#).unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn bad_weights_name_the_invariant() {
        let f = IfsFile::from_json(
            r#"{"ambient_dim":1,"maps":[{"ratio":0.5,"translation":[0]},{"ratio":0.5,"translation":[0.5]}],
                "weights":[0.5,0.4]}"#,
        )
        .unwrap();
        let err = f.build().unwrap_err();
        assert!(err.to_string().contains("sum to 1"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn natural_weights() {
        let f = IfsFile::from_json(
            r#"{"ambient_dim":1,"maps":[{"ratio":0.5,"translation":[0]},{"ratio":0.25,"translation":[0.75]}],
                "weights":"natural"}"#,
        )
        .unwrap();
        let ifs = f.build().unwrap();
        // s solves 2^-s + 4^-s = 1, i.e. 2^-s = (√5 − 1)/2.
        let g = (5f64.sqrt() - 1.0) / 2.0;
        assert!((ifs.weights()[0] - g).abs() < 1e-12);
    }

    #[test]
    fn describe_round_trips() {
        let ifs = SelfSimilarIfs::cantor();
        let text = serde_json::to_string(&IfsFile::describe(&ifs)).unwrap();
        let back = IfsFile::from_json(&text).unwrap().build().unwrap();
        assert_eq!(back.maps(), ifs.maps());
        assert_eq!(back.weights(), ifs.weights());
    }
}
