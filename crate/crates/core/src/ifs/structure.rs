use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;
use serde::Serialize;

use super::{Budget, Separation, SelfSimilarIfs, DEDUP_TOL};
use crate::error::{FractalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionVerdict {
    NonExpanding,
    Expanding,
    Inconclusive,
}

/// Finite-depth separation diagnostic. Says nothing definitive about the IFS.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub depth: usize,
    /// Depth-1 images of the hull ball are pairwise disjoint.
    pub ssc_ok: bool,
    /// Minimum `|f_w(0) − f_v(0)|` over distinct depth-`depth` words with
    /// equal ratio and orientation; `None` when no such pair exists.
    pub esc_distance: Option<f64>,
    /// Largest overlap length `rᵢR + rⱼR − |cᵢ − cⱼ|` of depth-1 hull balls (0 if none).
    pub overlap_measure: f64,
    pub overlaps_detected: bool,
    pub diagnostic_only: bool,
}

const COMMUTE_TOL: f64 = 1e-10;
const OVERLAP_TOL: f64 = 1e-10;

fn quantize(m: &DMatrix<f64>) -> Vec<i64> {
    m.iter().map(|v| (v / DEDUP_TOL).round() as i64).collect()
}

impl SelfSimilarIfs {
    /// All `rᵢOᵢ` agree entrywise within 1e-12.
    pub fn is_homogeneous(&self) -> bool {
        let first = self.maps()[0].linear_part();
        self.maps()
            .iter()
            .skip(1)
            .all(|m| (m.linear_part() - &first).amax() <= 1e-12)
    }

    /// Growth test for the semigroup generated by the orientations.
    ///
    /// Distinct products are enumerated level by level (words of length
    /// `n`), stopping after `depth` levels or once `cap` distinct elements
    /// have been seen. Polynomial growth of a semigroup with `g` generators
    /// means sphere sizes `O(n^{g})`; a last complete level larger than
    /// `2(n+1)^g` is reported as expanding.
    pub fn non_expanding_heuristic(&self, depth: usize, cap: usize) -> ExpansionVerdict {
        if self.ambient_dim() <= 2 {
            return ExpansionVerdict::NonExpanding;
        }
        let gens: Vec<&DMatrix<f64>> = self.maps().iter().map(|m| m.orientation()).collect();
        let commuting = gens.iter().enumerate().all(|(i, a)| {
            gens[i + 1..]
                .iter()
                .all(|b| (*a * *b - *b * *a).amax() <= COMMUTE_TOL)
        });
        if commuting {
            return ExpansionVerdict::NonExpanding;
        }

        let k = self.ambient_dim();
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        let identity = DMatrix::<f64>::identity(k, k);
        seen.insert(quantize(&identity));
        let mut frontier = vec![identity];
        let mut last_sphere = (0usize, 0usize);
        for level in 1..=depth.max(1) {
            let mut next = Vec::new();
            for m in &frontier {
                for g in &gens {
                    let p = m * *g;
                    if seen.insert(quantize(&p)) {
                        next.push(p);
                    }
                }
                if seen.len() > cap {
                    break;
                }
            }
            if next.is_empty() {
                return ExpansionVerdict::NonExpanding;
            }
            if seen.len() > cap {
                break;
            }
            last_sphere = (level, next.len());
            frontier = next;
        }
        let (n, size) = last_sphere;
        let poly = 2.0 * ((n + 1) as f64).powi(gens.len() as i32);
        if n > 0 && size as f64 > poly {
            ExpansionVerdict::Expanding
        } else {
            ExpansionVerdict::Inconclusive
        }
    }

    pub fn separation_diagnostic(&self, depth: usize, budget: Budget) -> Result<SeparationReport> {
        if depth == 0 {
            return Err(FractalError::config("separation depth must be at least 1"));
        }
        let hull = self.hull();
        let c = nalgebra::DVector::from_column_slice(&hull.center);
        let images: Vec<_> = self.maps().iter().map(|m| (m.apply(&c), m.ratio() * hull.radius)).collect();
        let mut overlap: f64 = 0.0;
        let mut ssc_ok = true;
        for i in 0..images.len() {
            for j in i + 1..images.len() {
                let gap = (&images[i].0 - &images[j].0).norm() - images[i].1 - images[j].1;
                if gap <= 1e-12 {
                    ssc_ok = false;
                }
                overlap = overlap.max(-gap);
            }
        }

        let words = self.words_at_depth(depth, budget)?;
        let mut groups: HashMap<(i64, Vec<i64>), Vec<Vec<f64>>> = HashMap::new();
        for w in &words {
            let key = ((w.ratio.ln() * 1e9).round() as i64, quantize(&w.orientation));
            groups.entry(key).or_default().push(w.translation.as_slice().to_vec());
        }
        let esc = groups
            .into_values()
            .filter_map(closest_pair)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.min(d))));

        let overlap_measure = if overlap > OVERLAP_TOL { overlap } else { 0.0 };
        Ok(SeparationReport {
            depth,
            ssc_ok,
            esc_distance: esc,
            overlap_measure,
            overlaps_detected: esc.is_some_and(|d| d < 1e-12) || overlap_measure > 0.0,
            diagnostic_only: true,
        })
    }
}

/// Minimum pairwise Euclidean distance, by a sweep over the first coordinate.
fn closest_pair(mut pts: Vec<Vec<f64>>) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[j][0] - pts[i][0] >= best {
                break;
            }
            let d = pts[i]
                .iter()
                .zip(&pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    Some(best)
}

/// Porosity of a self-similar set on the line: it holds exactly when the
/// weak separation condition holds and the dimension is below 1. Only
/// declared separation is trusted.
pub fn porosity_flag(ifs: &SelfSimilarIfs, declared: Separation, similarity_dim: f64) -> Result<bool> {
    if ifs.ambient_dim() != 1 {
        return Err(FractalError::Unsupported(format!(
            "porosity flag is defined for subsets of the line, got ambient_dim {}",
            ifs.ambient_dim()
        )));
    }
    Ok(declared.implies_wsc() && similarity_dim < 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::SimilarityMap;
    use nalgebra::DVector;

    fn rot_z(theta: f64) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
    }

    fn rot_x(theta: f64) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c])
    }

    fn ifs3(o: [DMatrix<f64>; 2]) -> SelfSimilarIfs {
        let [a, b] = o;
        let maps = vec![
            SimilarityMap::new(0.4, a, DVector::zeros(3)).unwrap(),
            SimilarityMap::new(0.4, b, DVector::from_column_slice(&[1.0, 0.0, 0.0])).unwrap(),
        ];
        SelfSimilarIfs::new(maps, vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn homogeneity() {
        assert!(SelfSimilarIfs::cantor().is_homogeneous());
        let mixed = SelfSimilarIfs::on_line(&[(0.5, 0.0), (0.25, 0.75)], &[0.5, 0.5]).unwrap();
        assert!(!mixed.is_homogeneous());
        let flip = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let maps = vec![
            SimilarityMap::unrotated(0.5, &[0.0, 0.0]).unwrap(),
            SimilarityMap::new(0.5, flip, DVector::from_column_slice(&[1.0, 1.0])).unwrap(),
        ];
        assert!(!SelfSimilarIfs::new(maps, vec![0.5, 0.5]).unwrap().is_homogeneous());
    }

    #[test]
    fn expansion_verdicts() {
        assert_eq!(
            SelfSimilarIfs::cantor().non_expanding_heuristic(12, 10_000),
            ExpansionVerdict::NonExpanding
        );
        let cyclic = ifs3([DMatrix::identity(3, 3), rot_z(std::f64::consts::FRAC_PI_2)]);
        assert_eq!(cyclic.non_expanding_heuristic(12, 10_000), ExpansionVerdict::NonExpanding);
        // Rotations about different axes by irrational angles generate a free semigroup.
        let generic = ifs3([rot_z(1.0), rot_x(2.0_f64.sqrt())]);
        assert_eq!(generic.non_expanding_heuristic(12, 10_000), ExpansionVerdict::Expanding);
        // Quarter turns about two axes generate the rotation group of the cube.
        let finite = ifs3([rot_z(std::f64::consts::FRAC_PI_2), rot_x(std::f64::consts::FRAC_PI_2)]);
        assert_eq!(finite.non_expanding_heuristic(12, 10_000), ExpansionVerdict::NonExpanding);
    }

    #[test]
    fn cantor_separation() {
        let r = SelfSimilarIfs::cantor().separation_diagnostic(5, Budget::default()).unwrap();
        assert!(r.ssc_ok && !r.overlaps_detected && r.diagnostic_only);
        let esc = r.esc_distance.unwrap();
        assert!((esc - 2.0 / 243.0).abs() < 1e-14, "{esc}");
    }

    #[test]
    fn touching_intervals() {
        let r = SelfSimilarIfs::uniform_unit().separation_diagnostic(3, Budget::default()).unwrap();
        assert!(!r.ssc_ok);
        assert_eq!(r.overlap_measure, 0.0);
        assert!(!r.overlaps_detected);
    }

    #[test]
    fn overlapping_images() {
        let ifs = SelfSimilarIfs::on_line(&[(2.0 / 3.0, 0.0), (2.0 / 3.0, 1.0 / 3.0)], &[0.5, 0.5]).unwrap();
        let r = ifs.separation_diagnostic(4, Budget::default()).unwrap();
        assert!(r.overlaps_detected);
        assert!((r.overlap_measure - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn exact_overlaps_give_zero_distance() {
        // f₁∘f₃ and f₂∘f₁ are the same map x ↦ x/4 + 1/4.
        let ifs = SelfSimilarIfs::on_line(&[(0.5, 0.0), (0.5, 0.25), (0.5, 0.5)], &[0.4, 0.3, 0.3]).unwrap();
        let r = ifs.separation_diagnostic(2, Budget::default()).unwrap();
        assert_eq!(r.esc_distance, Some(0.0));
        assert!(r.overlaps_detected);
        let budget_err = ifs.separation_diagnostic(30, Budget::default()).unwrap_err();
        assert_eq!(budget_err.exit_code(), 4);
    }

    #[test]
    fn porosity() {
        let cantor = SelfSimilarIfs::cantor();
        let s = 2f64.ln() / 3f64.ln();
        assert!(porosity_flag(&cantor, Separation::Strong, s).unwrap());
        assert!(!porosity_flag(&cantor, Separation::OpenSet, 1.0).unwrap());
        assert!(!porosity_flag(&cantor, Separation::None, s).unwrap());
        let plane = ifs3([DMatrix::identity(3, 3), DMatrix::identity(3, 3)]);
        assert!(matches!(
            porosity_flag(&plane, Separation::Strong, 0.5),
            Err(FractalError::Unsupported(_))
        ));
    }
}
