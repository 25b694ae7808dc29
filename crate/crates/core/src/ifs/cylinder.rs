use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Budget, SelfSimilarIfs};
use crate::error::{FractalError, Result};

/// Relative slack when comparing an accumulated ratio with a stopping scale,
/// so that e.g. `(1/3)·(1/3)` counts as reaching `1/9`.
pub(crate) const STOP_SLACK: f64 = 1e-12;

/// A finite composition `f_w = f_{w₁} ∘ … ∘ f_{wₙ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderWord {
    pub letters: Vec<usize>,
    pub ratio: f64,
    pub orientation: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub weight: f64,
    /// Image of the support barycenter under `f_w`.
    pub anchor: DVector<f64>,
}

impl CylinderWord {
    fn root(ifs: &SelfSimilarIfs) -> Self {
        let k = ifs.ambient_dim();
        CylinderWord {
            letters: Vec::new(),
            ratio: 1.0,
            orientation: DMatrix::identity(k, k),
            translation: DVector::zeros(k),
            weight: 1.0,
            anchor: DVector::from_column_slice(&ifs.hull().center),
        }
    }

    /// The word `w i`, i.e. `f_w ∘ f_i`.
    fn child(&self, ifs: &SelfSimilarIfs, i: usize) -> Self {
        let m = &ifs.maps()[i];
        let mut letters = self.letters.clone();
        letters.push(i);
        let translation = &self.translation + &self.orientation * m.translation() * self.ratio;
        let orientation = &self.orientation * m.orientation();
        let ratio = self.ratio * m.ratio();
        let c = DVector::from_column_slice(&ifs.hull().center);
        let anchor = &orientation * c * ratio + &translation;
        CylinderWord {
            letters,
            ratio,
            orientation,
            translation,
            weight: self.weight * ifs.weights()[i],
            anchor,
        }
    }

    pub fn depth(&self) -> usize {
        self.letters.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.orientation * x * self.ratio + &self.translation
    }

    /// Diameter bound of the cylinder: `ratio · diam(hull)`.
    pub fn diameter_bound(&self, ifs: &SelfSimilarIfs) -> f64 {
        self.ratio * ifs.hull().diameter()
    }

    /// Letters as a compact string, 1-based (`"12"` for `f₁∘f₂`).
    pub fn label(&self) -> String {
        self.letters
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(if self.letters.iter().any(|&i| i >= 9) { "," } else { "" })
    }
}

#[derive(Debug, Clone)]
pub struct StoppingDecomposition {
    pub scale: f64,
    pub words: Vec<CylinderWord>,
    pub ratio_floor: f64,
}

/// Summary row for reports.
#[derive(Debug, Clone, Serialize)]
pub struct WordSummary {
    pub word: String,
    pub ratio: f64,
    pub weight: f64,
}

impl StoppingDecomposition {
    pub fn total_weight(&self) -> f64 {
        self.words.iter().map(|w| w.weight).sum()
    }

    pub fn summaries(&self) -> Vec<WordSummary> {
        self.words
            .iter()
            .map(|w| WordSummary {
                word: w.label(),
                ratio: w.ratio,
                weight: w.weight,
            })
            .collect()
    }
}

impl SelfSimilarIfs {
    /// Cover by the minimal prefixes with contraction ratio at most `scale`,
    /// in lexicographic order of letters.
    pub fn stopping_decomposition(&self, scale: f64) -> Result<StoppingDecomposition> {
        self.stopping_decomposition_with_budget(scale, Budget::default())
    }

    pub fn stopping_decomposition_with_budget(&self, scale: f64, budget: Budget) -> Result<StoppingDecomposition> {
        if !(scale > 0.0 && scale < 1.0) {
            return Err(FractalError::ScaleOutOfRange(scale));
        }
        let threshold = scale * (1.0 + STOP_SLACK);
        let mut words = Vec::new();
        let mut stack = vec![CylinderWord::root(self)];
        while let Some(w) = stack.pop() {
            if w.ratio <= threshold {
                if words.len() as u64 >= budget.max_leaves {
                    return Err(budget.exceeded());
                }
                words.push(w);
                continue;
            }
            // Reverse push so that letter 0 is expanded first.
            for i in (0..self.len()).rev() {
                stack.push(w.child(self, i));
            }
        }
        Ok(StoppingDecomposition {
            scale,
            words,
            ratio_floor: self.min_ratio() * scale,
        })
    }

    /// All `N^depth` words of the given length, lexicographically.
    pub fn words_at_depth(&self, depth: usize, budget: Budget) -> Result<Vec<CylinderWord>> {
        let count = (self.len() as f64).powi(depth as i32);
        if count > budget.max_leaves as f64 {
            return Err(budget.exceeded());
        }
        let mut level = vec![CylinderWord::root(self)];
        for _ in 0..depth {
            level = level
                .iter()
                .flat_map(|w| (0..self.len()).map(move |i| w.child(self, i)))
                .collect();
        }
        Ok(level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_at_one_ninth() {
        let d = SelfSimilarIfs::cantor().stopping_decomposition(1.0 / 9.0).unwrap();
        assert_eq!(d.words.len(), 4);
        for w in &d.words {
            assert!((w.ratio - 1.0 / 9.0).abs() < 1e-15);
            assert!((w.weight - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn cantor_at_one_quarter() {
        let d = SelfSimilarIfs::cantor().stopping_decomposition(0.25).unwrap();
        assert_eq!(d.words.len(), 4);
        assert!(d.words.iter().all(|w| w.depth() == 2));
    }

    #[test]
    fn mixed_ratios_stop_at_different_depths() {
        let ifs = SelfSimilarIfs::on_line(&[(0.5, 0.0), (0.25, 0.75)], &[0.5, 0.5]).unwrap();
        let d = ifs.stopping_decomposition(0.25).unwrap();
        let labels: Vec<String> = d.words.iter().map(CylinderWord::label).collect();
        assert_eq!(labels, ["11", "12", "2"]);
        let ratios: Vec<f64> = d.words.iter().map(|w| w.ratio).collect();
        assert_eq!(ratios, [0.25, 0.125, 0.25]);
        assert!((d.total_weight() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn anchors_and_translations_compose() {
        let ifs = SelfSimilarIfs::cantor();
        let d = ifs.stopping_decomposition(0.2).unwrap();
        // Word "21" is f₂∘f₁: x ↦ x/9 + 2/3; anchor f₂(f₁(1/2)).
        let w = &d.words[2];
        assert_eq!(w.label(), "21");
        assert!((w.translation[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.anchor[0] - (2.0 / 3.0 + 1.0 / 18.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_scale_and_budget() {
        let ifs = SelfSimilarIfs::cantor();
        assert!(matches!(
            ifs.stopping_decomposition(1.5),
            Err(FractalError::ScaleOutOfRange(_))
        ));
        let err = ifs.stopping_decomposition_with_budget(1e-6, Budget::new(100)).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
