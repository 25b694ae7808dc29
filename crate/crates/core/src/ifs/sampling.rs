//! Random points distributed by μ, via random cylinder anchors.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::SelfSimilarIfs;

/// Points per RNG stream. The chunk index selects the ChaCha stream, so the
/// output does not depend on how chunks are scheduled across threads.
pub(crate) const SAMPLE_CHUNK: usize = 4096;

/// RNG for substream `stream` of `seed`.
pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl SelfSimilarIfs {
    /// Word length after which an anchor is within `1e-13·R` of a true point of the attractor.
    pub(crate) fn sample_depth(&self) -> usize {
        let d = (1e-13f64).ln() / self.max_ratio().ln();
        (d.ceil() as usize).clamp(1, 400)
    }

    /// `n` points of the support drawn from μ, flattened row-major (`n × k`).
    ///
    /// Each point is `f_{i_D} ∘ … ∘ f_{i_1}(c)` with independent letters drawn
    /// by weight, which has law μ up to a displacement of `r_max^D · R`.
    pub fn sample_support(&self, n: usize, seed: u64) -> Vec<f64> {
        let k = self.ambient_dim();
        let depth = self.sample_depth();
        let dist = WeightedIndex::new(self.weights()).expect("weights validated");
        let flat = self.flat();
        let mut out = vec![0.0; n * k];
        out.par_chunks_mut(SAMPLE_CHUNK * k)
            .enumerate()
            .for_each(|(chunk, block)| {
                let mut rng = substream(seed, chunk as u64);
                let mut x = vec![0.0; k];
                let mut y = vec![0.0; k];
                for point in block.chunks_mut(k) {
                    x.copy_from_slice(&self.hull().center);
                    for _ in 0..depth {
                        flat[dist.sample(&mut rng)].apply(&x, &mut y);
                        std::mem::swap(&mut x, &mut y);
                    }
                    point.copy_from_slice(&x);
                }
            });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_samples_avoid_middle_third() {
        let pts = SelfSimilarIfs::cantor().sample_support(10_000, 7);
        assert!(pts.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(pts.iter().all(|&x| !(x > 1.0 / 3.0 + 1e-12 && x < 2.0 / 3.0 - 1e-12)));
        let mean = pts.iter().sum::<f64>() / pts.len() as f64;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn deterministic_across_pools() {
        let ifs = SelfSimilarIfs::uniform_unit();
        let a = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| ifs.sample_support(20_000, 3));
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| ifs.sample_support(20_000, 3));
        assert_eq!(a, b);
    }
}
