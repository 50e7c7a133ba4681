//! Backward trees `{y : f^n(y) = x}` with Birkhoff sums along the branches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cache::{cache_key, PreimageCache, PreimageRecord, PreimageRecords};
use crate::error::Result;
use crate::sphere::{RationalMap, SpherePoint};
use crate::weights::Weight;

/// A leaf of a backward tree.
#[derive(Clone, Copy, Debug)]
pub struct TreeLeaf {
    pub point: SpherePoint,
    /// `phi(y) + phi(f y) + ... + phi(f^(n-1) y)`.
    pub birkhoff: f64,
    /// Product of preimage multiplicities along the branch.
    pub multiplicity: u64,
}

/// The full backward tree of depth `n` over a base point.
#[derive(Clone, Debug)]
pub struct BackwardTree {
    pub base: SpherePoint,
    pub depth: usize,
    pub leaves: Vec<TreeLeaf>,
    /// `log sum_{f^k y = x} mult(y) e^{S_k phi(y)}` for `k = 0..=depth`.
    pub log_partition: Vec<f64>,
    /// Number of tree nodes that arose as multiple preimages (critical hits).
    pub critical_hits: usize,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Preimage levels `0..=depth` of the tree over `x`; level 0 is `x` itself.
/// Children of a node appear in lexicographic order after their parent's
/// earlier siblings' children, so the layout is deterministic.
pub fn preimage_levels(f: &RationalMap, x: &SpherePoint, depth: usize, cache: &PreimageCache) -> Result<PreimageRecords> {
    let key = cache_key(&f.to_json(), 0, depth, &format!("tree:{x:?}"));
    cache.get_or_compute(&key, || {
        let mut levels = vec![vec![PreimageRecord {
            point: *x,
            multiplicity: 1,
            parent: 0,
        }]];
        for _ in 0..depth {
            let prev = levels.last().expect("level 0 exists");
            let children: Vec<Vec<PreimageRecord>> = prev
                .par_iter()
                .enumerate()
                .map(|(i, node)| {
                    let pre = f.preimages(&node.point)?;
                    Ok(pre
                        .into_iter()
                        .map(|(p, m)| PreimageRecord {
                            point: p,
                            multiplicity: m as u32,
                            parent: i as u32,
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            levels.push(children.into_iter().flatten().collect());
        }
        Ok(PreimageRecords { levels })
    })
}

impl BackwardTree {
    pub fn build(f: &RationalMap, w: &Weight, x: &SpherePoint, depth: usize, cache: &PreimageCache) -> Result<Self> {
        let recs = preimage_levels(f, x, depth, cache)?;
        let mut birkhoff = vec![0.0f64];
        let mut mult = vec![1u64];
        let mut log_partition = vec![0.0];
        let mut critical_hits = 0;
        for level in recs.levels.iter().skip(1) {
            let (b, m): (Vec<f64>, Vec<u64>) = level
                .par_iter()
                .map(|r| {
                    let p = r.parent as usize;
                    (birkhoff[p] + w.eval(&r.point), mult[p] * r.multiplicity as u64)
                })
                .unzip();
            critical_hits += level.iter().filter(|r| r.multiplicity > 1).count();
            log_partition.push(log_sum_exp(b.iter().zip(&m).map(|(s, k)| s + (*k as f64).ln())));
            birkhoff = b;
            mult = m;
        }
        let last = recs.levels.last().expect("level 0 exists");
        let leaves = last
            .iter()
            .zip(birkhoff.iter().zip(&mult))
            .map(|(r, (b, m))| TreeLeaf {
                point: r.point,
                birkhoff: *b,
                multiplicity: *m,
            })
            .collect();
        Ok(BackwardTree {
            base: *x,
            depth,
            leaves,
            log_partition,
            critical_hits,
        })
    }

    /// `(1/n) log Z_n`.
    pub fn pressure_average(&self) -> f64 {
        self.log_partition[self.depth] / self.depth as f64
    }

    /// `log Z_n - log Z_{n-1}`, which converges exponentially fast for
    /// maps with a spectral gap.
    pub fn pressure_ratio(&self) -> f64 {
        self.log_partition[self.depth] - self.log_partition[self.depth - 1]
    }
}

/// One importance-sampled backward branch: the leaf and the log of its
/// unbiased weight for `sum_y mult(y) e^{S_n phi(y)} delta_y`.
#[derive(Clone, Copy, Debug)]
pub struct SampledLeaf {
    pub point: SpherePoint,
    pub log_weight: f64,
}

/// Random backward branches of depth `n` from `x`, choosing each preimage with
/// probability proportional to `mult * e^phi`. Branch `i` draws from a stream
/// seeded by `(seed, i)`, so the output is independent of thread count.
pub fn sample_backward(f: &RationalMap, w: &Weight, x: &SpherePoint, depth: usize, samples: usize, seed: u64) -> Result<Vec<SampledLeaf>> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut z = *x;
            let mut log_w = 0.0;
            for _ in 0..depth {
                let pre = f.preimages(&z)?;
                let weights: Vec<f64> = pre.iter().map(|(p, m)| *m as f64 * w.eval(p).exp()).collect();
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                let mut pick = pre.len() - 1;
                for (k, wk) in weights.iter().enumerate() {
                    if u < *wk {
                        pick = k;
                        break;
                    }
                    u -= wk;
                }
                log_w += total.ln();
                z = pre[pick].0;
            }
            Ok(SampledLeaf {
                point: z,
                log_weight: log_w,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::chordal_dist;
    use num_complex::Complex64;

    #[test]
    fn tree_of_z_squared_over_one() {
        let f = RationalMap::quadratic(Complex64::new(0.0, 0.0));
        let t = BackwardTree::build(&f, &Weight::zero(), &SpherePoint::ONE, 3, &PreimageCache::disabled()).unwrap();
        assert_eq!(t.leaves.len(), 8);
        for leaf in &t.leaves {
            let z = leaf.point.finite().unwrap();
            assert!((z.norm() - 1.0).abs() < 1e-15);
            assert!((z.powu(8) - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
        assert!((t.pressure_average() - 2f64.ln()).abs() < 1e-15);
        assert!((t.pressure_ratio() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn critical_base_point_keeps_multiplicity() {
        let f = RationalMap::quadratic(Complex64::new(-1.0, 0.0));
        let t = BackwardTree::build(
            &f,
            &Weight::zero(),
            &SpherePoint::from_re_im(-1.0, 0.0),
            2,
            &PreimageCache::disabled(),
        )
        .unwrap();
        assert_eq!(t.critical_hits, 1);
        let total: u64 = t.leaves.iter().map(|l| l.multiplicity).sum();
        assert_eq!(total, 4);
    }

    #[test]
    fn cached_tree_matches_fresh_tree() {
        let dir = tempfile::tempdir().unwrap();
        let cache = PreimageCache::at(dir.path());
        let f = RationalMap::quadratic(Complex64::new(-0.2, 0.1));
        let w = Weight::bump(SpherePoint::ZERO, 0.2, 0.5).unwrap();
        let x = SpherePoint::from_re_im(0.9, 0.4);
        let a = BackwardTree::build(&f, &w, &x, 6, &cache).unwrap();
        let b = BackwardTree::build(&f, &w, &x, 6, &cache).unwrap();
        let c = BackwardTree::build(&f, &w, &x, 6, &PreimageCache::disabled()).unwrap();
        for ((la, lb), lc) in a.leaves.iter().zip(&b.leaves).zip(&c.leaves) {
            assert_eq!(la.birkhoff.to_bits(), lb.birkhoff.to_bits());
            assert_eq!(la.birkhoff.to_bits(), lc.birkhoff.to_bits());
            assert!(chordal_dist(&la.point, &lc.point) == 0.0);
        }
    }

    #[test]
    fn importance_sampling_is_unbiased_for_partition() {
        let f = RationalMap::quadratic(Complex64::new(-0.2, 0.1));
        let w = Weight::bump(SpherePoint::ZERO, 0.2, 0.5).unwrap();
        let x = SpherePoint::from_re_im(0.9, 0.4);
        let exact = BackwardTree::build(&f, &w, &x, 8, &PreimageCache::disabled()).unwrap();
        let s = sample_backward(&f, &w, &x, 8, 4000, 3).unwrap();
        let est = (s.iter().map(|l| l.log_weight.exp()).sum::<f64>() / s.len() as f64).ln();
        assert!((est - exact.log_partition[8]).abs() < 0.01, "{est} vs {}", exact.log_partition[8]);
        let again = sample_backward(&f, &w, &x, 8, 4000, 3).unwrap();
        assert!(s.iter().zip(&again).all(|(a, b)| a.log_weight == b.log_weight));
    }
}
