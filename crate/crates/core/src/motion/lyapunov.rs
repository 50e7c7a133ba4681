use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::PreimageCache;
use crate::error::{Error, Result};
use crate::sphere::{RationalMap, SpherePoint};
use crate::thermo::{choose_base_points, sample_backward, BackwardTree};
use crate::weights::Weight;

use super::family::{Family, ParamGrid};

/// Spherical derivatives below this mark a sample point as degenerate.
pub const DEGENERATE_DERIVATIVE: f64 = 1e-12;

/// `log` of the spherical derivative `|f'(z)| (1 + |z|^2) / (1 + |f(z)|^2)`.
pub fn log_spherical_derivative(f: &RationalMap, z: &SpherePoint) -> f64 {
    let (_, t) = z.chart_coord();
    let (img, der) = f.chart_derivative(z);
    let (_, s) = img.chart_coord();
    (der.norm() * (1.0 + t.norm_sqr()) / (1.0 + s.norm_sqr())).ln()
}

/// `(estimate, degenerate)`: the mean of `log ||f'||` over the maximal-entropy
/// sample of depth `n` from `x`. The full backward tree is used when it has at
/// most `samples` leaves, otherwise `samples` uniformly drawn branches.
pub fn lyapunov_estimate(f: &RationalMap, x: &SpherePoint, n: usize, samples: usize, seed: u64) -> Result<(f64, bool)> {
    let d = f.degree() as f64;
    let full = d.powi(n as i32) <= samples as f64;
    let (points, weights): (Vec<SpherePoint>, Vec<f64>) = if full {
        let tree = BackwardTree::build(f, &Weight::zero(), x, n, &PreimageCache::disabled())?;
        tree.leaves.iter().map(|l| (l.point, l.multiplicity as f64)).unzip()
    } else {
        sample_backward(f, &Weight::zero(), x, n, samples, seed)?
            .iter()
            .map(|s| (s.point, 1.0))
            .unzip()
    };
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut degenerate = false;
    for (p, w) in points.iter().zip(&weights) {
        let v = log_spherical_derivative(f, p);
        if !(v.is_finite() && v > DEGENERATE_DERIVATIVE.ln()) {
            degenerate = true;
            continue;
        }
        acc += w * v;
    }
    Ok((acc / total, degenerate))
}

/// `L(lambda)` at every node of a parameter grid.
#[derive(Clone, Debug)]
pub struct LyapunovMap {
    pub grid: Arc<ParamGrid>,
    pub values: Vec<Option<f64>>,
    /// Nodes whose sample touched a critical point.
    pub flagged: Vec<bool>,
    pub base_point: SpherePoint,
}

/// One estimate per node from a common starting point and a common seed, so
/// the sampling error varies smoothly across the grid.
pub fn lyapunov_map(fam: &Family, grid: &Arc<ParamGrid>, n_backward: usize, samples: usize, seed: u64) -> Result<LyapunovMap> {
    let f0 = fam.at(grid.base())?;
    let x = choose_base_points(&f0, 1, seed, 0.1, 24)?[0];
    let rows: Vec<(Option<f64>, bool)> = grid
        .nodes()
        .par_iter()
        .map(|l| match l {
            None => Ok((None, false)),
            Some(l) => {
                let f = fam.at_unchecked(*l)?;
                let (v, bad) = lyapunov_estimate(&f, &x, n_backward, samples, seed)?;
                Ok((Some(v), bad))
            }
        })
        .collect::<Result<_>>()?;
    let (values, flagged) = rows.into_iter().unzip();
    Ok(LyapunovMap {
        grid: grid.clone(),
        values,
        flagged,
        base_point: x,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HarmonicityReport {
    /// Five-point Laplacian at interior nodes, `None` elsewhere.
    pub defect: Vec<Option<f64>>,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub interior_nodes: usize,
}

/// Discrete Laplacian `(L_E + L_W + L_N + L_S - 4 L_C) / h^2` on interior
/// nodes whose stencil is fully defined and unflagged.
pub fn harmonicity_defect(grid: &ParamGrid, values: &[Option<f64>], flagged: &[bool]) -> Result<HarmonicityReport> {
    if values.len() != grid.len() || flagged.len() != grid.len() {
        return Err(Error::InvalidArgument("one value per grid slot expected".into()));
    }
    let h2 = grid.mesh() * grid.mesh();
    let defect: Vec<Option<f64>> = (0..grid.len())
        .map(|idx| {
            let st = grid.interior_stencil(idx)?;
            if flagged[idx] || st.iter().any(|k| flagged[*k]) {
                return None;
            }
            let c = values[idx]?;
            let mut sum = -4.0 * c;
            for k in st {
                sum += values[k]?;
            }
            Some(sum / h2)
        })
        .collect();
    let abs: Vec<f64> = defect.iter().flatten().map(|v| v.abs()).collect();
    Ok(HarmonicityReport {
        max_abs: abs.iter().copied().fold(0.0, f64::max),
        mean_abs: if abs.is_empty() {
            0.0
        } else {
            abs.iter().sum::<f64>() / abs.len() as f64
        },
        interior_nodes: abs.len(),
        defect,
    })
}

impl LyapunovMap {
    pub fn harmonicity(&self) -> Result<HarmonicityReport> {
        harmonicity_defect(&self.grid, &self.values, &self.flagged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn square_map_has_exponent_log_two() {
        let f = RationalMap::quadratic(c(0.0, 0.0));
        let (v, bad) = lyapunov_estimate(&f, &SpherePoint::from_re_im(0.3, 0.4), 10, 1 << 10, 1).unwrap();
        assert!(!bad);
        // leaves lie close to, not on, the unit circle
        assert!((v - 2f64.ln()).abs() < 1e-3, "{v}");
        let (v, _) = lyapunov_estimate(&f, &SpherePoint::from_re_im(0.6, 0.8), 8, 1 << 8, 1).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn power_maps_have_exponent_log_degree() {
        for d in 2..=4usize {
            let mut coeffs = vec![c(0.0, 0.0); d + 1];
            coeffs[d] = c(1.0, 0.0);
            let f = RationalMap::polynomial(coeffs).unwrap();
            let fam = Family::constant(&f);
            let grid = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.02, 0.01, c(0.0, 0.0)).unwrap());
            let map = lyapunov_map(&fam, &grid, 6, 4096, 3).unwrap();
            for v in map.values.iter().flatten() {
                assert!((v - (d as f64).ln()).abs() < 2e-3, "d = {d}: {v}");
            }
        }
    }

    #[test]
    fn sampled_estimate_is_close_to_the_tree() {
        let f = RationalMap::quadratic(c(-0.2, 0.1));
        let x = SpherePoint::from_re_im(0.4, -0.9);
        let (exact, _) = lyapunov_estimate(&f, &x, 10, 1 << 10, 0).unwrap();
        let (mc, _) = lyapunov_estimate(&f, &x, 10, 4000, 5).unwrap();
        assert!((exact - mc).abs() < 0.02, "{exact} vs {mc}");
    }

    #[test]
    fn laplacian_of_harmonic_samples() {
        let grid = ParamGrid::new(c(0.0, 0.0), 0.05, 0.01, c(0.0, 0.0)).unwrap();
        let flagged = vec![false; grid.len()];
        let constant: Vec<Option<f64>> = grid.nodes().iter().map(|l| l.map(|_| 1.7)).collect();
        let r = harmonicity_defect(&grid, &constant, &flagged).unwrap();
        assert!(r.max_abs < 1e-10);
        assert!(r.interior_nodes > 40);
        let real: Vec<Option<f64>> = grid.nodes().iter().map(|l| l.map(|l| l.re)).collect();
        assert!(harmonicity_defect(&grid, &real, &flagged).unwrap().max_abs < 1e-9);
        let square: Vec<Option<f64>> = grid.nodes().iter().map(|l| l.map(|l| l.norm_sqr())).collect();
        let r = harmonicity_defect(&grid, &square, &flagged).unwrap();
        assert!(r.defect.iter().flatten().all(|v| (v - 4.0).abs() < 1e-6));
    }
}
