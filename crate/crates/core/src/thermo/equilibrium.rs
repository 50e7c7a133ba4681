//! Pressure, eigen-density, conformal measure and equilibrium state at a
//! single map.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::PreimageCache;
use crate::error::{Error, Result};
use crate::sphere::{RationalMap, SpherePoint, POINT_TOL};
use crate::weights::Weight;

use super::grid::{GridFunction, SphereGrid};
use super::measure::{AtomTriple, DiscreteMeasure};
use super::transfer::{power_iteration, TransferOperator};
use super::tree::{preimage_levels, BackwardTree};

/// Tuning knobs for [`equilibrium_state`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EquilibriumOptions {
    /// Sup-norm tolerance of the power iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Backward-tree depth of the conformal measure approximants.
    pub depth: usize,
    /// Number of random base points averaged over.
    pub base_points: usize,
    /// Depth of the backward-tree pressure estimator.
    pub pressure_depth: usize,
    /// Number of transfer steps applied to the grid density at each atom.
    pub refine_depth: usize,
    pub seed: u64,
    /// Forward depth of the critical orbit that base points must avoid.
    pub critical_depth: usize,
    pub min_critical_distance: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tol: 1e-11,
            max_iter: 5000,
            depth: 11,
            base_points: 2,
            pressure_depth: 14,
            refine_depth: 6,
            seed: 0,
            critical_depth: 24,
            min_critical_distance: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EquilibriumData {
    /// Growth rate from the grid power iteration.
    pub pressure: f64,
    /// `log Z_n - log Z_{n-1}` of a backward tree.
    pub pressure_tree: f64,
    /// Eigen-density scaled so that `<m, rho> = 1`.
    pub rho: GridFunction,
    pub m: DiscreteMeasure,
    pub mu: DiscreteMeasure,
    pub residuals: Vec<f64>,
    pub pressures: Vec<f64>,
    pub base_points: Vec<SpherePoint>,
    pub depth: usize,
    pub critical_hits: usize,
}

#[derive(Serialize, Deserialize)]
struct EquilibriumJson {
    pressure: f64,
    pressure_tree: f64,
    pressure_gap: f64,
    resolution: usize,
    rho: Vec<f64>,
    m_atoms: Vec<AtomTriple>,
    mu_atoms: Vec<AtomTriple>,
    residuals: Vec<f64>,
    pressures: Vec<f64>,
    base_points: Vec<SpherePoint>,
    depth: usize,
    critical_hits: usize,
}

impl EquilibriumData {
    /// Absolute difference of the two pressure estimators.
    pub fn pressure_gap(&self) -> f64 {
        (self.pressure - self.pressure_tree).abs()
    }

    /// The tree estimate, which converges exponentially in depth and carries
    /// no interpolation error; use it wherever `e^{-nP}` is taken at large `n`.
    pub fn cross_checked_pressure(&self) -> f64 {
        self.pressure_tree
    }

    pub fn to_json(&self) -> String {
        let j = EquilibriumJson {
            pressure: self.pressure,
            pressure_tree: self.pressure_tree,
            pressure_gap: self.pressure_gap(),
            resolution: self.rho.grid().resolution(),
            rho: self.rho.values().to_vec(),
            m_atoms: self.m.to_triples(),
            mu_atoms: self.mu.to_triples(),
            residuals: self.residuals.clone(),
            pressures: self.pressures.clone(),
            base_points: self.base_points.clone(),
            depth: self.depth,
            critical_hits: self.critical_hits,
        };
        serde_json::to_string(&j).expect("equilibrium data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: EquilibriumJson = serde_json::from_str(s)?;
        // a grid of resolution r has about r nodes; refuse to build one far
        // larger than the stored density
        if j.resolution > 2 * j.rho.len() + 64 {
            return Err(Error::InvalidArgument(format!(
                "resolution {} does not fit {} density values",
                j.resolution,
                j.rho.len()
            )));
        }
        let grid = SphereGrid::new(j.resolution);
        if grid.len() != j.rho.len() {
            return Err(Error::InvalidArgument(format!(
                "rho has {} values but resolution {} gives {} nodes",
                j.rho.len(),
                j.resolution,
                grid.len()
            )));
        }
        if j.rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("rho has non-finite values".into()));
        }
        Ok(EquilibriumData {
            pressure: j.pressure,
            pressure_tree: j.pressure_tree,
            rho: GridFunction::new(grid, j.rho),
            m: DiscreteMeasure::from_triples(&j.m_atoms),
            mu: DiscreteMeasure::from_triples(&j.mu_atoms),
            residuals: j.residuals,
            pressures: j.pressures,
            base_points: j.base_points,
            depth: j.depth,
            critical_hits: j.critical_hits,
        })
    }
}

/// Pressure and positive eigen-density (max-normalised) on `grid`.
pub fn pressure_and_density(
    f: &RationalMap,
    w: &Weight,
    grid: Arc<SphereGrid>,
    tol: f64,
    max_iter: usize,
    cache: &PreimageCache,
) -> Result<(f64, GridFunction, Vec<f64>, Vec<f64>)> {
    let op = TransferOperator::build(f, w, grid, cache)?;
    let pi = power_iteration(&op, tol, max_iter)?;
    Ok((pi.pressure, pi.density, pi.residuals, pi.pressures))
}

/// Atoms `mult(y) e^{S_n phi(y) - nP}` on the depth-`n` backward tree over `x`.
pub fn conformal_measure(
    f: &RationalMap,
    w: &Weight,
    pressure: f64,
    x: &SpherePoint,
    n: usize,
    cache: &PreimageCache,
) -> Result<DiscreteMeasure> {
    let dist = f.critical_orbit_distance(x, n.max(8))?;
    if dist <= POINT_TOL {
        return Err(Error::InvalidArgument(format!("base point {x} lies on the critical orbit")));
    }
    let tree = BackwardTree::build(f, w, x, n, cache)?;
    if tree.critical_hits > 0 {
        log::warn!(
            "backward tree over {x} passed {} critical values; multiplicities kept",
            tree.critical_hits
        );
    }
    let np = n as f64 * pressure;
    Ok(DiscreteMeasure::from_atoms(
        tree.leaves
            .iter()
            .map(|l| (l.point, l.multiplicity as f64 * (l.birkhoff - np).exp()))
            .collect(),
    ))
}

/// Seeded random points at chordal distance above `min_dist` from the forward
/// critical orbit.
pub fn choose_base_points(f: &RationalMap, count: usize, seed: u64, min_dist: f64, depth: usize) -> Result<Vec<SpherePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::InvalidArgument(format!(
                "no base point at distance {min_dist} from the critical orbit"
            )));
        }
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(0.1..=1.0).contains(&r) {
            continue;
        }
        let p = SpherePoint::from_unit_sphere([v[0] / r, v[1] / r, v[2] / r]);
        if f.critical_orbit_distance(&p, depth)? > min_dist {
            out.push(p);
        }
    }
    Ok(out)
}

/// `sum_{f^k z = y} mult(z) e^{S_k phi(z)} rho(z)` for each `y`. Interpolation
/// error in `rho` is damped by the spectral gap of the transfer operator.
fn refine_density(f: &RationalMap, w: &Weight, rho: &GridFunction, points: &[SpherePoint], k: usize) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|y| {
            let tree = BackwardTree::build(f, w, y, k, &PreimageCache::disabled())?;
            Ok(tree
                .leaves
                .iter()
                .map(|l| l.multiplicity as f64 * l.birkhoff.exp() * rho.eval(&l.point))
                .sum())
        })
        .collect()
}

/// Full pipeline: grid pressure and density, tree pressure, conformal
/// measure averaged over base points, and `mu = rho m`.
pub fn equilibrium_state(
    f: &RationalMap,
    w: &Weight,
    grid: Arc<SphereGrid>,
    opts: &EquilibriumOptions,
    cache: &PreimageCache,
) -> Result<EquilibriumData> {
    let (pressure, rho, residuals, pressures) = pressure_and_density(f, w, grid, opts.tol, opts.max_iter, cache)?;
    let base_points = choose_base_points(
        f,
        opts.base_points.max(1),
        opts.seed,
        opts.min_critical_distance,
        opts.critical_depth,
    )?;
    let pressure_tree = BackwardTree::build(f, w, &base_points[0], opts.pressure_depth.max(1), cache)?.pressure_ratio();

    let mut m_atoms = Vec::new();
    let mut mu_atoms = Vec::new();
    let mut critical_hits = 0;
    let mut richness = Vec::new();
    let mut parts = Vec::new();
    for x in &base_points {
        let tree = BackwardTree::build(f, w, x, opts.depth, cache)?;
        critical_hits += tree.critical_hits;
        let points: Vec<SpherePoint> = tree.leaves.iter().map(|l| l.point).collect();
        let dens = refine_density(f, w, &rho, &points, opts.refine_depth)?;
        let top = tree.leaves.iter().map(|l| l.birkhoff).fold(f64::NEG_INFINITY, f64::max);
        let m_raw: Vec<f64> = tree
            .leaves
            .iter()
            .map(|l| l.multiplicity as f64 * (l.birkhoff - top).exp())
            .collect();
        let m_tot: f64 = m_raw.iter().sum();
        let mu_raw: Vec<f64> = m_raw.iter().zip(&dens).map(|(a, b)| a * b).collect();
        let mu_tot: f64 = mu_raw.iter().sum();
        richness.push(tree.leaves.iter().map(|l| l.multiplicity as f64).sum::<f64>());
        parts.push((
            points,
            m_raw.iter().map(|v| v / m_tot).collect::<Vec<_>>(),
            mu_raw.iter().map(|v| v / mu_tot).collect::<Vec<_>>(),
        ));
    }
    let rich_tot: f64 = richness.iter().sum();
    for ((points, m, mu), r) in parts.into_iter().zip(&richness) {
        let share = r / rich_tot;
        for ((p, a), b) in points.iter().zip(&m).zip(&mu) {
            m_atoms.push((*p, a * share));
            mu_atoms.push((*p, b * share));
        }
    }
    let m = DiscreteMeasure::from_atoms(m_atoms);
    let mu = DiscreteMeasure::from_atoms(mu_atoms).normalized();
    let pairing = m.integrate(|p| rho.eval(p));
    let rho = rho.scaled(1.0 / pairing);
    Ok(EquilibriumData {
        pressure,
        pressure_tree,
        rho,
        m,
        mu,
        residuals,
        pressures,
        base_points,
        depth: opts.depth,
        critical_hits,
    })
}

/// `max_g |<mu, g o f> - <mu, g>|`.
pub fn invariance_defect(f: &RationalMap, mu: &DiscreteMeasure, testfns: &[GridFunction]) -> f64 {
    let images: Vec<(SpherePoint, SpherePoint, f64)> = mu.atoms().iter().map(|(p, m)| (*p, f.eval(p), *m)).collect();
    testfns
        .iter()
        .map(|g| images.iter().map(|(p, fp, m)| m * (g.eval(fp) - g.eval(p))).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// Inverse-iteration sample of the Julia set: leaves of a depth-`n` tree.
pub fn julia_sample(f: &RationalMap, x: &SpherePoint, n: usize) -> Result<Vec<SpherePoint>> {
    let recs = preimage_levels(f, x, n, &PreimageCache::disabled())?;
    Ok(recs.levels.last().map(|l| l.iter().map(|r| r.point).collect()).unwrap_or_default())
}
