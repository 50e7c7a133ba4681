use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{chordal_dist, Mobius, RationalMap, SpherePoint};
use crate::weights::Weight;

use super::family::{Family, ParamGrid};
use super::graph::{graph_distance, MotionGraph};

/// Boundary points per slice used to estimate slice diameters.
pub const BOUNDARY_SAMPLES: usize = 16;

/// A preimage is ambiguous when the second-nearest candidate is closer than
/// this factor times the nearest.
const AMBIGUITY_RATIO: f64 = 2.0;

/// The chordal `radius`-neighbourhood of a graph over its grid.
#[derive(Clone, Debug)]
pub struct Tube {
    pub center: MotionGraph,
    pub radius: f64,
}

impl Tube {
    pub fn new(center: MotionGraph, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("tube radius must be positive, got {radius}")));
        }
        Ok(Tube { center, radius })
    }

    pub fn grid(&self) -> &Arc<ParamGrid> {
        &self.center.grid
    }
}

pub fn tube_membership(tube: &Tube, g: &MotionGraph) -> Result<bool> {
    Ok(graph_distance(&tube.center, g)?.sup < tube.radius)
}

/// `k` points at chordal distance exactly `r` from `c`.
fn circle_around(c: &SpherePoint, r: f64, k: usize, phase: f64) -> Vec<SpherePoint> {
    let rot = Mobius::rotation_to(c);
    // chordal(0, t) = t / sqrt(1 + t^2)
    let t = r / (1.0 - r * r).max(1e-300).sqrt();
    (0..k)
        .map(|j| {
            rot.apply(&SpherePoint::new(Complex64::from_polar(
                t,
                phase + std::f64::consts::TAU * j as f64 / k as f64,
            )))
        })
        .collect()
}

fn diameter(points: &[SpherePoint]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max(chordal_dist(p, q));
        }
    }
    d
}

/// Preimage of `y` closest to `target`, or `None` when the choice is ambiguous.
fn nearest_preimage(f: &RationalMap, y: &SpherePoint, target: &SpherePoint) -> Result<Option<SpherePoint>> {
    let pre = f.preimages(y)?;
    let mut ds: Vec<(f64, SpherePoint)> = pre.iter().map(|(p, _)| (chordal_dist(p, target), *p)).collect();
    ds.sort_by(|a, b| a.0.total_cmp(&b.0));
    if ds.len() > 1 && ds[1].0 < AMBIGUITY_RATIO * ds[0].0 {
        return Ok(None);
    }
    Ok(ds.first().map(|d| d.1))
}

fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchRecord {
    pub index: usize,
    /// Largest slice diameter over the grid at each depth `0..=n`.
    pub diameters: Vec<f64>,
    /// Least-squares slope of `log diameter` against depth.
    pub slope: f64,
    pub good: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionReport {
    pub radius: f64,
    pub depth: usize,
    pub a0: f64,
    pub branches: Vec<BranchRecord>,
    /// Branches abandoned because a preimage choice was ambiguous somewhere.
    pub dropped: usize,
    /// Good branches over all sampled branches, dropped ones counting as bad.
    pub good_fraction: f64,
}

impl ContractionReport {
    /// Largest diameter at each depth over the kept branches.
    pub fn level_diameters(&self) -> Vec<f64> {
        (0..=self.depth)
            .map(|l| self.branches.iter().map(|b| b.diameters[l]).fold(0.0, f64::max))
            .collect()
    }
}

/// Follows one random backward branch of the tube through `depth` levels.
/// At the base node the branch index is drawn at random; elsewhere the
/// preimage continuing the neighbour's choice is taken.
fn follow_branch(maps: &[Option<RationalMap>], tube: &Tube, depth: usize, rng: &mut ChaCha8Rng) -> Result<Option<Vec<f64>>> {
    let grid = tube.grid();
    let order = grid.bfs_order();
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut centers: Vec<Option<SpherePoint>> = tube.center.values.clone();
    let mut rims: Vec<Vec<SpherePoint>> = centers
        .iter()
        .map(|c| {
            c.map(|c| circle_around(&c, tube.radius, BOUNDARY_SAMPLES, phase))
                .unwrap_or_default()
        })
        .collect();
    let level_diameter = |rims: &[Vec<SpherePoint>]| rims.iter().map(|r| diameter(r)).fold(0.0, f64::max);
    let mut diameters = vec![level_diameter(&rims)];
    for _ in 0..depth {
        let mut next_centers: Vec<Option<SpherePoint>> = vec![None; grid.len()];
        for (idx, parent) in &order {
            let (Some(f), Some(c)) = (&maps[*idx], centers[*idx]) else {
                continue;
            };
            let chosen = match parent {
                None => {
                    let pre = f.preimages(&c)?;
                    let pick = rng.gen_range(0..pre.len());
                    Some(pre[pick].0)
                }
                Some(p) => match next_centers[*p] {
                    Some(target) => nearest_preimage(f, &c, &target)?,
                    None => None,
                },
            };
            match chosen {
                Some(z) => next_centers[*idx] = Some(z),
                None => return Ok(None),
            }
        }
        let next_rims: Vec<Option<Vec<SpherePoint>>> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (Some(f), Some(c)) = (&maps[idx], next_centers[idx]) else {
                    return Ok(Some(Vec::new()));
                };
                rims[idx]
                    .iter()
                    .map(|y| nearest_preimage(f, y, &c))
                    .collect::<Result<Option<Vec<_>>>>()
            })
            .collect::<Result<_>>()?;
        let Some(next_rims) = next_rims.into_iter().collect::<Option<Vec<_>>>() else {
            return Ok(None);
        };
        centers = next_centers;
        rims = next_rims;
        diameters.push(level_diameter(&rims));
    }
    Ok(Some(diameters))
}

/// Samples backward branches of depth `n` over a tube and classifies each by
/// the slope of its log slice diameter. Branch `i` draws from stream `i` of
/// the generator seeded with `seed`.
pub fn contraction_report(fam: &Family, tube: &Tube, depth: usize, branch_samples: usize, seed: u64, a0: f64) -> Result<ContractionReport> {
    let grid = tube.grid();
    let maps: Vec<Option<RationalMap>> = grid
        .nodes()
        .iter()
        .map(|l| l.map(|l| fam.at_unchecked(l)).transpose())
        .collect::<Result<_>>()?;
    let results: Vec<Option<Vec<f64>>> = (0..branch_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            follow_branch(&maps, tube, depth, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut branches = Vec::new();
    let mut dropped = 0;
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Some(diameters) => {
                let logs: Vec<f64> = diameters.iter().map(|d| d.max(1e-300).ln()).collect();
                let slope = least_squares_slope(&logs);
                branches.push(BranchRecord {
                    index,
                    diameters,
                    slope,
                    good: slope <= -a0,
                });
            }
            None => dropped += 1,
        }
    }
    let good = branches.iter().filter(|b| b.good).count();
    Ok(ContractionReport {
        radius: tube.radius,
        depth,
        a0,
        branches,
        dropped,
        good_fraction: if branch_samples == 0 {
            0.0
        } else {
            good as f64 / branch_samples as f64
        },
    })
}

/// A backward orbit `x_0, x_1, ...` with `f(x_{l+1}) = x_l`.
pub type BackwardBranch = Vec<SpherePoint>;

/// `x` followed backward by the given preimage indices (lexicographic order).
pub fn backward_branch(f: &RationalMap, x: &SpherePoint, choices: &[usize]) -> Result<BackwardBranch> {
    let mut out = vec![*x];
    let mut z = *x;
    for &c in choices {
        let pre = f.preimages(&z)?;
        z = pre[c % pre.len()].0;
        out.push(z);
    }
    Ok(out)
}

/// The branch from `y` shadowing `reference`: at each level the preimage
/// nearest to the reference point. `None` if a choice is ambiguous.
pub fn shadow_branch(f: &RationalMap, y: &SpherePoint, reference: &[SpherePoint]) -> Result<Option<BackwardBranch>> {
    let mut out = vec![*y];
    let mut z = *y;
    for target in &reference[1..] {
        match nearest_preimage(f, &z, target)? {
            Some(p) => {
                z = p;
                out.push(z);
            }
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// `sum_{l < n} |phi(a_l) - phi(b_l)|` for two backward branches.
pub fn distortion_sum(w: &Weight, a: &[SpherePoint], b: &[SpherePoint], n: usize) -> Result<f64> {
    if a.len() < n || b.len() < n {
        return Err(Error::InvalidArgument(format!(
            "branches of length {} and {} are shorter than {n}",
            a.len(),
            b.len()
        )));
    }
    Ok((0..n).map(|l| (w.eval(&a[l]) - w.eval(&b[l])).abs()).sum())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionPoint {
    pub m: u32,
    pub radius: f64,
    /// Largest distortion sum over the sampled branch pairs.
    pub max_sum: f64,
    pub mean_sum: f64,
    pub dropped: usize,
}

/// Distortion sums for pairs of branches starting `e^{-m}` apart around
/// `center`, one row per `m`. The same branch choices and directions are used
/// for every `m`, so rows differ only in the starting separation.
pub fn distortion_curve(
    f: &RationalMap,
    w: &Weight,
    center: &SpherePoint,
    ms: &[u32],
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<DistortionPoint>> {
    let d = f.degree();
    let draws: Vec<(f64, Vec<usize>)> = (0..samples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (phase, (0..depth).map(|_| rng.gen_range(0..d)).collect())
        })
        .collect();
    let references: Vec<BackwardBranch> = draws.iter().map(|(_, c)| backward_branch(f, center, c)).collect::<Result<_>>()?;
    ms.iter()
        .map(|&m| {
            let radius = (-(m as f64)).exp();
            let sums: Vec<Option<f64>> = draws
                .par_iter()
                .zip(&references)
                .map(|((phase, _), reference)| {
                    let start = circle_around(center, radius, 1, *phase)[0];
                    Ok(match shadow_branch(f, &start, reference)? {
                        Some(b) => Some(distortion_sum(w, reference, &b, depth)?),
                        None => None,
                    })
                })
                .collect::<Result<_>>()?;
            let kept: Vec<f64> = sums.iter().flatten().copied().collect();
            Ok(DistortionPoint {
                m,
                radius,
                max_sum: kept.iter().copied().fold(0.0, f64::max),
                mean_sum: if kept.is_empty() {
                    0.0
                } else {
                    kept.iter().sum::<f64>() / kept.len() as f64
                },
                dropped: sums.len() - kept.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_grid() -> Arc<ParamGrid> {
        Arc::new(ParamGrid::new(c(0.0, 0.0), 0.05, 0.025, c(0.0, 0.0)).unwrap())
    }

    #[test]
    fn membership_examples() {
        let grid = small_grid();
        let zero = MotionGraph::constant(grid.clone(), SpherePoint::ZERO);
        let one = MotionGraph::constant(grid, SpherePoint::ONE);
        assert!(tube_membership(&Tube::new(zero.clone(), 1e-6).unwrap(), &zero).unwrap());
        assert!(!tube_membership(&Tube::new(zero.clone(), 0.5).unwrap(), &one).unwrap());
        assert!(tube_membership(&Tube::new(zero.clone(), 0.8).unwrap(), &one).unwrap());
        assert!(Tube::new(zero, 0.0).is_err());
    }

    #[test]
    fn rim_points_sit_on_the_tube_boundary() {
        for p in [SpherePoint::ONE, SpherePoint::Infinity, SpherePoint::from_re_im(-0.3, 2.0)] {
            for q in circle_around(&p, 0.1, BOUNDARY_SAMPLES, 0.3) {
                assert!((chordal_dist(&p, &q) - 0.1).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn square_map_branches_contract_by_one_half() {
        let fam = Family::quadratic();
        let tube = Tube::new(MotionGraph::constant(small_grid(), SpherePoint::ONE), 0.1).unwrap();
        let report = contraction_report(&fam, &tube, 8, 24, 7, 0.6).unwrap();
        assert_eq!(report.dropped, 0);
        for b in &report.branches {
            assert!(b.good, "slope {}", b.slope);
            assert!((b.slope + 2f64.ln()).abs() < 0.1, "slope {}", b.slope);
        }
        // depth zero is the tube itself: diameter of a chordal disk of radius 0.1
        let d0 = report.level_diameters()[0];
        let expected = 2.0 * 0.1 * (1.0 - 0.01f64).sqrt();
        assert!((d0 - expected).abs() < 1e-3, "{d0} vs {expected}");
        let again = contraction_report(&fam, &tube, 8, 24, 7, 0.6).unwrap();
        assert_eq!(serde_json::to_string(&again).unwrap(), serde_json::to_string(&report).unwrap());
    }

    #[test]
    fn distortion_trivial_cases() {
        let f = RationalMap::quadratic(c(0.0, 0.0));
        let bump = Weight::bump(SpherePoint::ZERO, 0.2, 0.5).unwrap();
        let a = backward_branch(&f, &SpherePoint::ONE, &[0, 1, 1, 0]).unwrap();
        assert_eq!(distortion_sum(&bump, &a, &a, 5).unwrap(), 0.0);
        let b = backward_branch(&f, &SpherePoint::from_re_im(0.9, 0.2), &[1, 0, 0, 1]).unwrap();
        assert_eq!(distortion_sum(&Weight::zero(), &a, &b, 5).unwrap(), 0.0);
        assert!(distortion_sum(&bump, &a, &b, 6).is_err());
    }

    #[test]
    fn distortion_shrinks_with_the_starting_separation() {
        let f = RationalMap::quadratic(c(0.0, 0.0));
        let bump = Weight::bump(SpherePoint::ZERO, 0.2, 0.5).unwrap();
        let curve = distortion_curve(&f, &bump, &SpherePoint::ONE, &[2, 3, 4, 5], 10, 32, 11).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].max_sum <= pair[0].max_sum);
        }
        assert!(curve.iter().all(|p| p.max_sum.is_finite() && p.dropped == 0));
    }
}
