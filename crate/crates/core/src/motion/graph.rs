use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycles::{chart_newton_step, PeriodicPoint, NEUTRAL_BAND};
use crate::error::{Error, Result};
use crate::sphere::{chordal_dist, RationalMap, SpherePoint};

use super::family::{Family, ParamGrid, ParamGridSpec};

/// Default admission margin: `|multiplier| >= 1 + REPELLING_MARGIN` at the base.
pub const REPELLING_MARGIN: f64 = 0.05;

/// Graphs closer than this at some node are reported as colliding.
pub const COLLISION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationOptions {
    pub margin: f64,
    /// Required chordal residual `d(f^n(z), z)` at every node.
    pub residual_tol: f64,
    pub max_newton: usize,
    /// Number of times a parameter step may be halved.
    pub max_halvings: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            margin: REPELLING_MARGIN,
            residual_tol: 1e-10,
            max_newton: 12,
            max_halvings: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphStatus {
    Persistent,
    /// The multiplier reached the unit circle at `frontier`.
    NonPersistent {
        frontier: usize,
        reason: String,
    },
    /// Newton failed even after refining the parameter step.
    Broken {
        frontier: usize,
        reason: String,
    },
}

/// A periodic point followed across the parameter grid.
#[derive(Clone, Debug)]
pub struct MotionGraph {
    pub n: usize,
    pub grid: Arc<ParamGrid>,
    pub values: Vec<Option<SpherePoint>>,
    pub multipliers: Vec<Option<Complex64>>,
    pub residuals: Vec<Option<f64>>,
    /// Birkhoff sum of the weight along the cycle at the base parameter.
    pub weight: f64,
    pub status: GraphStatus,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    grid: ParamGridSpec,
    values: Vec<Option<SpherePoint>>,
    multipliers: Vec<Option<[f64; 2]>>,
    weight: f64,
    residual_max: f64,
    status: GraphStatus,
}

impl MotionGraph {
    /// The graph `lambda -> p` (period 0, no multipliers).
    pub fn constant(grid: Arc<ParamGrid>, p: SpherePoint) -> Self {
        let values = grid.nodes().iter().map(|l| l.map(|_| p)).collect();
        let len = grid.len();
        MotionGraph {
            n: 0,
            grid,
            values,
            multipliers: vec![None; len],
            residuals: vec![None; len],
            weight: 0.0,
            status: GraphStatus::Persistent,
        }
    }

    pub fn is_persistent(&self) -> bool {
        self.status == GraphStatus::Persistent
    }

    pub fn value(&self, idx: usize) -> Option<SpherePoint> {
        self.values.get(idx).copied().flatten()
    }

    pub fn base_value(&self) -> Option<SpherePoint> {
        self.value(self.grid.base_index())
    }

    pub fn residual_max(&self) -> f64 {
        self.residuals.iter().flatten().fold(0.0, |m, r| m.max(*r))
    }

    /// Smallest `|multiplier|` over the nodes reached.
    pub fn min_abs_multiplier(&self) -> f64 {
        self.multipliers.iter().flatten().fold(f64::INFINITY, |m, v| m.min(v.norm()))
    }

    pub(crate) fn json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_raw()).expect("graph serialises")
    }

    fn to_raw(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            grid: self.grid.spec(),
            values: self.values.clone(),
            multipliers: self.multipliers.iter().map(|m| m.map(|c| [c.re, c.im])).collect(),
            weight: self.weight,
            residual_max: self.residual_max(),
            status: self.status.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("graph serialises")
    }

    pub(crate) fn from_value(v: serde_json::Value) -> Result<Self> {
        let raw: GraphJson = serde_json::from_value(v)?;
        let grid = Arc::new(ParamGrid::from_spec(&raw.grid)?);
        if raw.values.len() != grid.len() || raw.multipliers.len() != grid.len() {
            return Err(Error::InvalidArgument("graph length does not match its grid".into()));
        }
        for (k, v) in raw.values.iter().enumerate() {
            if v.is_some() && grid.node(k).is_none() {
                return Err(Error::InvalidArgument(format!("graph has a value outside the disk at slot {k}")));
            }
        }
        let residuals = raw.values.iter().map(|v| v.map(|_| raw.residual_max)).collect();
        Ok(MotionGraph {
            n: raw.n,
            grid,
            values: raw.values,
            multipliers: raw.multipliers.iter().map(|m| m.map(|c| Complex64::new(c[0], c[1]))).collect(),
            residuals,
            weight: raw.weight,
            status: raw.status,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        MotionGraph::from_value(serde_json::from_str(s)?)
    }
}

/// Derivative of the periodic point with respect to the parameter:
/// `-(d F / d lambda) / (F' - 1)` with `F = f^n` in `z`'s chart.
fn tangent(fam: &Family, lambda: Complex64, n: usize, z: &SpherePoint) -> Option<(crate::sphere::Chart, Complex64)> {
    let eps = 1e-6 * (1.0 + lambda.norm());
    let (chart, _) = z.chart_coord();
    let image = |l: Complex64| -> Option<Complex64> { fam.at_unchecked(l).ok()?.iterate(z, n).coord(chart) };
    let dl = (image(lambda + eps)? - image(lambda - eps)?) / (2.0 * eps);
    let f = fam.at_unchecked(lambda).ok()?;
    let denom = f.multiplier(z, n) - 1.0;
    let v = -dl / denom;
    (v.re.is_finite() && v.im.is_finite()).then_some((chart, v))
}

enum Step {
    Ok(SpherePoint),
    Diverged,
}

/// Newton on `f^n(z) = z` from `start`. Accepted only when it converges and
/// stays close to the predictor, so it cannot jump to a neighbouring cycle.
fn correct(f: &RationalMap, n: usize, start: SpherePoint, prev: &SpherePoint, opts: &ContinuationOptions) -> Step {
    let mut z = start;
    for _ in 0..opts.max_newton {
        let Some(next) = chart_newton_step(f, n, &z) else {
            return Step::Diverged;
        };
        let moved = chordal_dist(&next, &z);
        z = next;
        if moved <= 1e-15 {
            break;
        }
    }
    let residual = chordal_dist(&f.iterate(&z, n), &z);
    let predicted = chordal_dist(&start, prev);
    let correction = chordal_dist(&z, &start);
    if residual <= opts.residual_tol && correction <= (0.25 * predicted).max(1e-7) {
        Step::Ok(z)
    } else {
        Step::Diverged
    }
}

/// Moves the periodic point from `(la, z)` to parameter `lb`, halving the
/// step on divergence.
fn transport(
    fam: &Family,
    n: usize,
    la: Complex64,
    z: SpherePoint,
    lb: Complex64,
    opts: &ContinuationOptions,
) -> std::result::Result<SpherePoint, String> {
    let mut s: f64 = 0.0;
    let mut ds = 1.0;
    let mut z = z;
    let mut halvings = 0;
    while s < 1.0 {
        let t = (s + ds).min(1.0);
        let l0 = la + (lb - la) * s;
        let l1 = la + (lb - la) * t;
        let f = fam.at_unchecked(l1).map_err(|e| e.to_string())?;
        let predicted = match tangent(fam, l0, n, &z) {
            Some((chart, v)) => {
                let (_, t0) = z.chart_coord();
                SpherePoint::from_chart(chart, t0 + v * (l1 - l0))
            }
            None => z,
        };
        match correct(&f, n, predicted, &z, opts) {
            Step::Ok(next) => {
                z = next;
                s = t;
            }
            Step::Diverged => {
                halvings += 1;
                if halvings > opts.max_halvings {
                    return Err(format!("step underflow after {halvings} halvings"));
                }
                ds *= 0.5;
            }
        }
    }
    Ok(z)
}

/// Breadth-first continuation of a repelling periodic point over the grid.
pub fn continue_point(fam: &Family, grid: &Arc<ParamGrid>, p: &PeriodicPoint, opts: &ContinuationOptions) -> Result<MotionGraph> {
    let abs_m = p.multiplier.norm();
    if abs_m.is_nan() || abs_m < 1.0 + opts.margin {
        return Err(Error::InvalidArgument(format!(
            "periodic point {} has |multiplier| {abs_m} below the repelling margin 1 + {}",
            p.point, opts.margin
        )));
    }
    let n = p.n;
    let len = grid.len();
    let mut g = MotionGraph {
        n,
        grid: grid.clone(),
        values: vec![None; len],
        multipliers: vec![None; len],
        residuals: vec![None; len],
        weight: p.birkhoff_weight,
        status: GraphStatus::Persistent,
    };
    let base = grid.base_index();
    let f0 = fam.at_unchecked(grid.base())?;
    let z0 = match correct(&f0, n, p.point, &p.point, opts) {
        Step::Ok(z) => z,
        Step::Diverged => p.point,
    };
    g.values[base] = Some(z0);
    g.multipliers[base] = Some(f0.multiplier(&z0, n));
    g.residuals[base] = Some(chordal_dist(&f0.iterate(&z0, n), &z0));
    for (idx, parent) in grid.bfs_order() {
        let Some(parent) = parent else { continue };
        let (Some(la), Some(lb), Some(z)) = (grid.node(parent), grid.node(idx), g.values[parent]) else {
            continue;
        };
        match transport(fam, n, la, z, lb, opts) {
            Ok(next) => {
                let f = fam.at_unchecked(lb)?;
                let m = f.multiplier(&next, n);
                g.values[idx] = Some(next);
                g.multipliers[idx] = Some(m);
                g.residuals[idx] = Some(chordal_dist(&f.iterate(&next, n), &next));
                if m.norm() <= 1.0 + NEUTRAL_BAND {
                    g.status = GraphStatus::NonPersistent {
                        frontier: idx,
                        reason: format!("|multiplier| = {} at lambda = {lb}", m.norm()),
                    };
                    return Ok(g);
                }
            }
            Err(reason) => {
                g.status = GraphStatus::Broken { frontier: idx, reason };
                return Ok(g);
            }
        }
    }
    Ok(g)
}

/// Sup-distance between two graphs and the bound on what the grid may miss.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDistance {
    /// `max_lambda d(g1(lambda), g2(lambda))` over the nodes where both are defined.
    pub sup: f64,
    /// Slot achieving the sup.
    pub argmax: usize,
    /// Finite-difference estimate of the parameter Lipschitz constant of the
    /// pointwise distance.
    pub lipschitz: f64,
    /// `lipschitz * h`: how much the continuum sup may exceed `sup`.
    pub inflation: f64,
}

fn lipschitz_estimate(g: &MotionGraph) -> f64 {
    let grid = &g.grid;
    let h = grid.mesh();
    let mut lip: f64 = 0.0;
    for idx in 0..grid.len() {
        let Some(a) = g.value(idx) else { continue };
        for nb in grid.neighbors(idx) {
            if let Some(b) = g.value(nb) {
                lip = lip.max(chordal_dist(&a, &b) / h);
            }
        }
    }
    lip
}

fn same_grid(a: &MotionGraph, b: &MotionGraph) -> Result<()> {
    if Arc::ptr_eq(&a.grid, &b.grid) || *a.grid == *b.grid {
        Ok(())
    } else {
        Err(Error::InvalidArgument("graphs live on different parameter grids".into()))
    }
}

pub fn graph_distance(a: &MotionGraph, b: &MotionGraph) -> Result<GraphDistance> {
    same_grid(a, b)?;
    let mut best = (0.0f64, a.grid.base_index());
    for idx in 0..a.grid.len() {
        if let (Some(p), Some(q)) = (a.value(idx), b.value(idx)) {
            let d = chordal_dist(&p, &q);
            if d > best.0 {
                best = (d, idx);
            }
        }
    }
    let lipschitz = lipschitz_estimate(a) + lipschitz_estimate(b);
    Ok(GraphDistance {
        sup: best.0,
        argmax: best.1,
        lipschitz,
        inflation: lipschitz * a.grid.mesh(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DisjointnessReport {
    /// `min` over pairs and nodes of the pointwise distance.
    pub min_pairwise: f64,
    /// Pair achieving the minimum.
    pub closest_pair: Option<(usize, usize)>,
    /// Pairs closer than [`COLLISION_TOL`] somewhere on the grid.
    pub collisions: Vec<(usize, usize)>,
}

pub fn disjointness_check(graphs: &[MotionGraph]) -> Result<DisjointnessReport> {
    if graphs.len() < 2 {
        return Ok(DisjointnessReport {
            min_pairwise: f64::INFINITY,
            closest_pair: None,
            collisions: Vec::new(),
        });
    }
    for g in &graphs[1..] {
        same_grid(&graphs[0], g)?;
    }
    let per_pair: Vec<(f64, usize, usize)> = (0..graphs.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..graphs.len()).map(move |j| {
                let (a, b) = (&graphs[i], &graphs[j]);
                let d = (0..a.grid.len())
                    .filter_map(|k| Some(chordal_dist(&a.value(k)?, &b.value(k)?)))
                    .fold(f64::INFINITY, f64::min);
                (d, i, j)
            })
        })
        .collect();
    let closest = per_pair.iter().min_by(|x, y| x.0.total_cmp(&y.0)).copied();
    Ok(DisjointnessReport {
        min_pairwise: closest.map_or(f64::INFINITY, |c| c.0),
        closest_pair: closest.map(|c| (c.1, c.2)),
        collisions: per_pair.iter().filter(|c| c.0 < COLLISION_TOL).map(|c| (c.1, c.2)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycles::{periodic_points, CycleOptions};
    use crate::weights::Weight;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fixed_branch(lambda: Complex64, sign: f64) -> Complex64 {
        (1.0 + sign * (1.0 - 4.0 * lambda).sqrt()) / 2.0
    }

    fn fixed_point_near(f: &RationalMap, target: Complex64) -> PeriodicPoint {
        let set = periodic_points(f, &Weight::zero(), 1, &CycleOptions::default()).unwrap();
        set.points
            .into_iter()
            .min_by(|a, b| chordal_dist(&a.point, &SpherePoint::new(target)).total_cmp(&chordal_dist(&b.point, &SpherePoint::new(target))))
            .unwrap()
    }

    #[test]
    fn fixed_point_follows_closed_form() {
        let fam = Family::quadratic();
        let grid = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.05, 0.01, c(0.0, 0.0)).unwrap());
        let p = fixed_point_near(&fam.at(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        let g = continue_point(&fam, &grid, &p, &ContinuationOptions::default()).unwrap();
        assert!(g.is_persistent());
        for (k, l) in grid.nodes().iter().enumerate() {
            let Some(l) = l else { continue };
            let z = g.value(k).unwrap().finite().unwrap();
            assert!((z - fixed_branch(*l, 1.0)).norm() < 1e-8, "{l}: {z}");
            assert!(g.multipliers[k].unwrap().norm() > 1.0);
        }
        let k = grid.index_of(c(0.04, 0.0)).unwrap();
        assert!((g.value(k).unwrap().finite().unwrap().re - 0.958_257_569_495_584).abs() < 1e-12);
        assert!(g.residual_max() <= 1e-10);
    }

    #[test]
    fn superattracting_infinity_is_refused() {
        let fam = Family::quadratic();
        let grid = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.05, 0.01, c(0.0, 0.0)).unwrap());
        let p = fixed_point_near(&fam.at(c(0.0, 0.0)).unwrap(), c(1e9, 0.0));
        assert!(p.point.is_infinity());
        assert!(matches!(
            continue_point(&fam, &grid, &p, &ContinuationOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn repelling_fixed_point_in_period_two_component() {
        let fam = Family::quadratic();
        let grid = Arc::new(ParamGrid::new(c(-1.0, 0.0), 0.02, 0.005, c(-1.0, 0.0)).unwrap());
        let f0 = fam.at(c(-1.0, 0.0)).unwrap();
        for sign in [1.0, -1.0] {
            let p = fixed_point_near(&f0, fixed_branch(c(-1.0, 0.0), sign));
            let g = continue_point(&fam, &grid, &p, &ContinuationOptions::default()).unwrap();
            assert!(g.is_persistent());
            for (k, l) in grid.nodes().iter().enumerate() {
                let Some(l) = l else { continue };
                let z = fixed_branch(*l, sign);
                assert!((g.value(k).unwrap().finite().unwrap() - z).norm() < 1e-8);
                let m = g.multipliers[k].unwrap();
                assert!((m - 2.0 * z).norm() < 1e-8 && m.norm() > 1.0);
            }
        }
    }

    #[test]
    fn crossing_the_parabolic_parameter_is_reported() {
        // the two fixed points collide at lambda = 1/4
        let fam = Family::quadratic();
        let grid = Arc::new(ParamGrid::new(c(0.25, 0.0), 0.05, 0.01, c(0.2, 0.0)).unwrap());
        let p = fixed_point_near(&fam.at(c(0.2, 0.0)).unwrap(), fixed_branch(c(0.2, 0.0), 1.0));
        let g = continue_point(&fam, &grid, &p, &ContinuationOptions::default()).unwrap();
        assert!(!g.is_persistent(), "{:?}", g.status);
    }

    #[test]
    fn half_mesh_agrees_at_shared_nodes() {
        let fam = Family::quadratic();
        let coarse = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.05, 0.01, c(0.0, 0.0)).unwrap());
        let fine = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.05, 0.005, c(0.0, 0.0)).unwrap());
        let f0 = fam.at(c(0.0, 0.0)).unwrap();
        let set = periodic_points(&f0, &Weight::zero(), 3, &CycleOptions::default()).unwrap();
        for p in set.points.iter().filter(|p| p.is_repelling()) {
            let a = continue_point(&fam, &coarse, p, &ContinuationOptions::default()).unwrap();
            let b = continue_point(&fam, &fine, p, &ContinuationOptions::default()).unwrap();
            let bound = 10.0 * a.residual_max().max(1e-15);
            for (k, l) in coarse.nodes().iter().enumerate() {
                let Some(l) = l else { continue };
                let kf = fine.index_of(*l).unwrap();
                let gap = chordal_dist(&a.value(k).unwrap(), &b.value(kf).unwrap());
                assert!(gap <= bound.max(1e-13), "{gap} vs {bound}");
            }
        }
    }

    #[test]
    fn distance_examples() {
        let grid = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.05, 0.01, c(0.0, 0.0)).unwrap());
        let zero = MotionGraph::constant(grid.clone(), SpherePoint::ZERO);
        let one = MotionGraph::constant(grid.clone(), SpherePoint::ONE);
        assert_eq!(graph_distance(&zero, &zero).unwrap().sup, 0.0);
        let d = graph_distance(&zero, &one).unwrap();
        assert!((d.sup - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.inflation, 0.0);

        let fam = Family::quadratic();
        let f0 = fam.at(c(0.0, 0.0)).unwrap();
        let opts = ContinuationOptions::default();
        let hi = continue_point(&fam, &grid, &fixed_point_near(&f0, c(1.0, 0.0)), &opts).unwrap();
        // the attracting branch cannot be continued; build it from the closed form
        let mut lo = MotionGraph::constant(grid.clone(), SpherePoint::ZERO);
        for (k, l) in grid.nodes().iter().enumerate() {
            if let Some(l) = l {
                lo.values[k] = Some(SpherePoint::new(fixed_branch(*l, -1.0)));
            }
        }
        let d = graph_distance(&hi, &lo).unwrap();
        let expected = grid
            .nodes()
            .iter()
            .flatten()
            .map(|l| chordal_dist(&SpherePoint::new(fixed_branch(*l, 1.0)), &SpherePoint::new(fixed_branch(*l, -1.0))))
            .fold(0.0, f64::max);
        assert!((d.sup - expected).abs() < 1e-9);
        assert!(d.inflation > 0.0 && d.inflation < 0.05);
        let report = disjointness_check(&[hi, lo]).unwrap();
        assert!(report.min_pairwise > 0.5 && report.collisions.is_empty());
    }

    #[test]
    fn json_round_trip() {
        let fam = Family::quadratic();
        let grid = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.03, 0.01, c(0.0, 0.0)).unwrap());
        let p = fixed_point_near(&fam.at(c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        let g = continue_point(&fam, &grid, &p, &ContinuationOptions::default()).unwrap();
        let back = MotionGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(back.values, g.values);
        assert_eq!(back.to_json(), g.to_json());
        let v: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
        for key in ["n", "grid", "values", "multipliers", "weight", "residual_max"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph(grid: Arc<ParamGrid>) -> impl Strategy<Value = MotionGraph> {
            let len = grid.len();
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), len).prop_map(move |v| {
                let mut g = MotionGraph::constant(grid.clone(), SpherePoint::ZERO);
                for (k, (re, im)) in v.into_iter().enumerate() {
                    if g.values[k].is_some() {
                        g.values[k] = Some(SpherePoint::from_re_im(re, im));
                    }
                }
                g
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn graph_distance_is_a_metric(
                (a, b, cc) in {
                    let grid = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.02, 0.01, c(0.0, 0.0)).unwrap());
                    (arb_graph(grid.clone()), arb_graph(grid.clone()), arb_graph(grid))
                }
            ) {
                let ab = graph_distance(&a, &b).unwrap().sup;
                let ba = graph_distance(&b, &a).unwrap().sup;
                let bc = graph_distance(&b, &cc).unwrap().sup;
                let ac = graph_distance(&a, &cc).unwrap().sup;
                prop_assert_eq!(ab, ba);
                prop_assert_eq!(graph_distance(&a, &a).unwrap().sup, 0.0);
                prop_assert!(ac <= ab + bc + 1e-15);
            }
        }
    }
}
