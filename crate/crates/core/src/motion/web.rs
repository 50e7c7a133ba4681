use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cycles::{cycle_mass, PeriodicPoint};
use crate::error::{Error, Result};
use crate::sphere::SpherePoint;
use crate::thermo::DiscreteMeasure;
use crate::weights::Weight;

use super::family::{Family, ParamGrid};
use super::graph::{continue_point, disjointness_check, ContinuationOptions, DisjointnessReport, GraphStatus, MotionGraph};

/// Slice atoms closer than this are merged.
pub const SLICE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct WebAtom {
    pub graph: MotionGraph,
    pub mass: f64,
}

/// A repelling point at the base that did not make it into the web.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcludedPoint {
    pub point: SpherePoint,
    pub mass: f64,
    pub reason: String,
}

/// `sum e^{S_n phi(gamma(lambda_0)) - n P} delta_gamma` over the persistent
/// repelling graphs of period `n`.
#[derive(Clone, Debug)]
pub struct WebMeasure {
    pub n: usize,
    pub pressure: f64,
    pub weight_id: String,
    pub grid: Arc<ParamGrid>,
    pub atoms: Vec<WebAtom>,
    pub excluded: Vec<ExcludedPoint>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PersistenceSummary {
    pub n: usize,
    pub persistent: usize,
    pub non_persistent: usize,
    pub broken: usize,
    pub below_margin: usize,
    pub total_mass: f64,
    pub lost_mass: f64,
}

/// Short stable identifier of a weight: the first 16 hex digits of the
/// SHA-256 of its JSON form.
pub fn weight_id(w: &Weight) -> String {
    let digest = Sha256::digest(w.to_json().as_bytes());
    hex::encode(&digest[..8])
}

impl WebMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().fold(0.0, |s, a| s + a.mass)
    }

    pub fn lost_mass(&self) -> f64 {
        self.excluded.iter().fold(0.0, |s, e| s + e.mass)
    }

    pub fn graphs(&self) -> Vec<MotionGraph> {
        self.atoms.iter().map(|a| a.graph.clone()).collect()
    }

    pub fn summary(&self) -> PersistenceSummary {
        let count = |prefix: &str| self.excluded.iter().filter(|e| e.reason.starts_with(prefix)).count();
        PersistenceSummary {
            n: self.n,
            persistent: self.atoms.len(),
            non_persistent: count("non-persistent"),
            broken: count("broken"),
            below_margin: count("margin"),
            total_mass: self.total_mass(),
            lost_mass: self.lost_mass(),
        }
    }

    pub fn disjointness(&self) -> Result<DisjointnessReport> {
        disjointness_check(&self.graphs())
    }

    pub fn to_json(&self) -> String {
        let graphs: Vec<serde_json::Value> = self
            .atoms
            .iter()
            .map(|a| {
                let mut v = a.graph.json_value();
                v["mass"] = serde_json::json!(a.mass);
                v
            })
            .collect();
        serde_json::to_string(&serde_json::json!({
            "n": self.n,
            "pressure": self.pressure,
            "weight_id": self.weight_id,
            "total_mass": self.total_mass(),
            "lost_mass": self.lost_mass(),
            "excluded": self.excluded,
            "graphs": graphs,
        }))
        .expect("web measure serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let field = |k: &str| v.get(k).ok_or_else(|| Error::InvalidArgument(format!("web measure lacks `{k}`")));
        let n: usize = serde_json::from_value(field("n")?.clone())?;
        let pressure: f64 = serde_json::from_value(field("pressure")?.clone())?;
        let weight_id: String = serde_json::from_value(field("weight_id")?.clone())?;
        let excluded: Vec<ExcludedPoint> = serde_json::from_value(field("excluded")?.clone())?;
        let raw: Vec<serde_json::Value> = serde_json::from_value(field("graphs")?.clone())?;
        let mut atoms = Vec::with_capacity(raw.len());
        let mut grid: Option<Arc<ParamGrid>> = None;
        for mut g in raw {
            let mass: f64 = serde_json::from_value(g.get("mass").cloned().unwrap_or(serde_json::Value::Null))?;
            if !(mass.is_finite() && mass >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "web atom mass {mass} is not a finite non-negative number"
                )));
            }
            if let Some(obj) = g.as_object_mut() {
                obj.remove("mass");
            }
            let mut graph = MotionGraph::from_value(g)?;
            match &grid {
                Some(shared) if **shared == *graph.grid => graph.grid = shared.clone(),
                Some(_) => return Err(Error::InvalidArgument("web graphs live on different grids".into())),
                None => grid = Some(graph.grid.clone()),
            }
            atoms.push(WebAtom { graph, mass });
        }
        let grid = grid.ok_or_else(|| Error::InvalidArgument("web measure has no graphs".into()))?;
        Ok(WebMeasure {
            n,
            pressure,
            weight_id,
            grid,
            atoms,
            excluded,
        })
    }
}

/// Continues every repelling point of `points` (the fixed points of `f^n` at
/// the base parameter) and keeps the graphs that stay repelling everywhere.
pub fn build_web_measure(
    fam: &Family,
    grid: &Arc<ParamGrid>,
    w: &Weight,
    n: usize,
    points: &[PeriodicPoint],
    pressure: f64,
    opts: &ContinuationOptions,
) -> Result<WebMeasure> {
    if points.iter().any(|p| p.n != n) {
        return Err(Error::InvalidArgument(format!(
            "periodic points passed for period {n} carry another period"
        )));
    }
    let repelling: Vec<&PeriodicPoint> = points.iter().filter(|p| p.is_repelling()).collect();
    let results: Vec<Result<std::result::Result<WebAtom, ExcludedPoint>>> = repelling
        .par_iter()
        .map(|p| {
            let mass = cycle_mass(p, pressure);
            if p.multiplier.norm() < 1.0 + opts.margin {
                return Ok(Err(ExcludedPoint {
                    point: p.point,
                    mass,
                    reason: format!("margin: |multiplier| = {}", p.multiplier.norm()),
                }));
            }
            let graph = continue_point(fam, grid, p, opts)?;
            Ok(match &graph.status {
                GraphStatus::Persistent => Ok(WebAtom { graph, mass }),
                GraphStatus::NonPersistent { reason, .. } => Err(ExcludedPoint {
                    point: p.point,
                    mass,
                    reason: format!("non-persistent: {reason}"),
                }),
                GraphStatus::Broken { reason, .. } => Err(ExcludedPoint {
                    point: p.point,
                    mass,
                    reason: format!("broken: {reason}"),
                }),
            })
        })
        .collect();
    let mut atoms = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        match r? {
            Ok(a) => atoms.push(a),
            Err(e) => excluded.push(e),
        }
    }
    Ok(WebMeasure {
        n,
        pressure,
        weight_id: weight_id(w),
        grid: grid.clone(),
        atoms,
        excluded,
    })
}

/// Image of the web under evaluation at grid slot `idx`.
pub fn slice(web: &WebMeasure, idx: usize) -> Result<DiscreteMeasure> {
    if web.grid.node(idx).is_none() {
        return Err(Error::InvalidArgument(format!("slot {idx} is not a node of the parameter grid")));
    }
    let atoms = web
        .atoms
        .iter()
        .map(|a| {
            a.graph
                .value(idx)
                .map(|p| (p, a.mass))
                .ok_or_else(|| Error::InvalidArgument(format!("graph undefined at slot {idx}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteMeasure::from_atoms_with_tol(atoms, SLICE_TOL))
}

/// Largest atom-mass mismatch between a slice and its push-forward by `f_lambda`.
pub fn slice_invariance_defect(fam: &Family, web: &WebMeasure, idx: usize) -> Result<f64> {
    let lambda = web
        .grid
        .node(idx)
        .ok_or_else(|| Error::InvalidArgument(format!("slot {idx} is not a node of the parameter grid")))?;
    let f = fam.at_unchecked(lambda)?;
    let s = slice(web, idx)?;
    Ok(s.push_forward(&f, SLICE_TOL).max_mass_discrepancy(&s, SLICE_TOL))
}
