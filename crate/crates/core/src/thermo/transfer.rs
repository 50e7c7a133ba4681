//! The weighted transfer operator `(L g)(y) = sum_{f x = y} mult(x) e^{phi(x)} g(x)`
//! discretised on a [`SphereGrid`].

use std::sync::Arc;

use rayon::prelude::*;

use crate::cache::{cache_key, PreimageCache, PreimageRecord, PreimageRecords};
use crate::error::{Error, Result};
use crate::sphere::{RationalMap, SpherePoint, POINT_TOL};
use crate::weights::Weight;

use super::grid::{GridFunction, SphereGrid, Stencil};

/// Sparse row-compressed matrix acting on grid values.
#[derive(Clone, Debug)]
pub struct TransferOperator {
    grid: Arc<SphereGrid>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    /// Nodes sitting on exceptional points, filled in from their neighbours.
    exceptional: Vec<(usize, Stencil)>,
}

/// Points whose full preimage is contained in the set itself (at most two).
/// A grid node there only ever reads its own value, which would add a
/// spurious eigenvalue `d e^{phi(p)}` to the discrete operator.
pub fn exceptional_points(f: &RationalMap) -> Result<Vec<SpherePoint>> {
    let d = f.degree();
    let total: Vec<SpherePoint> = f
        .critical_points()?
        .into_iter()
        .filter(|(_, m)| *m + 1 == d)
        .map(|(c, _)| c)
        .collect();
    let in_set = |p: &SpherePoint| total.iter().any(|c| c.approx_eq(p, POINT_TOL));
    Ok(total
        .iter()
        .filter(|c| {
            let img = f.eval(c);
            in_set(&img) && (img.approx_eq(c, POINT_TOL) || f.eval(&img).approx_eq(c, POINT_TOL))
        })
        .copied()
        .collect())
}

/// Preimage fibers of all grid nodes; record `parent` is the node index.
pub fn grid_fibers(f: &RationalMap, grid: &SphereGrid, cache: &PreimageCache) -> Result<PreimageRecords> {
    let key = cache_key(&f.to_json(), grid.resolution(), 1, "grid-fibers");
    cache.get_or_compute(&key, || {
        let fibers: Vec<Vec<PreimageRecord>> = grid
            .nodes()
            .par_iter()
            .enumerate()
            .map(|(i, y)| {
                Ok(f.preimages(y)?
                    .into_iter()
                    .map(|(p, m)| PreimageRecord {
                        point: p,
                        multiplicity: m as u32,
                        parent: i as u32,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(PreimageRecords {
            levels: vec![fibers.into_iter().flatten().collect()],
        })
    })
}

impl TransferOperator {
    pub fn build(f: &RationalMap, w: &Weight, grid: Arc<SphereGrid>, cache: &PreimageCache) -> Result<Self> {
        let fibers = grid_fibers(f, &grid, cache)?;
        let records = &fibers.levels[0];
        let n = grid.len();
        if records.iter().any(|r| r.parent as usize >= n) {
            return Err(Error::Cache("fiber record refers to a missing node".into()));
        }
        let mut by_row = vec![Vec::new(); n];
        for r in records {
            by_row[r.parent as usize].push(*r);
        }
        let rows: Vec<(Vec<u32>, Vec<f64>)> = by_row
            .par_iter()
            .map(|fiber| {
                let mut cols = Vec::with_capacity(fiber.len() * 4);
                let mut vals = Vec::with_capacity(fiber.len() * 4);
                for r in fiber {
                    let coef = r.multiplicity as f64 * w.eval(&r.point).exp();
                    let st = grid.stencil(&r.point);
                    for k in 0..st.len as usize {
                        cols.push(st.idx[k]);
                        vals.push(coef * st.w[k]);
                    }
                }
                (cols, vals)
            })
            .collect();
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, (c, v)) in rows.into_iter().enumerate() {
            cols.extend(c);
            vals.extend(v);
            row_ptr[i + 1] = cols.len();
        }
        let exceptional = exceptional_points(f)?
            .iter()
            .filter_map(|e| {
                let st = grid.stencil(e);
                (st.len == 1).then(|| {
                    let node = st.idx[0];
                    (node as usize, grid.stencil_excluding(e, Some(node)))
                })
            })
            .collect();
        Ok(TransferOperator {
            grid,
            row_ptr,
            cols,
            vals,
            exceptional,
        })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn apply_values(&self, g: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
                self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(c, v)| v * g[*c as usize]).sum()
            })
            .collect();
        for (node, st) in &self.exceptional {
            out[*node] = st.apply(&out);
        }
        out
    }

    pub fn apply(&self, g: &GridFunction) -> GridFunction {
        assert!(Arc::ptr_eq(g.grid(), &self.grid) || g.grid().len() == self.grid.len());
        GridFunction::new(self.grid.clone(), self.apply_values(g.values()))
    }
}

/// Result of the normalised power iteration.
#[derive(Clone, Debug)]
pub struct PowerIteration {
    pub pressure: f64,
    /// Leading eigenfunction with `max = 1`.
    pub density: GridFunction,
    /// `||L g_k / ||L g_k|| - g_k||_inf` per iteration.
    pub residuals: Vec<f64>,
    /// `log ||L g_k||_inf` per iteration.
    pub pressures: Vec<f64>,
}

/// Power iteration from the constant function. Converged when the sup-norm
/// change of the normalised iterate drops below `tol`.
pub fn power_iteration(op: &TransferOperator, tol: f64, max_iter: usize) -> Result<PowerIteration> {
    let mut g = vec![1.0; op.grid.len()];
    let mut residuals = Vec::new();
    let mut pressures = Vec::new();
    for _ in 0..max_iter {
        let lg = op.apply_values(&g);
        let norm = lg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NoConvergence { residuals });
        }
        let next: Vec<f64> = lg.iter().map(|v| v / norm).collect();
        let res = next.iter().zip(&g).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        residuals.push(res);
        pressures.push(norm.ln());
        g = next;
        if res <= tol {
            return Ok(PowerIteration {
                pressure: norm.ln(),
                density: GridFunction::new(op.grid.clone(), g),
                residuals,
                pressures,
            });
        }
    }
    Err(Error::NoConvergence { residuals })
}

/// One application of the transfer operator to `g` on its own grid.
pub fn transfer_apply(f: &RationalMap, w: &Weight, g: &GridFunction) -> Result<GridFunction> {
    let op = TransferOperator::build(f, w, g.grid().clone(), &PreimageCache::disabled())?;
    Ok(op.apply(g))
}
