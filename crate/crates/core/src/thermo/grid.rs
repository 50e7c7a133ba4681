use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::sphere::{chordal_dist, Chart, SpherePoint};

/// Interpolation stencil: up to four grid nodes with inverse-distance weights
/// summing to one.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub idx: [u32; 4],
    pub w: [f64; 4],
    pub len: u8,
}

/// Quasi-uniform nodes on the sphere: a square lattice on the closed unit disk
/// of the `z` chart and another on the open unit disk of the `w = 1/z` chart.
///
/// `resolution` is the target node count; each cap uses an odd lattice side
/// `s` with `s ~ sqrt(2 * resolution / pi)`, so the total is close to
/// `resolution`. Quadrature weights follow the spherical area element and are
/// normalised to total mass 1 (one half per cap).
#[derive(Debug, Serialize)]
pub struct SphereGrid {
    resolution: usize,
    side: usize,
    spacing: f64,
    nodes: Vec<SpherePoint>,
    weights: Vec<f64>,
    #[serde(skip)]
    lookup: [Vec<u32>; 2],
}

const NONE: u32 = u32::MAX;

impl SphereGrid {
    pub fn new(resolution: usize) -> Arc<Self> {
        let target = (2.0 * resolution.max(8) as f64 / std::f64::consts::PI).sqrt().round() as usize;
        let side = if target.is_multiple_of(2) { target + 1 } else { target.max(3) };
        let spacing = 2.0 / (side - 1) as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut lookup = [vec![NONE; side * side], vec![NONE; side * side]];
        for cap in 0..2 {
            let start = nodes.len();
            for i in 0..side {
                for j in 0..side {
                    let t = Complex64::new(-1.0 + i as f64 * spacing, -1.0 + j as f64 * spacing);
                    let r2 = t.norm_sqr();
                    let inside = if cap == 0 { r2 <= 1.0 + 1e-12 } else { r2 < 1.0 - 1e-12 };
                    if !inside {
                        continue;
                    }
                    lookup[cap][i * side + j] = nodes.len() as u32;
                    let chart = if cap == 0 { Chart::Z } else { Chart::W };
                    nodes.push(SpherePoint::from_chart(chart, t));
                    weights.push(1.0 / ((1.0 + r2) * (1.0 + r2)));
                }
            }
            let total: f64 = weights[start..].iter().sum();
            for w in &mut weights[start..] {
                *w *= 0.5 / total;
            }
        }
        Arc::new(SphereGrid {
            resolution,
            side,
            spacing,
            nodes,
            weights,
            lookup,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Lattice spacing in chart coordinates.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Inverse-distance weights over the four nearest nodes (chordal metric).
    pub fn stencil(&self, p: &SpherePoint) -> Stencil {
        self.stencil_excluding(p, None)
    }

    /// As [`SphereGrid::stencil`], skipping node `exclude`.
    pub fn stencil_excluding(&self, p: &SpherePoint, exclude: Option<u32>) -> Stencil {
        let mut cand: [(f64, u32); 72] = [(f64::INFINITY, NONE); 72];
        let mut nc = 0;
        let h = self.spacing;
        let s = self.side as isize;
        for cap in 0..2 {
            let chart = if cap == 0 { Chart::Z } else { Chart::W };
            let Some(t) = p.coord(chart) else { continue };
            if t.norm() > 1.0 + 3.0 * h {
                continue;
            }
            let fi = ((t.re + 1.0) / h).floor() as isize;
            let fj = ((t.im + 1.0) / h).floor() as isize;
            for i in (fi - 2).max(0)..=(fi + 3).min(s - 1) {
                for j in (fj - 2).max(0)..=(fj + 3).min(s - 1) {
                    let k = self.lookup[cap][(i * s + j) as usize];
                    if k != NONE && Some(k) != exclude && nc < cand.len() {
                        cand[nc] = (chordal_dist(p, &self.nodes[k as usize]), k);
                        nc += 1;
                    }
                }
            }
        }
        let c = &mut cand[..nc];
        let take = nc.min(4);
        if nc > 4 {
            c.select_nth_unstable_by(3, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        c[..take].sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut st = Stencil {
            idx: [0; 4],
            w: [0.0; 4],
            len: take as u8,
        };
        if take > 0 && c[0].0 < 1e-14 {
            st.idx[0] = c[0].1;
            st.w[0] = 1.0;
            st.len = 1;
            return st;
        }
        let mut total = 0.0;
        for k in 0..take {
            let w = 1.0 / (c[k].0 * c[k].0);
            st.idx[k] = c[k].1;
            st.w[k] = w;
            total += w;
        }
        for k in 0..take {
            st.w[k] /= total;
        }
        st
    }
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut v = 0.0;
        for k in 0..self.len as usize {
            v += self.w[k] * values[self.idx[k] as usize];
        }
        v
    }
}

/// One value per node of a [`SphereGrid`].
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "one value per grid node");
        GridFunction { grid, values }
    }

    pub fn constant(grid: Arc<SphereGrid>, c: f64) -> Self {
        let n = grid.len();
        GridFunction::new(grid, vec![c; n])
    }

    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn(&SpherePoint) -> f64) -> Self {
        let values = grid.nodes().iter().map(f).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at an arbitrary point by inverse-distance interpolation.
    pub fn eval(&self, p: &SpherePoint) -> f64 {
        self.grid.stencil(p).apply(&self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Quadrature integral against normalised area.
    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.grid.weights()).map(|(v, w)| v * w).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridFunction::new(self.grid.clone(), self.values.iter().map(|v| v * c).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &GridFunction, b: f64) -> Self {
        assert!(Arc::ptr_eq(&self.grid, &other.grid), "same grid");
        let v = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        GridFunction::new(self.grid.clone(), v)
    }
}
