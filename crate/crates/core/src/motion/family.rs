use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::RationalMap;

/// One coefficient of `z^k`, as a polynomial in the parameter (constant term first).
pub type ParamPoly = Vec<Complex64>;

fn eval_param(p: &[Complex64], lambda: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * lambda + c)
}

/// A holomorphic family `lambda -> f_lambda = P_lambda / Q_lambda` whose
/// coefficients are polynomials in `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    /// `num[k]` is the coefficient of `z^k` in the numerator.
    pub num: Vec<ParamPoly>,
    pub den: Vec<ParamPoly>,
}

impl Family {
    pub fn new(num: Vec<ParamPoly>, den: Vec<ParamPoly>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::InvalidMap("family needs numerator and denominator".into()));
        }
        let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        if !num.iter().chain(&den).flatten().all(finite) {
            return Err(Error::InvalidMap("non-finite family coefficient".into()));
        }
        Ok(Family { num, den })
    }

    /// `z^2 + lambda`.
    pub fn quadratic() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        Family {
            num: vec![vec![zero, one], vec![zero], vec![one]],
            den: vec![vec![one]],
        }
    }

    /// The family constant in `lambda` equal to `f`.
    pub fn constant(f: &RationalMap) -> Self {
        Family {
            num: f.numerator().iter().map(|c| vec![*c]).collect(),
            den: f.denominator().iter().map(|c| vec![*c]).collect(),
        }
    }

    /// Coefficient lists of `f_lambda`.
    pub fn coefficients(&self, lambda: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
        (
            self.num.iter().map(|p| eval_param(p, lambda)).collect(),
            self.den.iter().map(|p| eval_param(p, lambda)).collect(),
        )
    }

    /// `f_lambda`, checked for coprimality.
    pub fn at(&self, lambda: Complex64) -> Result<RationalMap> {
        let (n, d) = self.coefficients(lambda);
        RationalMap::new(n, d)
    }

    /// `f_lambda` without the coprimality check; the degree is still validated.
    pub fn at_unchecked(&self, lambda: Complex64) -> Result<RationalMap> {
        let (n, d) = self.coefficients(lambda);
        RationalMap::new_unchecked(n, d)
    }

    /// Checks that `f_lambda` is a genuine map of one common degree at every
    /// grid node, and returns that degree.
    pub fn validate_on(&self, grid: &ParamGrid) -> Result<usize> {
        let mut degree = None;
        for lambda in grid.nodes().iter().flatten() {
            let d = self.at(*lambda)?.degree();
            match degree {
                None => degree = Some(d),
                Some(d0) if d0 != d => {
                    return Err(Error::InvalidMap(format!("degree drops from {d0} to {d} at lambda = {lambda}")));
                }
                _ => {}
            }
        }
        degree.ok_or_else(|| Error::InvalidArgument("parameter grid has no nodes".into()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("family serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Family = serde_json::from_str(s)?;
        Family::new(raw.num, raw.den)
    }
}

/// Square lattice of mesh `h` through the base parameter, restricted to a
/// closed disk. Nodes are stored row-major over the bounding square; nodes
/// outside the disk are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrid {
    center: Complex64,
    radius: f64,
    mesh: f64,
    base: Complex64,
    /// Lattice offsets of the first column and row relative to `base`.
    origin: (i64, i64),
    cols: usize,
    rows: usize,
    nodes: Vec<Option<Complex64>>,
    base_index: usize,
}

/// Serialised form: `{center: [re, im], radius, mesh, base: [re, im]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamGridSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub mesh: f64,
    pub base: [f64; 2],
}

const DISK_SLACK: f64 = 1e-12;

impl ParamGrid {
    pub fn new(center: Complex64, radius: f64, mesh: f64, base: Complex64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "disk radius {radius} and mesh {mesh} must be positive"
            )));
        }
        let inside = |l: Complex64| (l - center).norm() <= radius * (1.0 + DISK_SLACK) + DISK_SLACK;
        if !inside(base) {
            return Err(Error::InvalidArgument(format!("base parameter {base} lies outside the disk")));
        }
        let span = (radius / mesh).ceil() as i64 + 1;
        if span > 4096 {
            return Err(Error::Budget(format!("parameter grid of {} nodes per side", 2 * span + 1)));
        }
        let lo = |c: f64, b: f64| ((c - radius - b) / mesh).ceil() as i64;
        let hi = |c: f64, b: f64| ((c + radius - b) / mesh).floor() as i64;
        let (i0, i1) = (lo(center.re, base.re), hi(center.re, base.re));
        let (j0, j1) = (lo(center.im, base.im), hi(center.im, base.im));
        let cols = (i1 - i0 + 1) as usize;
        let rows = (j1 - j0 + 1) as usize;
        let mut nodes = Vec::with_capacity(cols * rows);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let l = base + Complex64::new(i as f64 * mesh, j as f64 * mesh);
                nodes.push(inside(l).then_some(l));
            }
        }
        let base_index = ((-j0) as usize) * cols + (-i0) as usize;
        nodes[base_index] = Some(base);
        Ok(ParamGrid {
            center,
            radius,
            mesh,
            base,
            origin: (i0, j0),
            cols,
            rows,
            nodes,
            base_index,
        })
    }

    pub fn from_spec(s: &ParamGridSpec) -> Result<Self> {
        ParamGrid::new(
            Complex64::new(s.center[0], s.center[1]),
            s.radius,
            s.mesh,
            Complex64::new(s.base[0], s.base[1]),
        )
    }

    pub fn spec(&self) -> ParamGridSpec {
        ParamGridSpec {
            center: [self.center.re, self.center.im],
            radius: self.radius,
            mesh: self.mesh,
            base: [self.base.re, self.base.im],
        }
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn base(&self) -> Complex64 {
        self.base
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// All slots of the bounding square, row-major.
    pub fn nodes(&self) -> &[Option<Complex64>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().flatten().count()
    }

    pub fn node(&self, idx: usize) -> Option<Complex64> {
        self.nodes.get(idx).copied().flatten()
    }

    /// Index of the in-disk node equal to `lambda` up to a small fraction of the mesh.
    pub fn index_of(&self, lambda: Complex64) -> Option<usize> {
        let off = (lambda - self.base) / self.mesh;
        let (i, j) = (off.re.round(), off.im.round());
        if (off.re - i).abs() > 1e-6 || (off.im - j).abs() > 1e-6 {
            return None;
        }
        let c = i as i64 - self.origin.0;
        let r = j as i64 - self.origin.1;
        if c < 0 || r < 0 || c >= self.cols as i64 || r >= self.rows as i64 {
            return None;
        }
        let idx = r as usize * self.cols + c as usize;
        self.nodes[idx].is_some().then_some(idx)
    }

    /// In-disk lattice neighbours (east, west, north, south order).
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let (r, c) = (idx / self.cols, idx % self.cols);
        let mut out = Vec::with_capacity(4);
        if c + 1 < self.cols {
            out.push(idx + 1);
        }
        if c > 0 {
            out.push(idx - 1);
        }
        if r + 1 < self.rows {
            out.push(idx + self.cols);
        }
        if r > 0 {
            out.push(idx - self.cols);
        }
        out.retain(|k| self.nodes[*k].is_some());
        out
    }

    /// The four neighbours `[east, west, north, south]` when all are in the disk.
    pub fn interior_stencil(&self, idx: usize) -> Option<[usize; 4]> {
        let (r, c) = (idx / self.cols, idx % self.cols);
        if self.nodes[idx].is_none() || c == 0 || r == 0 || c + 1 >= self.cols || r + 1 >= self.rows {
            return None;
        }
        let st = [idx + 1, idx - 1, idx + self.cols, idx - self.cols];
        st.iter().all(|k| self.nodes[*k].is_some()).then_some(st)
    }

    /// Breadth-first order from the base node, with each node's parent.
    pub fn bfs_order(&self) -> Vec<(usize, Option<usize>)> {
        let mut seen = vec![false; self.nodes.len()];
        let mut order = vec![(self.base_index, None)];
        seen[self.base_index] = true;
        let mut head = 0;
        while head < order.len() {
            let cur = order[head].0;
            head += 1;
            for nb in self.neighbors(cur) {
                if !seen[nb] {
                    seen[nb] = true;
                    order.push((nb, Some(cur)));
                }
            }
        }
        order
    }
}
