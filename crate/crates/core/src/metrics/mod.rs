//! Comparison of discrete measures: test-function pairings and the
//! Wasserstein-1 distance for the chordal metric.

mod panel;
mod simplex;
mod sinkhorn;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use panel::{pair, TestFunction, TestFunctionPanel};
pub use simplex::{network_simplex, TransportSolution};
pub use sinkhorn::{sinkhorn, SinkhornResult};

use crate::error::{Error, Result};
use crate::thermo::DiscreteMeasure;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct W1Options {
    /// Largest `atoms(mu) * atoms(nu)` solved exactly.
    pub exact_pair_limit: usize,
    /// Entropic regularisation relative to the chordal diameter (1).
    pub epsilon: f64,
    pub mass_tol: f64,
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
}

impl Default for W1Options {
    fn default() -> Self {
        W1Options {
            exact_pair_limit: 25_000_000,
            epsilon: 1e-3,
            mass_tol: 1e-6,
            sinkhorn_tol: 1e-9,
            sinkhorn_max_iter: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum W1Method {
    Exact,
    Entropic { epsilon: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct W1Report {
    pub distance: f64,
    pub method: W1Method,
    /// Whether the inputs were rescaled to unit mass first.
    pub renormalized: bool,
    /// `primal - dual` for the exact solver.
    pub duality_gap: Option<f64>,
}

fn atoms_with_mass(mu: &DiscreteMeasure) -> (Vec<[f64; 3]>, Vec<f64>) {
    mu.atoms()
        .iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(p, m)| (p.to_unit_sphere(), *m))
        .unzip()
}

#[inline]
fn chordal_embedded(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    0.5 * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// `W1(mu, nu)` for measures of equal mass (within `mass_tol`).
pub fn wasserstein1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<W1Report> {
    wasserstein1_with(mu, nu, &W1Options::default())
}

/// `W1` after rescaling both measures to probability measures.
pub fn wasserstein1_normalized(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<W1Report> {
    let renorm = (mu.total_mass() - 1.0).abs() > 1e-12 || (nu.total_mass() - 1.0).abs() > 1e-12;
    let mut r = wasserstein1(&mu.normalized(), &nu.normalized())?;
    r.renormalized = renorm;
    Ok(r)
}

pub fn wasserstein1_with(mu: &DiscreteMeasure, nu: &DiscreteMeasure, opts: &W1Options) -> Result<W1Report> {
    let (xa, mut a) = atoms_with_mass(mu);
    let (xb, mut b) = atoms_with_mass(nu);
    let ma: f64 = a.iter().sum();
    let mb: f64 = b.iter().sum();
    if (ma - mb).abs() > opts.mass_tol * ma.max(mb).max(1.0) {
        return Err(Error::Unbalanced(ma, mb));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(W1Report {
            distance: 0.0,
            method: W1Method::Exact,
            renormalized: false,
            duality_gap: Some(0.0),
        });
    }
    // solve on probability vectors and scale back
    a.iter_mut().for_each(|v| *v /= ma);
    b.iter_mut().for_each(|v| *v /= mb);
    let scale = 0.5 * (ma + mb);
    let cost = |i: usize, j: usize| chordal_embedded(&xa[i], &xb[j]);
    if a.len() * b.len() <= opts.exact_pair_limit {
        let sol = network_simplex(&a, &b, cost);
        Ok(W1Report {
            distance: sol.cost * scale,
            method: W1Method::Exact,
            renormalized: false,
            duality_gap: Some((sol.cost - sol.dual_objective) * scale),
        })
    } else {
        let r = sinkhorn(&a, &b, cost, opts.epsilon, opts.sinkhorn_tol, opts.sinkhorn_max_iter);
        Ok(W1Report {
            distance: r.cost * scale,
            method: W1Method::Entropic { epsilon: opts.epsilon },
            renormalized: false,
            duality_gap: None,
        })
    }
}

/// Uniform measure on `k` equally spaced points of the circle `|z| = r`,
/// starting at angle `phase`.
pub fn circle_measure(k: usize, r: f64, phase: f64) -> DiscreteMeasure {
    let pts: Vec<crate::sphere::SpherePoint> = (0..k)
        .into_par_iter()
        .map(|j| {
            crate::sphere::SpherePoint::new(num_complex::Complex64::from_polar(
                r,
                phase + std::f64::consts::TAU * j as f64 / k as f64,
            ))
        })
        .collect();
    DiscreteMeasure::uniform(&pts)
}
