//! Log-domain entropic transport.

use rayon::prelude::*;

/// Entropic plan cost and diagnostics.
#[derive(Clone, Debug)]
pub struct SinkhornResult {
    /// `sum P_ij c_ij` of the entropic plan.
    pub cost: f64,
    pub iterations: usize,
    /// Largest marginal violation at exit.
    pub marginal_error: f64,
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + it.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Sinkhorn iterations on the dual potentials `f, g` with
/// `P_ij = exp((f_i + g_j - c_ij) / eps)`; `a` and `b` must both sum to 1.
pub fn sinkhorn<C: Fn(usize, usize) -> f64 + Sync>(a: &[f64], b: &[f64], cost: C, eps: f64, tol: f64, max_iter: usize) -> SinkhornResult {
    let la: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; a.len()];
    let mut g = vec![0.0; b.len()];
    let mut iterations = 0;
    let mut err = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        f = (0..a.len())
            .into_par_iter()
            .map(|i| -eps * log_sum_exp((0..b.len()).map(|j| (g[j] - cost(i, j)) / eps + lb[j])))
            .collect();
        g = (0..b.len())
            .into_par_iter()
            .map(|j| -eps * log_sum_exp((0..a.len()).map(|i| (f[i] - cost(i, j)) / eps + la[i])))
            .collect();
        // column marginals are exact after the g update; check the rows
        err = (0..a.len())
            .into_par_iter()
            .map(|i| {
                let row: f64 = (0..b.len()).map(|j| ((f[i] + g[j] - cost(i, j)) / eps + la[i] + lb[j]).exp()).sum();
                (row - a[i]).abs()
            })
            .sum();
        if err <= tol {
            break;
        }
    }
    let total: f64 = (0..a.len())
        .into_par_iter()
        .map(|i| {
            (0..b.len())
                .map(|j| {
                    let c = cost(i, j);
                    ((f[i] + g[j] - c) / eps + la[i] + lb[j]).exp() * c
                })
                .sum::<f64>()
        })
        .sum();
    SinkhornResult {
        cost: total,
        iterations,
        marginal_error: err,
    }
}
