//! Simultaneous polynomial root finding (Aberth–Ehrlich) with chart-aware
//! Newton polishing.

use num_complex::Complex64;
use rayon::prelude::*;

use super::point::{Chart, PointIndex, SpherePoint};
use crate::error::{Error, Result};

/// Roots closer than this (chordal) are reported as one root with multiplicity.
pub const ROOT_CLUSTER_TOL: f64 = 1e-7;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug)]
pub struct AberthOptions {
    /// Relative correction below which a root is frozen.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AberthOptions {
    fn default() -> Self {
        AberthOptions { tol: 1e-14, max_iter: 500 }
    }
}

/// Outcome of [`aberth_iterate`].
#[derive(Clone, Copy, Debug)]
pub struct AberthReport {
    pub iterations: usize,
    pub converged: bool,
    pub max_correction: f64,
}

/// Runs the Aberth–Ehrlich iteration on `roots` in place.
///
/// `log_derivative(z)` must return `p'(z) / p(z)` for the polynomial whose roots
/// are sought, or `None` when `p(z) == 0` exactly. The update is Jacobi style so
/// the result does not depend on thread scheduling.
pub fn aberth_iterate<F>(roots: &mut [Complex64], log_derivative: F, opts: AberthOptions) -> AberthReport
where
    F: Fn(Complex64) -> Option<Complex64> + Sync,
{
    let n = roots.len();
    let mut frozen = vec![false; n];
    let mut max_correction = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let current: Vec<Complex64> = roots.to_vec();
        let updates: Vec<Option<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                if frozen[i] {
                    return None;
                }
                let z = current[i];
                let ld = log_derivative(z)?;
                let mut repulsion = ZERO;
                for (j, &zj) in current.iter().enumerate() {
                    if j != i {
                        let diff = z - zj;
                        if diff != ZERO {
                            repulsion += diff.inv();
                        }
                    }
                }
                let denom = ld - repulsion;
                if denom == ZERO || !denom.re.is_finite() || !denom.im.is_finite() {
                    return None;
                }
                Some(denom.inv())
            })
            .collect();
        max_correction = 0.0;
        let mut active = false;
        for (i, upd) in updates.into_iter().enumerate() {
            if frozen[i] {
                continue;
            }
            match upd {
                None => frozen[i] = true,
                Some(w) => {
                    let step = w.norm();
                    if !step.is_finite() {
                        frozen[i] = true;
                        continue;
                    }
                    roots[i] -= w;
                    let scale = 1.0 + roots[i].norm();
                    max_correction = max_correction.max(step / scale);
                    if step <= opts.tol * scale {
                        frozen[i] = true;
                    } else {
                        active = true;
                    }
                }
            }
        }
        if !active {
            return AberthReport {
                iterations: iter + 1,
                converged: true,
                max_correction,
            };
        }
    }
    AberthReport {
        iterations: opts.max_iter,
        converged: false,
        max_correction,
    }
}

/// Horner evaluation of `p` and `p'` (coefficients constant term first).
pub fn horner_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn initial_circle(coeffs: &[Complex64]) -> Vec<Complex64> {
    let d = coeffs.len() - 1;
    let lead = coeffs[d].norm();
    let c0 = coeffs[0].norm();
    let r = if c0 > 0.0 && lead > 0.0 {
        (c0 / lead).powf(1.0 / d as f64)
    } else {
        1.0
    };
    (0..d)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4;
            Complex64::from_polar(r, theta)
        })
        .collect()
}

/// Newton polish of a root of `p` (given by coefficients) in the chart that
/// contains it; `rev` are the coefficients of `w^d p(1/w)`.
fn polish_in_chart(coeffs: &[Complex64], rev: &[Complex64], root: SpherePoint, steps: usize) -> SpherePoint {
    let (chart, mut t) = root.chart_coord();
    let poly = match chart {
        Chart::Z => coeffs,
        Chart::W => rev,
    };
    for _ in 0..steps {
        let (p, dp) = horner_with_derivative(poly, t);
        if p == ZERO || dp == ZERO {
            break;
        }
        let step = p / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        let next = t - step;
        // stay put if the step would leave the chart neighbourhood
        if next.norm() > 2.0 {
            break;
        }
        t = next;
        if step.norm() <= 1e-16 * (1.0 + t.norm()) {
            break;
        }
    }
    SpherePoint::from_chart(chart, t)
}

/// Groups points closer than `tol` (chordal), returning cluster representatives
/// (chart-coordinate means) with their sizes, in lexicographic order.
pub fn cluster_points(points: &[SpherePoint], tol: f64) -> Vec<(SpherePoint, usize)> {
    let mut sorted: Vec<SpherePoint> = points.to_vec();
    sorted.sort_by(|a, b| a.lex_cmp(b));
    let mut index = PointIndex::new(tol);
    for (i, p) in sorted.iter().enumerate() {
        index.insert(p, i);
    }
    let mut used = vec![false; sorted.len()];
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        if used[i] {
            continue;
        }
        let mut members = Vec::new();
        for j in index.find_all(&sorted[i], tol, &sorted) {
            if !used[j] {
                used[j] = true;
                members.push(sorted[j]);
            }
        }
        let rep = if members.len() == 1 {
            members[0]
        } else {
            let chart = members[0].chart();
            let sum: Complex64 = members.iter().filter_map(|m| m.coord(chart)).sum();
            SpherePoint::from_chart(chart, sum / members.len() as f64)
        };
        out.push((rep, members.len()));
    }
    out.sort_by(|a, b| a.0.lex_cmp(&b.0));
    out
}

/// All roots on the sphere of the polynomial with the given coefficients
/// (constant term first), viewed as a section of degree `coeffs.len() - 1`:
/// a vanishing leading coefficient contributes roots at infinity.
///
/// Returns `(root, multiplicity)` pairs in lexicographic order whose
/// multiplicities sum to the formal degree.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<(SpherePoint, usize)>> {
    if coeffs.len() < 2 {
        return Err(Error::InvalidArgument("polynomial of formal degree < 1".into()));
    }
    if coeffs.iter().all(|c| *c == ZERO) {
        return Err(Error::InvalidArgument("zero polynomial has no finite root set".into()));
    }
    let degree = coeffs.len() - 1;
    let low_zeros = coeffs.iter().take_while(|c| **c == ZERO).count();
    let high_zeros = coeffs.iter().rev().take_while(|c| **c == ZERO).count();
    let core = &coeffs[low_zeros..coeffs.len() - high_zeros];

    let mut raw: Vec<SpherePoint> = Vec::with_capacity(degree);
    raw.extend(std::iter::repeat_n(SpherePoint::ZERO, low_zeros));
    raw.extend(std::iter::repeat_n(SpherePoint::Infinity, high_zeros));

    if core.len() >= 2 {
        let core_deg = core.len() - 1;
        let rev: Vec<Complex64> = core.iter().rev().copied().collect();
        // iterate in whichever orientation has the larger leading coefficient
        let (poly, chart) = if core[core_deg].norm() >= core[0].norm() {
            (core, Chart::Z)
        } else {
            (&rev[..], Chart::W)
        };
        let mut roots = initial_circle(poly);
        let report = aberth_iterate(
            &mut roots,
            |z| {
                let (p, dp) = horner_with_derivative(poly, z);
                if p == ZERO {
                    None
                } else {
                    Some(dp / p)
                }
            },
            AberthOptions::default(),
        );
        // multiple roots converge only linearly; accept a looser stop for them
        if !report.converged && report.max_correction > 1e-6 {
            return Err(Error::RootFinding {
                iterations: report.iterations,
                max_correction: report.max_correction,
                residual_poly: coeffs.iter().map(|c| [c.re, c.im]).collect(),
            });
        }
        let found: Vec<SpherePoint> = roots.iter().map(|&t| SpherePoint::from_chart(chart, t)).collect();
        let clusters = cluster_points(&found, ROOT_CLUSTER_TOL);
        for (p, m) in clusters {
            let p = if m == 1 { polish_in_chart(core, &rev, p, 3) } else { p };
            raw.extend(std::iter::repeat_n(p, m));
        }
    }
    Ok(cluster_points(&raw, ROOT_CLUSTER_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::chordal_dist;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_roots() {
        // z^2 - 1
        let r = poly_roots(&[c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(r.len(), 2);
        assert!(chordal_dist(&r[0].0, &SpherePoint::from_re_im(-1.0, 0.0)) < 1e-15);
        assert!(chordal_dist(&r[1].0, &SpherePoint::ONE) < 1e-15);
    }

    #[test]
    fn double_root_at_zero_and_infinity() {
        let r = poly_roots(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(r, [(SpherePoint::ZERO, 2)].to_vec());
        // 1 + 0 z + 0 z^2: formal degree 2, both roots at infinity
        let r = poly_roots(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].0.is_infinity() && r[0].1 == 2);
    }

    #[test]
    fn nonzero_double_root_is_clustered() {
        // (z - 0.3i)^2 (z + 2)
        let a = c(0.0, 0.3);
        let coeffs = [(a * a) * 2.0, a * a - a * 4.0, c(2.0, 0.0) - a * 2.0, c(1.0, 0.0)];
        let r = poly_roots(&coeffs).unwrap();
        let total: usize = r.iter().map(|x| x.1).sum();
        assert_eq!(total, 3);
        let dbl = r.iter().find(|x| x.1 == 2).unwrap();
        assert!(chordal_dist(&dbl.0, &SpherePoint::new(a)) < 1e-7);
    }

    #[test]
    fn wilkinson_like_degree_12() {
        let roots: Vec<Complex64> = (1..=12).map(|k| c(k as f64 / 6.0, 0.1 * k as f64)).collect();
        let mut coeffs = vec![c(1.0, 0.0)];
        for r in &roots {
            let mut next = vec![ZERO; coeffs.len() + 1];
            for (i, a) in coeffs.iter().enumerate() {
                next[i + 1] += *a;
                next[i] -= *a * r;
            }
            coeffs = next;
        }
        let found = poly_roots(&coeffs).unwrap();
        assert_eq!(found.len(), 12);
        for r in roots {
            let best = found
                .iter()
                .map(|f| chordal_dist(&f.0, &SpherePoint::new(r)))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "missed {r}: {best}");
        }
    }

    #[test]
    fn huge_roots_are_resolved_in_w_chart() {
        // (z - 1e8)(z - 1) = z^2 - (1e8 + 1) z + 1e8
        let r = poly_roots(&[c(1e8, 0.0), c(-1e8 - 1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert_eq!(r.len(), 2);
        let big = r.iter().find(|x| x.0.finite().is_none_or(|z| z.norm() > 10.0)).unwrap();
        let z = big.0.finite().unwrap();
        assert!((z.re - 1e8).abs() / 1e8 < 1e-14);
    }
}
