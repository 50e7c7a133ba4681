//! Periodic points of `f^n`, exact periods, multipliers and weighted cycle
//! measures.
//!
//! The fixed points of `f^n` are the zeros of the homogeneous form
//! `H(x, y) = y X_n(x, y) - x Y_n(x, y)` of degree `d^n + 1`, where
//! `(X_n, Y_n)` is the `n`-th iterate of the homogeneous lift. `H` is
//! restricted to a line `(x, y) = (a z + b, c z + d)` given by a sphere rotation
//! whose point at infinity lies away from every periodic point, so all
//! `d^n + 1` roots are finite. `H` and `dH/dz` are evaluated by iterating the
//! lift with a running rescaling, which cancels in `H'/H`; coefficients are
//! never formed.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::roots::{aberth_iterate, cluster_points, AberthOptions, ROOT_CLUSTER_TOL};
use crate::sphere::{chordal_dist, Mobius, RationalMap, SpherePoint, POINT_TOL};
use crate::thermo::DiscreteMeasure;
use crate::weights::Weight;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Half-width of the band around `|m| = 1` classified as undetermined.
pub const NEUTRAL_BAND: f64 = 1e-6;

/// Chordal tolerance for `f^m(p) = p` when detecting exact periods.
pub const PERIOD_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attracting,
    Repelling,
    Undetermined,
}

/// A solution of `f^n(p) = p`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub point: SpherePoint,
    /// Ambient period.
    pub n: usize,
    pub exact_period: usize,
    /// Derivative of `f^n` at the point.
    pub multiplier: Complex64,
    /// `S_n phi(point)`.
    pub birkhoff_weight: f64,
    /// Root multiplicity in `f^n(z) = z`.
    pub multiplicity: usize,
    /// `chordal(f^n(point), point)`.
    pub residual: f64,
}

impl PeriodicPoint {
    pub fn stability(&self) -> Stability {
        let m = self.multiplier.norm();
        if m > 1.0 + NEUTRAL_BAND {
            Stability::Repelling
        } else if m < 1.0 - NEUTRAL_BAND {
            Stability::Attracting
        } else {
            Stability::Undetermined
        }
    }

    pub fn is_repelling(&self) -> bool {
        self.stability() == Stability::Repelling
    }

    /// `|multiplier| - 1`.
    pub fn repelling_margin(&self) -> f64 {
        self.multiplier.norm() - 1.0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleOptions {
    /// Largest admissible `d^n + 1`.
    pub budget: usize,
    /// Largest `d^n` solved by simultaneous iteration; above it seeded Newton.
    pub simultaneous_limit: usize,
    pub seed: u64,
    /// Completion rounds before a count shortfall is reported.
    pub retries: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            budget: (1 << 16) + 1,
            simultaneous_limit: 1 << 10,
            seed: 0,
            retries: 3,
        }
    }
}

/// All fixed points of `f^n` with the count audit.
#[derive(Clone, Debug)]
pub struct PeriodicSet {
    pub n: usize,
    /// Lexicographically ordered.
    pub points: Vec<PeriodicPoint>,
    /// `d^n + 1`.
    pub expected: usize,
    /// Number of roots found with multiplicity.
    pub found: usize,
}

impl PeriodicSet {
    /// The audit line `found/expected`.
    pub fn audit(&self) -> String {
        format!("{}/{}", self.found, self.expected)
    }
}

/// `H(z)` and `H'(z)` on the line `(a z + b, c z + d)`, up to a common factor.
fn fixed_form(f: &RationalMap, n: usize, m: &Mobius, z: Complex64) -> (Complex64, Complex64) {
    let x0 = m.a * z + m.b;
    let y0 = m.c * z + m.d;
    let (mut x, mut y, mut dx, mut dy) = (x0, y0, m.a, m.c);
    for _ in 0..n {
        let [p, q, px, py, qx, qy] = f.eval_homogeneous_jet(x, y);
        let ndx = px * dx + py * dy;
        let ndy = qx * dx + qy * dy;
        let s = p.norm().max(q.norm());
        if s == 0.0 || !s.is_finite() {
            return (ZERO, ZERO);
        }
        let inv = 1.0 / s;
        x = p * inv;
        y = q * inv;
        dx = ndx * inv;
        dy = ndy * inv;
    }
    (y0 * x - x0 * y, m.c * x + y0 * dx - m.a * y - x0 * dy)
}

fn newton_step(f: &RationalMap, n: usize, m: &Mobius, z: Complex64) -> Option<Complex64> {
    let (h, dh) = fixed_form(f, n, m, z);
    if h == ZERO {
        return Some(ZERO);
    }
    let step = h / dh;
    (step.re.is_finite() && step.im.is_finite()).then_some(step)
}

/// Damped Newton on `H`; the step is capped relative to `1 + |z|`.
fn newton_solve(f: &RationalMap, n: usize, m: &Mobius, mut z: Complex64, max_iter: usize) -> Option<Complex64> {
    for _ in 0..max_iter {
        let mut step = newton_step(f, n, m, z)?;
        let cap = 0.5 * (1.0 + z.norm());
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        z -= step;
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// Newton on `H / prod (z - r_j)` so that the known roots repel the iterate.
fn deflated_solve(f: &RationalMap, n: usize, m: &Mobius, known: &[Complex64], mut z: Complex64, max_iter: usize) -> Option<Complex64> {
    for _ in 0..max_iter {
        let (h, dh) = fixed_form(f, n, m, z);
        if h == ZERO {
            return Some(z);
        }
        let mut ld = dh / h;
        for r in known {
            let diff = z - r;
            if diff == ZERO {
                return None;
            }
            ld -= diff.inv();
        }
        let mut step = ld.inv();
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        let cap = 0.5 * (1.0 + z.norm());
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        z -= step;
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            return newton_solve(f, n, m, z, 4).or(Some(z));
        }
    }
    None
}

fn random_sphere_point(rng: &mut ChaCha8Rng) -> SpherePoint {
    loop {
        let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if (0.1..=1.0).contains(&r) {
            return SpherePoint::from_unit_sphere([v[0] / r, v[1] / r, v[2] / r]);
        }
    }
}

/// Seeds for the fixed points of `f^n`: attracting cycles found by iterating
/// the critical points, and the depth-`n` preimages of a repelling fixed point
/// (each lies next to the repelling fixed point of its inverse branch).
fn seeds(f: &RationalMap, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<SpherePoint>> {
    let mut out = Vec::new();
    for (c, _) in f.critical_points()? {
        let z = f.iterate(&c, 2000);
        let mut w = z;
        for _ in 0..n {
            out.push(w);
            w = f.eval(&w);
        }
    }
    let fixed = cluster_points(&fixed_points_direct(f)?, ROOT_CLUSTER_TOL);
    let base = fixed
        .iter()
        .map(|(p, _)| (p, f.multiplier(p, 1).norm()))
        .filter(|(_, m)| *m > 1.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| *p)
        .unwrap_or_else(|| random_sphere_point(rng));
    let mut level = vec![base];
    for _ in 0..n {
        let next: Vec<Vec<SpherePoint>> = level
            .par_iter()
            .map(|p| Ok(f.preimages(p)?.into_iter().map(|(q, _)| q).collect()))
            .collect::<Result<_>>()?;
        level = next.into_iter().flatten().collect();
    }
    out.extend(level);
    Ok(out)
}

/// Fixed points of `f` from the degree `d + 1` form `y P - x Q`.
fn fixed_points_direct(f: &RationalMap) -> Result<Vec<SpherePoint>> {
    let d = f.degree();
    let mut coeffs = vec![ZERO; d + 2];
    // y P(x, y) - x Q(x, y) = sum a_i x^i y^(d+1-i) - sum b_i x^(i+1) y^(d-i)
    for i in 0..=d {
        coeffs[i] += f.numerator()[i];
        coeffs[i + 1] -= f.denominator()[i];
    }
    Ok(crate::sphere::roots::poly_roots(&coeffs)?
        .into_iter()
        .flat_map(|(p, k)| std::iter::repeat_n(p, k))
        .collect())
}

/// Rotation whose point at infinity is farthest from all seeds among a few
/// random candidates.
fn choose_frame(seeds: &[SpherePoint], rng: &mut ChaCha8Rng) -> Mobius {
    let mut best = (f64::NEG_INFINITY, SpherePoint::ZERO);
    for _ in 0..32 {
        let q = random_sphere_point(rng);
        let dist = seeds.iter().map(|s| chordal_dist(s, &q)).fold(f64::INFINITY, f64::min);
        if dist > best.0 {
            best = (dist, q);
        }
    }
    // rotation_to(p) sends 0 to p, hence infinity to the antipode of p
    Mobius::rotation_to(&best.1.antipode())
}

fn to_line(m: &Mobius, p: &SpherePoint) -> Complex64 {
    m.inverse().apply(p).finite().unwrap_or(Complex64::new(1e300, 0.0))
}

fn from_line(m: &Mobius, z: Complex64) -> SpherePoint {
    m.apply(&SpherePoint::new(z))
}

/// Roots of `H` on the line with multiplicity, via simultaneous iteration.
fn solve_simultaneous(
    f: &RationalMap,
    n: usize,
    m: &Mobius,
    seeds: &[SpherePoint],
    total: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Complex64>, bool) {
    let mut init: Vec<Complex64> = Vec::with_capacity(total);
    let mut taken: Vec<SpherePoint> = Vec::new();
    for s in seeds {
        if init.len() == total {
            break;
        }
        if taken.iter().all(|t| chordal_dist(t, s) > 1e-9) {
            taken.push(*s);
            init.push(to_line(m, s));
        }
    }
    while init.len() < total {
        init.push(to_line(m, &random_sphere_point(rng)));
    }
    for z in init.iter_mut() {
        *z += Complex64::new(rng.gen_range(-1e-9..1e-9), rng.gen_range(-1e-9..1e-9)) * (1.0 + z.norm());
    }
    let report = aberth_iterate(
        &mut init,
        |z| {
            let (h, dh) = fixed_form(f, n, m, z);
            (h != ZERO).then(|| dh / h)
        },
        AberthOptions { tol: 1e-14, max_iter: 400 },
    );
    (init, report.converged || report.max_correction < 1e-6)
}

/// The `missing` roots of `H / prod (z - r_j)` by simultaneous iteration,
/// started on a circle enclosing the known roots. Only roots whose residual
/// in `f^n` is small are returned.
fn solve_deflated_simultaneous(
    f: &RationalMap,
    n: usize,
    m: &Mobius,
    known: &[Complex64],
    missing: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<SpherePoint> {
    let radius = known.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut roots: Vec<Complex64> = (0..missing)
        .map(|k| {
            let r = radius * rng.gen_range(0.3..1.1);
            Complex64::from_polar(r, phase + std::f64::consts::TAU * (k as f64 + 0.5) / missing as f64)
        })
        .collect();
    aberth_iterate(
        &mut roots,
        |z| {
            let (h, dh) = fixed_form(f, n, m, z);
            if h == ZERO {
                return None;
            }
            let mut ld = dh / h;
            for r in known {
                ld -= (z - r).inv();
            }
            (ld.re.is_finite() && ld.im.is_finite()).then_some(ld)
        },
        AberthOptions { tol: 1e-14, max_iter: 600 },
    );
    roots
        .par_iter()
        .filter_map(|&z| {
            let z = newton_solve(f, n, m, z, 8).unwrap_or(z);
            let p = from_line(m, z);
            (chordal_dist(&f.iterate(&p, n), &p) <= 1e-8).then_some(p)
        })
        .collect()
}

/// All fixed points of `f^n` on the sphere, counted with multiplicity and
/// audited against `d^n + 1`.
pub fn periodic_points(f: &RationalMap, w: &Weight, n: usize, opts: &CycleOptions) -> Result<PeriodicSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    let d = f.degree();
    let total = (d as u128)
        .checked_pow(n as u32)
        .map(|v| v + 1)
        .filter(|v| *v <= opts.budget as u128)
        .ok_or_else(|| {
            Error::Budget(format!(
                "d^n + 1 for d = {d}, n = {n} exceeds the budget of {} points; lower n or raise the budget",
                opts.budget
            ))
        })? as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((n as u64) << 32));
    let seed_pts = seeds(f, n, &mut rng)?;
    let frame = choose_frame(&seed_pts, &mut rng);

    let mut clusters: Vec<(SpherePoint, usize)>;
    if total - 1 <= opts.simultaneous_limit {
        let (roots, ok) = solve_simultaneous(f, n, &frame, &seed_pts, total, &mut rng);
        if !ok {
            log::warn!("simultaneous iteration for n = {n} stopped early; completing by deflation");
        }
        let polished: Vec<SpherePoint> = roots
            .par_iter()
            .map(|&z| from_line(&frame, newton_solve(f, n, &frame, z, 3).unwrap_or(z)))
            .collect();
        clusters = cluster_points(&polished, ROOT_CLUSTER_TOL);
        if !ok {
            clusters.retain(|(p, _)| chordal_dist(&f.iterate(p, n), p) <= 1e-6);
        }
    } else {
        let found: Vec<SpherePoint> = seed_pts
            .par_iter()
            .filter_map(|s| newton_solve(f, n, &frame, to_line(&frame, s), 60).map(|z| from_line(&frame, z)))
            .collect();
        clusters = cluster_points(&found, ROOT_CLUSTER_TOL).into_iter().map(|(p, _)| (p, 1)).collect();
    }
    let mut count: usize = clusters.iter().map(|c| c.1).sum();
    if count < total {
        let known: Vec<Complex64> = clusters
            .iter()
            .flat_map(|(p, k)| std::iter::repeat_n(to_line(&frame, p), *k))
            .collect();
        let extra = solve_deflated_simultaneous(f, n, &frame, &known, total - count, &mut rng);
        for (p, _) in cluster_points(&extra, ROOT_CLUSTER_TOL) {
            if count < total && clusters.iter().all(|(q, _)| chordal_dist(&p, q) > ROOT_CLUSTER_TOL) {
                clusters.push((p, 1));
                count += 1;
            }
        }
        log::debug!("deflated simultaneous completion for n = {n}: {count}/{total}");
    }
    let mut round = 0;
    while count < total && round < opts.retries {
        round += 1;
        let known: Vec<Complex64> = clusters
            .iter()
            .flat_map(|(p, k)| std::iter::repeat_n(to_line(&frame, p), *k))
            .collect();
        let missing = total - count;
        let starts: Vec<Complex64> = (0..8 * missing + 64)
            .map(|_| to_line(&frame, &random_sphere_point(&mut rng)))
            .collect();
        let extra: Vec<SpherePoint> = starts
            .par_iter()
            .filter_map(|&z| deflated_solve(f, n, &frame, &known, z, 200).map(|r| from_line(&frame, r)))
            .collect();
        for (p, _) in cluster_points(&extra, ROOT_CLUSTER_TOL) {
            if count < total && clusters.iter().all(|(q, _)| chordal_dist(&p, q) > ROOT_CLUSTER_TOL) {
                clusters.push((p, 1));
                count += 1;
            }
        }
        log::debug!("completion round {round} for n = {n}: {count}/{total}");
    }
    if count > total {
        log::warn!("n = {n}: {count} roots for an expected {total}; clustering split a root");
    }
    if count < total {
        return Err(Error::CountShortfall {
            found: count,
            expected: total,
        });
    }
    clusters.sort_by(|a, b| a.0.lex_cmp(&b.0));
    let points = clusters.par_iter().map(|(p, k)| describe(f, w, n, *p, *k)).collect();
    Ok(PeriodicSet {
        n,
        points,
        expected: total,
        found: count,
    })
}

/// Newton on `f^n(t) = t` in the preferred chart of `p`, keeping only steps
/// that reduce the residual. Lands exactly on fixed points such as infinity.
fn polish_in_chart(f: &RationalMap, n: usize, p: SpherePoint) -> SpherePoint {
    let residual = |q: &SpherePoint| chordal_dist(&f.iterate(q, n), q);
    let mut best = (residual(&p), p);
    let mut q = p;
    for _ in 0..4 {
        let Some(next) = chart_newton_step(f, n, &q) else { break };
        let r = residual(&next);
        if r > best.0 || next == q && r == best.0 {
            break;
        }
        best = (r, next);
        q = next;
    }
    best.1
}

/// One Newton step for `f^n(t) = t` in the preferred chart of `q`.
pub(crate) fn chart_newton_step(f: &RationalMap, n: usize, q: &SpherePoint) -> Option<SpherePoint> {
    let (chart, t) = q.chart_coord();
    let image = f.iterate(q, n).coord(chart)?;
    let denom = f.multiplier(q, n) - 1.0;
    if denom == ZERO {
        return None;
    }
    let next = t - (image - t) / denom;
    (next.re.is_finite() && next.im.is_finite()).then(|| SpherePoint::from_chart(chart, next))
}

fn describe(f: &RationalMap, w: &Weight, n: usize, p: SpherePoint, multiplicity: usize) -> PeriodicPoint {
    let p = if multiplicity == 1 { polish_in_chart(f, n, p) } else { p };
    let mut z = p;
    let mut birkhoff = 0.0;
    let mut exact_period = n;
    for k in 1..=n {
        birkhoff += w.eval(&z);
        z = f.eval(&z);
        if k < n && exact_period == n && n.is_multiple_of(k) && chordal_dist(&z, &p) <= PERIOD_TOL {
            exact_period = k;
        }
    }
    PeriodicPoint {
        point: p,
        n,
        exact_period,
        multiplier: f.multiplier(&p, n),
        birkhoff_weight: birkhoff,
        multiplicity,
        residual: chordal_dist(&z, &p),
    }
}

/// Points whose exact period is `n`.
pub fn exact_period_filter(points: &[PeriodicPoint], n: usize) -> Vec<PeriodicPoint> {
    points.iter().filter(|p| p.exact_period == n).cloned().collect()
}

/// Mass `e^{S_n phi(p) - nP}` of a periodic point in the weighted cycle measure.
pub fn cycle_mass(p: &PeriodicPoint, pressure: f64) -> f64 {
    p.multiplicity as f64 * (p.birkhoff_weight - p.n as f64 * pressure).exp()
}

/// `e^{-nP} sum e^{S_n phi(p)} delta_p` over the (repelling) fixed points of `f^n`.
pub fn weighted_cycle_measure(points: &[PeriodicPoint], pressure: f64, repelling_only: bool) -> DiscreteMeasure {
    let undetermined = points.iter().filter(|p| p.stability() == Stability::Undetermined).count();
    if undetermined > 0 {
        log::warn!("{undetermined} periodic points with |multiplier| within {NEUTRAL_BAND} of 1 left out");
    }
    DiscreteMeasure::from_atoms(
        points
            .iter()
            .filter(|p| {
                if repelling_only {
                    p.is_repelling()
                } else {
                    p.stability() != Stability::Undetermined
                }
            })
            .map(|p| (p.point, cycle_mass(p, pressure)))
            .collect(),
    )
}

/// One row of [`equidistribution_curve`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquidistributionRow {
    pub n: usize,
    pub w1: f64,
    pub total_mass: f64,
}

/// `W1` between the normalised repelling cycle measure at each `n` and `mu`.
pub fn equidistribution_curve(
    f: &RationalMap,
    w: &Weight,
    mu: &DiscreteMeasure,
    pressure: f64,
    ns: &[usize],
    opts: &CycleOptions,
) -> Result<Vec<EquidistributionRow>> {
    ns.iter()
        .map(|&n| {
            let set = periodic_points(f, w, n, opts)?;
            let nu = weighted_cycle_measure(&set.points, pressure, true);
            let dist = crate::metrics::wasserstein1_normalized(&nu, mu)?;
            Ok(EquidistributionRow {
                n,
                w1: dist.distance,
                total_mass: nu.total_mass(),
            })
        })
        .collect()
}

/// Whether the distances strictly decrease along the curve.
pub fn is_strictly_decreasing(rows: &[EquidistributionRow]) -> bool {
    rows.windows(2).all(|w| w[1].w1 < w[0].w1)
}

/// Fixed-format float used in every CSV (17 significant digits); negative
/// zero is written as zero.
pub fn csv_float(v: f64) -> String {
    format!("{:.16e}", v + 0.0)
}

/// CSV with header `n,re,im,exact_period,abs_multiplier,birkhoff_weight,mass`,
/// one row per periodic point; `mass` is its mass in the repelling weighted
/// measure (0 for points left out). Infinity is written `inf,inf`.
pub fn cycles_csv(points: &[PeriodicPoint], pressure: f64) -> String {
    let mut out = String::from("n,re,im,exact_period,abs_multiplier,birkhoff_weight,mass\n");
    for p in points {
        let (re, im) = match p.point.re_im() {
            Some([re, im]) => (csv_float(re), csv_float(im)),
            None => ("inf".to_string(), "inf".to_string()),
        };
        let mass = if p.is_repelling() { cycle_mass(p, pressure) } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.n,
            re,
            im,
            p.exact_period,
            csv_float(p.multiplier.norm()),
            csv_float(p.birkhoff_weight),
            csv_float(mass)
        );
    }
    out
}

/// Whether two points lie on the same cycle of `f` (within `PERIOD_TOL`).
pub fn same_cycle(f: &RationalMap, a: &SpherePoint, b: &SpherePoint, period: usize) -> bool {
    let mut z = *a;
    for _ in 0..period {
        if chordal_dist(&z, b) <= PERIOD_TOL.max(POINT_TOL) {
            return true;
        }
        z = f.eval(&z);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2() -> RationalMap {
        RationalMap::quadratic(ZERO)
    }

    fn opts() -> CycleOptions {
        CycleOptions::default()
    }

    #[test]
    fn fixed_points_of_z_squared() {
        let s = periodic_points(&z2(), &Weight::zero(), 1, &opts()).unwrap();
        assert_eq!(s.audit(), "3/3");
        let pts: Vec<SpherePoint> = s.points.iter().map(|p| p.point).collect();
        assert!(pts.contains(&SpherePoint::ZERO));
        assert!(pts.contains(&SpherePoint::ONE));
        assert!(pts.contains(&SpherePoint::Infinity));
        for p in &s.points {
            let m = p.multiplier.norm();
            if p.point == SpherePoint::ONE {
                assert!((m - 2.0).abs() < 1e-12);
            } else {
                assert!(m < 1e-12);
            }
        }
    }

    #[test]
    fn period_two_of_z_squared() {
        let s = periodic_points(&z2(), &Weight::zero(), 2, &opts()).unwrap();
        assert_eq!(s.audit(), "5/5");
        let exact = exact_period_filter(&s.points, 2);
        assert_eq!(exact.len(), 2);
        for p in exact {
            let z = p.point.finite().unwrap();
            assert!((z.powu(3) - 1.0).norm() < 1e-12);
            assert!(
                (p.multiplier - Complex64::new(4.0, 0.0)).norm() < 1e-10,
                "{:?} {:?}",
                p.point,
                p.multiplier
            );
        }
        let on_circle = s
            .points
            .iter()
            .filter(|p| p.point.finite().is_some_and(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!(on_circle.clone().all(|p| (p.multiplier.norm() - 4.0).abs() < 1e-10));
        assert_eq!(on_circle.count(), 3);
        assert_eq!(exact_period_filter(&s.points, 1).len(), 3);
    }

    #[test]
    fn period_four_inclusion_exclusion() {
        let s = periodic_points(&z2(), &Weight::zero(), 4, &opts()).unwrap();
        assert_eq!(s.found, 17);
        assert_eq!(exact_period_filter(&s.points, 4).len(), 12);
    }

    #[test]
    fn small_c_fixed_points() {
        let c = Complex64::new(0.03, -0.02);
        let f = RationalMap::quadratic(c);
        let s = periodic_points(&f, &Weight::zero(), 1, &opts()).unwrap();
        let disc = (Complex64::new(1.0, 0.0) - 4.0 * c).sqrt();
        for want in [(1.0 + disc) / 2.0, (1.0 - disc) / 2.0] {
            assert!(s.points.iter().any(|p| p.point.finite().is_some_and(|z| (z - want).norm() < 1e-13)));
        }
        assert!(s.points.iter().any(|p| p.point.is_infinity()));
    }

    #[test]
    fn count_audit_for_several_maps() {
        let maps = [
            RationalMap::quadratic(Complex64::new(-1.0, 0.0)),
            RationalMap::quadratic(Complex64::new(-0.2, 0.1)),
            RationalMap::quadratic(Complex64::new(0.3, 0.5)),
            RationalMap::new(
                vec![Complex64::new(1.0, 0.0), ZERO, Complex64::new(1.0, 0.0)],
                vec![Complex64::new(-1.0, 0.0), ZERO, Complex64::new(1.0, 0.0)],
            )
            .unwrap(),
            RationalMap::polynomial(vec![Complex64::new(0.1, 0.2), ZERO, ZERO, Complex64::new(1.0, 0.0)]).unwrap(),
        ];
        for f in &maps {
            for n in 1..=5 {
                let s = periodic_points(f, &Weight::zero(), n, &opts()).unwrap();
                assert_eq!(s.found, s.expected, "{f:?} n={n}");
                assert!(s.points.iter().all(|p| p.residual < 1e-8), "{f:?} n={n}");
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let o = CycleOptions { budget: 100, ..opts() };
        assert!(matches!(periodic_points(&z2(), &Weight::zero(), 7, &o), Err(Error::Budget(_))));
    }

    #[test]
    fn seeded_newton_route_matches_simultaneous_route() {
        let f = RationalMap::quadratic(Complex64::new(-0.2, 0.1));
        let a = periodic_points(&f, &Weight::zero(), 7, &opts()).unwrap();
        let b = periodic_points(
            &f,
            &Weight::zero(),
            7,
            &CycleOptions {
                simultaneous_limit: 16,
                ..opts()
            },
        )
        .unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!(chordal_dist(&p.point, &q.point) < 1e-9);
        }
    }

    #[test]
    fn weighted_cycle_measure_of_z_squared() {
        let s = periodic_points(&z2(), &Weight::zero(), 3, &opts()).unwrap();
        let m = weighted_cycle_measure(&s.points, 2f64.ln(), true);
        assert_eq!(m.len(), 7);
        for (p, mass) in m.atoms() {
            assert!((mass - 0.125).abs() < 1e-14);
            assert!((p.finite().unwrap().powu(7) - 1.0).norm() < 1e-12);
        }
        assert!((m.total_mass() - 7.0 / 8.0).abs() < 1e-14);
        let t = 0.4;
        let st = periodic_points(&z2(), &Weight::constant(t), 2, &opts()).unwrap();
        let mt = weighted_cycle_measure(&st.points, 2f64.ln() + t, true);
        assert!((mt.total_mass() - 0.75).abs() < 1e-9);
    }

    #[test]
    fn cycle_measure_is_invariant() {
        let f = RationalMap::quadratic(Complex64::new(-0.2, 0.1));
        let w = Weight::bump(SpherePoint::ZERO, 0.2, 0.5).unwrap();
        let s = periodic_points(&f, &w, 6, &opts()).unwrap();
        let m = weighted_cycle_measure(&s.points, 0.7, true);
        let img = m.push_forward(&f, POINT_TOL);
        assert!(img.max_mass_discrepancy(&m, POINT_TOL) <= 1e-10);
    }

    #[test]
    fn multiplier_is_constant_along_cycles() {
        let f = RationalMap::quadratic(Complex64::new(-0.2, 0.1));
        let s = periodic_points(&f, &Weight::zero(), 5, &opts()).unwrap();
        for p in &s.points {
            let q = s.points.iter().find(|q| chordal_dist(&q.point, &f.eval(&p.point)) < 1e-9).unwrap();
            let rel = (p.multiplier - q.multiplier).norm() / p.multiplier.norm().max(1e-300);
            assert!(rel < 1e-8 || p.multiplier.norm() < 1e-12);
        }
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let s = periodic_points(&z2(), &Weight::zero(), 2, &opts()).unwrap();
        let csv = cycles_csv(&s.points, 2f64.ln());
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.contains("inf,inf"));
        assert!(csv.lines().nth(1).unwrap().split(',').count() == 7);
    }

    #[test]
    fn z_squared_period_ten_is_complete() {
        let s = periodic_points(&z2(), &Weight::zero(), 10, &opts()).unwrap();
        assert_eq!(s.audit(), "1025/1025");
    }
}
