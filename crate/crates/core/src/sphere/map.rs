use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::point::{chordal_dist, Chart, Mobius, SpherePoint, POINT_TOL};
use super::roots::poly_roots;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Relative size below which a homogeneous value counts as zero when deciding
/// whether numerator and denominator share a root.
const RESULTANT_TOL: f64 = 1e-10;

/// A rational map `P/Q` of the sphere with algebraic degree `d >= 2`.
///
/// Both coefficient vectors are stored padded to length `d + 1`, constant term
/// first, so they define homogeneous polynomials `P(x, y) = sum a_i x^i y^(d-i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RationalMap {
    num: Vec<Complex64>,
    den: Vec<Complex64>,
    #[serde(skip)]
    degree: usize,
}

#[derive(Deserialize, Serialize)]
struct MapRepr {
    num: Vec<[f64; 2]>,
    den: Vec<[f64; 2]>,
}

fn poly_degree(c: &[Complex64]) -> Option<usize> {
    c.iter().rposition(|x| *x != ZERO)
}

fn to_complex(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
}

/// Homogeneous value and partial derivatives of `sum c_i x^i y^(d-i)`.
#[inline]
pub(crate) fn homog_eval(c: &[Complex64], x: Complex64, y: Complex64) -> (Complex64, Complex64, Complex64) {
    let d = c.len() - 1;
    // powers up to d
    let mut xp = [ONE; 17];
    let mut yp = [ONE; 17];
    if d < 17 {
        for i in 1..=d {
            xp[i] = xp[i - 1] * x;
            yp[i] = yp[i - 1] * y;
        }
        let mut v = ZERO;
        let mut vx = ZERO;
        let mut vy = ZERO;
        for (i, &a) in c.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            v += a * xp[i] * yp[d - i];
            if i > 0 {
                vx += a * (i as f64) * xp[i - 1] * yp[d - i];
            }
            if i < d {
                vy += a * ((d - i) as f64) * xp[i] * yp[d - i - 1];
            }
        }
        (v, vx, vy)
    } else {
        let xp: Vec<Complex64> = (0..=d)
            .scan(ONE, |s, _| {
                let r = *s;
                *s *= x;
                Some(r)
            })
            .collect();
        let yp: Vec<Complex64> = (0..=d)
            .scan(ONE, |s, _| {
                let r = *s;
                *s *= y;
                Some(r)
            })
            .collect();
        let mut v = ZERO;
        let mut vx = ZERO;
        let mut vy = ZERO;
        for (i, &a) in c.iter().enumerate() {
            v += a * xp[i] * yp[d - i];
            if i > 0 {
                vx += a * (i as f64) * xp[i - 1] * yp[d - i];
            }
            if i < d {
                vy += a * ((d - i) as f64) * xp[i] * yp[d - i - 1];
            }
        }
        (v, vx, vy)
    }
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl RationalMap {
    /// Builds and validates a map from numerator and denominator coefficients
    /// (constant term first).
    pub fn new(num: Vec<Complex64>, den: Vec<Complex64>) -> Result<Self> {
        let map = Self::new_unchecked(num, den)?;
        if map.degree < 2 {
            return Err(Error::InvalidMap(format!("degree {} < 2", map.degree)));
        }
        map.check_coprime()?;
        Ok(map)
    }

    /// Builds a map without the degree and common-root checks. Intended for
    /// exercising the degenerate-evaluation paths.
    pub fn new_unchecked(num: Vec<Complex64>, den: Vec<Complex64>) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidMap("non-finite coefficient".into()));
        }
        let dn = poly_degree(&num);
        let dd = poly_degree(&den);
        let (dn, dd) = match (dn, dd) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::InvalidMap("numerator or denominator is identically zero".into())),
        };
        let degree = dn.max(dd);
        let mut num = num;
        let mut den = den;
        num.resize(degree + 1, ZERO);
        den.resize(degree + 1, ZERO);
        Ok(RationalMap { num, den, degree })
    }

    /// Polynomial map with the given coefficients.
    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        Self::new(coeffs, vec![ONE])
    }

    /// `z^2 + c`.
    pub fn quadratic(c: Complex64) -> Self {
        Self::polynomial(vec![c, ZERO, ONE]).expect("z^2 + c is a valid map")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn numerator(&self) -> &[Complex64] {
        &self.num
    }

    pub fn denominator(&self) -> &[Complex64] {
        &self.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.den[1..].iter().all(|c| *c == ZERO)
    }

    fn check_coprime(&self) -> Result<()> {
        let scale_q: f64 = self.den.iter().map(|c| c.norm()).sum();
        for (r, _) in poly_roots(&self.num)? {
            let (x, y) = r.homogeneous();
            let q = homog_eval(&self.den, x, y).0.norm();
            if q <= RESULTANT_TOL * scale_q {
                return Err(Error::InvalidMap(format!("numerator and denominator share the root {r}")));
            }
        }
        Ok(())
    }

    /// Image of homogeneous coordinates: `(P(x, y), Q(x, y))`.
    #[inline]
    pub fn eval_homogeneous(&self, x: Complex64, y: Complex64) -> (Complex64, Complex64) {
        (homog_eval(&self.num, x, y).0, homog_eval(&self.den, x, y).0)
    }

    /// Homogeneous image together with the Jacobian `[[Px, Py], [Qx, Qy]]`.
    #[inline]
    pub fn eval_homogeneous_jet(&self, x: Complex64, y: Complex64) -> [Complex64; 6] {
        let (p, px, py) = homog_eval(&self.num, x, y);
        let (q, qx, qy) = homog_eval(&self.den, x, y);
        [p, q, px, py, qx, qy]
    }

    /// `f(p)`, signalling a degenerate `0/0` (which only a map with a shared
    /// root of numerator and denominator produces).
    pub fn try_eval(&self, p: &SpherePoint) -> Result<SpherePoint> {
        let (x, y) = p.homogeneous();
        let (a, b) = self.eval_homogeneous(x, y);
        let scale: f64 = self.num.iter().chain(self.den.iter()).map(|c| c.norm()).sum();
        if a.norm() + b.norm() <= 1e-14 * scale {
            return Err(Error::InvalidMap(format!("0/0 when evaluating at {p}")));
        }
        Ok(SpherePoint::from_homogeneous(a, b))
    }

    /// `f(p)` evaluated homogeneously, so poles and infinity need no special casing.
    pub fn eval(&self, p: &SpherePoint) -> SpherePoint {
        let (x, y) = p.homogeneous();
        let (a, b) = self.eval_homogeneous(x, y);
        SpherePoint::from_homogeneous(a, b)
    }

    /// `f^n(p)`.
    pub fn iterate(&self, p: &SpherePoint, n: usize) -> SpherePoint {
        (0..n).fold(*p, |z, _| self.eval(&z))
    }

    /// Homogeneous image of `p`'s preferred-chart lift and its derivative in
    /// that chart coordinate.
    fn chart_jet(&self, p: &SpherePoint) -> (Complex64, Complex64, Complex64, Complex64) {
        let (src, t) = p.chart_coord();
        let (x, y) = match src {
            Chart::Z => (t, ONE),
            Chart::W => (ONE, t),
        };
        let [a, b, px, py, qx, qy] = self.eval_homogeneous_jet(x, y);
        match src {
            Chart::Z => (a, b, px, qx),
            Chart::W => (a, b, py, qy),
        }
    }

    fn jet_to_chart(a: Complex64, b: Complex64, da: Complex64, db: Complex64, target: Chart) -> Complex64 {
        match target {
            Chart::Z => (da * b - a * db) / (b * b),
            Chart::W => (db * a - b * da) / (a * a),
        }
    }

    /// `f(p)` and the derivative of `f` from `p`'s preferred chart to the given
    /// chart at the image.
    pub fn chart_derivative_to(&self, p: &SpherePoint, target: Chart) -> (SpherePoint, Complex64) {
        let (a, b, da, db) = self.chart_jet(p);
        (SpherePoint::from_homogeneous(a, b), Self::jet_to_chart(a, b, da, db, target))
    }

    /// `f(p)` and the derivative between preferred charts. The image and its
    /// chart come from the same evaluation, so consecutive steps chain exactly.
    pub fn chart_derivative(&self, p: &SpherePoint) -> (SpherePoint, Complex64) {
        let (a, b, da, db) = self.chart_jet(p);
        let image = SpherePoint::from_homogeneous(a, b);
        (image, Self::jet_to_chart(a, b, da, db, image.chart()))
    }

    /// Derivative of `f^n` along the orbit of `p`, the multiplier when `p` is
    /// fixed by `f^n`. The last step lands in `p`'s own chart so the product
    /// telescopes to a chart-independent value.
    pub fn multiplier(&self, p: &SpherePoint, n: usize) -> Complex64 {
        let home = p.chart();
        let mut z = *p;
        let mut m = ONE;
        for k in 0..n {
            let (img, der) = if k + 1 == n {
                self.chart_derivative_to(&z, home)
            } else {
                self.chart_derivative(&z)
            };
            m *= der;
            z = img;
        }
        m
    }

    /// Solutions of `f(x) = q` with multiplicity; exactly `d` counted with
    /// multiplicity, in lexicographic order.
    pub fn preimages(&self, q: &SpherePoint) -> Result<Vec<(SpherePoint, usize)>> {
        let (qx, qy) = q.homogeneous();
        let coeffs: Vec<Complex64> = self.num.iter().zip(self.den.iter()).map(|(a, b)| qy * a - qx * b).collect();
        poly_roots(&coeffs)
    }

    /// Critical points: zeros of the homogeneous Jacobian `Px Qy - Py Qx`,
    /// `2d - 2` with multiplicity.
    pub fn critical_points(&self) -> Result<Vec<(SpherePoint, usize)>> {
        let d = self.degree;
        let dx = |c: &[Complex64]| -> Vec<Complex64> { (0..d).map(|i| c[i + 1] * ((i + 1) as f64)).collect() };
        // y-derivative at y = 1: sum (d - i) c_i z^i; its top coefficient vanishes
        let dy = |c: &[Complex64]| -> Vec<Complex64> { (0..d).map(|i| c[i] * ((d - i) as f64)).collect() };
        let a = poly_mul(&dx(&self.num), &dy(&self.den));
        let b = poly_mul(&dy(&self.num), &dx(&self.den));
        let jac: Vec<Complex64> = a.iter().zip(b.iter()).map(|(u, v)| u - v).collect();
        poly_roots(&jac)
    }

    /// Minimum chordal distance from `p` to `f^k(C_f)` for `0 <= k <= depth`.
    /// Only the forward critical orbit is explored.
    pub fn critical_orbit_distance(&self, p: &SpherePoint, depth: usize) -> Result<f64> {
        let crit = self.critical_points()?;
        let mut best = f64::INFINITY;
        for (c, _) in crit {
            let mut z = c;
            for _ in 0..=depth {
                best = best.min(chordal_dist(p, &z));
                z = self.eval(&z);
            }
        }
        Ok(best)
    }

    /// Critical points `c` with `f^k(c) = c` for some `1 <= k <= depth`, with
    /// their least such `k`. A finite-depth disclosure only: it cannot rule
    /// out longer critical cycles.
    pub fn periodic_critical_points(&self, depth: usize) -> Result<Vec<(SpherePoint, usize)>> {
        let mut out = Vec::new();
        for (c, _) in self.critical_points()? {
            let mut z = c;
            for k in 1..=depth {
                z = self.eval(&z);
                if chordal_dist(&z, &c) <= POINT_TOL {
                    out.push((c, k));
                    break;
                }
            }
        }
        Ok(out)
    }

    /// The conjugate `m o f o m^-1`.
    pub fn conjugate(&self, m: &Mobius) -> Result<Self> {
        let inv = m.inverse();
        let d = self.degree;
        // substitute (x, y) -> (inv.a z + inv.b, inv.c z + inv.d)
        let lin_x = [inv.b, inv.a];
        let lin_y = [inv.d, inv.c];
        let mut powx = vec![vec![ONE]];
        let mut powy = vec![vec![ONE]];
        for i in 1..=d {
            powx.push(poly_mul(&powx[i - 1], &lin_x));
            powy.push(poly_mul(&powy[i - 1], &lin_y));
        }
        let subst = |c: &[Complex64]| -> Vec<Complex64> {
            let mut out = vec![ZERO; d + 1];
            for (i, a) in c.iter().enumerate() {
                let term = poly_mul(&powx[i], &powy[d - i]);
                for (k, t) in term.iter().enumerate() {
                    out[k] += a * t;
                }
            }
            out
        };
        let p = subst(&self.num);
        let q = subst(&self.den);
        let num = p.iter().zip(q.iter()).map(|(u, v)| m.a * u + m.b * v).collect();
        let den = p.iter().zip(q.iter()).map(|(u, v)| m.c * u + m.d * v).collect();
        Self::new(num, den)
    }

    pub fn to_json(&self) -> String {
        let repr = MapRepr {
            num: self.num.iter().map(|c| [c.re, c.im]).collect(),
            den: self.den.iter().map(|c| [c.re, c.im]).collect(),
        };
        serde_json::to_string(&repr).expect("plain data serializes")
    }

    /// Parses `{num: [[re, im], ...], den: [...]}` and validates the result.
    pub fn from_json(s: &str) -> Result<Self> {
        let repr: MapRepr = serde_json::from_str(s)?;
        Self::new(to_complex(&repr.num), to_complex(&repr.den))
    }
}

impl<'de> Deserialize<'de> for RationalMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MapRepr::deserialize(d)?;
        RationalMap::new(to_complex(&repr.num), to_complex(&repr.den)).map_err(serde::de::Error::custom)
    }
}

/// A forward orbit `p, f(p), ..., f^n(p)`.
#[derive(Clone, Debug)]
pub struct Orbit(pub Vec<SpherePoint>);

impl Orbit {
    pub fn compute(f: &RationalMap, p: &SpherePoint, n: usize) -> Self {
        let mut pts = Vec::with_capacity(n + 1);
        let mut z = *p;
        pts.push(z);
        for _ in 0..n {
            z = f.eval(&z);
            pts.push(z);
        }
        Orbit(pts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest chordal mismatch `d(orbit[i+1], f(orbit[i]))`.
    pub fn consistency_residual(&self, f: &RationalMap) -> f64 {
        self.0.windows(2).map(|w| chordal_dist(&w[1], &f.eval(&w[0]))).fold(0.0, f64::max)
    }
}
