use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Default chordal tolerance for point equality and atom merging.
pub const POINT_TOL: f64 = 1e-9;

/// A point of the Riemann sphere.
#[derive(Clone, Copy, Debug)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

/// Local coordinate chart: `Z` is the identity chart on the closed unit disk,
/// `W` is `w = 1/z` on its complement (infinity sits at `w = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Z,
    W,
}

impl SpherePoint {
    pub const ZERO: SpherePoint = SpherePoint::Finite(Complex64 { re: 0.0, im: 0.0 });
    pub const ONE: SpherePoint = SpherePoint::Finite(Complex64 { re: 1.0, im: 0.0 });

    /// Builds a point from a complex number. Non-finite components map to infinity.
    pub fn new(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn from_re_im(re: f64, im: f64) -> Self {
        Self::new(Complex64::new(re, im))
    }

    /// Point with homogeneous coordinates `[x : y]`, i.e. `x / y`.
    pub fn from_homogeneous(x: Complex64, y: Complex64) -> Self {
        if y == Complex64::new(0.0, 0.0) {
            return SpherePoint::Infinity;
        }
        if x.norm_sqr() <= y.norm_sqr() {
            SpherePoint::Finite(x / y)
        } else {
            // y/x is well conditioned here
            let w = y / x;
            if w == Complex64::new(0.0, 0.0) {
                SpherePoint::Infinity
            } else {
                Self::new(w.inv())
            }
        }
    }

    /// Point from chart coordinate.
    pub fn from_chart(chart: Chart, t: Complex64) -> Self {
        match chart {
            Chart::Z => Self::new(t),
            Chart::W => Self::from_homogeneous(Complex64::new(1.0, 0.0), t),
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    /// The preferred chart: `Z` when `|z| <= 1`, `W` otherwise.
    pub fn chart(&self) -> Chart {
        match self {
            SpherePoint::Finite(z) if z.norm_sqr() <= 1.0 => Chart::Z,
            _ => Chart::W,
        }
    }

    /// Coordinate of the point in the given chart. `None` when the point is the
    /// one excluded by that chart.
    pub fn coord(&self, chart: Chart) -> Option<Complex64> {
        match (chart, self) {
            (Chart::Z, SpherePoint::Finite(z)) => Some(*z),
            (Chart::Z, SpherePoint::Infinity) => None,
            (Chart::W, SpherePoint::Infinity) => Some(Complex64::new(0.0, 0.0)),
            (Chart::W, SpherePoint::Finite(z)) => {
                if *z == Complex64::new(0.0, 0.0) {
                    None
                } else {
                    Some(z.inv())
                }
            }
        }
    }

    /// Coordinate in the preferred chart.
    pub fn chart_coord(&self) -> (Chart, Complex64) {
        let chart = self.chart();
        (chart, self.coord(chart).expect("preferred chart always contains the point"))
    }

    /// Unit-norm homogeneous coordinates `(x, y)` with `z = x / y`.
    pub fn homogeneous(&self) -> (Complex64, Complex64) {
        let one = Complex64::new(1.0, 0.0);
        match *self {
            SpherePoint::Infinity => (one, Complex64::new(0.0, 0.0)),
            SpherePoint::Finite(z) => {
                if z.norm_sqr() <= 1.0 {
                    let s = (1.0 + z.norm_sqr()).sqrt();
                    (z / s, one / s)
                } else {
                    let w = z.inv();
                    let s = (1.0 + w.norm_sqr()).sqrt();
                    (one / s, w / s)
                }
            }
        }
    }

    /// Image on the unit sphere of R^3 under inverse stereographic projection.
    /// Chordal distance is half the Euclidean distance between images.
    pub fn to_unit_sphere(&self) -> [f64; 3] {
        match self.chart_coord() {
            (Chart::Z, z) => {
                let r2 = z.norm_sqr();
                let s = 1.0 + r2;
                [2.0 * z.re / s, 2.0 * z.im / s, (r2 - 1.0) / s]
            }
            (Chart::W, w) => {
                let r2 = w.norm_sqr();
                let s = 1.0 + r2;
                [2.0 * w.re / s, -2.0 * w.im / s, (1.0 - r2) / s]
            }
        }
    }

    /// Inverse of [`SpherePoint::to_unit_sphere`]; the input is projected radially.
    pub fn from_unit_sphere(v: [f64; 3]) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let (x, y, z) = (v[0] / n, v[1] / n, v[2] / n);
        if z <= 0.0 {
            // z = (x + iy) / (1 - z)
            SpherePoint::Finite(Complex64::new(x, y) / (1.0 - z))
        } else {
            // w = 1/z = (x - iy) / (1 + z)
            let w = Complex64::new(x, -y) / (1.0 + z);
            SpherePoint::from_chart(Chart::W, w)
        }
    }

    /// Antipode on the sphere, `-1/conj(z)`.
    pub fn antipode(&self) -> Self {
        let (x, y) = self.homogeneous();
        SpherePoint::from_homogeneous(-y.conj(), x.conj())
    }

    pub fn approx_eq(&self, other: &SpherePoint, tol: f64) -> bool {
        chordal_dist(self, other) <= tol
    }

    /// Deterministic ordering key: `(re, im)` rounded to the point tolerance,
    /// infinity last.
    pub fn lex_cmp(&self, other: &SpherePoint) -> Ordering {
        fn key(p: &SpherePoint) -> Option<(f64, f64, f64, f64)> {
            p.finite().map(|z| {
                let scale = 1.0 / POINT_TOL;
                ((z.re * scale).round(), (z.im * scale).round(), z.re, z.im)
            })
        }
        match (key(self), key(other)) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Greater,
            (Some(_), None) => Ordering::Less,
            (Some(a), Some(b)) => {
                a.0.total_cmp(&b.0)
                    .then(a.1.total_cmp(&b.1))
                    .then(a.2.total_cmp(&b.2))
                    .then(a.3.total_cmp(&b.3))
            }
        }
    }

    pub fn re_im(&self) -> Option<[f64; 2]> {
        self.finite().map(|z| [z.re, z.im])
    }
}

/// Equality is chordal closeness within [`POINT_TOL`].
impl PartialEq for SpherePoint {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, POINT_TOL)
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::new(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Infinity => write!(f, "inf"),
            SpherePoint::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

/// Chordal distance `|p - q| / sqrt((1 + |p|^2)(1 + |q|^2))`, in `[0, 1]`.
pub fn chordal_dist(p: &SpherePoint, q: &SpherePoint) -> f64 {
    let (x0, x1) = p.homogeneous();
    let (y0, y1) = q.homogeneous();
    (x0 * y1 - x1 * y0).norm().min(1.0)
}

// Serialized as `[re, im]` or the string "inf".
impl Serialize for SpherePoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            SpherePoint::Infinity => s.serialize_str("inf"),
            SpherePoint::Finite(z) => [z.re, z.im].serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for SpherePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pair([f64; 2]),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Pair([re, im]) => {
                if re.is_finite() && im.is_finite() {
                    Ok(SpherePoint::Finite(Complex64::new(re, im)))
                } else {
                    Err(serde::de::Error::custom("non-finite coordinate"))
                }
            }
            Repr::Tag(t) if t == "inf" => Ok(SpherePoint::Infinity),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("unknown point tag {t:?}"))),
        }
    }
}

/// A Möbius transformation `z -> (a z + b) / (c z + d)`.
#[derive(Clone, Copy, Debug)]
pub struct Mobius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mobius {
    /// Rotation of the sphere (a chordal isometry) sending `0` to `p`.
    pub fn rotation_to(p: &SpherePoint) -> Self {
        let (x, y) = p.homogeneous();
        // columns: image of 0 is [x : y], matrix [[y*, x], [-x*, y]] up to conj
        Mobius {
            a: y.conj(),
            b: x,
            c: -x.conj(),
            d: y,
        }
    }

    /// Rotation from a unit quaternion given as two complex numbers with
    /// `|alpha|^2 + |beta|^2 = 1`.
    pub fn rotation(alpha: Complex64, beta: Complex64) -> Self {
        Mobius {
            a: alpha,
            b: beta,
            c: -beta.conj(),
            d: alpha.conj(),
        }
    }

    pub fn apply(&self, p: &SpherePoint) -> SpherePoint {
        let (x, y) = p.homogeneous();
        SpherePoint::from_homogeneous(self.a * x + self.b * y, self.c * x + self.d * y)
    }

    pub fn inverse(&self) -> Self {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }
}

/// Spatial hash on the unit-sphere embedding with cells of side `2 tol`, so
/// points within chordal `tol` are in the same or adjacent cells.
pub(crate) struct PointIndex {
    cell: f64,
    map: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl PointIndex {
    pub(crate) fn new(tol: f64) -> Self {
        PointIndex {
            cell: (2.0 * tol).max(1e-15),
            map: HashMap::new(),
        }
    }

    pub(crate) fn key(&self, p: &SpherePoint) -> (i64, i64, i64) {
        let v = p.to_unit_sphere();
        (
            (v[0] / self.cell).floor() as i64,
            (v[1] / self.cell).floor() as i64,
            (v[2] / self.cell).floor() as i64,
        )
    }

    pub(crate) fn insert(&mut self, p: &SpherePoint, id: usize) {
        let k = self.key(p);
        self.map.entry(k).or_default().push(id);
    }

    /// Smallest id among stored points within `tol` of `p`.
    pub(crate) fn find(&self, p: &SpherePoint, tol: f64, points: &[SpherePoint]) -> Option<usize> {
        let (a, b, c) = self.key(p);
        let mut best: Option<usize> = None;
        for da in -1..=1 {
            for db in -1..=1 {
                for dc in -1..=1 {
                    if let Some(ids) = self.map.get(&(a + da, b + db, c + dc)) {
                        for &id in ids {
                            if chordal_dist(p, &points[id]) <= tol && best.is_none_or(|b| id < b) {
                                best = Some(id);
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// Ids of all stored points within `tol` of `p`, ascending.
    pub(crate) fn find_all(&self, p: &SpherePoint, tol: f64, points: &[SpherePoint]) -> Vec<usize> {
        let (a, b, c) = self.key(p);
        let mut out = Vec::new();
        for da in -1..=1 {
            for db in -1..=1 {
                for dc in -1..=1 {
                    if let Some(ids) = self.map.get(&(a + da, b + db, c + dc)) {
                        out.extend(ids.iter().copied().filter(|&id| chordal_dist(p, &points[id]) <= tol));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> SpherePoint {
        SpherePoint::from_re_im(re, im)
    }

    #[test]
    fn chordal_examples() {
        assert_eq!(chordal_dist(&SpherePoint::ZERO, &SpherePoint::ZERO), 0.0);
        assert!((chordal_dist(&SpherePoint::ZERO, &SpherePoint::Infinity) - 1.0).abs() < 1e-15);
        let expect = 1.0 / 2f64.sqrt();
        assert!((chordal_dist(&SpherePoint::ZERO, &SpherePoint::ONE) - expect).abs() < 1e-15);
    }

    #[test]
    fn chordal_large_values_match_formula() {
        let p = c(3.0, -4.0);
        let q = c(1e6, 2.0);
        let (zp, zq) = (p.finite().unwrap(), q.finite().unwrap());
        let direct = (zp - zq).norm() / ((1.0 + zp.norm_sqr()) * (1.0 + zq.norm_sqr())).sqrt();
        assert!((chordal_dist(&p, &q) - direct).abs() < 1e-14);
        // 1e6 is almost infinity
        assert!(chordal_dist(&q, &SpherePoint::Infinity) < 1.1e-6);
    }

    #[test]
    fn unit_sphere_embedding_halves_distance() {
        let p = c(0.3, -2.0);
        let q = c(-0.7, 0.1);
        let (a, b) = (p.to_unit_sphere(), q.to_unit_sphere());
        let e = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        assert!((e / 2.0 - chordal_dist(&p, &q)).abs() < 1e-14);
        assert!(chordal_dist(&SpherePoint::from_unit_sphere(a), &p) < 1e-14);
        assert!(chordal_dist(&SpherePoint::from_unit_sphere(b), &q) < 1e-14);
        assert_eq!(SpherePoint::Infinity.to_unit_sphere(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn serde_round_trip_and_rejects_garbage() {
        let s = serde_json::to_string(&vec![c(1.5, -2.0), SpherePoint::Infinity]).unwrap();
        assert_eq!(s, r#"[[1.5,-2.0],"inf"]"#);
        let back: Vec<SpherePoint> = serde_json::from_str(&s).unwrap();
        assert!(back[1].is_infinity());
        assert!(serde_json::from_str::<SpherePoint>(r#""nan""#).is_err());
        assert!(serde_json::from_str::<SpherePoint>("[1.0]").is_err());
    }

    #[test]
    fn rotation_to_sends_zero_to_target_isometrically() {
        for p in [c(0.4, 0.2), c(-5.0, 3.0), SpherePoint::Infinity, SpherePoint::ZERO] {
            let m = Mobius::rotation_to(&p);
            assert!(chordal_dist(&m.apply(&SpherePoint::ZERO), &p) < 1e-14);
            let (u, v) = (c(0.1, 0.9), c(-2.0, 0.5));
            let before = chordal_dist(&u, &v);
            let after = chordal_dist(&m.apply(&u), &m.apply(&v));
            assert!((before - after).abs() < 1e-14);
        }
    }

    fn arb_point() -> impl Strategy<Value = SpherePoint> {
        prop_oneof![
            1 => Just(SpherePoint::Infinity),
            8 => (-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| c(a, b)),
            2 => (-1e4f64..1e4, -1e4f64..1e4).prop_map(|(a, b)| c(a, b)),
        ]
    }

    proptest! {
        #[test]
        fn chordal_is_a_metric(p in arb_point(), q in arb_point(), r in arb_point()) {
            let pq = chordal_dist(&p, &q);
            prop_assert!((0.0..=1.0).contains(&pq));
            prop_assert!((pq - chordal_dist(&q, &p)).abs() < 1e-15);
            prop_assert!(chordal_dist(&p, &p) < 1e-15);
            prop_assert!(pq <= chordal_dist(&p, &r) + chordal_dist(&r, &q) + 1e-14);
        }
    }
}
