//! Weights `phi` given as Gaussian kernel mixtures in the chordal metric,
//! with certified oscillation bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{chordal_dist, SpherePoint};

/// Width used to represent a constant as a kernel: on the sphere the kernel
/// then differs from its amplitude by less than `1e-12` relative.
pub const CONSTANT_WIDTH: f64 = 1e6;

/// Default lattice resolution for oscillation certificates.
pub const DEFAULT_OSC_RESOLUTION: usize = 256;

/// One kernel `a * exp(-(chordal(z, center) / b)^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub center: SpherePoint,
    pub a: f64,
    pub b: f64,
}

impl KernelTerm {
    pub fn eval(&self, p: &SpherePoint) -> f64 {
        let t = chordal_dist(p, &self.center) / self.b;
        self.a * (-t * t).exp()
    }

    /// Chordal Lipschitz constant `|a| sqrt(2) / (b sqrt(e))`.
    pub fn lipschitz(&self) -> f64 {
        self.a.abs() * std::f64::consts::SQRT_2 / (self.b * std::f64::consts::E.sqrt())
    }
}

/// A continuous weight on the sphere; the empty mixture is `phi = 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Weight {
    terms: Vec<KernelTerm>,
}

/// Certified upper bound on `max(phi) - min(phi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillationBound {
    pub grid_oscillation: f64,
    pub inflation: f64,
    pub upper_bound: f64,
    pub resolution: usize,
}

/// Outcome of the condition (B) check `Omega(phi) < log d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionBReport {
    pub omega: f64,
    pub bound: f64,
    pub logq_norm_bound: f64,
    pub passes: bool,
}

impl ConditionBReport {
    /// `log d - omega`; positive when the check passes.
    pub fn margin(&self) -> f64 {
        self.bound - self.omega
    }
}

impl Weight {
    pub fn zero() -> Self {
        Weight::default()
    }

    pub fn new(terms: Vec<KernelTerm>) -> Result<Self> {
        for t in &terms {
            if !t.a.is_finite() || !t.b.is_finite() || t.b <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "kernel needs finite amplitude and positive finite width, got a={} b={}",
                    t.a, t.b
                )));
            }
        }
        Ok(Weight { terms })
    }

    /// A single bump of height `a` and width `b` at `center`.
    pub fn bump(center: SpherePoint, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![KernelTerm { center, a, b }])
    }

    /// The (numerically) constant weight `t`.
    pub fn constant(t: f64) -> Self {
        Weight::zero().plus_constant(t)
    }

    /// `phi + t`, realised as an extra very wide kernel.
    pub fn plus_constant(&self, t: f64) -> Self {
        let mut terms = self.terms.clone();
        terms.push(KernelTerm {
            center: SpherePoint::ZERO,
            a: t,
            b: CONSTANT_WIDTH,
        });
        Weight { terms }
    }

    /// `c * phi`.
    pub fn scaled(&self, c: f64) -> Self {
        Weight {
            terms: self.terms.iter().map(|t| KernelTerm { a: t.a * c, ..*t }).collect(),
        }
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.a == 0.0)
    }

    pub fn eval(&self, p: &SpherePoint) -> f64 {
        self.terms.iter().map(|t| t.eval(p)).fold(0.0, |s, v| s + v)
    }

    /// Chordal Lipschitz constant of the mixture.
    pub fn lipschitz(&self) -> f64 {
        self.terms.iter().map(KernelTerm::lipschitz).fold(0.0, |s, v| s + v)
    }

    /// `sum |a_i|`, a bound on `|phi|`.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.a.abs()).fold(0.0, |s, v| s + v)
    }

    fn lattice_extrema(&self, n: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=n {
            let theta = std::f64::consts::PI * i as f64 / n as f64;
            let (st, ct) = theta.sin_cos();
            let ring = if i == 0 || i == n { 1 } else { 2 * n };
            for j in 0..ring {
                let az = std::f64::consts::PI * j as f64 / n as f64;
                let (sa, ca) = az.sin_cos();
                let p = SpherePoint::from_unit_sphere([st * ca, st * sa, ct]);
                let v = self.eval(&p);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Chordal covering radius of the `n`-lattice used by [`Weight::oscillation`].
    pub fn lattice_mesh(n: usize) -> f64 {
        std::f64::consts::PI * std::f64::consts::SQRT_2 / (4.0 * n as f64)
    }

    /// Certified oscillation bound from an equal-angle lattice with `n + 1`
    /// latitude rings. The lattices for `n, n/2, n/4, ...` (down to 64) are
    /// nested and the smallest of their bounds is reported, so the bound does
    /// not increase when `n` doubles.
    pub fn oscillation_bound(&self, n: usize) -> Result<OscillationBound> {
        if n < 64 {
            return Err(Error::InvalidArgument(format!("grid resolution {n} < 64")));
        }
        let lip = self.lipschitz();
        let mut best: Option<OscillationBound> = None;
        let mut m = n;
        loop {
            let (lo, hi) = self.lattice_extrema(m);
            let inflation = 2.0 * lip * Self::lattice_mesh(m);
            let cand = OscillationBound {
                grid_oscillation: hi - lo,
                inflation,
                upper_bound: hi - lo + inflation,
                resolution: m,
            };
            if best.is_none_or(|b| cand.upper_bound < b.upper_bound) {
                best = Some(cand);
            }
            if !m.is_multiple_of(2) || m / 2 < 64 {
                break;
            }
            m /= 2;
        }
        Ok(best.expect("at least one lattice evaluated"))
    }

    /// Certified upper bound on `Omega(phi)`.
    pub fn oscillation(&self, n: usize) -> Result<f64> {
        Ok(self.oscillation_bound(n)?.upper_bound)
    }

    /// Upper bound for `sup |phi(a) - phi(b)| (1 + |log dist(a, b)|)^q` using
    /// `|phi(a) - phi(b)| <= min(Lip * t, Omega)` at chordal distance `t`.
    pub fn logq_norm_bound(&self, q: f64, omega: f64) -> f64 {
        let lip = self.lipschitz();
        if lip == 0.0 || omega == 0.0 {
            return 0.0;
        }
        // log-spaced t grid on (1e-16, 1]; on [t_k, t_k+1] the increasing
        // factor is bounded at t_k+1 and the decreasing one at t_k
        let steps = 4000;
        let lo = (1e-16f64).ln();
        let mut best: f64 = 0.0;
        for k in 0..steps {
            let t0 = (lo * (1.0 - k as f64 / steps as f64)).exp();
            let t1 = (lo * (1.0 - (k + 1) as f64 / steps as f64)).exp();
            let v = (lip * t1).min(omega) * (1.0 + t0.ln().abs()).powf(q);
            best = best.max(v);
        }
        // below 1e-16: L t (1 + |log t|)^q is increasing there for q < 37
        let t = 1e-16f64;
        best.max(lip * t * (1.0 + t.ln().abs()).powf(q))
    }

    /// Condition (B): certified `Omega(phi) < log d`, with a `log^q` modulus
    /// bound for `q > 2`.
    pub fn check_condition_b(&self, d: usize, q: f64) -> Result<ConditionBReport> {
        self.check_condition_b_at(d, q, DEFAULT_OSC_RESOLUTION)
    }

    pub fn check_condition_b_at(&self, d: usize, q: f64, resolution: usize) -> Result<ConditionBReport> {
        if q.is_nan() || q <= 2.0 {
            return Err(Error::InvalidArgument(format!("q must exceed 2, got {q}")));
        }
        if d < 2 {
            return Err(Error::InvalidArgument(format!("degree must be >= 2, got {d}")));
        }
        let omega = self.oscillation(resolution)?;
        let bound = (d as f64).ln();
        Ok(ConditionBReport {
            omega,
            bound,
            logq_norm_bound: self.logq_norm_bound(q, omega),
            passes: omega < bound,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let terms: Vec<KernelTerm> = serde_json::from_str(s)?;
        Self::new(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump(a: f64) -> Weight {
        Weight::bump(SpherePoint::ZERO, a, 0.5).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Weight::zero().eval(&SpherePoint::from_re_im(0.3, 2.0)), 0.0);
        assert!((bump(0.2).eval(&SpherePoint::ZERO) - 0.2).abs() < 1e-16);
        let expect = 0.2 * (-4.0f64).exp();
        assert!((bump(0.2).eval(&SpherePoint::Infinity) - expect).abs() < 1e-16);
        assert!((expect - 0.003663).abs() < 1e-6);
    }

    #[test]
    fn oscillation_examples() {
        assert_eq!(Weight::zero().oscillation(64).unwrap(), 0.0);
        assert!(Weight::constant(0.3).oscillation(64).unwrap() < 1e-6);
        let b = bump(0.2).oscillation_bound(256).unwrap();
        let exact = 0.2 * (1.0 - (-4.0f64).exp());
        assert!((exact - 0.19634).abs() < 1e-5);
        // poles are lattice points, so the grid hits both extrema
        assert!((b.grid_oscillation - exact).abs() < 1e-12);
        assert!(b.upper_bound >= exact && b.upper_bound <= exact + b.inflation + 1e-15);
        assert!(bump(0.2).oscillation(32).is_err());
    }

    #[test]
    fn condition_b_examples() {
        let r = Weight::zero().check_condition_b(2, 3.0).unwrap();
        assert!(r.passes && r.omega == 0.0 && r.logq_norm_bound == 0.0);
        let r = bump(0.2).check_condition_b(2, 3.0).unwrap();
        assert!(r.passes && r.omega < std::f64::consts::LN_2 && r.logq_norm_bound.is_finite());
        let r = bump(1.0).check_condition_b(2, 3.0).unwrap();
        assert!(!r.passes && r.omega > 0.98);
        assert!(matches!(bump(0.2).check_condition_b(2, 2.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn json_format() {
        let w = Weight::new(vec![
            KernelTerm {
                center: SpherePoint::ZERO,
                a: 0.2,
                b: 0.5,
            },
            KernelTerm {
                center: SpherePoint::Infinity,
                a: -0.1,
                b: 1.0,
            },
        ])
        .unwrap();
        let s = w.to_json();
        assert_eq!(s, r#"[{"center":[0.0,0.0],"a":0.2,"b":0.5},{"center":"inf","a":-0.1,"b":1.0}]"#);
        assert_eq!(Weight::from_json(&s).unwrap(), w);
        assert!(Weight::from_json(r#"[{"center":[0,0],"a":0.2,"b":0}]"#).is_err());
        assert!(Weight::from_json(r#"[{"center":[0,0],"a":0.2}]"#).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn oscillation_scales_linearly(c in -3.0f64..3.0) {
            let w = Weight::new(vec![
                KernelTerm { center: SpherePoint::from_re_im(0.5, -0.2), a: 0.3, b: 0.4 },
                KernelTerm { center: SpherePoint::from_re_im(-2.0, 1.0), a: -0.15, b: 0.7 },
            ]).unwrap();
            let base = w.oscillation_bound(128).unwrap();
            let scaled = w.scaled(c).oscillation_bound(128).unwrap();
            let tol = base.inflation * c.abs() + 1e-12;
            prop_assert!((scaled.upper_bound - c.abs() * base.upper_bound).abs() <= tol);
        }

        #[test]
        fn certified_bound_nonincreasing_under_doubling(a in 0.05f64..1.0, b in 0.05f64..1.0, re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let w = Weight::bump(SpherePoint::from_re_im(re, im), a, b).unwrap();
            let mut prev = f64::INFINITY;
            for n in [64usize, 128, 256, 512] {
                let u = w.oscillation(n).unwrap();
                prop_assert!(u <= prev);
                prev = u;
            }
        }
    }
}
