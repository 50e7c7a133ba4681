//! Test functions for weak-star comparisons of measures.

use std::sync::Arc;

use crate::sphere::{chordal_dist, SpherePoint};
use crate::thermo::{DiscreteMeasure, GridFunction, SphereGrid};
use crate::weights::Weight;

/// `sum mass * g(atom)` with `g` read by grid interpolation.
pub fn pair(mu: &DiscreteMeasure, g: &GridFunction) -> f64 {
    mu.integrate(|p| g.eval(p))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Probe {
    Constant,
    Coord(usize),
    Product(usize, usize),
    /// `X^2 - Y^2`, halved.
    Sectoral,
    /// `(3 Z^2 - 1) / 2`.
    Zonal,
    Kernel {
        center: SpherePoint,
        width: f64,
    },
}

/// A function on the sphere with `sup |g| <= 1` and a known chordal
/// Lipschitz constant.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub name: String,
    probe: Probe,
    pub lipschitz: f64,
}

impl TestFunction {
    pub fn eval(&self, p: &SpherePoint) -> f64 {
        let v = p.to_unit_sphere();
        match self.probe {
            Probe::Constant => 1.0,
            Probe::Coord(i) => v[i],
            Probe::Product(i, j) => v[i] * v[j],
            Probe::Sectoral => 0.5 * (v[0] * v[0] - v[1] * v[1]),
            Probe::Zonal => 0.5 * (3.0 * v[2] * v[2] - 1.0),
            Probe::Kernel { center, width } => {
                let r = chordal_dist(p, &center) / width;
                (-r * r).exp()
            }
        }
    }

    pub fn on_grid(&self, grid: Arc<SphereGrid>) -> GridFunction {
        GridFunction::from_fn(grid, |p| self.eval(p))
    }
}

/// Low-degree harmonics in the unit-sphere coordinates plus one normalised
/// kernel per weight term. Chordal distance is half the Euclidean distance
/// in the embedding, so Euclidean gradients bounds double.
#[derive(Clone, Debug)]
pub struct TestFunctionPanel {
    pub functions: Vec<TestFunction>,
}

impl TestFunctionPanel {
    pub fn new(w: &Weight) -> Self {
        let names = ["x", "y", "z"];
        let mut functions = vec![TestFunction {
            name: "one".into(),
            probe: Probe::Constant,
            lipschitz: 0.0,
        }];
        for (i, n) in names.iter().enumerate() {
            functions.push(TestFunction {
                name: (*n).into(),
                probe: Probe::Coord(i),
                lipschitz: 2.0,
            });
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            functions.push(TestFunction {
                name: format!("{}{}", names[i], names[j]),
                probe: Probe::Product(i, j),
                lipschitz: 2.0,
            });
        }
        functions.push(TestFunction {
            name: "xx-yy".into(),
            probe: Probe::Sectoral,
            lipschitz: 2.0,
        });
        functions.push(TestFunction {
            name: "zonal".into(),
            probe: Probe::Zonal,
            lipschitz: 6.0,
        });
        for (k, t) in w.terms().iter().enumerate() {
            functions.push(TestFunction {
                name: format!("kernel{k}"),
                probe: Probe::Kernel {
                    center: t.center,
                    width: t.b,
                },
                lipschitz: std::f64::consts::SQRT_2 / (t.b * std::f64::consts::E.sqrt()),
            });
        }
        TestFunctionPanel { functions }
    }

    pub fn on_grid(&self, grid: &Arc<SphereGrid>) -> Vec<GridFunction> {
        self.functions.iter().map(|f| f.on_grid(grid.clone())).collect()
    }

    /// Exact pairings `<mu, g>` for every panel function.
    pub fn pairings(&self, mu: &DiscreteMeasure) -> Vec<f64> {
        self.functions.iter().map(|f| mu.integrate(|p| f.eval(p))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn pairing_examples() {
        let grid = SphereGrid::new(1024);
        let one = GridFunction::constant(grid.clone(), 1.0);
        let mu = DiscreteMeasure::from_atoms(vec![(SpherePoint::ONE, 0.3), (SpherePoint::from_re_im(0.2, 0.7), 0.5)]);
        assert!((pair(&mu, &one) - 0.8).abs() < 1e-14);
        let g = GridFunction::from_fn(grid.clone(), |p| p.to_unit_sphere()[0]);
        let p = grid.nodes()[17];
        assert!((pair(&DiscreteMeasure::dirac(p), &g) - g.values()[17]).abs() < 1e-15);
        let roots: Vec<SpherePoint> = (0..4)
            .map(|k| SpherePoint::new(Complex64::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_2)))
            .collect();
        let re = GridFunction::from_fn(grid, |p| p.finite().map_or(0.0, |z| z.re.clamp(-1.0, 1.0)));
        assert!(pair(&DiscreteMeasure::uniform(&roots), &re).abs() < 1e-12);
    }

    #[test]
    fn panel_functions_are_bounded_and_lipschitz() {
        let w = Weight::bump(SpherePoint::ZERO, 0.2, 0.5).unwrap();
        let panel = TestFunctionPanel::new(&w);
        let pts: Vec<SpherePoint> = (0..60)
            .map(|k| {
                let t = k as f64 * 0.37;
                SpherePoint::from_re_im(2.0 * t.cos() * (0.1 + t.sin().abs()), t.sin() / (0.3 + t.cos().abs()))
            })
            .collect();
        for f in &panel.functions {
            for a in &pts {
                assert!(f.eval(a).abs() <= 1.0 + 1e-15);
                for b in &pts {
                    let d = chordal_dist(a, b);
                    assert!((f.eval(a) - f.eval(b)).abs() <= f.lipschitz * d + 1e-12, "{}", f.name);
                }
            }
        }
    }
}
