use serde::{Deserialize, Serialize};

use crate::sphere::{PointIndex, RationalMap, SpherePoint, POINT_TOL};

/// A finite non-negative combination of Dirac masses on the sphere.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(SpherePoint, f64)>,
}

/// Atom written as `[re, im, mass]`; the point at infinity as `[null, null, mass]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtomTriple(pub SpherePoint, pub f64);

impl Serialize for AtomTriple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (re, im) = match self.0.re_im() {
            Some([re, im]) => (Some(re), Some(im)),
            None => (None, None),
        };
        (re, im, self.1).serialize(s)
    }
}

impl<'de> Deserialize<'de> for AtomTriple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let (re, im, mass) = <(Option<f64>, Option<f64>, f64)>::deserialize(d)?;
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(D::Error::custom("atom mass must be finite and non-negative"));
        }
        let p = match (re, im) {
            (Some(re), Some(im)) if re.is_finite() && im.is_finite() => SpherePoint::from_re_im(re, im),
            (None, None) => SpherePoint::Infinity,
            _ => return Err(D::Error::custom("atom coordinates must both be finite or both null")),
        };
        Ok(AtomTriple(p, mass))
    }
}

impl DiscreteMeasure {
    pub fn to_triples(&self) -> Vec<AtomTriple> {
        self.atoms.iter().map(|(p, m)| AtomTriple(*p, *m)).collect()
    }

    /// Rebuilds a measure from triples without merging.
    pub fn from_triples(triples: &[AtomTriple]) -> Self {
        DiscreteMeasure {
            atoms: triples.iter().map(|t| (t.0, t.1)).collect(),
        }
    }

    pub fn new() -> Self {
        DiscreteMeasure::default()
    }

    /// Builds a measure, merging atoms within [`POINT_TOL`].
    pub fn from_atoms(atoms: Vec<(SpherePoint, f64)>) -> Self {
        Self::from_atoms_with_tol(atoms, POINT_TOL)
    }

    /// Builds a measure, merging atoms within `tol` (masses summed, first
    /// occurrence kept as the location). Atoms end up in lexicographic order.
    pub fn from_atoms_with_tol(atoms: Vec<(SpherePoint, f64)>, tol: f64) -> Self {
        let mut index = PointIndex::new(tol);
        let mut pts: Vec<SpherePoint> = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (p, m) in atoms {
            assert!(m >= 0.0 && m.is_finite(), "atom masses must be finite and non-negative");
            match index.find(&p, tol, &pts) {
                Some(id) => masses[id] += m,
                None => {
                    index.insert(&p, pts.len());
                    pts.push(p);
                    masses.push(m);
                }
            }
        }
        let mut atoms: Vec<(SpherePoint, f64)> = pts.into_iter().zip(masses).collect();
        atoms.sort_by(|a, b| a.0.lex_cmp(&b.0));
        DiscreteMeasure { atoms }
    }

    pub fn dirac(p: SpherePoint) -> Self {
        DiscreteMeasure { atoms: vec![(p, 1.0)] }
    }

    /// Equal masses summing to one.
    pub fn uniform(points: &[SpherePoint]) -> Self {
        let m = 1.0 / points.len() as f64;
        Self::from_atoms(points.iter().map(|p| (*p, m)).collect())
    }

    pub fn atoms(&self) -> &[(SpherePoint, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).fold(0.0, |s, v| s + v)
    }

    /// Rescales to total mass one; the zero measure is returned unchanged.
    pub fn normalized(&self) -> Self {
        let t = self.total_mass();
        if t == 0.0 {
            return self.clone();
        }
        self.scaled(1.0 / t)
    }

    pub fn scaled(&self, c: f64) -> Self {
        DiscreteMeasure {
            atoms: self.atoms.iter().map(|(p, m)| (*p, m * c)).collect(),
        }
    }

    /// `sum mass * g(atom)`.
    pub fn integrate(&self, g: impl Fn(&SpherePoint) -> f64) -> f64 {
        self.atoms.iter().map(|(p, m)| m * g(p)).fold(0.0, |s, v| s + v)
    }

    /// Image measure under `f`, atoms merged within `tol`.
    pub fn push_forward(&self, f: &RationalMap, tol: f64) -> Self {
        Self::from_atoms_with_tol(self.atoms.iter().map(|(p, m)| (f.eval(p), *m)).collect(), tol)
    }

    /// Largest per-atom mass mismatch between two measures, matching atoms
    /// within `tol`; unmatched atoms count with their full mass.
    pub fn max_mass_discrepancy(&self, other: &DiscreteMeasure, tol: f64) -> f64 {
        let mut index = PointIndex::new(tol);
        let pts: Vec<SpherePoint> = other.atoms.iter().map(|a| a.0).collect();
        for (i, p) in pts.iter().enumerate() {
            index.insert(p, i);
        }
        let mut matched = vec![0.0; pts.len()];
        let mut worst: f64 = 0.0;
        for (p, m) in &self.atoms {
            match index.find(p, tol, &pts) {
                Some(id) => matched[id] += m,
                None => worst = worst.max(*m),
            }
        }
        for (i, (_, m)) in other.atoms.iter().enumerate() {
            worst = worst.max((matched[i] - m).abs());
        }
        worst
    }
}
