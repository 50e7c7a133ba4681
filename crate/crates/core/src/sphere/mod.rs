//! Arithmetic on the Riemann sphere.

mod map;
mod point;
pub mod roots;

pub use map::{Orbit, RationalMap};
pub(crate) use point::PointIndex;
pub use point::{chordal_dist, Chart, Mobius, SpherePoint, POINT_TOL};
