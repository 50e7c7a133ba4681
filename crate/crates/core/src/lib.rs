//! Equilibrium states of weighted rational maps on the Riemann sphere, their
//! weighted repelling periodic points, and the holomorphic motions of those
//! points across a one-parameter family.
//!
//! The crate is organised bottom-up:
//!
//! * [`sphere`]: points, the chordal metric, rational maps and root finding.
//! * [`weights`]: Gaussian-kernel weights and their oscillation certificates.
//! * [`thermo`]: the transfer operator, pressure, conformal measure and
//!   equilibrium state at the base parameter.
//! * [`cycles`]: periodic points of `f^n` and weighted cycle measures.
//! * [`motion`]: parameter families, continuation of periodic points into
//!   motion graphs, web measures, tubes and the Lyapunov stability test.
//! * [`metrics`]: pairings with test functions and the Wasserstein-1 distance.
//! * [`cache`]: on-disk cache of preimage fibers.

pub mod cache;
pub mod cycles;
pub mod error;
pub mod metrics;
pub mod motion;
pub mod sphere;
pub mod thermo;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use sphere::{chordal_dist, RationalMap, SpherePoint};
pub use weights::Weight;
