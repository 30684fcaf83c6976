//! Numerical laboratory for the projective geometry of genus-2 Jacobian
//! Kummer varieties.
//!
//! The crate builds, from a single genus-2 curve `y^2 = f(x)`, the analytic
//! Jacobian (periods, Abel-Jacobi map, theta functions), the level-2 and
//! level-3 theta embeddings, the Kummer quartic and Coble cubic with their
//! polar maps, and the secant-line geometry of the embedded surface.  On top
//! of that sit batch verification checks for the pointwise identities these
//! objects satisfy, exposed both as a library ([`checks`]) and through the
//! `kummerlab` command line tool.
//!
//! Everything is plain double precision with explicit tolerances; no symbolic
//! computation is attempted anywhere.

pub mod checks;
pub mod curve;
pub mod embed;
pub mod error;
pub mod jacobian;
pub mod maps;
pub mod periods;
pub mod projlin;
pub mod sampling;
pub mod secant;
pub mod theta;

pub use error::{Error, Result};

/// Complex double, the scalar type of the whole crate.
pub type C64 = num_complex::Complex<f64>;

/// 2π i, used all over the theta kernels.
pub(crate) const TWO_PI_I: C64 = C64::new(0.0, std::f64::consts::TAU);
pub(crate) const PI_I: C64 = C64::new(0.0, std::f64::consts::PI);
