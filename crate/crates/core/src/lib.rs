//! Numerics for radial multiple Schramm–Loewner evolution and its
//! infinite-slit limit.
//!
//! The crate is organised around five pieces:
//!
//! * [`measure`]: probability measures on the unit circle, their
//!   Herglotz / ψ / η transforms, boundary inversion and the circular
//!   Wasserstein distance.
//! * [`sde`]: the interacting driving-point SDE in angular coordinates.
//! * [`loewner`]: forward and reverse radial Loewner flows driven by
//!   measure-valued paths, curve tips and hull boundaries.
//! * [`semigroup`]: the Burgers–Loewner equation solved by characteristics,
//!   coefficient and moment hierarchies, and Σ/η transform algebra.
//! * [`limit`]: diagnostics that compare particle systems with the
//!   deterministic limit (CDF relation, convergence studies, support time).
//!
//! Supporting modules provide truncated power series ([`series`]) and an
//! adaptive Dormand–Prince integrator for complex ODEs ([`ode`]).

pub mod error;
pub mod limit;
pub mod loewner;
pub mod measure;
pub mod ode;
pub mod sde;
pub mod semigroup;
pub mod series;

pub use error::{Error, Result};
pub use measure::{CircleMeasure, HerglotzField, MomentSequence};
pub use num_complex::Complex64;

/// Full turn, used throughout for angular bookkeeping.
pub const TAU: f64 = std::f64::consts::TAU;
