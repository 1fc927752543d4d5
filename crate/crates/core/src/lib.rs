//! Validated numerics for a Hopf bifurcation in the planar Navier-Stokes equations.
//!
//! The crate provides outward-rounded enclosure arithmetic ([`ball`]), time-Fourier
//! polynomials ([`timepoly`]), space-time field enclosures ([`field`]), bounds on the
//! advection form and resolvents ([`operators`]), the fixed-point maps ([`maps`]),
//! contraction certificates ([`contraction`]) and the floating-point solvers that
//! produce their inputs ([`approx`]).

pub mod approx;
pub mod ball;
pub mod contraction;
pub mod error;
pub mod field;
pub mod maps;
pub mod operators;
pub mod timepoly;

pub use ball::Ball;
pub use error::{Error, Result};
pub use field::{FieldEnclosure, Mode, ModeIndex, SpaceParams};
pub use timepoly::{FreqIndexMap, TailRadii, TimePoly};
