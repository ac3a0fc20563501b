//! Multiple SLE(0) curves as real loci of rational functions.
//!
//! The crate computes the poles of the canonical rational map attached to a
//! configuration of critical points and a link pattern, the null-vector
//! interaction terms and partition functions built from them, the real locus
//! of the map, and the Loewner flow that grows the curves.

pub mod error;
pub mod locus;
pub mod loewner;
pub mod nullvec;
pub mod pattern;
pub mod poles;
pub mod poly;
pub mod rational;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use pattern::{catalan, LinkPattern};
pub use poly::{ComplexPoint, Polynomial};
pub use rational::{Configuration, Genericity, RationalMap};
