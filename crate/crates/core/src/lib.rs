//! Numerics for a degenerate quasilinear parabolic pricing equation:
//! sampled structural checks on Hamiltonians, gauge transformations,
//! Osgood-type moduli, analytic barriers and regularity constants, and a
//! monotone explicit finite-difference solver with a Monte Carlo oracle.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod mbs;
pub mod osgood;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use report::{CheckReport, ModulusFamily, ModulusShape, SampleRecord};
