//! Helmholtz decompositions of discrete vector fields together with the
//! measuring instruments of vBMO theory: BMO and boundary seminorms, cut-off
//! families, normal coordinates, Whitney/Jones extension and Bogovskii solves.

pub mod cutoffs;
pub mod domains;
pub mod error;
pub mod fields;
pub mod harness;
pub mod helmholtz;
pub mod linalg;
pub mod seminorms;
pub mod whitney;

pub use error::{Error, Result};

/// Points carry three slots; only the first `ndim` are meaningful.
pub type Point = [f64; 3];
