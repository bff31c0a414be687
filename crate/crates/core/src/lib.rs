//! Divergence-free virtual elements of order 2 for the 2D Stokes problem,
//! static condensation to an interface saddle-point problem, and a BDDC
//! preconditioned conjugate gradient solver for it.

pub mod error;
pub mod linalg;
pub mod mesh;

pub use error::{Error, Result};
pub mod vem;
pub mod partition;
pub mod krylov;
pub mod schur;
pub mod bddc;
pub mod harness;
