//! Numerical toolkit for absolutely minimizing functions of a convex
//! Hamiltonian `H(Du)`: Legendre transforms, Hopf-Lax flows, generalized
//! cones, convexity-criterion checks, the patching construction and a
//! flow-midpoint Dirichlet solver.
//!
//! Grid modules work in one or two space dimensions; the geometry of `H`
//! (level sets, cones, subdifferentials) works in up to three.

pub mod acceptance;
pub mod aronsson;
pub mod criteria;
pub mod error;
pub mod ext;
pub mod field;
pub mod geometry;
pub mod hamiltonian;
pub mod hopflax;
pub mod par;
pub mod patching;
pub mod solver;

pub use error::{Error, Result};
pub use ext::INF;
pub use field::{Grid, ScalarField};
pub use hamiltonian::{Family, HamiltonianModel};
