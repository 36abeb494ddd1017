//! Numerical laboratory for radially weighted Dirichlet spaces `𝒟_α`.
//!
//! The crate builds outer functions from boundary modulus data, computes the
//! weighted Dirichlet energy along several independent routes, evaluates
//! boundary-only functionals of Carleson type, and classifies the convergence
//! of the log-singular integrals that decide membership for the `h_β` family.

pub mod acceptance;
pub mod boundary;
pub mod carleson;
pub mod corpus;
pub mod energy;
pub mod outer;
pub mod quadrature;
pub mod report;
pub mod thresholds;
