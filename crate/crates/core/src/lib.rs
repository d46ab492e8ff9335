//! Finite-energy GKP state preparation in a truncated Fock space.

pub mod circuit;
pub mod error;
pub mod fock;
pub mod gkp;
pub mod logical;
pub mod metrics;
pub mod optimizer;
pub mod quadrature;

pub use error::{Error, Result};
