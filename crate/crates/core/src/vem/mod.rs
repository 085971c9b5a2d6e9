//! Conforming virtual elements of order 1 to 4 on convex polygons.

mod assembly;
mod element;
pub mod monomial;
pub mod quadrature;

pub use assembly::{assemble, DofMap, Discretization};
pub use element::{build_element, edge_node_dof, local_ndof, moment_dof, VemElement};
pub use monomial::MonomialBasis;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VemError {
    #[error("local projector matrix is singular")]
    SingularProjector,
    #[error("order {0} is not supported (expected 1..=4)")]
    UnsupportedOrder(usize),
    #[error("no Dirichlet degree of freedom; the system is singular")]
    NoDirichlet,
}
