//! Divergence-free virtual element discretization of order k = 2.

mod assemble;
mod dofmap;
mod local;
pub mod manufactured;
pub mod quadrature;

pub use assemble::{assemble, solve_monolithic_direct, GlobalSystem};
pub use dofmap::DofMap;
pub use local::{
    cell_average, local_matrices, local_matrices_with_load, polygon_moment, sample_dofs, LocalElementMatrices,
    ScaledMonomials, MONOMIALS, NUM_POLY,
};
pub use quadrature::gauss_lobatto_edge_rule;

/// Shorthand for `build_dof_map`.
pub fn build_dof_map(mesh: &crate::mesh::PolygonalMesh) -> DofMap {
    DofMap::new(mesh)
}
