//! Lagrange finite elements for linear elasticity and the deformation problem.

pub mod assembly;
pub mod field;
pub mod quadrature;
pub mod solver;
pub mod space;

pub use assembly::{
    assemble_body_load, assemble_deformation, assemble_elasticity, assemble_load,
    assemble_traction, constrain_rhs, dirichlet_mask, lame, normal_mask, point_load, LinearSystem,
    MaterialField, SparseMatrix,
};
pub use field::{DiscreteField, ElementFields};
pub use solver::{solve, Factorization, DEFAULT_REL_TOL};
pub use space::{Degree, ElementGeometry, FeSpace};
