//! Q1 finite-element machinery shared by the displacement and phase-field
//! problems.

mod dofs;
mod element;

pub use dofs::{apply_dirichlet, build_constraints, BcPreset, Constraints, DofMap, FieldKind};
pub use element::{
    map_gradients, shape_values, CellGeometry, CellValues, Quadrature, REF_CORNERS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("degenerate cell{}: Jacobian determinant {det_j:e}", .cell.map(|c| format!(" {c}")).unwrap_or_default())]
    DegenerateCell { cell: Option<usize>, det_j: f64 },
    #[error("negative loading time {0}")]
    NegativeTime(f64),
    #[error("dof {dof} constrained to both {first} and {second}")]
    ConflictingConstraint { dof: usize, first: f64, second: f64 },
}
