//! Residuals and Jacobians of the displacement step and the phase-field
//! step, and the Newton solver applied to each.

mod elasticity;
mod forms;
mod newton;
mod phasefield;

pub(crate) use elasticity::effective_stress;
pub use elasticity::{elasticity_jacobian, elasticity_residual, internal_force, ElasticityProblem};
pub use forms::{assemble_laplace, assemble_mass, assemble_load};
pub use newton::{newton_solve, NewtonConfig, NewtonError, NewtonReport, NonlinearProblem};
pub use phasefield::{phasefield_jacobian, phasefield_residual, PhaseFieldProblem};

use crate::fem::{CellGeometry, DofMap, FemError};
use crate::mesh::Mesh;
use crate::sparse::CsrMatrix;

/// Mesh plus everything derived from it that the assembly routines reuse.
#[derive(Debug, Clone)]
pub struct FeSystem {
    mesh: Mesh,
    geometry: CellGeometry,
    u_dofs: DofMap,
    phi_dofs: DofMap,
    u_pattern: CsrMatrix,
    phi_pattern: CsrMatrix,
    /// ∫ ψ_k for every node
    lumped_mass: Vec<f64>,
}

impl FeSystem {
    pub fn new(mesh: Mesh) -> Result<Self, FemError> {
        let geometry = CellGeometry::new(&mesh)?;
        let u_dofs = DofMap::vector(&mesh);
        let phi_dofs = DofMap::scalar(&mesh);
        let u_pattern = u_dofs.sparsity(&mesh);
        let phi_pattern = phi_dofs.sparsity(&mesh);
        let mut lumped_mass = vec![0.0; mesh.num_nodes()];
        for (c, cell) in mesh.cells().iter().enumerate() {
            let jxw = geometry.cell(c).jxw;
            for (q, n) in geometry.shape.iter().enumerate() {
                for a in 0..4 {
                    lumped_mass[cell[a]] += jxw[q] * n[a];
                }
            }
        }
        Ok(FeSystem {
            mesh,
            geometry,
            u_dofs,
            phi_dofs,
            u_pattern,
            phi_pattern,
            lumped_mass,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn geometry(&self) -> &CellGeometry {
        &self.geometry
    }

    pub fn u_dofs(&self) -> &DofMap {
        &self.u_dofs
    }

    pub fn phi_dofs(&self) -> &DofMap {
        &self.phi_dofs
    }

    pub(crate) fn u_matrix(&self) -> CsrMatrix {
        self.u_pattern.clone()
    }

    pub(crate) fn phi_matrix(&self) -> CsrMatrix {
        self.phi_pattern.clone()
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }
}

/// Nodal fields of one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// displacement, interleaved (u_x, u_y) per node (mm)
    pub u: Vec<f64>,
    /// phase field, 1 intact and 0 broken
    pub phi: Vec<f64>,
    /// augmented Lagrangian multiplier field Ξ
    pub xi: Vec<f64>,
    /// stabilization L, shared by both subproblems
    pub l: Vec<f64>,
}

impl FieldState {
    /// Undeformed, intact state: u = 0, φ = 1, Ξ = 0, L = 0.
    pub fn initial(sys: &FeSystem) -> Self {
        let n = sys.num_nodes();
        FieldState {
            u: vec![0.0; 2 * n],
            phi: vec![1.0; n],
            xi: vec![0.0; n],
            l: vec![0.0; n],
        }
    }

    pub fn min_phi(&self) -> f64 {
        self.phi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_l(&self) -> f64 {
        self.l.iter().copied().fold(0.0, f64::max)
    }
}

/// How the displacement Jacobian is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangentMode {
    /// eigenprojection derivative of the spectral split
    #[default]
    Analytic,
    /// element-wise central differences of the element residual
    FiniteDifference,
}

#[inline]
pub(crate) fn interpolate(shape: &[f64; 4], nodal: &[f64; 4]) -> f64 {
    shape[0] * nodal[0] + shape[1] * nodal[1] + shape[2] * nodal[2] + shape[3] * nodal[3]
}

#[inline]
pub(crate) fn gather4(cell: &[usize; 4], field: &[f64]) -> [f64; 4] {
    cell.map(|n| field[n])
}

#[inline]
pub(crate) fn gather8(cell: &[usize; 4], field: &[f64]) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (a, &n) in cell.iter().enumerate() {
        out[2 * a] = field[2 * n];
        out[2 * a + 1] = field[2 * n + 1];
    }
    out
}

#[inline]
pub(crate) fn cell_dofs8(cell: &[usize; 4]) -> [usize; 8] {
    let mut out = [0; 8];
    for (a, &n) in cell.iter().enumerate() {
        out[2 * a] = 2 * n;
        out[2 * a + 1] = 2 * n + 1;
    }
    out
}
