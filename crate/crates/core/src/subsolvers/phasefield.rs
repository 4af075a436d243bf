//! Phase-field step:
//! a_φ(φ, ψ) = L(φ - φ_prev, ψ) + G_c ε (∇φ, ∇ψ) - G_c/ε (1 - φ, ψ)
//!           + (1-κ)(φ σ⁺(u):e(u), ψ) + (Ξ + γ[φ - φ_old]⁺, ψ).
//!
//! The last term is integrated with nodal quadrature, so the constraint and
//! the multiplier live on the same points as the nodewise update of Ξ.

use super::newton::NonlinearProblem;
use super::{gather4, gather8, interpolate, FeSystem};
use crate::fem::{CellValues, Constraints};
use crate::material::{strain, tensile_energy_density, MaterialParams};
use crate::sparse::CsrMatrix;

/// The phase-field subproblem of one outer iteration. `u` is the fresh
/// displacement iterate, `phi_prev` the previous outer iterate and
/// `phi_old` the converged field of the previous loading step.
pub struct PhaseFieldProblem<'a> {
    pub sys: &'a FeSystem,
    pub params: &'a MaterialParams,
    pub u: &'a [f64],
    pub phi_prev: &'a [f64],
    pub phi_old: &'a [f64],
    pub xi: &'a [f64],
    pub l: &'a [f64],
}

struct PhaseCell {
    phi_prev: [f64; 4],
    l: [f64; 4],
    /// σ⁺:e at the quadrature points
    drive: [f64; 4],
}

impl PhaseFieldProblem<'_> {
    fn cell_data(&self, cell: &[usize; 4], cv: &CellValues) -> PhaseCell {
        let ul = gather8(cell, self.u);
        let mut drive = [0.0; 4];
        for (q, d) in drive.iter_mut().enumerate() {
            let mut g = [[0.0; 2]; 2];
            for a in 0..4 {
                for i in 0..2 {
                    for j in 0..2 {
                        g[i][j] += ul[2 * a + i] * cv.grads[q][a][j];
                    }
                }
            }
            *d = tensile_energy_density(&strain(g), self.params.mu, self.params.lambda);
        }
        PhaseCell {
            phi_prev: gather4(cell, self.phi_prev),
            l: gather4(cell, self.l),
            drive,
        }
    }

    fn for_each_cell(&self, mut f: impl FnMut(&[usize; 4], &CellValues, &PhaseCell)) {
        for (c, cell) in self.sys.mesh().cells().iter().enumerate() {
            let cv = self.sys.geometry().cell(c);
            let data = self.cell_data(cell, cv);
            f(cell, cv, &data);
        }
    }
}

impl NonlinearProblem for PhaseFieldProblem<'_> {
    fn dim(&self) -> usize {
        self.sys.phi_dofs().num_dofs()
    }

    fn residual(&self, phi: &[f64]) -> Vec<f64> {
        let p = self.params;
        let shape = &self.sys.geometry().shape;
        let mut r = vec![0.0; phi.len()];
        self.for_each_cell(|cell, cv, d| {
            let pl = gather4(cell, phi);
            for q in 0..4 {
                let n = &shape[q];
                let ph = interpolate(n, &pl);
                let grad = (0..4).fold([0.0; 2], |acc, a| {
                    [acc[0] + pl[a] * cv.grads[q][a][0], acc[1] + pl[a] * cv.grads[q][a][1]]
                });
                let l = interpolate(n, &d.l);
                let source = l * (ph - interpolate(n, &d.phi_prev)) - p.gc / p.eps * (1.0 - ph)
                    + (1.0 - p.kappa) * ph * d.drive[q];
                let diff = p.gc * p.eps;
                for a in 0..4 {
                    let g = cv.grads[q][a];
                    r[cell[a]] += cv.jxw[q] * (source * n[a] + diff * (grad[0] * g[0] + grad[1] * g[1]));
                }
            }
        });
        for (k, m) in self.sys.lumped_mass().iter().enumerate() {
            r[k] += m * (self.xi[k] + p.gamma * (phi[k] - self.phi_old[k]).max(0.0));
        }
        r
    }

    fn jacobian(&self, phi: &[f64]) -> CsrMatrix {
        let p = self.params;
        let shape = &self.sys.geometry().shape;
        let mut m = self.sys.phi_matrix();
        self.for_each_cell(|cell, cv, d| {
            let mut block = [[0.0; 4]; 4];
            for q in 0..4 {
                let n = &shape[q];
                let reaction = interpolate(n, &d.l) + p.gc / p.eps + (1.0 - p.kappa) * d.drive[q];
                let diff = p.gc * p.eps;
                let g = &cv.grads[q];
                for a in 0..4 {
                    for b in 0..4 {
                        block[a][b] += cv.jxw[q]
                            * (reaction * n[a] * n[b] + diff * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
                    }
                }
            }
            m.add_block(cell, &block);
        });
        // semismooth: the penalty is inactive at equality
        for (k, mass) in self.sys.lumped_mass().iter().enumerate() {
            if phi[k] > self.phi_old[k] {
                m.add(k, k, p.gamma * mass);
            }
        }
        m
    }

    fn constraints(&self) -> Option<&Constraints> {
        None
    }
}

/// a_φ(φ, ψ_l) for every basis function.
pub fn phasefield_residual(problem: &PhaseFieldProblem<'_>, phi: &[f64]) -> Vec<f64> {
    problem.residual(phi)
}

pub fn phasefield_jacobian(problem: &PhaseFieldProblem<'_>, phi: &[f64]) -> CsrMatrix {
    problem.jacobian(phi)
}
