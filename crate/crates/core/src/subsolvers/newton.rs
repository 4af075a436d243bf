use thiserror::Error;

use crate::fem::{apply_dirichlet, Constraints};
use crate::solver::{DirectSolver, SolverError};
use crate::sparse::{norm2, CsrMatrix};

/// A square nonlinear system r(x) = 0 with optional Dirichlet dofs.
pub trait NonlinearProblem {
    fn dim(&self) -> usize;
    /// Residual with constrained entries zeroed.
    fn residual(&self, x: &[f64]) -> Vec<f64>;
    /// Jacobian of the unconstrained residual.
    fn jacobian(&self, x: &[f64]) -> CsrMatrix;
    fn constraints(&self) -> Option<&Constraints>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    /// linear solves performed
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// ‖r‖₂ before each iteration and after the last one
    pub history: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonError {
    #[error("singular Jacobian at Newton iteration {iteration}: {source}")]
    Singular { iteration: usize, source: SolverError },
    #[error("non-finite residual at Newton iteration {iteration}")]
    NonFinite { iteration: usize },
}

/// Plain Newton iteration with a direct linear solver. Constrained dofs of
/// the initial guess are overwritten with their prescribed values and never
/// change afterwards. Stops when ‖r‖₂ ≤ tol.
pub fn newton_solve<P: NonlinearProblem + ?Sized>(
    problem: &P,
    initial: &[f64],
    config: &NewtonConfig,
    solver: &mut DirectSolver,
) -> Result<(Vec<f64>, NewtonReport), NewtonError> {
    let mut x = initial.to_vec();
    let homogeneous = problem.constraints().map(|c| {
        c.apply_to(&mut x);
        c.homogeneous()
    });
    let mut r = problem.residual(&x);
    let mut norm = norm2(&r);
    let mut history = vec![norm];
    let mut iterations = 0;
    while !(norm <= config.tol) && iterations < config.max_iter {
        if !norm.is_finite() {
            return Err(NewtonError::NonFinite { iteration: iterations });
        }
        let mut jac = problem.jacobian(&x);
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        if let Some(h) = &homogeneous {
            apply_dirichlet(&mut jac, &mut rhs, h);
        }
        let dx = solver
            .solve(&jac, &rhs)
            .map_err(|source| NewtonError::Singular { iteration: iterations, source })?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        iterations += 1;
        r = problem.residual(&x);
        norm = norm2(&r);
        history.push(norm);
    }
    if !norm.is_finite() {
        return Err(NewtonError::NonFinite { iteration: iterations });
    }
    Ok((
        x,
        NewtonReport {
            iterations,
            final_residual: norm,
            converged: norm <= config.tol,
            history,
        },
    ))
}
