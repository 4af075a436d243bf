//! Displacement step: a_u(u, v) = L(u - u_prev, v) + (g(φ) σ⁺(u), e(v)) + (σ⁻(u), e(v)).

use std::f64::consts::FRAC_1_SQRT_2;

use super::newton::NonlinearProblem;
use super::{cell_dofs8, gather4, gather8, interpolate, FeSystem, TangentMode};
use crate::fem::{CellValues, Constraints};
use crate::material::{
    degradation, isotropic_tangent, strain, stress_split, tensile_tangent, MaterialParams,
    SymTensor2,
};
use crate::sparse::CsrMatrix;

/// Local element data: 4 nodes × 2 components, interleaved.
struct ElasticCell {
    u: [f64; 8],
    u_prev: [f64; 8],
    phi: [f64; 4],
    l: [f64; 4],
}

/// Mandel strain of the virtual displacement N_a e_i.
#[inline]
fn b_vector(grad: [f64; 2], comp: usize) -> [f64; 3] {
    if comp == 0 {
        [grad[0], 0.0, FRAC_1_SQRT_2 * grad[1]]
    } else {
        [0.0, grad[1], FRAC_1_SQRT_2 * grad[0]]
    }
}

#[inline]
fn cell_strain(grads: &[[f64; 2]; 4], u: &[f64; 8]) -> SymTensor2 {
    let mut g = [[0.0; 2]; 2];
    for a in 0..4 {
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += u[2 * a + i] * grads[a][j];
            }
        }
    }
    strain(g)
}

/// Stress transmitted by the solid: g(φ) σ⁺ + σ⁻, or the undegraded sum.
pub(crate) fn effective_stress(e: &SymTensor2, phi: f64, p: &MaterialParams, degraded: bool) -> SymTensor2 {
    let (plus, minus) = stress_split(e, p.mu, p.lambda);
    let g = if degraded { degradation(phi, p.kappa) } else { 1.0 };
    g * plus + minus
}

fn cell_residual(
    cv: &CellValues,
    shape: &[[f64; 4]; 4],
    p: &MaterialParams,
    data: &ElasticCell,
    with_stabilization: bool,
) -> [f64; 8] {
    let mut r = [0.0; 8];
    for q in 0..4 {
        let n = &shape[q];
        let grads = &cv.grads[q];
        let e = cell_strain(grads, &data.u);
        let phi = interpolate(n, &data.phi);
        let s = effective_stress(&e, phi, p, true).to_mandel();
        let mut l_du = [0.0; 2];
        if with_stabilization {
            let l = interpolate(n, &data.l);
            for i in 0..2 {
                let mut du = 0.0;
                for a in 0..4 {
                    du += n[a] * (data.u[2 * a + i] - data.u_prev[2 * a + i]);
                }
                l_du[i] = l * du;
            }
        }
        for a in 0..4 {
            for i in 0..2 {
                let b = b_vector(grads[a], i);
                let val = s[0] * b[0] + s[1] * b[1] + s[2] * b[2] + l_du[i] * n[a];
                r[2 * a + i] += cv.jxw[q] * val;
            }
        }
    }
    r
}

fn cell_tangent(cv: &CellValues, shape: &[[f64; 4]; 4], p: &MaterialParams, data: &ElasticCell) -> [[f64; 8]; 8] {
    let mut k = [[0.0; 8]; 8];
    let full = isotropic_tangent(p.mu, p.lambda);
    for q in 0..4 {
        let n = &shape[q];
        let grads = &cv.grads[q];
        let e = cell_strain(grads, &data.u);
        let g = degradation(interpolate(n, &data.phi), p.kappa);
        let dplus = tensile_tangent(&e, p.mu, p.lambda);
        // g D⁺ + (C - D⁺)
        let mut d = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = full[i][j] + (g - 1.0) * dplus[i][j];
            }
        }
        let l = interpolate(n, &data.l);
        let mut bs = [[0.0; 3]; 8];
        for a in 0..4 {
            bs[2 * a] = b_vector(grads[a], 0);
            bs[2 * a + 1] = b_vector(grads[a], 1);
        }
        let w = cv.jxw[q];
        for row in 0..8 {
            let db = [
                d[0][0] * bs[row][0] + d[1][0] * bs[row][1] + d[2][0] * bs[row][2],
                d[0][1] * bs[row][0] + d[1][1] * bs[row][1] + d[2][1] * bs[row][2],
                d[0][2] * bs[row][0] + d[1][2] * bs[row][1] + d[2][2] * bs[row][2],
            ];
            for col in 0..8 {
                let mut v = db[0] * bs[col][0] + db[1] * bs[col][1] + db[2] * bs[col][2];
                if row % 2 == col % 2 {
                    v += l * n[row / 2] * n[col / 2];
                }
                k[row][col] += w * v;
            }
        }
    }
    k
}

fn cell_tangent_fd(cv: &CellValues, shape: &[[f64; 4]; 4], p: &MaterialParams, data: &mut ElasticCell) -> [[f64; 8]; 8] {
    let scale = data.u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
    let h = 1e-6 * scale;
    let mut k = [[0.0; 8]; 8];
    for col in 0..8 {
        let orig = data.u[col];
        data.u[col] = orig + h;
        let rp = cell_residual(cv, shape, p, data, true);
        data.u[col] = orig - h;
        let rm = cell_residual(cv, shape, p, data, true);
        data.u[col] = orig;
        for row in 0..8 {
            k[row][col] = (rp[row] - rm[row]) / (2.0 * h);
        }
    }
    k
}

/// The displacement subproblem of one outer iteration: u_prev and φ are the
/// previous outer iterate, L the current stabilization.
pub struct ElasticityProblem<'a> {
    pub sys: &'a FeSystem,
    pub params: &'a MaterialParams,
    pub u_prev: &'a [f64],
    pub phi: &'a [f64],
    pub l: &'a [f64],
    pub constraints: &'a Constraints,
    pub tangent: TangentMode,
}

impl ElasticityProblem<'_> {
    fn cell_data(&self, cell: &[usize; 4], u: &[f64]) -> ElasticCell {
        ElasticCell {
            u: gather8(cell, u),
            u_prev: gather8(cell, self.u_prev),
            phi: gather4(cell, self.phi),
            l: gather4(cell, self.l),
        }
    }

    /// Residual over all dofs, constrained entries included.
    pub fn full_residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; u.len()];
        let shape = &self.sys.geometry().shape;
        for (c, cell) in self.sys.mesh().cells().iter().enumerate() {
            let data = self.cell_data(cell, u);
            let rc = cell_residual(self.sys.geometry().cell(c), shape, self.params, &data, true);
            for (k, d) in cell_dofs8(cell).into_iter().enumerate() {
                r[d] += rc[k];
            }
        }
        r
    }
}

impl NonlinearProblem for ElasticityProblem<'_> {
    fn dim(&self) -> usize {
        self.sys.u_dofs().num_dofs()
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut r = self.full_residual(u);
        self.constraints.zero_entries(&mut r);
        r
    }

    fn jacobian(&self, u: &[f64]) -> CsrMatrix {
        let mut m = self.sys.u_matrix();
        let shape = &self.sys.geometry().shape;
        for (c, cell) in self.sys.mesh().cells().iter().enumerate() {
            let cv = self.sys.geometry().cell(c);
            let mut data = self.cell_data(cell, u);
            let k = match self.tangent {
                TangentMode::Analytic => cell_tangent(cv, shape, self.params, &data),
                TangentMode::FiniteDifference => cell_tangent_fd(cv, shape, self.params, &mut data),
            };
            m.add_block(&cell_dofs8(cell), &k);
        }
        m
    }

    fn constraints(&self) -> Option<&Constraints> {
        Some(self.constraints)
    }
}

/// a_u(u, v_k) for every basis function; constrained entries are zero.
pub fn elasticity_residual(problem: &ElasticityProblem<'_>, u: &[f64]) -> Vec<f64> {
    problem.residual(u)
}

/// Derivative of [`elasticity_residual`] before constraints are applied.
pub fn elasticity_jacobian(problem: &ElasticityProblem<'_>, u: &[f64]) -> CsrMatrix {
    problem.jacobian(u)
}

/// ∫ σ : e(v_k) over all dofs without stabilization or constraints. Summing
/// the entries of a constrained boundary gives the reaction force there.
pub fn internal_force(sys: &FeSystem, params: &MaterialParams, u: &[f64], phi: &[f64], degraded: bool) -> Vec<f64> {
    let mut f = vec![0.0; u.len()];
    let shape = &sys.geometry().shape;
    for (c, cell) in sys.mesh().cells().iter().enumerate() {
        let cv = sys.geometry().cell(c);
        let ul = gather8(cell, u);
        let pl = gather4(cell, phi);
        for q in 0..4 {
            let e = cell_strain(&cv.grads[q], &ul);
            let s = effective_stress(&e, interpolate(&shape[q], &pl), params, degraded).to_mandel();
            for a in 0..4 {
                for i in 0..2 {
                    let b = b_vector(cv.grads[q][a], i);
                    f[2 * cell[a] + i] += cv.jxw[q] * (s[0] * b[0] + s[1] * b[1] + s[2] * b[2]);
                }
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_constraints, BcPreset};
    use crate::mesh::generate_unit_square_mesh;
    use crate::subsolvers::{assemble_mass, FieldState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(mu: f64, lambda: f64) -> MaterialParams {
        MaterialParams {
            mu,
            lambda,
            gc: 2.7e-3,
            kappa: 1e-10,
            eps: 0.1,
            gamma: 1.0,
        }
    }

    #[test]
    fn zero_state_zero_residual() {
        let sys = FeSystem::new(generate_unit_square_mesh(1)).unwrap();
        let st = FieldState::initial(&sys);
        let cons = build_constraints(sys.mesh(), sys.u_dofs(), &BcPreset::SenShear { u_bar: 1.0 }, 0.0).unwrap();
        let p = params(80.77, 121.15);
        let prob = ElasticityProblem {
            sys: &sys,
            params: &p,
            u_prev: &st.u,
            phi: &st.phi,
            l: &vec![1.0; sys.num_nodes()],
            constraints: &cons,
            tangent: TangentMode::Analytic,
        };
        assert!(elasticity_residual(&prob, &st.u).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stabilization_only_is_weighted_mass() {
        let sys = FeSystem::new(generate_unit_square_mesh(1)).unwrap();
        let n = sys.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u_prev: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let phi = vec![1.0; n];
        let p = params(0.0, 0.0);
        let cons = Constraints::new(2 * n);
        let prob = ElasticityProblem {
            sys: &sys,
            params: &p,
            u_prev: &u_prev,
            phi: &phi,
            l: &l,
            constraints: &cons,
            tangent: TangentMode::Analytic,
        };
        let r = elasticity_residual(&prob, &u);
        let mass = assemble_mass(&sys, Some(&l));
        for comp in 0..2 {
            let du: Vec<f64> = (0..n).map(|k| u[2 * k + comp] - u_prev[2 * k + comp]).collect();
            let expect = mass.mul_vec(&du);
            for k in 0..n {
                assert!((r[2 * k + comp] - expect[k]).abs() < 1e-14);
            }
        }
    }

    /// Closed-form Q1 plane stiffness of the unit square with 2×2 Gauss
    /// points, written out from the strain-displacement matrix.
    fn unit_square_stiffness(mu: f64, lambda: f64) -> [[f64; 8]; 8] {
        let g = 1.0 / 3f64.sqrt();
        let pts = [(-g, -g), (g, -g), (g, g), (-g, g)];
        let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        let c = [
            [lambda + 2.0 * mu, lambda, 0.0],
            [lambda, lambda + 2.0 * mu, 0.0],
            [0.0, 0.0, mu],
        ];
        let mut k = [[0.0; 8]; 8];
        for (xi, eta) in pts {
            // unit square: x = (1+xi)/2, so d/dx = 2 d/dxi; jxw = 1/4
            let mut bm = [[0.0; 8]; 3];
            for (a, (cx, cy)) in corners.iter().enumerate() {
                let dx = 0.5 * cx * (1.0 + cy * eta);
                let dy = 0.5 * cy * (1.0 + cx * xi);
                bm[0][2 * a] = dx;
                bm[1][2 * a + 1] = dy;
                bm[2][2 * a] = dy;
                bm[2][2 * a + 1] = dx;
            }
            for i in 0..8 {
                for j in 0..8 {
                    let mut v = 0.0;
                    for r in 0..3 {
                        for s in 0..3 {
                            v += bm[r][i] * c[r][s] * bm[s][j];
                        }
                    }
                    k[i][j] += 0.25 * v;
                }
            }
        }
        k
    }

    fn single_cell() -> FeSystem {
        let text = "quadmesh 1\nnodes 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\nbfacets 0\n";
        FeSystem::new(crate::mesh::parse_mesh(text).unwrap()).unwrap()
    }

    #[test]
    fn uniform_extension_matches_linear_elasticity() {
        let sys = single_cell();
        let (mu, lambda) = (80.77, 121.15);
        let p = MaterialParams { kappa: 1e-12, ..params(mu, lambda) };
        // u = (0.01 x, 0.004 y): pure tension, split inactive
        let u: Vec<f64> = sys.mesh().nodes().iter().flat_map(|x| [0.01 * x[0], 0.004 * x[1]]).collect();
        let cons = Constraints::new(8);
        let zeros = vec![0.0; 4];
        let prob = ElasticityProblem {
            sys: &sys,
            params: &p,
            u_prev: &u,
            phi: &[1.0; 4],
            l: &zeros,
            constraints: &cons,
            tangent: TangentMode::Analytic,
        };
        let r = elasticity_residual(&prob, &u);
        let k = unit_square_stiffness(mu, lambda);
        for i in 0..8 {
            let expect: f64 = (0..8).map(|j| k[i][j] * u[j]).sum();
            assert!((r[i] - expect).abs() < 1e-9 * expect.abs().max(1.0), "{i}: {} vs {expect}", r[i]);
        }
        let jac = elasticity_jacobian(&prob, &u);
        for i in 0..8 {
            for j in 0..8 {
                assert!((jac.get(i, j) - k[i][j]).abs() < 1e-10 * (mu + lambda));
            }
        }
    }

    #[test]
    fn compression_uses_undegraded_stiffness() {
        let sys = single_cell();
        let (mu, lambda) = (8.0, 12.0);
        let p = params(mu, lambda);
        let u: Vec<f64> = sys.mesh().nodes().iter().flat_map(|x| [-0.01 * x[0], -0.02 * x[1]]).collect();
        let cons = Constraints::new(8);
        let l = vec![0.3; 4];
        let prob = ElasticityProblem {
            sys: &sys,
            params: &p,
            u_prev: &u,
            phi: &[0.2; 4],
            l: &l,
            constraints: &cons,
            tangent: TangentMode::Analytic,
        };
        let jac = elasticity_jacobian(&prob, &u);
        let k = unit_square_stiffness(mu, lambda);
        let mass = assemble_mass(&sys, Some(&l));
        for i in 0..8 {
            for j in 0..8 {
                let m = if i % 2 == j % 2 { mass.get(i / 2, j / 2) } else { 0.0 };
                assert!((jac.get(i, j) - k[i][j] - m).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_degradation_recovers_linear_elasticity() {
        // κ = 1 edge: g ≡ 1 whatever φ is
        let sys = FeSystem::new(generate_unit_square_mesh(1)).unwrap();
        let n = sys.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-0.01..0.01)).collect();
        let phi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let p = MaterialParams { kappa: 1.0, ..params(3.0, 5.0) };
        let lin = internal_force(&sys, &p, &u, &phi, false);
        let cons = Constraints::new(2 * n);
        let zeros = vec![0.0; n];
        let prob = ElasticityProblem {
            sys: &sys,
            params: &p,
            u_prev: &u,
            phi: &phi,
            l: &zeros,
            constraints: &cons,
            tangent: TangentMode::Analytic,
        };
        let r = elasticity_residual(&prob, &u);
        for (a, b) in r.iter().zip(&lin) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn translation_changes_only_stabilization() {
        let sys = FeSystem::new(generate_unit_square_mesh(1)).unwrap();
        let n = sys.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-0.01..0.01)).collect();
        let shifted: Vec<f64> = u.iter().enumerate().map(|(k, v)| v + if k % 2 == 0 { 0.3 } else { -0.1 }).collect();
        let phi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let p = params(80.77, 121.15);
        let f0 = internal_force(&sys, &p, &u, &phi, true);
        let f1 = internal_force(&sys, &p, &shifted, &phi, true);
        for (a, b) in f0.iter().zip(&f1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_difference_mode_agrees_with_analytic() {
        let sys = FeSystem::new(generate_unit_square_mesh(1)).unwrap();
        let n = sys.num_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-0.01..0.01)).collect();
        let phi: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let p = params(80.77, 121.15);
        let cons = Constraints::new(2 * n);
        let mut prob = ElasticityProblem {
            sys: &sys,
            params: &p,
            u_prev: &u,
            phi: &phi,
            l: &l,
            constraints: &cons,
            tangent: TangentMode::Analytic,
        };
        let ja = prob.jacobian(&u);
        prob.tangent = TangentMode::FiniteDifference;
        let jf = prob.jacobian(&u);
        let diff: f64 = ja.values().iter().zip(jf.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff <= 1e-6 * ja.norm(), "{diff} vs {}", ja.norm());
        assert!(ja.is_symmetric(1e-12));
    }
}
