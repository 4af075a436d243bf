use super::{gather4, interpolate, FeSystem};
use crate::sparse::CsrMatrix;

/// Scalar mass matrix ∫ w ψ_a ψ_b with the nodal weight `w` interpolated
/// (w ≡ 1 when `None`).
pub fn assemble_mass(sys: &FeSystem, weight: Option<&[f64]>) -> CsrMatrix {
    let mut m = sys.phi_matrix();
    let shape = &sys.geometry().shape;
    for (c, cell) in sys.mesh().cells().iter().enumerate() {
        let cv = sys.geometry().cell(c);
        let w = weight.map(|w| gather4(cell, w));
        let mut block = [[0.0; 4]; 4];
        for q in 0..4 {
            let wq = w.map_or(1.0, |w| interpolate(&shape[q], &w)) * cv.jxw[q];
            for a in 0..4 {
                for b in 0..4 {
                    block[a][b] += wq * shape[q][a] * shape[q][b];
                }
            }
        }
        m.add_block(cell, &block);
    }
    m
}

/// Scalar stiffness ∫ ∇ψ_a · ∇ψ_b.
pub fn assemble_laplace(sys: &FeSystem) -> CsrMatrix {
    let mut k = sys.phi_matrix();
    for (c, cell) in sys.mesh().cells().iter().enumerate() {
        let cv = sys.geometry().cell(c);
        let mut block = [[0.0; 4]; 4];
        for q in 0..4 {
            let g = &cv.grads[q];
            for a in 0..4 {
                for b in 0..4 {
                    block[a][b] += cv.jxw[q] * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
            }
        }
        k.add_block(cell, &block);
    }
    k
}

/// Load vector (1, ψ_a).
pub fn assemble_load(sys: &FeSystem) -> Vec<f64> {
    let mut f = vec![0.0; sys.num_nodes()];
    let shape = &sys.geometry().shape;
    for (c, cell) in sys.mesh().cells().iter().enumerate() {
        let cv = sys.geometry().cell(c);
        for q in 0..4 {
            for a in 0..4 {
                f[cell[a]] += cv.jxw[q] * shape[q][a];
            }
        }
    }
    f
}
