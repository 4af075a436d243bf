use crate::mesh::{Mesh, Point};

use super::FemError;

/// Reference corners in counterclockwise order.
pub const REF_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Bilinear basis values and reference gradients at `p` in [-1,1]².
pub fn shape_values(p: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut vals = [0.0; 4];
    let mut grads = [[0.0; 2]; 4];
    for (a, c) in REF_CORNERS.iter().enumerate() {
        let sx = 1.0 + c[0] * p[0];
        let sy = 1.0 + c[1] * p[1];
        vals[a] = 0.25 * sx * sy;
        grads[a] = [0.25 * c[0] * sy, 0.25 * c[1] * sx];
    }
    (vals, grads)
}

/// Maps reference gradients to physical ones via the inverse transposed
/// Jacobian of the bilinear map. Returns the gradients and det J.
pub fn map_gradients(
    coords: &[Point; 4],
    ref_grads: &[[f64; 2]; 4],
) -> Result<([[f64; 2]; 4], f64), FemError> {
    // J[i][j] = d x_i / d xi_j
    let mut jac = [[0.0; 2]; 2];
    for a in 0..4 {
        for i in 0..2 {
            for j in 0..2 {
                jac[i][j] += coords[a][i] * ref_grads[a][j];
            }
        }
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let scale = jac.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if !(det > 1e-14 * scale * scale) {
        return Err(FemError::DegenerateCell { cell: None, det_j: det });
    }
    // the bilinear map must also be invertible at every corner
    for k in 0..4 {
        let (p, next, prev) = (coords[k], coords[(k + 1) % 4], coords[(k + 3) % 4]);
        let corner_det = (next[0] - p[0]) * (prev[1] - p[1]) - (next[1] - p[1]) * (prev[0] - p[0]);
        if !(corner_det > 1e-14 * scale * scale) {
            return Err(FemError::DegenerateCell { cell: None, det_j: corner_det / 4.0 });
        }
    }
    let inv = [
        [jac[1][1] / det, -jac[0][1] / det],
        [-jac[1][0] / det, jac[0][0] / det],
    ];
    let mut out = [[0.0; 2]; 4];
    for a in 0..4 {
        // grad_x N = J^{-T} grad_xi N
        for i in 0..2 {
            out[a][i] = inv[0][i] * ref_grads[a][0] + inv[1][i] * ref_grads[a][1];
        }
    }
    Ok((out, det))
}

#[derive(Debug, Clone)]
pub struct Quadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn gauss_2x2() -> Self {
        let g = 1.0 / 3f64.sqrt();
        let points = vec![[-g, -g], [g, -g], [g, g], [-g, g]];
        Quadrature {
            points,
            weights: vec![1.0; 4],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Basis data of one cell at the four Gauss points.
#[derive(Debug, Clone, Copy)]
pub struct CellValues {
    pub grads: [[[f64; 2]; 4]; 4],
    /// det J times quadrature weight
    pub jxw: [f64; 4],
}

/// Precomputed per-cell basis data for 2×2 Gauss quadrature.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub shape: [[f64; 4]; 4],
    cells: Vec<CellValues>,
}

impl CellGeometry {
    pub fn new(mesh: &Mesh) -> Result<Self, FemError> {
        let quad = Quadrature::gauss_2x2();
        let mut shape = [[0.0; 4]; 4];
        let mut ref_grads = [[[0.0; 2]; 4]; 4];
        for q in 0..4 {
            let (v, g) = shape_values(quad.points[q]);
            shape[q] = v;
            ref_grads[q] = g;
        }
        let cells = (0..mesh.num_cells())
            .map(|c| {
                let coords = mesh.cell_coords(c);
                let mut cv = CellValues {
                    grads: [[[0.0; 2]; 4]; 4],
                    jxw: [0.0; 4],
                };
                for q in 0..4 {
                    let (g, det) = map_gradients(&coords, &ref_grads[q]).map_err(|e| match e {
                        FemError::DegenerateCell { det_j, .. } => {
                            FemError::DegenerateCell { cell: Some(c), det_j }
                        }
                        other => other,
                    })?;
                    cv.grads[q] = g;
                    cv.jxw[q] = det * quad.weights[q];
                }
                Ok(cv)
            })
            .collect::<Result<_, _>>()?;
        Ok(CellGeometry { shape, cells })
    }

    pub fn cell(&self, c: usize) -> &CellValues {
        &self.cells[c]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
}
