//! Load functionals on tagged boundaries.

use thiserror::Error;

use crate::fem::{map_gradients, shape_values, REF_CORNERS};
use crate::material::{strain, MaterialParams};
use crate::mesh::{boundary_nodes, BoundaryTag};
use crate::subsolvers::{effective_stress, internal_force, FeSystem};

#[derive(Debug, Error, PartialEq)]
pub enum PostprocessError {
    #[error("no boundary facets tagged `{0}`")]
    EmptyBoundary(&'static str),
}

/// Which stress enters the traction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StressKind {
    /// g(φ)σ⁺ + σ⁻
    #[default]
    Degraded,
    /// σ⁺ + σ⁻, ignoring the phase field
    Undegraded,
}

/// ∫ σ(u) ν ds over the facets carrying `tag`, two Gauss points per facet.
/// The result is a force per unit thickness.
pub fn surface_load(
    sys: &FeSystem,
    params: &MaterialParams,
    u: &[f64],
    phi: &[f64],
    tag: BoundaryTag,
    kind: StressKind,
) -> Result<[f64; 2], PostprocessError> {
    let mesh = sys.mesh();
    let g = 1.0 / 3f64.sqrt();
    let mut force = [0.0; 2];
    let mut found = false;
    for (f, facet) in mesh.boundary_facets().iter().enumerate() {
        if facet.tag != tag {
            continue;
        }
        found = true;
        let (c, k) = mesh.facet_owner(f);
        let cell = &mesh.cells()[c];
        let coords = mesh.cell_coords(c);
        let [pa, pb] = facet.nodes.map(|n| mesh.nodes()[n]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = dx.hypot(dy);
        // facets follow the counterclockwise cell order, so (dy, -dx) points out
        let normal = [dy / len, -dx / len];
        let (ra, rb) = (REF_CORNERS[k], REF_CORNERS[(k + 1) % 4]);
        for s in [-g, g] {
            let xi = [
                0.5 * ((1.0 - s) * ra[0] + (1.0 + s) * rb[0]),
                0.5 * ((1.0 - s) * ra[1] + (1.0 + s) * rb[1]),
            ];
            let (vals, ref_grads) = shape_values(xi);
            let (grads, _) = map_gradients(&coords, &ref_grads)
                .expect("cell geometry was validated on construction");
            let mut grad_u = [[0.0; 2]; 2];
            let mut phi_q = 0.0;
            for a in 0..4 {
                phi_q += vals[a] * phi[cell[a]];
                for i in 0..2 {
                    for j in 0..2 {
                        grad_u[i][j] += u[2 * cell[a] + i] * grads[a][j];
                    }
                }
            }
            let sigma = effective_stress(&strain(grad_u), phi_q, params, kind == StressKind::Degraded);
            // unit weight per point, Jacobian len/2
            let w = 0.5 * len;
            force[0] += w * (sigma.xx * normal[0] + sigma.xy * normal[1]);
            force[1] += w * (sigma.xy * normal[0] + sigma.yy * normal[1]);
        }
    }
    if !found {
        return Err(PostprocessError::EmptyBoundary(tag.name()));
    }
    Ok(force)
}

/// Reaction force on the nodes of `tag`: the sum of the unconstrained
/// internal force vector over those nodes.
pub fn reaction_force(
    sys: &FeSystem,
    params: &MaterialParams,
    u: &[f64],
    phi: &[f64],
    tag: BoundaryTag,
    kind: StressKind,
) -> Result<[f64; 2], PostprocessError> {
    let nodes = boundary_nodes(sys.mesh(), tag);
    if nodes.is_empty() {
        return Err(PostprocessError::EmptyBoundary(tag.name()));
    }
    let f = internal_force(sys, params, u, phi, kind == StressKind::Degraded);
    Ok(nodes
        .iter()
        .fold([0.0; 2], |acc, &n| [acc[0] + f[2 * n], acc[1] + f[2 * n + 1]]))
}
