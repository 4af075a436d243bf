use std::collections::BTreeMap;

use crate::mesh::{boundary_nodes, BoundaryTag, Mesh};
use crate::sparse::CsrMatrix;

use super::FemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Vector2,
    Scalar,
}

impl FieldKind {
    pub fn components(self) -> usize {
        match self {
            FieldKind::Vector2 => 2,
            FieldKind::Scalar => 1,
        }
    }
}

/// Nodal numbering: dof = node * components + component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    kind: FieldKind,
    num_nodes: usize,
}

impl DofMap {
    pub fn new(kind: FieldKind, num_nodes: usize) -> Self {
        DofMap { kind, num_nodes }
    }

    pub fn vector(mesh: &Mesh) -> Self {
        Self::new(FieldKind::Vector2, mesh.num_nodes())
    }

    pub fn scalar(mesh: &Mesh) -> Self {
        Self::new(FieldKind::Scalar, mesh.num_nodes())
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes * self.components()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    #[inline]
    pub fn dof(&self, node: usize, comp: usize) -> usize {
        debug_assert!(comp < self.components());
        node * self.components() + comp
    }

    pub fn cell_dofs(&self, cell: &[usize; 4]) -> Vec<usize> {
        cell.iter()
            .flat_map(|&n| (0..self.components()).map(move |c| self.dof(n, c)))
            .collect()
    }

    pub fn sparsity(&self, mesh: &Mesh) -> CsrMatrix {
        CsrMatrix::from_cells(mesh.num_nodes(), mesh.cells(), self.components())
    }
}

/// Prescribed dof values, sorted by dof index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    num_dofs: usize,
    values: BTreeMap<usize, f64>,
}

impl Constraints {
    pub fn new(num_dofs: usize) -> Self {
        Constraints {
            num_dofs,
            values: BTreeMap::new(),
        }
    }

    /// Constrains `dof` unless it already carries an equal value.
    pub fn insert(&mut self, dof: usize, value: f64) -> Result<(), FemError> {
        assert!(dof < self.num_dofs);
        match self.values.get(&dof) {
            Some(&first) if first != value => Err(FemError::ConflictingConstraint {
                dof,
                first,
                second: value,
            }),
            _ => {
                self.values.insert(dof, value);
                Ok(())
            }
        }
    }

    /// Constrains `dof` only if it is still free.
    pub fn insert_if_free(&mut self, dof: usize, value: f64) {
        self.values.entry(dof).or_insert(value);
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values.get(&dof).copied()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.values.contains_key(&dof)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&d, &v)| (d, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    /// Mask with `true` on constrained dofs.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.num_dofs];
        for &d in self.values.keys() {
            m[d] = true;
        }
        m
    }

    /// Overwrites constrained entries of `x` with their prescribed values.
    pub fn apply_to(&self, x: &mut [f64]) {
        for (&d, &v) in &self.values {
            x[d] = v;
        }
    }

    /// Zeroes constrained entries of `r`.
    pub fn zero_entries(&self, r: &mut [f64]) {
        for &d in self.values.keys() {
            r[d] = 0.0;
        }
    }

    /// Same dofs, all values zero (for Newton increments).
    pub fn homogeneous(&self) -> Constraints {
        Constraints {
            num_dofs: self.num_dofs,
            values: self.values.keys().map(|&d| (d, 0.0)).collect(),
        }
    }
}

/// Displacement boundary conditions of the supported benchmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcPreset {
    /// Single edge notched shear: bottom clamped; top u_y = 0 and
    /// u_x = t·ū; left and right u_y = 0; lower slit face u_y = 0.
    SenShear { u_bar: f64 },
    /// Three-point bending on an imported mesh: supports tagged `bottom`
    /// carry u_y = 0, the load patch tagged `top` gets u_y = -t·ū, and
    /// nodes tagged `left` are pinned in x.
    ThreePointBending { u_bar: f64 },
}

impl BcPreset {
    pub fn u_bar(&self) -> f64 {
        match *self {
            BcPreset::SenShear { u_bar } | BcPreset::ThreePointBending { u_bar } => u_bar,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BcPreset::SenShear { .. } => "sen_shear",
            BcPreset::ThreePointBending { .. } => "three_point_bending",
        }
    }
}

/// Dirichlet data at loading time `t`.
///
/// Where tagged boundaries meet, the first prescription in the order
/// bottom, top, left/right, slit wins for each component.
pub fn build_constraints(
    mesh: &Mesh,
    dofs: &DofMap,
    bc: &BcPreset,
    t: f64,
) -> Result<Constraints, FemError> {
    if t < 0.0 {
        return Err(FemError::NegativeTime(t));
    }
    assert_eq!(dofs.kind(), FieldKind::Vector2);
    let mut cons = Constraints::new(dofs.num_dofs());
    let mut prescribe = |tag: BoundaryTag, ux: Option<f64>, uy: Option<f64>| {
        for n in boundary_nodes(mesh, tag) {
            if let Some(v) = ux {
                cons.insert_if_free(dofs.dof(n, 0), v);
            }
            if let Some(v) = uy {
                cons.insert_if_free(dofs.dof(n, 1), v);
            }
        }
    };
    match *bc {
        BcPreset::SenShear { u_bar } => {
            prescribe(BoundaryTag::Bottom, Some(0.0), Some(0.0));
            prescribe(BoundaryTag::Top, Some(t * u_bar), Some(0.0));
            prescribe(BoundaryTag::Left, None, Some(0.0));
            prescribe(BoundaryTag::Right, None, Some(0.0));
            prescribe(BoundaryTag::SlitLower, None, Some(0.0));
        }
        BcPreset::ThreePointBending { u_bar } => {
            prescribe(BoundaryTag::Bottom, None, Some(0.0));
            prescribe(BoundaryTag::Top, None, Some(-t * u_bar));
            prescribe(BoundaryTag::Left, Some(0.0), None);
        }
    }
    Ok(cons)
}

/// Imposes `constraints` on `A x = b`: constrained rows become identity rows
/// with the prescribed value on the right-hand side, and constrained columns
/// are eliminated symmetrically.
pub fn apply_dirichlet(matrix: &mut CsrMatrix, rhs: &mut [f64], constraints: &Constraints) {
    if constraints.is_empty() {
        return;
    }
    let n = matrix.dim();
    assert_eq!(rhs.len(), n);
    let mut prescribed = vec![None; n];
    for (d, v) in constraints.iter() {
        prescribed[d] = Some(v);
    }
    let row_ptr = matrix.row_ptr().to_vec();
    let col_idx = matrix.col_idx().to_vec();
    let vals = matrix.values_mut();
    for i in 0..n {
        let range = row_ptr[i]..row_ptr[i + 1];
        if let Some(g) = prescribed[i] {
            for k in range {
                vals[k] = if col_idx[k] == i { 1.0 } else { 0.0 };
            }
            rhs[i] = g;
        } else {
            for k in range {
                if let Some(g) = prescribed[col_idx[k]] {
                    rhs[i] -= vals[k] * g;
                    vals[k] = 0.0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_unit_square_mesh, insert_slit, SlitSpec};
    use crate::solver::sparse_direct_solve;

    fn shear() -> BcPreset {
        BcPreset::SenShear { u_bar: 1.0 }
    }

    #[test]
    fn dof_counts() {
        let m = generate_unit_square_mesh(1);
        assert_eq!(DofMap::vector(&m).num_dofs(), 50);
        assert_eq!(DofMap::scalar(&m).num_dofs(), 25);
    }

    #[test]
    fn zero_time_all_zero() {
        let m = generate_unit_square_mesh(2);
        let c = build_constraints(&m, &DofMap::vector(&m), &shear(), 0.0).unwrap();
        assert!(!c.is_empty());
        assert!(c.iter().all(|(_, v)| v == 0.0));
    }

    #[test]
    fn top_nodes_follow_loading() {
        let m = generate_unit_square_mesh(2);
        let d = DofMap::vector(&m);
        let c = build_constraints(&m, &d, &shear(), 0.004).unwrap();
        for n in boundary_nodes(&m, BoundaryTag::Top) {
            assert_eq!(c.get(d.dof(n, 0)), Some(0.004));
            assert_eq!(c.get(d.dof(n, 1)), Some(0.0));
        }
    }

    #[test]
    fn corner_precedence() {
        let m = generate_unit_square_mesh(2);
        let d = DofMap::vector(&m);
        let c = build_constraints(&m, &d, &shear(), 0.01).unwrap();
        let origin = m.nodes().iter().position(|p| *p == [0.0, 0.0]).unwrap();
        assert_eq!(c.get(d.dof(origin, 0)), Some(0.0));
        assert_eq!(c.get(d.dof(origin, 1)), Some(0.0));
        let top_left = m.nodes().iter().position(|p| *p == [0.0, 1.0]).unwrap();
        assert_eq!(c.get(d.dof(top_left, 0)), Some(0.01));
        // interior left-edge node: only u_y
        let mid_left = m.nodes().iter().position(|p| *p == [0.0, 0.25]).unwrap();
        assert_eq!(c.get(d.dof(mid_left, 0)), None);
        assert_eq!(c.get(d.dof(mid_left, 1)), Some(0.0));
    }

    #[test]
    fn slit_lower_fixed_vertically_only() {
        let m = generate_unit_square_mesh(2);
        let m = insert_slit(&m, &SlitSpec::new([0.0, 0.5], [0.5, 0.5])).unwrap();
        let d = DofMap::vector(&m);
        let c = build_constraints(&m, &d, &shear(), 0.01).unwrap();
        for &(lo, up) in m.slit_pairs() {
            assert_eq!(c.get(d.dof(lo, 1)), Some(0.0));
            let on_left = m.nodes()[lo][0] == 0.0;
            if !on_left {
                assert!(!c.is_constrained(d.dof(lo, 0)));
                assert!(!c.is_constrained(d.dof(up, 1)));
            }
        }
    }

    #[test]
    fn negative_time_rejected() {
        let m = generate_unit_square_mesh(0);
        assert!(build_constraints(&m, &DofMap::vector(&m), &shear(), -1.0).is_err());
    }

    #[test]
    fn conflicting_insert_rejected() {
        let mut c = Constraints::new(3);
        c.insert(1, 2.0).unwrap();
        c.insert(1, 2.0).unwrap();
        assert!(c.insert(1, 3.0).is_err());
    }

    fn laplace3() -> CsrMatrix {
        CsrMatrix::from_dense(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
    }

    #[test]
    fn no_constraints_unchanged() {
        let mut a = laplace3();
        let mut b = vec![1.0, 2.0, 3.0];
        apply_dirichlet(&mut a, &mut b, &Constraints::new(3));
        assert_eq!(a, laplace3());
        assert_eq!(b, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn ends_fixed_gives_mean() {
        let mut a = laplace3();
        let mut b = vec![0.0; 3];
        let mut c = Constraints::new(3);
        c.insert(0, 1.0).unwrap();
        c.insert(2, 3.0).unwrap();
        apply_dirichlet(&mut a, &mut b, &c);
        assert!(a.is_symmetric(0.0));
        let x = sparse_direct_solve(&a, &b).unwrap();
        assert!((x[1] - 2.0).abs() < 1e-14);
        assert_eq!((x[0], x[2]), (1.0, 3.0));
    }

    #[test]
    fn all_constrained() {
        let mut a = laplace3();
        let mut b = vec![9.0; 3];
        let mut c = Constraints::new(3);
        for (d, v) in [(0, 0.5), (1, -1.0), (2, 4.0)] {
            c.insert(d, v).unwrap();
        }
        apply_dirichlet(&mut a, &mut b, &c);
        let x = sparse_direct_solve(&a, &b).unwrap();
        assert_eq!(x, vec![0.5, -1.0, 4.0]);
    }

    #[test]
    fn idempotent() {
        let mut a = laplace3();
        let mut b = vec![1.0, 1.0, 1.0];
        let mut c = Constraints::new(3);
        c.insert(2, 5.0).unwrap();
        apply_dirichlet(&mut a, &mut b, &c);
        let (a1, b1) = (a.clone(), b.clone());
        apply_dirichlet(&mut a, &mut b, &c);
        assert_eq!(a, a1);
        assert_eq!(b, b1);
    }
}
