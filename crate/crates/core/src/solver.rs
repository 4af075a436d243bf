//! Sparse direct solver: reverse Cuthill-McKee ordering followed by a
//! profile (skyline) LU factorization without pivoting. Symmetric matrices
//! take an LDLᵀ path that does half the work.

use std::collections::VecDeque;

use thiserror::Error;

use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("zero pivot at row {row} (pivot {pivot:e})")]
    ZeroPivot { row: usize, pivot: f64 },
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
}

/// Symbolic data: permutation and profile of the permuted matrix.
#[derive(Debug, Clone)]
pub struct Ordering {
    /// new index -> old index
    perm: Vec<usize>,
    /// old index -> new index
    inv: Vec<usize>,
    /// first column of the profile in each permuted row
    first: Vec<usize>,
    offsets: Vec<usize>,
    nnz: usize,
    col_idx_hash: u64,
}

fn pattern_hash(a: &CsrMatrix) -> u64 {
    // FNV-1a over the pattern, enough to detect a pattern change
    let mut h: u64 = 0xcbf29ce484222325;
    for &v in a.row_ptr().iter().chain(a.col_idx()) {
        h ^= v as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl Ordering {
    pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Self {
        let n = a.dim();
        let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);

        let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
            // returns (eccentricity, a min-degree node in the last level)
            let mut level = vec![usize::MAX; n];
            level[start] = 0;
            let mut queue = VecDeque::from([start]);
            let mut last = start;
            while let Some(v) = queue.pop_front() {
                if level[v] > level[last]
                    || (level[v] == level[last] && degree[v] < degree[last])
                {
                    last = v;
                }
                for &w in a.row(v).0 {
                    if level[w] == usize::MAX && !visited[w] {
                        level[w] = level[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
            (level[last], last)
        };

        while order.len() < n {
            let seed = (0..n)
                .filter(|&i| !visited[i])
                .min_by_key(|&i| degree[i])
                .unwrap();
            // pseudo-peripheral start
            let mut start = seed;
            let (mut ecc, mut far) = bfs_levels(start, &visited);
            for _ in 0..8 {
                let (e2, f2) = bfs_levels(far, &visited);
                if e2 <= ecc {
                    break;
                }
                start = far;
                ecc = e2;
                far = f2;
            }
            visited[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut nbrs: Vec<usize> =
                    a.row(v).0.iter().copied().filter(|&w| !visited[w]).collect();
                nbrs.sort_by_key(|&w| (degree[w], w));
                for w in nbrs {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order.reverse();
        Self::from_permutation(a, order)
    }

    pub fn identity(a: &CsrMatrix) -> Self {
        Self::from_permutation(a, (0..a.dim()).collect())
    }

    fn from_permutation(a: &CsrMatrix, perm: Vec<usize>) -> Self {
        let n = a.dim();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for &old_j in a.row(old_i).0 {
                let j = inv[old_j];
                let (lo, hi) = (i.min(j), i.max(j));
                first[hi] = first[hi].min(lo);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i]));
        }
        let nnz = offsets[n];
        Ordering {
            perm,
            inv,
            first,
            offsets,
            nnz,
            col_idx_hash: pattern_hash(a),
        }
    }

    /// Entries stored strictly below the diagonal.
    pub fn profile_size(&self) -> usize {
        self.nnz
    }

    pub fn matches(&self, a: &CsrMatrix) -> bool {
        self.perm.len() == a.dim() && self.col_idx_hash == pattern_hash(a)
    }
}

#[derive(Debug, Clone)]
pub struct SkylineLu {
    ordering: Ordering,
    lower: Vec<f64>,
    /// empty for the symmetric path (U = D Lᵀ)
    upper: Vec<f64>,
    diag: Vec<f64>,
}

impl SkylineLu {
    pub fn factor(a: &CsrMatrix, ordering: Ordering) -> Result<Self, SolverError> {
        let symmetric = a.is_symmetric(0.0);
        let n = a.dim();
        let ord = &ordering;
        let mut lower = vec![0.0; ord.nnz];
        let mut upper = if symmetric { Vec::new() } else { vec![0.0; ord.nnz] };
        let mut diag = vec![0.0; n];
        let mut row_scale = vec![0.0f64; n];
        for old_i in 0..n {
            let i = ord.inv[old_i];
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = ord.inv[old_j];
                row_scale[i] = row_scale[i].max(v.abs());
                if j < i {
                    lower[ord.offsets[i] + j - ord.first[i]] = v;
                } else if j > i {
                    if !symmetric {
                        upper[ord.offsets[j] + i - ord.first[j]] = v;
                    }
                } else {
                    diag[i] = v;
                }
            }
        }

        let mut ucol = Vec::new();
        for i in 0..n {
            let fi = ord.first[i];
            let oi = ord.offsets[i];
            if symmetric {
                // ucol[j - fi] = U[j, i] = D_j L[i, j]
                ucol.clear();
                ucol.extend_from_slice(&lower[oi..oi + (i - fi)]);
                for j in fi..i {
                    let fj = ord.first[j];
                    let k0 = fi.max(fj);
                    let oj = ord.offsets[j];
                    let s = dot(&lower[oj + k0 - fj..oj + j - fj], &ucol[k0 - fi..j - fi]);
                    ucol[j - fi] -= s;
                }
                let mut d = diag[i];
                for j in fi..i {
                    let l = ucol[j - fi] / diag[j];
                    lower[oi + j - fi] = l;
                    d -= l * ucol[j - fi];
                }
                diag[i] = d;
            } else {
                for j in fi..i {
                    let fj = ord.first[j];
                    let k0 = fi.max(fj);
                    let oj = ord.offsets[j];
                    let s_u = dot(
                        &lower[oj + k0 - fj..oj + j - fj],
                        &upper[oi + k0 - fi..oi + j - fi],
                    );
                    upper[oi + j - fi] -= s_u;
                    let s_l = dot(
                        &lower[oi + k0 - fi..oi + j - fi],
                        &upper[oj + k0 - fj..oj + j - fj],
                    );
                    lower[oi + j - fi] = (lower[oi + j - fi] - s_l) / diag[j];
                }
                diag[i] -= dot(&lower[oi..oi + i - fi], &upper[oi..oi + i - fi]);
            }
            let d = diag[i];
            if !d.is_finite() || d.abs() <= 1e-15 * row_scale[i] || d == 0.0 {
                return Err(SolverError::ZeroPivot {
                    row: ord.perm[i],
                    pivot: d,
                });
            }
        }
        Ok(SkylineLu {
            ordering,
            lower,
            upper,
            diag,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        let ord = &self.ordering;
        let n = self.diag.len();
        if b.len() != n {
            return Err(SolverError::DimensionMismatch {
                matrix: n,
                vector: b.len(),
            });
        }
        let mut y: Vec<f64> = ord.perm.iter().map(|&old| b[old]).collect();
        // L y = b (unit lower)
        for i in 0..n {
            let fi = ord.first[i];
            let oi = ord.offsets[i];
            let s = dot(&self.lower[oi..oi + i - fi], &y[fi..i]);
            y[i] -= s;
        }
        // U x = y, column oriented
        let symmetric = self.upper.is_empty();
        if symmetric {
            // D z = y, then Lᵀ x = z
            for (yi, d) in y.iter_mut().zip(&self.diag) {
                *yi /= d;
            }
        }
        for i in (0..n).rev() {
            let fi = ord.first[i];
            let oi = ord.offsets[i];
            let xi = if symmetric { y[i] } else { y[i] / self.diag[i] };
            y[i] = xi;
            let col = if symmetric {
                &self.lower[oi..oi + i - fi]
            } else {
                &self.upper[oi..oi + i - fi]
            };
            for (k, u) in col.iter().enumerate() {
                y[fi + k] -= u * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in ord.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }

    pub fn into_ordering(self) -> Ordering {
        self.ordering
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            s[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

/// Reuses the fill-reducing ordering while the sparsity pattern is unchanged.
#[derive(Debug, Default)]
pub struct DirectSolver {
    ordering: Option<Ordering>,
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        if a.dim() != b.len() {
            return Err(SolverError::DimensionMismatch {
                matrix: a.dim(),
                vector: b.len(),
            });
        }
        let ordering = match self.ordering.take() {
            Some(o) if o.matches(a) => o,
            _ => Ordering::reverse_cuthill_mckee(a),
        };
        let keep = ordering.clone();
        match SkylineLu::factor(a, ordering) {
            Ok(lu) => {
                let x = lu.solve(b);
                self.ordering = Some(lu.into_ordering());
                x
            }
            Err(e) => {
                self.ordering = Some(keep);
                Err(e)
            }
        }
    }
}

/// Solves `A x = b` with a fresh ordering and factorization.
pub fn sparse_direct_solve(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>, SolverError> {
    DirectSolver::new().solve(a, b)
}
