//! Pointwise constitutive kernels: strain, the 2×2 symmetric eigenproblem,
//! the spectral tensile/compressive split and the degradation function.
//!
//! Units are kN and mm throughout; μ and λ are plane-strain Lamé constants.

use std::f64::consts::SQRT_2;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Symmetric 2×2 tensor stored as (xx, yy, xy).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 { xx: 0.0, yy: 0.0, xy: 0.0 };
    pub const IDENTITY: SymTensor2 = SymTensor2 { xx: 1.0, yy: 1.0, xy: 0.0 };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2 { xx, yy, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Double contraction a:b.
    pub fn ddot(&self, other: &SymTensor2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    /// Orthonormal coordinates (xx, yy, √2·xy), in which a:b is the dot product.
    pub fn to_mandel(&self) -> [f64; 3] {
        [self.xx, self.yy, SQRT_2 * self.xy]
    }

    pub fn from_mandel(m: [f64; 3]) -> Self {
        SymTensor2::new(m[0], m[1], m[2] / SQRT_2)
    }

    /// v vᵀ
    pub fn outer(v: [f64; 2]) -> Self {
        SymTensor2::new(v[0] * v[0], v[1] * v[1], v[0] * v[1])
    }

    /// R T Rᵀ for the rotation by `angle`.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let r = [[c, -s], [s, c]];
        let t = [[self.xx, self.xy], [self.xy, self.yy]];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out[i][j] += r[i][k] * t[k][l] * r[j][l];
                    }
                }
            }
        }
        SymTensor2::new(out[0][0], out[1][1], 0.5 * (out[0][1] + out[1][0]))
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx + o.xx, self.yy + o.yy, self.xy + o.xy)
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx - o.xx, self.yy - o.yy, self.xy - o.xy)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, t: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self * t.xx, self * t.yy, self * t.xy)
    }
}

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair2 {
    pub values: [f64; 2],
    pub vectors: [[f64; 2]; 2],
}

#[derive(Debug, Error, PartialEq)]
pub enum MaterialError {
    #[error("invalid material parameter {name} = {value}: {requirement}")]
    Invalid {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// shear modulus μ_s (kN/mm²)
    pub mu: f64,
    /// Lamé λ_s (kN/mm²)
    pub lambda: f64,
    /// critical energy release rate (kN/mm)
    pub gc: f64,
    /// residual stiffness κ
    pub kappa: f64,
    /// phase-field regularization length ε (mm)
    pub eps: f64,
    /// irreversibility penalty γ
    pub gamma: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), MaterialError> {
        let check = |ok: bool, name, value, requirement| {
            if ok {
                Ok(())
            } else {
                Err(MaterialError::Invalid { name, value, requirement })
            }
        };
        check(self.mu > 0.0, "mu", self.mu, "must be positive")?;
        check(self.lambda >= 0.0, "lambda", self.lambda, "must be nonnegative")?;
        check(self.gc > 0.0, "gc", self.gc, "must be positive")?;
        check(self.kappa > 0.0 && self.kappa < 1.0, "kappa", self.kappa, "must lie in (0, 1)")?;
        check(self.eps > 0.0, "eps", self.eps, "must be positive")?;
        check(self.gamma >= 0.0, "gamma", self.gamma, "must be nonnegative")
    }
}

/// Symmetric part of a displacement gradient, `grad_u[i][j] = d u_i / d x_j`.
pub fn strain(grad_u: [[f64; 2]; 2]) -> SymTensor2 {
    SymTensor2::new(grad_u[0][0], grad_u[1][1], 0.5 * (grad_u[0][1] + grad_u[1][0]))
}

fn repeated_tol(e: &SymTensor2) -> f64 {
    1e-12 * e.norm().max(1.0)
}

/// Closed-form eigendecomposition. Below the repeated-eigenvalue threshold
/// the eigenvectors are the coordinate axes.
pub fn eig_sym2(e: &SymTensor2) -> EigenPair2 {
    let mean = 0.5 * (e.xx + e.yy);
    let half_diff = 0.5 * (e.xx - e.yy);
    let r = half_diff.hypot(e.xy);
    let values = [mean + r, mean - r];
    if 2.0 * r < repeated_tol(e) {
        return EigenPair2 {
            values,
            vectors: [[1.0, 0.0], [0.0, 1.0]],
        };
    }
    let theta = 0.5 * (2.0 * e.xy).atan2(e.xx - e.yy);
    let (s, c) = theta.sin_cos();
    EigenPair2 {
        values,
        vectors: [[c, s], [-s, c]],
    }
}

/// e⁺ = P Λ⁺ Pᵀ.
pub fn positive_part_tensor(e: &SymTensor2) -> SymTensor2 {
    let eig = eig_sym2(e);
    let [l1, l2] = eig.values;
    if l2 >= 0.0 {
        *e
    } else if l1 <= 0.0 {
        SymTensor2::ZERO
    } else {
        // one positive eigenvalue: project with (e - λ2 I)/(λ1 - λ2)
        let p = (1.0 / (l1 - l2)) * (*e - l2 * SymTensor2::IDENTITY);
        l1 * p
    }
}

/// (σ⁺, σ⁻) of the spectral split.
pub fn stress_split(e: &SymTensor2, mu: f64, lambda: f64) -> (SymTensor2, SymTensor2) {
    let ep = positive_part_tensor(e);
    let tr = e.trace();
    let trp = tr.max(0.0);
    let plus = 2.0 * mu * ep + (lambda * trp) * SymTensor2::IDENTITY;
    let minus = 2.0 * mu * (*e - ep) + (lambda * (tr - trp)) * SymTensor2::IDENTITY;
    (plus, minus)
}

/// g(φ) = (1-κ)φ² + κ.
pub fn degradation(phi: f64, kappa: f64) -> f64 {
    (1.0 - kappa) * phi * phi + kappa
}

/// σ⁺(e) : e, twice the tensile energy density.
pub fn tensile_energy_density(e: &SymTensor2, mu: f64, lambda: f64) -> f64 {
    let ep = positive_part_tensor(e);
    let tr = e.trace();
    2.0 * mu * ep.ddot(e) + lambda * tr.max(0.0) * tr
}

pub type Tangent = [[f64; 3]; 3];

/// Isotropic elasticity tensor in Mandel coordinates.
pub fn isotropic_tangent(mu: f64, lambda: f64) -> Tangent {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        c[i][i] = 2.0 * mu;
    }
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] += lambda;
        }
    }
    c
}

#[inline]
fn heaviside(x: f64) -> f64 {
    // kink convention for the strain split: the tensile branch owns zero
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// dσ⁺/de in Mandel coordinates.
///
/// At coincident eigenvalues the derivative of e⁺ is H(λ)·I, and at a zero
/// eigenvalue or zero trace the tensile branch is taken, so at e = 0 this is
/// the full isotropic tangent.
pub fn tensile_tangent(e: &SymTensor2, mu: f64, lambda: f64) -> Tangent {
    let eig = eig_sym2(e);
    let [l1, l2] = eig.values;
    let mut d = [[0.0; 3]; 3];
    if l1 - l2 < repeated_tol(e) {
        let h = heaviside(0.5 * (l1 + l2));
        for i in 0..3 {
            d[i][i] = 2.0 * mu * h;
        }
    } else {
        let [v1, v2] = eig.vectors;
        let m1 = SymTensor2::outer(v1).to_mandel();
        let m2 = SymTensor2::outer(v2).to_mandel();
        let n = [
            SQRT_2 * v1[0] * v2[0],
            SQRT_2 * v1[1] * v2[1],
            v1[0] * v2[1] + v1[1] * v2[0],
        ];
        let (h1, h2) = (heaviside(l1), heaviside(l2));
        let c = (l1.max(0.0) - l2.max(0.0)) / (l1 - l2);
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = 2.0 * mu * (h1 * m1[i] * m1[j] + h2 * m2[i] * m2[j] + c * n[i] * n[j]);
            }
        }
    }
    let ht = heaviside(e.trace());
    for i in 0..2 {
        for j in 0..2 {
            d[i][j] += lambda * ht;
        }
    }
    d
}
