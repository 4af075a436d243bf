//! Property checks runnable from the command line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::{build_constraints, BcPreset};
use crate::lscheme::{
    run_loading_loop, update_penalty, update_stabilization, LSchemeConfig, LoadingSchedule,
    Stabilization, Strategy,
};
use crate::material::{positive_part_tensor, stress_split, MaterialParams, SymTensor2};
use crate::mesh::generate_unit_square_mesh;
use crate::sparse::norm2;
use crate::subsolvers::{ElasticityProblem, FeSystem, NonlinearProblem, PhaseFieldProblem, TangentMode};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn params() -> MaterialParams {
    MaterialParams {
        mu: 80.77,
        lambda: 121.15,
        gc: 2.7e-3,
        kappa: 1e-10,
        eps: 0.25,
        gamma: 1e3 * 2.7e-3 / 0.25,
    }
}

fn random_tensor(rng: &mut ChaCha8Rng) -> SymTensor2 {
    SymTensor2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
}

/// Eigenvalues of a symmetric 2×2 matrix by bisection on the
/// characteristic polynomial.
fn eigenvalues_bisection(e: &SymTensor2) -> [f64; 2] {
    let bound = e.xx.abs().max(e.yy.abs()) + e.xy.abs() + 1.0;
    let p = |x: f64| (e.xx - x) * (e.yy - x) - e.xy * e.xy;
    let mid = 0.5 * (e.xx + e.yy);
    // p(mid) <= 0, p(±bound) > 0: one root on each side
    let root = |mut lo: f64, mut hi: f64| {
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if (p(m) > 0.0) == (p(lo) > 0.0) {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    };
    [root(mid, bound), root(-bound, mid)]
}

fn split_checks(out: &mut Vec<CheckResult>) {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_split = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut definite = true;
    for _ in 0..10_000 {
        let e = random_tensor(&mut rng);
        let (plus, minus) = stress_split(&e, p.mu, p.lambda);
        let full = 2.0 * p.mu * e + p.lambda * e.trace() * SymTensor2::IDENTITY;
        let sum = plus + minus;
        let err = (sum.xx - full.xx).abs().max((sum.yy - full.yy).abs()).max((sum.xy - full.xy).abs());
        worst_split = worst_split.max(err / e.norm().max(f64::MIN_POSITIVE));
        let ep = positive_part_tensor(&e);
        let lam = eigenvalues_bisection(&e);
        let lam_p = eigenvalues_bisection(&ep);
        for k in 0..2 {
            worst_eig = worst_eig.max((lam_p[k] - lam[k].max(0.0)).abs());
        }
        let lam_m = eigenvalues_bisection(&(e - ep));
        let tol = 1e-10 * e.norm();
        definite &= lam_p[1] >= -tol && lam_m[0] <= tol;
    }
    out.push(CheckResult {
        name: "split reconstruction",
        passed: worst_split <= 1e-10,
        detail: format!("max relative error {worst_split:.2e}"),
    });
    out.push(CheckResult {
        name: "spectral positive part",
        passed: worst_eig <= 1e-10 && definite,
        detail: format!("max eigenvalue error {worst_eig:.2e}, sign checks {}", if definite { "ok" } else { "failed" }),
    });
}

fn jacobian_check(out: &mut Vec<CheckResult>) {
    let sys = FeSystem::new(generate_unit_square_mesh(1)).unwrap();
    let n = sys.num_nodes();
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let u: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1e-3..1e-3)).collect();
    let u_prev: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1e-3..1e-3)).collect();
    let phi: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
    let phi_old: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
    let xi: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.1)).collect();
    let l = vec![1e-2; n];
    let cons = build_constraints(sys.mesh(), sys.u_dofs(), &BcPreset::SenShear { u_bar: 1.0 }, 0.0).unwrap();
    let elastic = ElasticityProblem {
        sys: &sys,
        params: &p,
        u_prev: &u_prev,
        phi: &phi,
        l: &l,
        constraints: &cons,
        tangent: TangentMode::Analytic,
    };
    let phase = PhaseFieldProblem {
        sys: &sys,
        params: &p,
        u: &u,
        phi_prev: &phi_old,
        phi_old: &phi_old,
        xi: &xi,
        l: &l,
    };
    let mut worst = 0.0f64;
    let mut probe = |r: &dyn Fn(&[f64]) -> Vec<f64>, j: Vec<f64>, x: &[f64], dir: &[f64], h: f64| {
        let xp: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + h * d).collect();
        let xm: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a - h * d).collect();
        let fd: Vec<f64> = r(&xp).iter().zip(r(&xm)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let diff: Vec<f64> = fd.iter().zip(&j).map(|(a, b)| a - b).collect();
        worst = worst.max(norm2(&diff) / norm2(&j).max(f64::MIN_POSITIVE));
    };
    for _ in 0..20 {
        let du: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jac = elastic.jacobian(&u).mul_vec(&du);
        probe(&|x| elastic.full_residual(x), jac, &u, &du, 1e-7);
        let dp: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jac = phase.jacobian(&phi).mul_vec(&dp);
        probe(&|x| phase.residual(x), jac, &phi, &dp, 1e-7);
    }
    out.push(CheckResult {
        name: "Jacobian consistency",
        passed: worst < 1e-4,
        detail: format!("max relative error {worst:.2e} over 40 directions"),
    });
}

fn equilibrium_check(out: &mut Vec<CheckResult>) {
    let sys = FeSystem::new(generate_unit_square_mesh(1)).unwrap();
    let schedule = LoadingSchedule { dt: 0.0, steps: 0, bc: BcPreset::SenShear { u_bar: 0.0 } };
    let mut ok = true;
    for strategy in [Strategy::None, Strategy::Constant, Strategy::Dynamic, Strategy::DynamicWeighted] {
        let cfg = LSchemeConfig { strategy, ..LSchemeConfig::default() };
        let sched = LoadingSchedule { dt: 1.0, steps: 1, ..schedule };
        match run_loading_loop(&sys, &params(), &cfg, &sched, |_, _| {}) {
            Ok(run) => {
                let r = &run.reports[0];
                ok &= r.converged && r.outer_iterations == 1 && r.residual_u.max(r.residual_phi) < 1e-6;
            }
            Err(_) => ok = false,
        }
    }
    out.push(CheckResult {
        name: "unloaded equilibrium",
        passed: ok,
        detail: "one outer iteration for every strategy".into(),
    });
}

fn update_law_checks(out: &mut Vec<CheckResult>) {
    let cfg = LSchemeConfig::default();
    let mut s = Stabilization::initial(&cfg, 4);
    let mut exact = true;
    for i in 1..=40 {
        update_stabilization(&mut s, &[0.3; 4], &cfg);
        exact &= s.values().iter().all(|&v| v == (5f64.powi(i) * 1e-10).min(cfg.l_max));
    }
    let weighted = LSchemeConfig { strategy: Strategy::DynamicWeighted, ..cfg.clone() };
    let mut a = Stabilization::initial(&cfg, 4);
    let mut b = Stabilization::initial(&weighted, 4);
    let mut same = true;
    for _ in 0..40 {
        update_stabilization(&mut a, &[0.0; 4], &cfg);
        update_stabilization(&mut b, &[0.0; 4], &weighted);
        same &= a == b;
    }
    let xi = update_penalty(&[0.0, 0.5], &[0.7, 0.1], &[0.6, 0.2], 2.0);
    let monotone = xi[0] > 0.0 && xi[1] == 0.5;
    out.push(CheckResult {
        name: "stabilization and penalty laws",
        passed: exact && same && monotone,
        detail: format!("dynamic exact: {exact}, weighted equals dynamic: {same}, penalty: {monotone}"),
    });
}

/// Runs the split, Jacobian, equilibrium and update-law checks.
pub fn run_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    split_checks(&mut out);
    jacobian_check(&mut out);
    equilibrium_check(&mut out);
    update_law_checks(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_matches_closed_form() {
        let e = SymTensor2::new(3.0, -1.0, 2.0);
        let l = eigenvalues_bisection(&e);
        let r = (4.0f64 + 4.0).sqrt();
        assert!((l[0] - (1.0 + r)).abs() < 1e-12 && (l[1] - (1.0 - r)).abs() < 1e-12);
    }

    #[test]
    fn all_checks_pass() {
        for c in run_checks() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
