//! Staggered outer iteration with stabilization and penalty updates, and the
//! loop over loading steps.
//!
//! Iteration i solves for u with (u, φ) of iteration i−1, then for φ with the
//! new u. L_i is computed from φ^{i−1}; Ξ_i adds γ[φ^i − φ_old]⁺ from the
//! fresh phase field. The stopping residuals are evaluated after both updates,
//! on the new iterate, with the L-terms measured against the previous one.

use std::fmt;
use std::str::FromStr;

use log::{debug, info, warn};
use thiserror::Error;

use crate::fem::{build_constraints, BcPreset, Constraints, FemError};
use crate::material::MaterialParams;
use crate::mesh::BoundaryTag;
use crate::postprocess::{surface_load, PostprocessError, StressKind};
use crate::solver::DirectSolver;
use crate::sparse::norm2;
use crate::subsolvers::{
    newton_solve, ElasticityProblem, FeSystem, FieldState, NewtonConfig, NewtonError,
    NonlinearProblem, PhaseFieldProblem, TangentMode,
};

/// How L evolves over the outer iterations of one loading step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// L = 0
    None,
    /// L = L₀ throughout
    Constant,
    /// L_i = a L_{i-1}, uniform in space
    Dynamic,
    /// L_i(x) = (1 - φ^{i-1}(x)) a L_{i-1}(x), floored at L₀
    DynamicWeighted,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Constant => "constant",
            Strategy::Dynamic => "dynamic",
            Strategy::DynamicWeighted => "dynamic_weighted",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown strategy `{0}` (expected none, constant, dynamic or dynamic_weighted)")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Strategy::None),
            "constant" => Ok(Strategy::Constant),
            "dynamic" => Ok(Strategy::Dynamic),
            "dynamic_weighted" | "weighted" => Ok(Strategy::DynamicWeighted),
            other => Err(UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LSchemeConfig {
    pub strategy: Strategy,
    /// initial stabilization, and the constant value for [`Strategy::Constant`]
    pub l0: f64,
    /// growth factor
    pub a: f64,
    /// cap L⋆
    pub l_max: f64,
    /// outer tolerance on max(‖a_u‖, ‖a_φ‖)
    pub tol: f64,
    pub max_outer: usize,
    pub reset_l_each_step: bool,
    pub reset_xi_each_step: bool,
    /// accumulate Ξ over outer iterations; when off Ξ keeps its initial value
    /// and only the γ penalty enforces irreversibility
    pub update_xi: bool,
    pub newton: NewtonConfig,
    pub tangent: TangentMode,
}

impl Default for LSchemeConfig {
    fn default() -> Self {
        LSchemeConfig {
            strategy: Strategy::Dynamic,
            l0: 1e-10,
            a: 5.0,
            l_max: 1e6,
            tol: 1e-6,
            max_outer: 500,
            reset_l_each_step: true,
            reset_xi_each_step: true,
            update_xi: true,
            newton: NewtonConfig::default(),
            tangent: TangentMode::Analytic,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("growth factor a = {0} must exceed 1 for dynamic strategies")]
    GrowthFactor(f64),
    #[error("need 0 <= L0 <= L_max, got L0 = {l0}, L_max = {l_max}")]
    Bounds { l0: f64, l_max: f64 },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
}

impl LSchemeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let dynamic = matches!(self.strategy, Strategy::Dynamic | Strategy::DynamicWeighted);
        if dynamic && !(self.a > 1.0) {
            return Err(ConfigError::GrowthFactor(self.a));
        }
        if !(0.0 <= self.l0 && self.l0 <= self.l_max) {
            return Err(ConfigError::Bounds { l0: self.l0, l_max: self.l_max });
        }
        if !(self.tol > 0.0) {
            return Err(ConfigError::Tolerance(self.tol));
        }
        Ok(())
    }
}

/// Nodal stabilization field. Values are stored as L₀ times a cumulative
/// nodal factor so that the uniform dynamic law gives min(a^i L₀, L⋆) with
/// a single rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Stabilization {
    factor: Vec<f64>,
    values: Vec<f64>,
}

impl Stabilization {
    pub fn initial(config: &LSchemeConfig, num_nodes: usize) -> Self {
        let value = match config.strategy {
            Strategy::None => 0.0,
            _ => config.l0.min(config.l_max),
        };
        Stabilization {
            factor: vec![1.0; num_nodes],
            values: vec![value; num_nodes],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Advances L by one outer iteration. `phi_prev_iter` is φ^{n,i-1} and only
/// matters for the weighted strategy, where it is clamped to [0, 1].
pub fn update_stabilization(stab: &mut Stabilization, phi_prev_iter: &[f64], config: &LSchemeConfig) {
    let l0 = config.l0;
    match config.strategy {
        Strategy::None => stab.values.iter_mut().for_each(|v| *v = 0.0),
        Strategy::Constant => {}
        Strategy::Dynamic => {
            for (f, v) in stab.factor.iter_mut().zip(stab.values.iter_mut()) {
                *f *= config.a;
                *v = (l0 * *f).clamp(0.0, config.l_max);
            }
        }
        Strategy::DynamicWeighted => {
            for ((f, v), &phi) in stab.factor.iter_mut().zip(stab.values.iter_mut()).zip(phi_prev_iter) {
                *f *= (1.0 - phi.clamp(0.0, 1.0)) * config.a;
                let raw = l0 * *f;
                if raw < l0 {
                    // restart growth from the floor
                    *f = 1.0;
                    *v = l0.min(config.l_max);
                } else {
                    *v = raw.min(config.l_max);
                }
            }
        }
    }
}

/// Ξ + γ[φ - φ_old]⁺, nodewise.
pub fn update_penalty(xi: &[f64], phi: &[f64], phi_old: &[f64], gamma: f64) -> Vec<f64> {
    xi.iter()
        .zip(phi.iter().zip(phi_old))
        .map(|(x, (p, o))| x + gamma * (p - o).max(0.0))
        .collect()
}

/// Euclidean norms of a_u and a_φ on free dofs.
///
/// `state` holds the new iterate with the already updated L and Ξ, and
/// `previous` the iterate it was computed from (the L-terms act on the
/// difference). The elasticity form uses the newest φ.
pub fn coupled_residuals(
    sys: &FeSystem,
    params: &MaterialParams,
    constraints: &Constraints,
    state: &FieldState,
    previous: &FieldState,
    phi_old: &[f64],
) -> (f64, f64) {
    let elastic = ElasticityProblem {
        sys,
        params,
        u_prev: &previous.u,
        phi: &state.phi,
        l: &state.l,
        constraints,
        tangent: TangentMode::Analytic,
    };
    let phase = PhaseFieldProblem {
        sys,
        params,
        u: &state.u,
        phi_prev: &previous.phi,
        phi_old,
        xi: &state.xi,
        l: &state.l,
    };
    (norm2(&elastic.residual(&state.u)), norm2(&phase.residual(&state.phi)))
}

/// Hooks into the outer iteration, mainly for instrumentation.
pub trait IterationObserver {
    /// Called with the φ handed to the displacement solve.
    fn before_elasticity(&mut self, _iteration: usize, _phi: &[f64]) {}
    /// Called with the u handed to the phase-field solve.
    fn before_phasefield(&mut self, _iteration: usize, _u: &[f64]) {}
    /// Called after the updates and the residual evaluation.
    fn after_iteration(&mut self, _iteration: usize, _state: &FieldState, _res_u: f64, _res_phi: f64) {}
}

/// Observer that does nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl IterationObserver for NoObserver {}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("displacement solve failed in outer iteration {iteration}: {source}")]
    Elasticity { iteration: usize, source: NewtonError },
    #[error("phase-field solve failed in outer iteration {iteration}: {source}")]
    PhaseField { iteration: usize, source: NewtonError },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error("loading step {step} (t = {t}): {source}")]
    Step { step: usize, t: f64, source: Box<DriverError> },
}

/// Outcome of [`outer_iterate`].
#[derive(Debug, Clone)]
pub struct OuterResult {
    pub state: FieldState,
    /// the iterate preceding `state`
    pub previous: FieldState,
    pub stabilization: Stabilization,
    pub iterations: usize,
    pub converged: bool,
    pub residual_u: f64,
    pub residual_phi: f64,
    /// inner Newton iterations, summed over both subproblems
    pub newton_iterations: usize,
}

/// Runs the staggered iteration of one loading step.
///
/// `start` is the converged state of the previous step (or the initial
/// state); its φ plays the role of φ_old in the irreversibility penalty.
/// When `carry_l` is given and resets are disabled, L continues from it.
#[allow(clippy::too_many_arguments)]
pub fn outer_iterate(
    sys: &FeSystem,
    params: &MaterialParams,
    config: &LSchemeConfig,
    constraints: &Constraints,
    start: &FieldState,
    carry_l: Option<&Stabilization>,
    solvers: &mut (DirectSolver, DirectSolver),
    observer: &mut dyn IterationObserver,
) -> Result<OuterResult, DriverError> {
    config.validate()?;
    let n = sys.num_nodes();
    let phi_old = start.phi.clone();
    let mut stab = match carry_l {
        Some(s) if !config.reset_l_each_step => s.clone(),
        _ => Stabilization::initial(config, n),
    };
    let mut current = start.clone();
    current.l = stab.values().to_vec();
    if config.reset_xi_each_step {
        current.xi = vec![0.0; n];
    }
    let mut newton_iterations = 0;
    let mut i = 0;
    loop {
        i += 1;
        observer.before_elasticity(i, &current.phi);
        let elastic = ElasticityProblem {
            sys,
            params,
            u_prev: &current.u,
            phi: &current.phi,
            l: &current.l,
            constraints,
            tangent: config.tangent,
        };
        let (u_new, rep_u) = newton_solve(&elastic, &current.u, &config.newton, &mut solvers.0)
            .map_err(|source| DriverError::Elasticity { iteration: i, source })?;
        if !rep_u.converged {
            warn!("displacement Newton stopped at residual {:.3e} (outer iteration {i})", rep_u.final_residual);
        }
        observer.before_phasefield(i, &u_new);
        let phase = PhaseFieldProblem {
            sys,
            params,
            u: &u_new,
            phi_prev: &current.phi,
            phi_old: &phi_old,
            xi: &current.xi,
            l: &current.l,
        };
        let (phi_new, rep_phi) = newton_solve(&phase, &current.phi, &config.newton, &mut solvers.1)
            .map_err(|source| DriverError::PhaseField { iteration: i, source })?;
        if !rep_phi.converged {
            warn!("phase-field Newton stopped at residual {:.3e} (outer iteration {i})", rep_phi.final_residual);
        }
        newton_iterations += rep_u.iterations + rep_phi.iterations;

        update_stabilization(&mut stab, &current.phi, config);
        let xi_new = if config.update_xi {
            update_penalty(&current.xi, &phi_new, &phi_old, params.gamma)
        } else {
            current.xi.clone()
        };
        let next = FieldState {
            u: u_new,
            phi: phi_new,
            xi: xi_new,
            l: stab.values().to_vec(),
        };
        let (res_u, res_phi) = coupled_residuals(sys, params, constraints, &next, &current, &phi_old);
        debug!(
            "iter {i:4}  |a_u| {res_u:.3e}  |a_phi| {res_phi:.3e}  max L {:.3e}",
            next.max_l()
        );
        observer.after_iteration(i, &next, res_u, res_phi);
        let previous = std::mem::replace(&mut current, next);
        let converged = res_u.max(res_phi) <= config.tol;
        if converged || i >= config.max_outer {
            return Ok(OuterResult {
                state: current,
                previous,
                stabilization: stab,
                iterations: i,
                converged,
                residual_u: res_u,
                residual_phi: res_phi,
                newton_iterations,
            });
        }
    }
}

/// Summary of one loading step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    /// loading time (s)
    pub t: f64,
    /// prescribed top displacement t·ū (mm)
    pub u_top: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub residual_u: f64,
    pub residual_phi: f64,
    pub max_l: f64,
    /// surface load on the top boundary, kN/mm per unit thickness
    pub fx: f64,
    pub fy: f64,
    pub min_phi: f64,
}

/// Loading schedule: t^n = n·δt for n = 1..=steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadingSchedule {
    pub dt: f64,
    pub steps: usize,
    pub bc: BcPreset,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub reports: Vec<StepReport>,
    pub state: FieldState,
}

/// Runs every loading step. `on_step` sees each finished step, so callers
/// can flush output before a later step fails.
pub fn run_loading_loop(
    sys: &FeSystem,
    params: &MaterialParams,
    config: &LSchemeConfig,
    schedule: &LoadingSchedule,
    on_step: impl FnMut(&StepReport, &FieldState),
) -> Result<RunResult, DriverError> {
    run_loading_loop_observed(sys, params, config, schedule, &mut NoObserver, on_step)
}

/// [`run_loading_loop`] with an observer attached to every outer iteration.
pub fn run_loading_loop_observed(
    sys: &FeSystem,
    params: &MaterialParams,
    config: &LSchemeConfig,
    schedule: &LoadingSchedule,
    observer: &mut dyn IterationObserver,
    mut on_step: impl FnMut(&StepReport, &FieldState),
) -> Result<RunResult, DriverError> {
    config.validate()?;
    let mut state = FieldState::initial(sys);
    let mut stab: Option<Stabilization> = None;
    let mut solvers = (DirectSolver::new(), DirectSolver::new());
    let mut reports = Vec::with_capacity(schedule.steps);
    for step in 1..=schedule.steps {
        let t = step as f64 * schedule.dt;
        let wrap = |e: DriverError| DriverError::Step { step, t, source: Box::new(e) };
        let constraints = build_constraints(sys.mesh(), sys.u_dofs(), &schedule.bc, t).map_err(|e| wrap(e.into()))?;
        let outer = outer_iterate(sys, params, config, &constraints, &state, stab.as_ref(), &mut solvers, observer)
            .map_err(wrap)?;
        let [fx, fy] = surface_load(sys, params, &outer.state.u, &outer.state.phi, BoundaryTag::Top, StressKind::Degraded)
            .map_err(|e| wrap(e.into()))?;
        let report = StepReport {
            step,
            t,
            u_top: t * schedule.bc.u_bar(),
            outer_iterations: outer.iterations,
            converged: outer.converged,
            residual_u: outer.residual_u,
            residual_phi: outer.residual_phi,
            max_l: outer.state.max_l(),
            fx,
            fy,
            min_phi: outer.state.min_phi(),
        };
        info!(
            "step {step:4}  t {t:.4e}  outer {:3}  {}  Fx {fx:.6e}  min phi {:.4}",
            report.outer_iterations,
            if report.converged { "ok" } else { "NOT CONVERGED" },
            report.min_phi
        );
        state = outer.state;
        stab = Some(outer.stabilization);
        on_step(&report, &state);
        reports.push(report);
    }
    Ok(RunResult { reports, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_unit_square_mesh;

    fn dyn_config(strategy: Strategy) -> LSchemeConfig {
        LSchemeConfig { strategy, ..LSchemeConfig::default() }
    }

    #[test]
    fn dynamic_law_is_exact() {
        let cfg = dyn_config(Strategy::Dynamic);
        let mut s = Stabilization::initial(&cfg, 3);
        assert!(s.values().iter().all(|&v| v == 1e-10));
        let phi = vec![0.4; 3];
        for i in 1..=40 {
            update_stabilization(&mut s, &phi, &cfg);
            let expect = (5f64.powi(i) * 1e-10).min(1e6);
            assert!(s.values().iter().all(|&v| v == expect), "i = {i}");
        }
    }

    #[test]
    fn weighted_with_intact_field_sits_on_floor() {
        let cfg = dyn_config(Strategy::DynamicWeighted);
        let mut s = Stabilization::initial(&cfg, 4);
        for _ in 0..5 {
            update_stabilization(&mut s, &[1.0, 1.0, 1.3, 1.0], &cfg);
            assert!(s.values().iter().all(|&v| v == 1e-10));
        }
    }

    #[test]
    fn weighted_with_broken_field_equals_dynamic() {
        let w = dyn_config(Strategy::DynamicWeighted);
        let d = dyn_config(Strategy::Dynamic);
        let mut sw = Stabilization::initial(&w, 5);
        let mut sd = Stabilization::initial(&d, 5);
        let phi = [0.0, -0.2, 0.0, -1e-3, 0.0];
        for _ in 0..60 {
            update_stabilization(&mut sw, &phi, &w);
            update_stabilization(&mut sd, &phi, &d);
            assert_eq!(sw, sd);
        }
    }

    #[test]
    fn weighted_recovers_from_floor() {
        let cfg = dyn_config(Strategy::DynamicWeighted);
        let mut s = Stabilization::initial(&cfg, 1);
        update_stabilization(&mut s, &[1.0], &cfg);
        update_stabilization(&mut s, &[0.5], &cfg);
        assert_eq!(s.values()[0], 1e-10 * 2.5);
    }

    #[test]
    fn none_and_constant() {
        let mut cfg = dyn_config(Strategy::None);
        let mut s = Stabilization::initial(&cfg, 2);
        update_stabilization(&mut s, &[0.0; 2], &cfg);
        assert_eq!(s.values(), &[0.0, 0.0]);
        cfg = LSchemeConfig { strategy: Strategy::Constant, l0: 1e-2, ..cfg };
        let mut s = Stabilization::initial(&cfg, 2);
        update_stabilization(&mut s, &[0.0; 2], &cfg);
        assert_eq!(s.values(), &[1e-2, 1e-2]);
    }

    #[test]
    fn penalty_update() {
        assert_eq!(update_penalty(&[0.0, 1.0], &[0.5, 0.2], &[0.6, 0.3], 7.0), vec![0.0, 1.0]);
        assert_eq!(update_penalty(&[0.3, 0.0], &[0.9, 0.5], &[0.1, 0.1], 0.0), vec![0.3, 0.0]);
        let xi = update_penalty(&[0.0; 3], &[0.6, 0.5, 0.5], &[0.5, 0.5, 0.5], 2.0);
        assert!((xi[0] - 0.2).abs() < 1e-15);
        assert_eq!(&xi[1..], &[0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        assert!(LSchemeConfig::default().validate().is_ok());
        let bad = LSchemeConfig { a: 1.0, ..LSchemeConfig::default() };
        assert_eq!(bad.validate(), Err(ConfigError::GrowthFactor(1.0)));
        let ok = LSchemeConfig { a: 1.0, strategy: Strategy::Constant, ..LSchemeConfig::default() };
        assert!(ok.validate().is_ok());
        let bad = LSchemeConfig { l0: 2e6, ..LSchemeConfig::default() };
        assert!(bad.validate().is_err());
        let bad = LSchemeConfig { tol: 0.0, ..LSchemeConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::None, Strategy::Constant, Strategy::Dynamic, Strategy::DynamicWeighted] {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("linear".parse::<Strategy>().is_err());
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

    #[test]
    fn unloaded_step_converges_at_once() {
        let sys = FeSystem::new(generate_unit_square_mesh(1)).unwrap();
        let schedule = LoadingSchedule { dt: 1e-4, steps: 1, bc: BcPreset::SenShear { u_bar: 0.0 } };
        for strategy in [Strategy::None, Strategy::Constant, Strategy::Dynamic, Strategy::DynamicWeighted] {
            let run = run_loading_loop(&sys, &params(), &dyn_config(strategy), &schedule, |_, _| {}).unwrap();
            let r = &run.reports[0];
            assert_eq!(r.outer_iterations, 1);
            assert!(r.converged);
            assert_eq!((r.fx, r.fy), (0.0, 0.0));
            assert!(run.state.u.iter().all(|&v| v == 0.0));
            assert!(run.state.phi.iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn zero_steps_give_no_reports() {
        let sys = FeSystem::new(generate_unit_square_mesh(0)).unwrap();
        let schedule = LoadingSchedule { dt: 1e-4, steps: 0, bc: BcPreset::SenShear { u_bar: 1.0 } };
        let run = run_loading_loop(&sys, &params(), &LSchemeConfig::default(), &schedule, |_, _| {}).unwrap();
        assert!(run.reports.is_empty());
        assert_eq!(run.state, FieldState::initial(&sys));
    }
}
