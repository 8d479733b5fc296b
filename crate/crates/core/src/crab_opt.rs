//! CRAB pulse optimization against the simulated transfer efficiency.

use alloc::boxed::Box;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Executor;
use crate::linalg::{Vec3, Vector};
use crate::lindblad::{self, DensityMatrix, SolverOptions};
use crate::model::{self, Frame, PhysicsConfig, GROUND, SPIN};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::pulses::{crab_pulse, CrabParams, PulsePair, DEFAULT_HARMONICS};

/// What a candidate pulse is scored on.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub cfg: PhysicsConfig,
    pub frame: Frame,
    pub initial_state: Vec3,
    pub target_state: Vec3,
    pub n_harmonics: usize,
    pub solver: SolverOptions,
}

impl ObjectiveSpec {
    /// `|-> -> |+>` with the microwave on.
    pub fn dressed(cfg: PhysicsConfig) -> Self {
        ObjectiveSpec {
            cfg,
            frame: Frame::Dressed,
            initial_state: model::initial_state(),
            target_state: model::target_state(),
            n_harmonics: DEFAULT_HARMONICS,
            solver: SolverOptions { samples: 2, ..SolverOptions::default() },
        }
    }

    /// `|0> -> |-1>` with the microwave off.
    pub fn bare(cfg: PhysicsConfig) -> Self {
        ObjectiveSpec {
            frame: Frame::Bare,
            initial_state: Vector::basis(GROUND),
            target_state: Vector::basis(SPIN),
            ..Self::dressed(cfg)
        }
    }

    /// Amplitude bound shared by both channels.
    pub fn cap(&self) -> f64 {
        self.cfg.omega_max_s.min(self.cfg.omega_max_p)
    }

    pub fn pulses(&self, params: &CrabParams) -> PulsePair {
        crab_pulse(params, &PulsePair::zero(self.cfg.duration, self.cap()))
    }
}

/// Overlap of the final state, seen in the microwave frame, with the target.
pub fn efficiency_of(pulses: &PulsePair, spec: &ObjectiveSpec) -> Result<f64, lindblad::LindbladError> {
    let rho0 = DensityMatrix::pure(&spec.initial_state);
    let traj = lindblad::propagate(&rho0, pulses, &spec.cfg, spec.frame, &spec.solver)?;
    let rho = model::to_microwave_frame(&traj.final_state, traj.final_time(), &spec.cfg, spec.frame);
    Ok(rho.overlap(&spec.target_state.normalized()).re)
}

/// `1 - eta` for the CRAB pulse built from `params`; solver failures score
/// as infinitely bad.
pub fn evaluate(params: &CrabParams, spec: &ObjectiveSpec) -> f64 {
    match efficiency_of(&spec.pulses(params), spec) {
        Ok(eta) => 1.0 - eta,
        Err(e) => {
            log::warn!("objective evaluation failed: {e}");
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerBudget {
    /// Objective evaluations allowed per restart.
    pub max_evaluations: usize,
    /// Additional runs with fresh frequencies after the first one ends.
    pub max_restarts: usize,
    /// No further restarts once this efficiency is reached. Without a
    /// target every restart is used.
    pub target_efficiency: Option<f64>,
    /// Half-width of the initial simplex in units of the cap.
    pub initial_spread: f64,
    /// A run stalls when its simplex shrinks below this size (in units of
    /// the cap) or ...
    pub diameter_tol: f64,
    /// ... when this many evaluations pass without improving the
    /// infidelity by `stall_improvement`.
    pub stall_evaluations: usize,
    pub stall_improvement: f64,
    pub seed: u64,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        OptimizerBudget {
            max_evaluations: 1500,
            max_restarts: 10,
            target_efficiency: Some(0.97),
            initial_spread: 0.2,
            diameter_tol: 1e-6,
            stall_evaluations: 200,
            stall_improvement: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub best_params: CrabParams,
    pub best_infidelity: f64,
    pub evaluations: usize,
    pub restarts_used: usize,
    /// `(evaluation, best infidelity so far)`, recorded at each improvement.
    pub convergence_history: Vec<(usize, f64)>,
    pub duration: f64,
    pub cap: f64,
    pub frame: Frame,
    pub seed: u64,
}

impl OptimizerReport {
    pub fn best_efficiency(&self) -> f64 {
        1.0 - self.best_infidelity
    }

    pub fn pulses(&self) -> PulsePair {
        crab_pulse(&self.best_params, &PulsePair::zero(self.duration, self.cap))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizeError {
    #[error("evaluation budget must be at least {min}, got {got}")]
    InvalidBudget { min: usize, got: usize },
    #[error("target not reached; best infidelity {:.6}", .0.best_infidelity)]
    BudgetExhausted(Box<OptimizerReport>),
}

pub const MIN_EVALUATIONS: usize = 100;

/// Nelder-Mead over the CRAB coefficients with restart-on-stall.
pub fn optimize<E: Executor>(
    spec: &ObjectiveSpec,
    budget: &OptimizerBudget,
    exec: &E,
) -> Result<OptimizerReport, OptimizeError> {
    let cap = spec.cap();
    optimize_with(
        |params| evaluate(params, spec),
        spec.n_harmonics,
        spec.cfg.duration,
        cap,
        spec.frame,
        budget,
        exec,
    )
}

/// Optimizer core with an arbitrary objective over `CrabParams`. The simplex
/// works in coefficients divided by `cap`.
pub fn optimize_with<F, E>(
    objective: F,
    n_harmonics: usize,
    duration: f64,
    cap: f64,
    frame: Frame,
    budget: &OptimizerBudget,
    exec: &E,
) -> Result<OptimizerReport, OptimizeError>
where
    F: Fn(&CrabParams) -> f64 + Sync + Send,
    E: Executor,
{
    if budget.max_evaluations < MIN_EVALUATIONS {
        return Err(OptimizeError::InvalidBudget { min: MIN_EVALUATIONS, got: budget.max_evaluations });
    }
    let target = budget.target_efficiency.map(|eta| 1.0 - eta);
    let nm = NelderMeadOptions {
        max_evaluations: budget.max_evaluations,
        diameter_tol: budget.diameter_tol,
        stall_evaluations: budget.stall_evaluations,
        stall_improvement: budget.stall_improvement,
        target: None,
    };

    let mut best: Option<(CrabParams, f64)> = None;
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut evaluations = 0usize;
    let mut restarts_used = 0usize;

    for attempt in 0..=budget.max_restarts {
        restarts_used = attempt;
        let seed = budget.seed.wrapping_add(attempt as u64);
        let template = CrabParams::randomized(n_harmonics, duration, seed);
        let dim = template.n_coeffs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let spread = budget.initial_spread;
        let simplex: Vec<Vec<f64>> = (0..=dim)
            .map(|_| (0..dim).map(|_| rng.random_range(-spread..=spread)).collect())
            .collect();

        let to_params = |x: &[f64]| template.clone().with_coeffs(x.iter().map(|v| v * cap).collect());
        let run = nelder_mead(|x| objective(&to_params(x)), simplex, &nm, exec);
        log::info!(
            "restart {attempt}: infidelity {:.6} after {} evaluations ({:?})",
            run.value,
            run.evaluations,
            run.termination
        );

        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.1);
        for &(k, v) in &run.history {
            if v < history.last().map_or(f64::INFINITY, |h| h.1) {
                history.push((evaluations + k, v));
            }
        }
        evaluations += run.evaluations;
        if run.value < incumbent {
            best = Some((to_params(&run.x), run.value));
        }
        if target.is_some_and(|t| best.as_ref().is_some_and(|b| b.1 <= t)) {
            break;
        }
    }

    let (best_params, best_infidelity) = best.expect("at least one optimizer run");
    let report = OptimizerReport {
        best_params,
        best_infidelity,
        evaluations,
        restarts_used,
        convergence_history: history,
        duration,
        cap,
        frame,
        seed: budget.seed,
    };
    match target {
        Some(t) if report.best_infidelity > t => Err(OptimizeError::BudgetExhausted(Box::new(report))),
        _ => Ok(report),
    }
}
