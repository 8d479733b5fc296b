//! Lindblad master-equation propagation of the three-level density matrix.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat3, Vec3, C64, ZERO};
use crate::model::{self, Frame, PhysicsConfig, EXCITED, GROUND, SPIN};
use crate::ode::{self, OdeError, OdeStats, StepControl};
use crate::pulses::PulsePair;

/// Tolerances a stored state must satisfy to count as a density matrix.
pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITIAN_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Final-state trace drift above which the state is renormalized.
const RENORMALIZE_DRIFT: f64 = 1e-10;
/// Final-state trace drift above which propagation is reported as failed.
const MAX_DRIFT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LindbladError {
    #[error("adaptive step {h:e} us fell below the minimum at t = {t} us")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("final trace drift {drift:e} exceeds tolerance")]
    ToleranceNotMet { drift: f64 },
    #[error("integration produced a non-finite state at t = {t} us")]
    NonFinite { t: f64 },
    #[error("integration exceeded {steps} steps")]
    TooManySteps { steps: usize },
    #[error("not a valid density matrix: {0}")]
    InvalidState(StateDefect),
}

impl From<OdeError> for LindbladError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepSizeUnderflow { t, h } => LindbladError::StepSizeUnderflow { t, h },
            OdeError::NonFinite { t } => LindbladError::NonFinite { t },
            OdeError::TooManySteps { steps } => LindbladError::TooManySteps { steps },
        }
    }
}

/// How far a matrix is from being a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDefect {
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl StateDefect {
    pub fn is_valid(&self) -> bool {
        self.trace_error < TRACE_TOL
            && self.hermiticity < HERMITIAN_TOL
            && self.min_eigenvalue > -POSITIVITY_TOL
    }
}

impl core::fmt::Display for StateDefect {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "|tr - 1| = {:e}, hermiticity defect = {:e}, min eigenvalue = {:e}",
            self.trace_error, self.hermiticity, self.min_eigenvalue
        )
    }
}

/// State of the Lambda system in the simulation frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat3);

impl DensityMatrix {
    pub fn try_new(m: Mat3) -> Result<Self, LindbladError> {
        let defect = defect_of(&m);
        if defect.is_valid() {
            Ok(DensityMatrix(m))
        } else {
            Err(LindbladError::InvalidState(defect))
        }
    }

    /// Wraps a matrix without validation; used for integrator output that is
    /// checked separately.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        DensityMatrix(m)
    }

    pub fn pure(psi: &Vec3) -> Self {
        DensityMatrix(psi.normalized().projector())
    }

    pub fn basis(i: usize) -> Self {
        DensityMatrix(Mat3::unit(i, i))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Mat3::diagonal([1.0 / 3.0; 3]))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn population(&self, i: usize) -> f64 {
        self.0 .0[i][i].re
    }

    pub fn coherence(&self, i: usize, j: usize) -> C64 {
        self.0 .0[i][j]
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// `<psi|rho|psi>` as a complex number.
    pub fn overlap(&self, psi: &Vec3) -> C64 {
        self.0.expectation(psi)
    }

    pub fn defect(&self) -> StateDefect {
        defect_of(&self.0)
    }

    /// Conjugates with a unitary: `U rho U^dag`.
    pub fn transformed(&self, u: &Mat3) -> Self {
        DensityMatrix(*u * self.0 * u.adjoint())
    }
}

fn defect_of(m: &Mat3) -> StateDefect {
    let trace_error = (m.trace() - C64::new(1.0, 0.0)).norm();
    let hermiticity = m.hermiticity_defect();
    let min_eigenvalue = match m.hermitian_part().hermitian_eigs() {
        Ok(e) => e.values[0],
        Err(_) => f64::NEG_INFINITY,
    };
    StateDefect { trace_error, hermiticity, min_eigenvalue }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Uniform output samples over `[0, T]`, endpoints included.
    pub samples: usize,
    /// µs
    pub min_step: f64,
    /// µs; `None` uses a hundredth of the propagation window.
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-9,
            atol: 1e-11,
            samples: 1441,
            min_step: 1e-9,
            max_step: None,
            max_steps: 5_000_000,
        }
    }
}

impl SolverOptions {
    fn control(&self, span: f64) -> StepControl {
        StepControl {
            rtol: self.rtol,
            atol: self.atol,
            min_step: self.min_step,
            max_step: self.max_step.unwrap_or(span / 100.0),
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub peak_excited_population: f64,
    pub final_state: DensityMatrix,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Worst-case defect over every stored state.
    pub fn worst_defect(&self) -> StateDefect {
        self.states.iter().map(|s| s.defect()).fold(
            StateDefect { trace_error: 0.0, hermiticity: 0.0, min_eigenvalue: f64::INFINITY },
            |acc, d| StateDefect {
                trace_error: acc.trace_error.max(d.trace_error),
                hermiticity: acc.hermiticity.max(d.hermiticity),
                min_eigenvalue: acc.min_eigenvalue.min(d.min_eigenvalue),
            },
        )
    }
}

/// Dissipative part of the generator with jump operators stored sparsely.
#[derive(Debug, Clone)]
pub struct Dissipator {
    /// `(1/2) sum_k L_k^dag L_k`
    half_decay: Mat3,
    jumps: Vec<SparseOp>,
}

#[derive(Debug, Clone)]
struct SparseOp {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    fn from_dense(m: &Mat3) -> Self {
        let mut entries = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if m.0[i][j] != ZERO {
                    entries.push((i, j, m.0[i][j]));
                }
            }
        }
        SparseOp { entries }
    }

    /// accumulates `L rho L^dag` into `out`
    #[inline]
    fn sandwich_into(&self, rho: &Mat3, out: &mut Mat3) {
        for &(a, i, la) in &self.entries {
            for &(b, j, lb) in &self.entries {
                out.0[a][b] += la * rho.0[i][j] * lb.conj();
            }
        }
    }
}

impl Dissipator {
    pub fn new(jumps: &[Mat3]) -> Self {
        let mut decay = Mat3::zeros();
        for l in jumps {
            decay += l.adjoint() * *l;
        }
        Dissipator {
            half_decay: decay.scale_real(0.5),
            jumps: jumps.iter().map(SparseOp::from_dense).filter(|s| !s.entries.is_empty()).collect(),
        }
    }

    pub fn from_config(cfg: &PhysicsConfig) -> Self {
        Self::new(&model::jump_operators(cfg))
    }

    /// `-i[H, rho] + sum_k (L rho L^dag - {L^dag L, rho}/2)` for Hermitian `rho`.
    #[inline]
    pub fn generator(&self, h: &Mat3, rho: &Mat3) -> Mat3 {
        // With H_eff = H - i K/2 and X = H_eff rho, the coherent part plus the
        // anticommutator is -i X + i X^dag when rho is Hermitian.
        let mut h_eff = *h;
        for i in 0..3 {
            for j in 0..3 {
                h_eff.0[i][j] -= C64::new(0.0, 1.0) * self.half_decay.0[i][j];
            }
        }
        let x = h_eff * *rho;
        let mut out = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let v = x.0[i][j] - x.0[j][i].conj();
                out.0[i][j] = C64::new(v.im, -v.re);
            }
        }
        for l in &self.jumps {
            l.sandwich_into(rho, &mut out);
        }
        out
    }
}

/// General right-hand side, valid for non-Hermitian arguments as well.
pub fn lindblad_rhs_general(h: &Mat3, rho: &Mat3, jumps: &[Mat3]) -> Mat3 {
    let mut out = h.commutator(rho).scale(C64::new(0.0, -1.0));
    for l in jumps {
        let ld = l.adjoint();
        out += *l * *rho * ld - (ld * *l).anticommutator(rho).scale_real(0.5);
    }
    out
}

/// `d rho / dt` at time `t` for the given pulses and run frame.
pub fn lindblad_rhs(
    t: f64,
    rho: &DensityMatrix,
    pulses: &PulsePair,
    cfg: &PhysicsConfig,
    frame: Frame,
) -> Mat3 {
    let h = model::hamiltonian(t, pulses, cfg, frame);
    lindblad_rhs_general(&h, rho.matrix(), &model::jump_operators(cfg))
}

/// Propagates `rho0` over `[0, cfg.duration]` under the optical pulses.
///
/// The integration runs in the interaction picture of the static diagonal
/// Hamiltonian, so the solver never resolves the one-photon phase; stored
/// states are rotated back. The jump operators are single transitions or
/// diagonal, so the dissipator keeps its form in that picture.
pub fn propagate(
    rho0: &DensityMatrix,
    pulses: &PulsePair,
    cfg: &PhysicsConfig,
    frame: Frame,
    opts: &SolverOptions,
) -> Result<Trajectory, LindbladError> {
    let dissipator = Dissipator::from_config(cfg);
    let static_part = model::static_hamiltonian(cfg, frame);
    let levels = [static_part.0[0][0].re, static_part.0[1][1].re, static_part.0[2][2].re];
    let off_diagonal = Mat3::zeros();
    let mw = model::microwave_coupling(cfg, frame);
    let mut traj = propagate_with(
        rho0,
        |t| {
            let mut h = model::assemble_hamiltonian(&off_diagonal, mw, t, pulses.amplitudes(t));
            rotate_off_diagonal(&mut h, &levels, t);
            h
        },
        &dissipator,
        cfg.duration,
        opts,
    )?;
    for (&t, state) in traj.times.iter().zip(traj.states.iter_mut()) {
        rotate_off_diagonal(&mut state.0, &levels, -t);
    }
    traj.final_state = traj.states[traj.states.len() - 1];
    Ok(traj)
}

/// `m_ij -> m_ij exp(i (E_i - E_j) t)`
#[inline]
fn rotate_off_diagonal(m: &mut Mat3, levels: &[f64; 3], t: f64) {
    let phase = levels.map(|e| {
        let (s, c) = (e * t).sin_cos();
        C64::new(c, s)
    });
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                m.0[i][j] *= phase[i] * phase[j].conj();
            }
        }
    }
}

/// Propagates `rho0` over `[0, duration]` under an arbitrary Hamiltonian.
pub fn propagate_with<H>(
    rho0: &DensityMatrix,
    hamiltonian: H,
    dissipator: &Dissipator,
    duration: f64,
    opts: &SolverOptions,
) -> Result<Trajectory, LindbladError>
where
    H: Fn(f64) -> Mat3,
{
    let samples = opts.samples.max(2);
    let times: Vec<f64> = (0..samples)
        .map(|i| duration * i as f64 / (samples - 1) as f64)
        .collect();
    let (raw, stats) = ode::integrate_dense(
        |t, rho| dissipator.generator(&hamiltonian(t), rho),
        *rho0.matrix(),
        0.0,
        duration,
        &times,
        &opts.control(duration),
    )?;

    let mut states: Vec<DensityMatrix> = raw.into_iter().map(DensityMatrix).collect();
    let last = states.len() - 1;
    let final_raw = states[last].0;
    let drift = (final_raw.trace() - C64::new(1.0, 0.0)).norm();
    if drift > MAX_DRIFT {
        return Err(LindbladError::ToleranceNotMet { drift });
    }
    let final_state = if drift > RENORMALIZE_DRIFT || final_raw.hermiticity_defect() > RENORMALIZE_DRIFT {
        log::debug!("renormalizing final state, trace drift {drift:e}");
        let h = final_raw.hermitian_part();
        DensityMatrix(h.scale_real(1.0 / h.trace().re))
    } else {
        DensityMatrix(final_raw)
    };
    states[last] = final_state;

    let peak_excited_population = states
        .iter()
        .map(|s| s.population(EXCITED))
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(Trajectory { times, states, peak_excited_population, final_state, stats })
}

/// `<target|rho(T)|target>`.
pub fn transfer_efficiency(traj: &Trajectory, target: &Vec3) -> f64 {
    let v = traj.final_state.overlap(&target.normalized());
    debug_assert!(v.im.abs() < 1e-9, "imaginary overlap {}", v.im);
    v.re
}

/// Spin populations `(rho_00, rho_-1-1)` and excited population.
pub fn populations(rho: &DensityMatrix) -> [f64; 3] {
    [rho.population(GROUND), rho.population(SPIN), rho.population(EXCITED)]
}
