//! The microwave-dressed Lambda system.
//!
//! Basis ordering is fixed: index 0 is `|0>`, index 1 is `|-1>`, index 2 is
//! the optically excited state `|e>`. Units: hbar = 1, angular frequencies in
//! rad/µs, times in µs.
//!
//! The simulation frame co-rotates `|e>` with the pump and `|-1>` with the
//! pump-Stokes difference, so both optical couplings are real and static. The
//! offset between that difference and the spin frequency (the Raman offset)
//! then shows up as a diagonal shift on `|-1>` and a phase on the microwave
//! coupling.

use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::lindblad::{self, DensityMatrix, Dissipator, LindbladError, SolverOptions};
use crate::linalg::{Mat2, Mat3, Vec3, Vector, C64, ZERO};
use crate::pulses::PulsePair;

pub const GROUND: usize = 0;
/// `|-1>`
pub const SPIN: usize = 1;
pub const EXCITED: usize = 2;

/// MHz (ordinary frequency) to rad/µs.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f
}

/// rad/µs to MHz.
pub fn to_mhz(w: f64) -> f64 {
    w / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dressing is undefined when both the Rabi frequency and detuning vanish")]
    DegenerateDressing,
}

/// Whether the spin states are dressed by the continuous microwave field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    /// Microwave on; Raman offset equal to the microwave Rabi frequency.
    Dressed,
    /// Microwave off; Raman offset zero.
    Bare,
}

/// Fixed physical parameters, all angular frequencies in rad/µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// Excited-state population decay rate.
    pub gamma: f64,
    /// Spin decoherence rate.
    pub gamma_s: f64,
    /// Microwave Rabi frequency.
    pub omega0: f64,
    /// One-photon (dipole) detuning of the pump from `|e>`.
    pub detuning: f64,
    /// Spin transition frequency; removed by the rotating frame.
    pub omega_b: f64,
    /// Bath-induced shift of `|-1>`.
    pub delta: f64,
    /// Transfer duration, µs.
    pub duration: f64,
    pub omega_max_s: f64,
    pub omega_max_p: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            gamma: mhz(14.0),
            gamma_s: mhz(1e-3),
            omega0: mhz(50.0),
            detuning: mhz(3000.0),
            omega_b: mhz(2870.0),
            delta: 0.0,
            duration: 0.72,
            omega_max_s: SQRT_2 * mhz(100.0),
            omega_max_p: SQRT_2 * mhz(100.0),
        }
    }
}

impl PhysicsConfig {
    /// Caps for bare-state runs that share lineshapes with dressed runs.
    pub fn with_bare_caps(self) -> Self {
        PhysicsConfig {
            omega_max_s: self.omega_max_s / SQRT_2,
            omega_max_p: self.omega_max_p / SQRT_2,
            ..self
        }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        PhysicsConfig { delta, ..self }
    }

    /// The larger of the two envelope caps.
    pub fn cap(&self) -> f64 {
        self.omega_max_s.max(self.omega_max_p)
    }

    pub fn raman_offset(&self, frame: Frame) -> f64 {
        match frame {
            Frame::Dressed => self.omega0,
            Frame::Bare => 0.0,
        }
    }
}

/// Eigenstates of the microwave-dressed spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedPair {
    pub theta0: f64,
    /// `+sqrt(Omega0^2 + delta^2)/2`, measured from the level mean `delta/2`.
    pub e_plus: f64,
    pub e_minus: f64,
    pub ket_plus: Vec3,
    pub ket_minus: Vec3,
}

impl DressedPair {
    pub fn splitting(&self) -> f64 {
        self.e_plus - self.e_minus
    }
}

/// Dressed states of the microwave Hamiltonian `delta |-1><-1| + Omega0/2 (|0><-1| + h.c.)`.
pub fn dressed_states(omega0: f64, delta: f64) -> Result<DressedPair, ModelError> {
    if omega0 == 0.0 && delta == 0.0 {
        return Err(ModelError::DegenerateDressing);
    }
    let r = omega0.hypot(delta);
    let theta0 = (omega0 / (r + delta)).atan();
    let theta0 = if theta0.is_nan() { PI / 2.0 } else { theta0 };
    let (s, c) = theta0.sin_cos();
    Ok(DressedPair {
        theta0,
        e_plus: 0.5 * r,
        e_minus: -0.5 * r,
        ket_plus: Vector::from_real([s, c, 0.0]),
        ket_minus: Vector::from_real([c, -s, 0.0]),
    })
}

/// The 2x2 microwave Hamiltonian on `{|0>, |-1>}` in the microwave frame.
pub fn microwave_hamiltonian(omega0: f64, delta: f64) -> Mat2 {
    Mat2::from_real([[0.0, 0.5 * omega0], [0.5 * omega0, delta]])
}

/// Which dressed states count as ideal initialization and readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdealDressedConvention {
    /// Exact eigenstates at the sampled bath shift.
    #[default]
    Eigenstate,
    /// The zero-shift superpositions `(|0> -+ |-1>)/sqrt(2)` regardless of the shift.
    ZeroDetuning,
}

pub fn ideal_dressed_pair(
    omega0: f64,
    delta: f64,
    convention: IdealDressedConvention,
) -> Result<DressedPair, ModelError> {
    match convention {
        IdealDressedConvention::Eigenstate => dressed_states(omega0, delta),
        IdealDressedConvention::ZeroDetuning => dressed_states(omega0, 0.0),
    }
}

/// `(|0> - |-1>)/sqrt(2)`
pub fn initial_state() -> Vec3 {
    Vector::from_real([FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0])
}

/// `(|0> + |-1>)/sqrt(2)`
pub fn target_state() -> Vec3 {
    Vector::from_real([FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0])
}

/// Microwave coupling in the simulation frame: `half_rabi * exp(-i offset t) |0><-1| + h.c.`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrowaveCoupling {
    pub half_rabi: f64,
    pub offset: f64,
}

pub fn microwave_coupling(cfg: &PhysicsConfig, frame: Frame) -> MicrowaveCoupling {
    match frame {
        Frame::Dressed => MicrowaveCoupling { half_rabi: 0.5 * cfg.omega0, offset: cfg.omega0 },
        Frame::Bare => MicrowaveCoupling { half_rabi: 0.0, offset: 0.0 },
    }
}

/// Time-independent diagonal `diag(0, delta - Omega_R, Delta)`.
pub fn static_hamiltonian(cfg: &PhysicsConfig, frame: Frame) -> Mat3 {
    Mat3::diagonal([0.0, cfg.delta - cfg.raman_offset(frame), cfg.detuning])
}

#[inline]
pub fn assemble_hamiltonian(
    static_part: &Mat3,
    mw: MicrowaveCoupling,
    t: f64,
    (stokes, pump): (f64, f64),
) -> Mat3 {
    let mut h = *static_part;
    if mw.half_rabi != 0.0 {
        let (s, c) = (mw.offset * t).sin_cos();
        let coupling = C64::new(mw.half_rabi * c, -mw.half_rabi * s);
        h.0[GROUND][SPIN] = coupling;
        h.0[SPIN][GROUND] = coupling.conj();
    }
    let p = C64::new(0.5 * pump, 0.0);
    let s = C64::new(0.5 * stokes, 0.0);
    h.0[GROUND][EXCITED] = p;
    h.0[EXCITED][GROUND] = p;
    h.0[SPIN][EXCITED] = s;
    h.0[EXCITED][SPIN] = s;
    h
}

/// Full rotating-frame Hamiltonian at time `t`.
pub fn hamiltonian(t: f64, pulses: &PulsePair, cfg: &PhysicsConfig, frame: Frame) -> Mat3 {
    assemble_hamiltonian(
        &static_hamiltonian(cfg, frame),
        microwave_coupling(cfg, frame),
        t,
        pulses.amplitudes(t),
    )
}

/// `[L0, L1, L3]`: the two excited-state decay branches and spin dephasing.
pub fn jump_operators(cfg: &PhysicsConfig) -> [Mat3; 3] {
    let branch = (0.5 * cfg.gamma).sqrt();
    let mut l0 = Mat3::zeros();
    l0.0[GROUND][EXCITED] = C64::new(branch, 0.0);
    let mut l1 = Mat3::zeros();
    l1.0[SPIN][EXCITED] = C64::new(branch, 0.0);
    let g = cfg.gamma_s.sqrt();
    let l3 = Mat3::diagonal([-g, g, 0.0]);
    [l0, l1, l3]
}

/// Unitary taking microwave-frame states to simulation-frame states at time `t`.
pub fn frame_rotation(t: f64, cfg: &PhysicsConfig, frame: Frame) -> Mat3 {
    let mut u = Mat3::identity();
    let phase = cfg.raman_offset(frame) * t;
    u.0[SPIN][SPIN] = C64::new(0.0, phase).exp();
    u
}

/// Re-expresses a simulation-frame state at time `t` in the microwave frame,
/// where the dressed states are stationary.
pub fn to_microwave_frame(
    rho: &DensityMatrix,
    t: f64,
    cfg: &PhysicsConfig,
    frame: Frame,
) -> DensityMatrix {
    rho.transformed(&frame_rotation(t, cfg, frame).adjoint())
}

/// Microwave phase that prepares `(|0> - |-1>)/sqrt(2)` from `|0>`.
pub const PREPARE_PHASE: f64 = PI / 2.0;
/// Microwave phase that maps `(|0> + |-1>)/sqrt(2)` onto `|-1>`.
pub const READOUT_PHASE: f64 = -PI / 2.0;

/// Duration of a resonant pi/2 microwave pulse, µs.
pub fn pi_half_duration(cfg: &PhysicsConfig) -> f64 {
    PI / (2.0 * cfg.omega0)
}

/// Applies a pi/2 microwave pulse of the given phase in the microwave frame,
/// with the spin shifted by `delta` and spin decoherence active.
pub fn pi_half_pulse(
    rho: &DensityMatrix,
    cfg: &PhysicsConfig,
    phase: f64,
    delta: f64,
) -> Result<DensityMatrix, LindbladError> {
    let mut h = Mat3::diagonal([0.0, delta, 0.0]);
    let coupling = C64::new(0.0, phase).exp() * (0.5 * cfg.omega0);
    h.0[GROUND][SPIN] = coupling;
    h.0[SPIN][GROUND] = coupling.conj();
    h.0[EXCITED][EXCITED] = ZERO;
    let opts = SolverOptions {
        rtol: 1e-11,
        atol: 1e-13,
        samples: 2,
        min_step: 1e-12,
        ..SolverOptions::default()
    };
    let dissipator = Dissipator::from_config(cfg);
    let traj = lindblad::propagate_with(rho, |_| h, &dissipator, pi_half_duration(cfg), &opts)?;
    Ok(traj.final_state)
}

/// Effective optically induced decay `(Omega / 2 Delta)^2 Gamma`.
pub fn nonadiabatic_rate(omega: f64, detuning: f64, gamma: f64) -> f64 {
    let x = omega / (2.0 * detuning);
    x * x * gamma
}
