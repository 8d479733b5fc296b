use dressed_stirap_core::crab_opt::ObjectiveSpec;
use dressed_stirap_core::linalg::{Matrix, Vector, C64};
use dressed_stirap_core::lindblad::{
    self, propagate, propagate_with, DensityMatrix, Dissipator, SolverOptions, HERMITIAN_TOL, POSITIVITY_TOL,
    TRACE_TOL,
};
use dressed_stirap_core::model::{self, mhz, Frame, PhysicsConfig, EXCITED, GROUND, SPIN};
use dressed_stirap_core::pulses::{crab_pulse, satd_pipeline, BaseStirapShape, CrabParams, PulsePair};
use proptest::prelude::*;

fn opts(samples: usize) -> SolverOptions {
    SolverOptions { samples, ..SolverOptions::default() }
}

#[test]
fn excited_state_decays_at_gamma() {
    let gamma = mhz(14.0);
    let cfg = PhysicsConfig { gamma, gamma_s: 0.0, duration: 1.0 / gamma, ..PhysicsConfig::default() };
    let pulses = PulsePair::zero(cfg.duration, 1.0);
    let traj = propagate(&DensityMatrix::basis(EXCITED), &pulses, &cfg, Frame::Bare, &opts(201)).unwrap();
    assert!((traj.final_state.population(EXCITED) - (-1.0f64).exp()).abs() < 1e-6);
    for (&t, rho) in traj.times.iter().zip(&traj.states) {
        let pe = (-gamma * t).exp();
        assert!((rho.population(EXCITED) - pe).abs() < 1e-6);
        assert!((rho.population(GROUND) - 0.5 * (1.0 - pe)).abs() < 1e-6);
        assert!((rho.population(SPIN) - 0.5 * (1.0 - pe)).abs() < 1e-6);
    }
}

#[test]
fn spin_coherence_dephases_at_twice_gamma_s() {
    let gamma_s = mhz(0.5);
    let cfg = PhysicsConfig { gamma_s, ..PhysicsConfig::default() };
    let pulses = PulsePair::zero(cfg.duration, 1.0);
    let rho0 = DensityMatrix::pure(&model::initial_state());
    let traj = propagate(&rho0, &pulses, &cfg, Frame::Bare, &opts(145)).unwrap();
    for (&t, rho) in traj.times.iter().zip(&traj.states) {
        let want = 0.5 * (-2.0 * gamma_s * t).exp();
        let got = rho.coherence(GROUND, SPIN).norm();
        assert!((got - want).abs() < 1e-6 * want, "t={t}: {got} vs {want}");
    }
}

#[test]
fn resonant_microwave_drives_rabi_oscillation() {
    let cfg = PhysicsConfig { gamma_s: 0.0, ..PhysicsConfig::default() };
    let pulses = PulsePair::zero(cfg.duration, 1.0);
    let traj = propagate(&DensityMatrix::basis(GROUND), &pulses, &cfg, Frame::Dressed, &opts(721)).unwrap();
    for (&t, rho) in traj.times.iter().zip(&traj.states) {
        let want = (0.5 * cfg.omega0 * t).sin().powi(2);
        assert!((rho.population(SPIN) - want).abs() < 1e-6, "t={t}");
    }
}

fn reference_run() -> (PulsePair, PhysicsConfig) {
    let cfg = PhysicsConfig::default();
    let spec = ObjectiveSpec::bare(cfg);
    let pulses = satd_pipeline(&BaseStirapShape::default(), cfg.duration, cfg.detuning, spec.cap()).unwrap();
    (pulses, cfg)
}

#[test]
fn halving_the_tolerance_moves_efficiency_below_1e7() {
    let (pulses, cfg) = reference_run();
    let rho0 = DensityMatrix::basis(GROUND);
    let eta = |o: SolverOptions| {
        let traj = propagate(&rho0, &pulses, &cfg, Frame::Bare, &o).unwrap();
        traj.final_state.population(SPIN)
    };
    let base = eta(opts(2));
    let o = opts(2);
    let tight = eta(SolverOptions { rtol: 0.5 * o.rtol, atol: 0.5 * o.atol, ..o });
    assert!((base - tight).abs() < 1e-7, "{base} vs {tight}");
}

#[test]
fn global_energy_shift_leaves_dynamics_unchanged() {
    let (pulses, cfg) = reference_run();
    let rho0 = DensityMatrix::basis(GROUND);
    let dissipator = Dissipator::from_config(&cfg);
    let shift = Matrix::<3>::identity().scale_real(mhz(123.0));
    let h = |t: f64| model::hamiltonian(t, &pulses, &cfg, Frame::Bare);
    let a = propagate_with(&rho0, h, &dissipator, cfg.duration, &opts(2)).unwrap();
    let b = propagate_with(&rho0, |t| h(t) + shift, &dissipator, cfg.duration, &opts(2)).unwrap();
    let d = (a.final_state.population(SPIN) - b.final_state.population(SPIN)).abs();
    assert!(d < 1e-8, "{d}");
}

fn random_crab(seed: u64, scale_mhz: f64, cfg: &PhysicsConfig) -> PulsePair {
    let params = CrabParams::randomized(5, cfg.duration, seed);
    let coeffs = (0..params.n_coeffs())
        .map(|i| mhz(scale_mhz) * ((seed as f64 + 1.0) * (i as f64 + 0.5)).sin())
        .collect();
    crab_pulse(&params.with_coeffs(coeffs), &PulsePair::zero(cfg.duration, cfg.cap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trajectories_stay_physical(
        seed in 0u64..1000,
        scale in 20.0f64..150.0,
        delta in -4.0f64..4.0,
        dressed in any::<bool>(),
    ) {
        let cfg = PhysicsConfig { delta: mhz(delta), ..PhysicsConfig::default() };
        let frame = if dressed { Frame::Dressed } else { Frame::Bare };
        let rho0 = if dressed { DensityMatrix::pure(&model::initial_state()) } else { DensityMatrix::basis(GROUND) };
        let traj = propagate(&rho0, &random_crab(seed, scale, &cfg), &cfg, frame, &opts(361)).unwrap();
        for rho in &traj.states {
            let d = rho.defect();
            prop_assert!(d.trace_error < TRACE_TOL, "{d}");
            prop_assert!(d.hermiticity < HERMITIAN_TOL, "{d}");
            prop_assert!(d.min_eigenvalue > -POSITIVITY_TOL, "{d}");
        }
        let pe = traj.states.iter().map(|s| s.population(EXCITED)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(pe, traj.peak_excited_population);
    }

    #[test]
    fn unitary_limit_preserves_purity(
        seed in 0u64..1000,
        scale in 20.0f64..150.0,
        theta in 0.0f64..core::f64::consts::PI,
        phi in 0.0f64..core::f64::consts::TAU,
    ) {
        let cfg = PhysicsConfig { gamma: 0.0, gamma_s: 0.0, ..PhysicsConfig::default() };
        let psi = Vector::<3>([C64::new(theta.cos(), 0.0), C64::from_polar(theta.sin(), phi), C64::new(0.0, 0.0)]);
        let traj = propagate(&DensityMatrix::pure(&psi), &random_crab(seed, scale, &cfg), &cfg, Frame::Dressed, &opts(181)).unwrap();
        for rho in &traj.states {
            prop_assert!((rho.purity() - 1.0).abs() < 1e-8, "{}", rho.purity());
        }
    }
}

#[test]
fn transfer_efficiency_reads_the_target_population() {
    let (pulses, cfg) = reference_run();
    let traj = propagate(&DensityMatrix::basis(GROUND), &pulses, &cfg, Frame::Bare, &opts(2)).unwrap();
    let eta = lindblad::transfer_efficiency(&traj, &Vector::basis(SPIN));
    assert_eq!(eta, traj.final_state.population(SPIN));
    assert!(eta > 0.99);
}
