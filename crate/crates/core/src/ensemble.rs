//! Monte Carlo experiments over quasi-static spin-bath shifts.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crab_opt::{self, ObjectiveSpec, OptimizeError, OptimizerBudget};
use crate::exec::Executor;
use crate::lindblad::{self, DensityMatrix, LindbladError, SolverOptions};
use crate::model::{
    self, Frame, IdealDressedConvention, ModelError, PhysicsConfig, GROUND, PREPARE_PHASE, READOUT_PHASE, SPIN,
};
use crate::pulses::{satd_pipeline, BaseStirapShape, PulseError, PulsePair};

/// Gaussian distribution of the `|-1>` shift, constant within one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingModel {
    /// Standard deviation, rad/µs.
    pub sigma: f64,
    pub seed: u64,
}

impl DephasingModel {
    /// The shift for run `index`; independent of how many runs are drawn.
    pub fn delta(&self, index: u64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let z: f64 = StandardNormal.sample(&mut rng);
        self.sigma * z
    }
}

pub fn sample_delta(model: &DephasingModel, n: usize) -> Vec<f64> {
    (0..n as u64).map(|i| model.delta(i)).collect()
}

/// Which stages see the bath shift, and whether the microwave dressing is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunVariant {
    pub dephase_init: bool,
    pub dephase_transfer: bool,
    pub dephase_readout: bool,
    pub frame: Frame,
}

impl RunVariant {
    pub const TRANSFER_ONLY: Self = Self::dressed(false, true, false);
    pub const INIT_TRANSFER: Self = Self::dressed(true, true, false);
    pub const READOUT_TRANSFER: Self = Self::dressed(false, true, true);
    pub const ALL_STAGES: Self = Self::dressed(true, true, true);
    pub const BARE: Self =
        RunVariant { dephase_init: false, dephase_transfer: true, dephase_readout: false, frame: Frame::Bare };

    const fn dressed(init: bool, transfer: bool, readout: bool) -> Self {
        RunVariant {
            dephase_init: init,
            dephase_transfer: transfer,
            dephase_readout: readout,
            frame: Frame::Dressed,
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.frame, self.dephase_init, self.dephase_transfer, self.dephase_readout) {
            (Frame::Bare, ..) => "bare",
            (Frame::Dressed, false, true, false) => "transfer",
            (Frame::Dressed, true, true, false) => "init-transfer",
            (Frame::Dressed, false, true, true) => "readout-transfer",
            (Frame::Dressed, true, true, true) => "init-transfer-readout",
            _ => "custom",
        }
    }
}

/// Lineshapes are shared between frames; bare runs use amplitudes and cap
/// reduced by `sqrt(2)` so both see the same effective coupling.
pub fn pulses_for_frame(dressed: &PulsePair, frame: Frame) -> PulsePair {
    match frame {
        Frame::Dressed => dressed.clone(),
        Frame::Bare => dressed.scaled(core::f64::consts::FRAC_1_SQRT_2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub efficiency: f64,
    pub peak_excited: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunFailure {
    #[error(transparent)]
    Solver(#[from] LindbladError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run with delta = {delta} rad/us failed: {source}")]
pub struct RunError {
    pub delta: f64,
    pub source: RunFailure,
}

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub solver: SolverOptions,
    pub convention: IdealDressedConvention,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { solver: SolverOptions::default(), convention: IdealDressedConvention::default() }
    }
}

/// Initialization, transfer and readout for one bath shift.
pub fn run_once(
    delta: f64,
    variant: RunVariant,
    pulses: &PulsePair,
    cfg: &PhysicsConfig,
    settings: &RunSettings,
) -> Result<RunOutcome, RunError> {
    let wrap = |source: LindbladError| RunError { delta, source: source.into() };
    let transfer_delta = if variant.dephase_transfer { delta } else { 0.0 };
    let transfer_cfg = cfg.with_delta(transfer_delta);

    if variant.frame == Frame::Bare {
        let traj = lindblad::propagate(&DensityMatrix::basis(GROUND), pulses, &transfer_cfg, Frame::Bare, &settings.solver)
            .map_err(wrap)?;
        return Ok(RunOutcome {
            efficiency: traj.final_state.population(SPIN),
            peak_excited: traj.peak_excited_population,
        });
    }

    let ideal = model::ideal_dressed_pair(cfg.omega0, transfer_delta, settings.convention)
        .map_err(|e| RunError { delta, source: e.into() })?;
    let rho0 = if variant.dephase_init {
        model::pi_half_pulse(&DensityMatrix::basis(GROUND), cfg, PREPARE_PHASE, delta).map_err(wrap)?
    } else {
        DensityMatrix::pure(&ideal.ket_minus)
    };
    let traj = lindblad::propagate(&rho0, pulses, &transfer_cfg, Frame::Dressed, &settings.solver).map_err(wrap)?;
    let rho = model::to_microwave_frame(&traj.final_state, traj.final_time(), &transfer_cfg, Frame::Dressed);
    let efficiency = if variant.dephase_readout {
        model::pi_half_pulse(&rho, cfg, READOUT_PHASE, delta).map_err(wrap)?.population(SPIN)
    } else {
        rho.overlap(&ideal.ket_plus).re
    };
    Ok(RunOutcome { efficiency, peak_excited: traj.peak_excited_population })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub delta: f64,
    pub efficiency: f64,
    pub peak_excited: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub failed: usize,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub mean_peak_excited: f64,
}

impl Summary {
    /// Statistics of the successful runs. The values are sorted first so the
    /// result does not depend on run order.
    pub fn of(records: &[RunRecord]) -> Self {
        let ok: Vec<&RunRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let mut eff: Vec<f64> = ok.iter().map(|r| r.efficiency).collect();
        let mut peak: Vec<f64> = ok.iter().map(|r| r.peak_excited).collect();
        eff.sort_by(f64::total_cmp);
        peak.sort_by(f64::total_cmp);
        let n = eff.len();
        let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let min = eff.first().copied().unwrap_or(f64::NAN);
        let max = eff.last().copied().unwrap_or(f64::NAN);
        let m = if n == 0 { f64::NAN } else { mean(&eff).clamp(min, max) };
        let mut dev: Vec<f64> = eff.iter().map(|x| (x - m) * (x - m)).collect();
        dev.sort_by(f64::total_cmp);
        let std = if n > 1 { (dev.iter().sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Summary {
            runs: records.len(),
            failed: records.len() - n,
            mean: m,
            std,
            min,
            max,
            mean_peak_excited: mean(&peak),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub model: DephasingModel,
    pub variant: RunVariant,
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

impl EnsembleResult {
    pub fn efficiencies(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.error.is_none()).map(|r| r.efficiency).collect()
    }

    pub fn success_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 1.0;
        }
        1.0 - self.summary.failed as f64 / self.records.len() as f64
    }
}

/// `runs` independent runs with shifts drawn from `model`.
pub fn run_ensemble<E: Executor>(
    model: &DephasingModel,
    runs: usize,
    variant: RunVariant,
    pulses: &PulsePair,
    cfg: &PhysicsConfig,
    settings: &RunSettings,
    exec: &E,
) -> EnsembleResult {
    let records = exec.map_indexed(runs, |i| {
        let delta = model.delta(i as u64);
        match run_once(delta, variant, pulses, cfg, settings) {
            Ok(o) => RunRecord { index: i, delta, efficiency: o.efficiency, peak_excited: o.peak_excited, error: None },
            Err(e) => {
                log::warn!("run {i}: {e}");
                RunRecord {
                    index: i,
                    delta,
                    efficiency: f64::NAN,
                    peak_excited: f64::NAN,
                    error: Some(e.to_string()),
                }
            }
        }
    });
    let summary = Summary::of(&records);
    EnsembleResult { model: *model, variant, records, summary }
}

/// One ensemble per `sigma`, all keyed by the same seed.
#[allow(clippy::too_many_arguments)]
pub fn sweep_sigma<E: Executor>(
    sigmas: &[f64],
    runs_per_sigma: usize,
    seed: u64,
    variant: RunVariant,
    pulses: &PulsePair,
    cfg: &PhysicsConfig,
    settings: &RunSettings,
    exec: &E,
) -> Vec<EnsembleResult> {
    sigmas
        .iter()
        .map(|&sigma| {
            run_ensemble(&DephasingModel { sigma, seed }, runs_per_sigma, variant, pulses, cfg, settings, exec)
        })
        .collect()
}

/// Fixed-width bins over `[0, 1]`; the last bin also takes values up to
/// `1 + 1e-8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Samples outside `[0, 1]`.
    pub outside: usize,
}

impl Histogram {
    pub fn new(values: &[f64], bin_width: f64) -> Self {
        assert!(bin_width > 0.0, "bin width must be positive");
        let exact = 1.0 / bin_width;
        let n = if (exact - exact.round()).abs() < 1e-9 { exact.round() } else { exact.ceil() } as usize;
        let edges: Vec<f64> = (0..=n).map(|i| (i as f64 * bin_width).min(1.0)).collect();
        let mut counts = alloc::vec![0usize; n];
        let mut outside = 0;
        for &v in values {
            match Self::bin_of(v, bin_width, n) {
                Some(i) => counts[i] += 1,
                None => outside += 1,
            }
        }
        Histogram { bin_width, edges, counts, outside }
    }

    fn bin_of(v: f64, bin_width: f64, n: usize) -> Option<usize> {
        if !(-0.0..=1.0 + 1e-8).contains(&v) {
            return None;
        }
        Some(((v / bin_width).floor() as usize).min(n - 1))
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.outside
    }

    /// Index of the most populated bin (the lowest one on ties).
    pub fn mode(&self) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }

    /// Bins of the contiguous occupied run containing the mode.
    pub fn mode_cluster(&self) -> core::ops::RangeInclusive<usize> {
        let m = self.mode();
        let mut lo = m;
        while lo > 0 && self.counts[lo - 1] > 0 {
            lo -= 1;
        }
        let mut hi = m;
        while hi + 1 < self.counts.len() && self.counts[hi + 1] > 0 {
            hi += 1;
        }
        lo..=hi
    }

    /// Range of the values that fall in the mode cluster.
    pub fn mode_cluster_span(&self, values: &[f64]) -> f64 {
        let cluster = self.mode_cluster();
        let n = self.counts.len();
        let inside: Vec<f64> = values
            .iter()
            .copied()
            .filter(|&v| Self::bin_of(v, self.bin_width, n).is_some_and(|b| cluster.contains(&b)))
            .collect();
        let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if inside.is_empty() { 0.0 } else { hi - lo }
    }
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.005;

pub fn histogram(result: &EnsembleResult, bin_width: f64) -> Histogram {
    Histogram::new(&result.efficiencies(), bin_width)
}

/// How pulses are obtained at each one-photon detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseScheme {
    Satd(BaseStirapShape),
    Crab(OptimizerBudget),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningPoint {
    pub detuning: f64,
    pub efficiency: Option<f64>,
    pub peak_amplitude: Option<f64>,
    pub error: Option<String>,
}

/// Lower end of the detuning range where adiabatic elimination is trusted.
pub const MIN_DETUNING_MHZ: f64 = 1500.0;

/// Transfer efficiency without bath shifts as a function of the one-photon
/// detuning. Each point synthesizes or optimizes its own pulses.
pub fn sweep_detuning<E: Executor>(
    detunings: &[f64],
    scheme: &PulseScheme,
    frame: Frame,
    cfg: &PhysicsConfig,
    exec: &E,
) -> Vec<DetuningPoint> {
    detunings
        .iter()
        .map(|&detuning| {
            let cfg = PhysicsConfig { detuning, delta: 0.0, ..*cfg };
            let spec = match frame {
                Frame::Dressed => ObjectiveSpec::dressed(cfg),
                Frame::Bare => ObjectiveSpec::bare(cfg),
            };
            let pulses: Result<PulsePair, String> = match scheme {
                PulseScheme::Satd(base) => satd_pipeline(base, cfg.duration, detuning, spec.cap())
                    .map_err(|e: PulseError| e.to_string()),
                PulseScheme::Crab(budget) => match crab_opt::optimize(&spec, budget, exec) {
                    Ok(r) => Ok(r.pulses()),
                    Err(OptimizeError::BudgetExhausted(r)) => Ok(r.pulses()),
                    Err(e) => Err(e.to_string()),
                },
            };
            match pulses {
                Ok(p) => match crab_opt::efficiency_of(&p, &spec) {
                    Ok(eta) => DetuningPoint {
                        detuning,
                        efficiency: Some(eta),
                        peak_amplitude: Some(p.peak(4001).0),
                        error: None,
                    },
                    Err(e) => DetuningPoint { detuning, efficiency: None, peak_amplitude: None, error: Some(e.to_string()) },
                },
                Err(e) => DetuningPoint { detuning, efficiency: None, peak_amplitude: None, error: Some(e) },
            }
        })
        .collect()
}
