//! Run configuration in laboratory units (MHz, µs).

use std::path::{Path, PathBuf};

use dressed_stirap_core::crab_opt::OptimizerBudget;
use dressed_stirap_core::ensemble::{RunSettings, RunVariant};
use dressed_stirap_core::lindblad::SolverOptions;
use dressed_stirap_core::model::{mhz, Frame, IdealDressedConvention, PhysicsConfig};
use dressed_stirap_core::pulses::{BaseStirapShape, DEFAULT_HARMONICS};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SatdPulses,
    CrabOptimize,
    Simulate,
    SweepDetuning,
    SweepSigma,
    HistogramVariants,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SatdPulses => "satd-pulses",
            Experiment::CrabOptimize => "crab-optimize",
            Experiment::Simulate => "simulate",
            Experiment::SweepDetuning => "sweep-detuning",
            Experiment::SweepSigma => "sweep-sigma",
            Experiment::HistogramVariants => "histogram-variants",
        }
    }
}

/// Physical parameters; frequencies are ordinary frequencies in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsMhz {
    pub gamma_mhz: f64,
    pub gamma_s_mhz: f64,
    pub omega0_mhz: f64,
    pub detuning_mhz: f64,
    pub omega_b_mhz: f64,
    pub delta_mhz: f64,
    pub duration_us: f64,
    pub omega_max_s_mhz: f64,
    pub omega_max_p_mhz: f64,
}

impl Default for PhysicsMhz {
    fn default() -> Self {
        let cap = std::f64::consts::SQRT_2 * 100.0;
        PhysicsMhz {
            gamma_mhz: 14.0,
            gamma_s_mhz: 1e-3,
            omega0_mhz: 50.0,
            detuning_mhz: 3000.0,
            omega_b_mhz: 2870.0,
            delta_mhz: 0.0,
            duration_us: 0.72,
            omega_max_s_mhz: cap,
            omega_max_p_mhz: cap,
        }
    }
}

impl PhysicsMhz {
    pub fn to_physics(&self) -> PhysicsConfig {
        PhysicsConfig {
            gamma: mhz(self.gamma_mhz),
            gamma_s: mhz(self.gamma_s_mhz),
            omega0: mhz(self.omega0_mhz),
            detuning: mhz(self.detuning_mhz),
            omega_b: mhz(self.omega_b_mhz),
            delta: mhz(self.delta_mhz),
            duration: self.duration_us,
            omega_max_s: mhz(self.omega_max_s_mhz),
            omega_max_p: mhz(self.omega_max_p_mhz),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantName {
    Transfer,
    InitTransfer,
    ReadoutTransfer,
    InitTransferReadout,
    Bare,
}

impl VariantName {
    pub const ALL: [VariantName; 5] = [
        VariantName::Transfer,
        VariantName::InitTransfer,
        VariantName::ReadoutTransfer,
        VariantName::InitTransferReadout,
        VariantName::Bare,
    ];

    pub fn variant(self) -> RunVariant {
        match self {
            VariantName::Transfer => RunVariant::TRANSFER_ONLY,
            VariantName::InitTransfer => RunVariant::INIT_TRANSFER,
            VariantName::ReadoutTransfer => RunVariant::READOUT_TRANSFER,
            VariantName::InitTransferReadout => RunVariant::ALL_STAGES,
            VariantName::Bare => RunVariant::BARE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SatdSection {
    pub amplitude_mhz: f64,
    pub width_fraction: f64,
    pub delay_fraction: f64,
    /// Frame used to score the synthesized pulses.
    pub frame: Frame,
    pub samples: usize,
}

impl Default for SatdSection {
    fn default() -> Self {
        let base = BaseStirapShape::default();
        SatdSection {
            amplitude_mhz: 50.0,
            width_fraction: base.width_fraction,
            delay_fraction: base.delay_fraction,
            frame: Frame::Bare,
            samples: 1441,
        }
    }
}

impl SatdSection {
    pub fn base(&self) -> BaseStirapShape {
        BaseStirapShape {
            amplitude: mhz(self.amplitude_mhz),
            width_fraction: self.width_fraction,
            delay_fraction: self.delay_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrabSection {
    pub frame: Frame,
    pub n_harmonics: usize,
    pub max_evaluations: usize,
    pub max_restarts: usize,
    pub initial_spread: f64,
    pub diameter_tol: f64,
    pub stall_evaluations: usize,
    pub stall_improvement: f64,
    /// Efficiency required for a successful exit; also ends the restarts.
    pub threshold: f64,
    pub samples: usize,
}

impl Default for CrabSection {
    fn default() -> Self {
        let b = OptimizerBudget::default();
        CrabSection {
            frame: Frame::Dressed,
            n_harmonics: DEFAULT_HARMONICS,
            max_evaluations: b.max_evaluations,
            max_restarts: b.max_restarts,
            initial_spread: b.initial_spread,
            diameter_tol: b.diameter_tol,
            stall_evaluations: b.stall_evaluations,
            stall_improvement: b.stall_improvement,
            threshold: 0.97,
            samples: 1441,
        }
    }
}

impl CrabSection {
    pub fn budget(&self, seed: u64) -> OptimizerBudget {
        OptimizerBudget {
            max_evaluations: self.max_evaluations,
            max_restarts: self.max_restarts,
            target_efficiency: Some(self.threshold),
            initial_spread: self.initial_spread,
            diameter_tol: self.diameter_tol,
            stall_evaluations: self.stall_evaluations,
            stall_improvement: self.stall_improvement,
            seed,
        }
    }
}

/// Where ensemble and simulation commands take their dressed-frame pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PulseSource {
    /// Optimize with the `crab` section.
    #[default]
    Crab,
    /// Synthesize with the `satd` section.
    Satd,
    /// Best pulses of a saved optimizer report.
    Report { path: PathBuf },
    /// A pulse CSV.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub variant: VariantName,
    pub samples: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { variant: VariantName::Transfer, samples: 1441 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Satd,
    Crab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetuningSection {
    pub detunings_mhz: Vec<f64>,
    pub frame: Frame,
    pub schemes: Vec<SchemeName>,
}

impl Default for DetuningSection {
    fn default() -> Self {
        DetuningSection {
            detunings_mhz: vec![1500.0, 2000.0, 2500.0, 3000.0, 3500.0, 4000.0],
            frame: Frame::Bare,
            schemes: vec![SchemeName::Satd, SchemeName::Crab],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaSection {
    pub sigmas_mhz: Vec<f64>,
    /// One run per point gives a single draw; more runs average.
    pub runs_per_sigma: usize,
    pub variants: Vec<VariantName>,
}

impl Default for SigmaSection {
    fn default() -> Self {
        SigmaSection {
            sigmas_mhz: (0..=20).map(|i| i as f64 / 10.0).collect(),
            runs_per_sigma: 1,
            variants: vec![VariantName::Transfer, VariantName::Bare],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSection {
    pub sigma_mhz: f64,
    pub runs: usize,
    pub bin_width: f64,
    pub variants: Vec<VariantName>,
}

impl Default for HistogramSection {
    fn default() -> Self {
        HistogramSection {
            sigma_mhz: 2.0,
            runs: 1000,
            bin_width: dressed_stirap_core::ensemble::DEFAULT_BIN_WIDTH,
            variants: VariantName::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    pub seed: u64,
    /// Not echoed into outputs, so a rerun elsewhere reproduces them exactly.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub physics: PhysicsMhz,
    pub solver: SolverOptions,
    pub convention: IdealDressedConvention,
    pub satd: SatdSection,
    pub crab: CrabSection,
    pub pulses: PulseSource,
    pub simulate: SimulateSection,
    pub sweep_detuning: DetuningSection,
    pub sweep_sigma: SigmaSection,
    pub histogram: HistogramSection,
}

impl RunConfig {
    pub fn physics(&self) -> PhysicsConfig {
        self.physics.to_physics()
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings { solver: self.solver, convention: self.convention }
    }

    /// Single-line JSON echo for output metadata.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.physics;
        let positive = [
            ("physics.duration_us", p.duration_us),
            ("physics.omega_max_s_mhz", p.omega_max_s_mhz),
            ("physics.omega_max_p_mhz", p.omega_max_p_mhz),
            ("histogram.bin_width", self.histogram.bin_width),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let rates = [("physics.gamma_mhz", p.gamma_mhz), ("physics.gamma_s_mhz", p.gamma_s_mhz)];
        for (name, v) in rates {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.histogram.sigma_mhz < 0.0 || self.sweep_sigma.sigmas_mhz.iter().any(|s| *s < 0.0) {
            return Err(CliError::Config("sigma must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.crab.threshold) {
            return Err(CliError::Config(format!("crab.threshold must lie in [0, 1], got {}", self.crab.threshold)));
        }
        Ok(())
    }
}

/// Parses a config from JSON, from a summary JSON with a `config` member,
/// or from the `# config:` line of an output CSV.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig, CliError> {
    let diagnose = |e: serde_json::Error| {
        CliError::Config(format!("{}: line {}, column {}: {e}", origin.display(), e.line(), e.column()))
    };
    if text.trim_start().starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(text).map_err(diagnose)?;
        if let Some(inner) = value.get("config") {
            return serde_json::from_value(inner.clone())
                .map_err(|e| CliError::Config(format!("{}: config: {e}", origin.display())));
        }
        return serde_json::from_str(text).map_err(diagnose);
    }
    for line in text.lines() {
        if let Some(json) = line.strip_prefix("# config: ") {
            return serde_json::from_str(json).map_err(diagnose);
        }
    }
    Err(CliError::Config(format!("{}: neither a JSON config nor an output with a config line", origin.display())))
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_convert_to_the_core_defaults() {
        let a = PhysicsMhz::default().to_physics();
        let b = PhysicsConfig::default();
        for (x, y) in [
            (a.gamma, b.gamma),
            (a.gamma_s, b.gamma_s),
            (a.omega0, b.omega0),
            (a.detuning, b.detuning),
            (a.omega_max_s, b.omega_max_s),
        ] {
            assert!((x - y).abs() <= 1e-12 * y.abs(), "{x} {y}");
        }
        assert_eq!(a.duration, b.duration);
    }

    #[test]
    fn conversion_is_two_pi_times_megahertz() {
        let p = PhysicsMhz { omega0_mhz: 37.5, ..Default::default() }.to_physics();
        assert_eq!(p.omega0, 2.0 * std::f64::consts::PI * 37.5);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = parse_config(r#"{"seed": 7, "physics": {"detuning_mhz": 2000}}"#, Path::new("x")).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.physics.detuning_mhz, 2000.0);
        assert_eq!(c.physics.omega0_mhz, 50.0);
        assert_eq!(c.crab, CrabSection::default());
    }

    #[test]
    fn unknown_fields_are_named() {
        let e = parse_config("{\n  \"physics\": {\"detuning\": 1}\n}", Path::new("cfg.json")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("detuning") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig { seed: 11, experiment: Some(Experiment::SweepSigma), ..Default::default() };
        let back = parse_config(&c.echo(), Path::new("echo")).unwrap();
        assert_eq!(back, c);
        let csv = format!("# seed: 11\n# config: {}\nt_us\n", c.echo());
        assert_eq!(parse_config(&csv, Path::new("x.csv")).unwrap(), c);
        let summary = format!("{{\"config\": {}, \"mean\": 1}}", c.echo());
        assert_eq!(parse_config(&summary, Path::new("s.json")).unwrap(), c);
    }

    #[test]
    fn output_dir_is_not_echoed() {
        let c = RunConfig { output_dir: Some("somewhere".into()), ..Default::default() };
        assert!(!c.echo().contains("somewhere"));
    }
}
