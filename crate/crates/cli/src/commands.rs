//! One function per subcommand. Each writes its artifacts into the output
//! directory and reports failures through `CliError`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::path::{Path, PathBuf};

use dressed_stirap_core::crab_opt::{self, ObjectiveSpec, OptimizeError, OptimizerReport};
use dressed_stirap_core::ensemble::{
    self, pulses_for_frame, run_ensemble, DephasingModel, DetuningPoint, EnsembleResult, PulseScheme,
    MIN_DETUNING_MHZ,
};
use dressed_stirap_core::lindblad::{self, DensityMatrix, SolverOptions};
use dressed_stirap_core::model::{self, mhz, to_mhz, Frame, PhysicsConfig};
use dressed_stirap_core::pulses::{satd_pipeline, PulsePair};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_config, Experiment, PulseSource, RunConfig, SchemeName};
use crate::formats::{self, Metadata, PulseTable};
use crate::parallel::Pool;
use crate::CliError;

/// Fraction of runs that must succeed for an ensemble command to pass.
pub const MIN_SUCCESS_FRACTION: f64 = 0.99;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub force: bool,
}

pub fn resolve_config(experiment: Experiment, o: &Overrides) -> Result<RunConfig, CliError> {
    let mut config = match &o.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(e) = config.experiment {
        if e != experiment {
            return Err(CliError::Config(format!(
                "config is for `{}`, not `{}`",
                e.name(),
                experiment.name()
            )));
        }
    }
    config.experiment = Some(experiment);
    if let Some(seed) = o.seed {
        config.seed = seed;
    }
    if let Some(out) = &o.out {
        config.output_dir = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force` is set.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let mut entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
        if entries.next().is_some() && !force {
            return Err(CliError::Config(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Resolves the config, prepares the output directory and runs the command.
pub fn execute(experiment: Experiment, o: &Overrides) -> Result<PathBuf, CliError> {
    let config = resolve_config(experiment, o)?;
    let out = config
        .output_dir
        .clone()
        .unwrap_or_else(|| Path::new("out").join(experiment.name()));
    prepare_output_dir(&out, o.force)?;
    let pool = Pool::new(o.threads).map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    log::info!("{} with {} worker(s) into {}", experiment.name(), pool.threads(), out.display());
    let run = match experiment {
        Experiment::SatdPulses => satd_pulses(&config, &out),
        Experiment::CrabOptimize => crab_optimize(&config, &out, &pool),
        Experiment::Simulate => simulate(&config, &out, &pool),
        Experiment::SweepDetuning => sweep_detuning(&config, &out, &pool),
        Experiment::SweepSigma => sweep_sigma(&config, &out, &pool),
        Experiment::HistogramVariants => histogram_variants(&config, &out, &pool),
    };
    run.map(|()| out)
}

fn warn_detuning(detuning_mhz: f64) {
    if detuning_mhz.abs() < MIN_DETUNING_MHZ {
        log::warn!(
            "detuning {detuning_mhz} MHz is below {MIN_DETUNING_MHZ} MHz; adiabatic elimination of the excited state is unreliable"
        );
    }
}

fn with_header(config: &RunConfig, value: serde_json::Value) -> serde_json::Value {
    let mut doc = json!({ "config": config, "seed": config.seed });
    if let (Some(doc), serde_json::Value::Object(extra)) = (doc.as_object_mut(), value) {
        doc.extend(extra);
    }
    doc
}

fn objective_spec(physics: PhysicsConfig, frame: Frame, config: &RunConfig) -> ObjectiveSpec {
    let base = match frame {
        Frame::Dressed => ObjectiveSpec::dressed(physics.with_delta(0.0)),
        Frame::Bare => ObjectiveSpec::bare(physics.with_delta(0.0)),
    };
    ObjectiveSpec {
        n_harmonics: config.crab.n_harmonics,
        solver: SolverOptions { samples: 2, ..config.solver },
        ..base
    }
}

fn check_success(results: &[&EnsembleResult]) -> Result<(), CliError> {
    let runs: usize = results.iter().map(|r| r.records.len()).sum();
    let failed: usize = results.iter().map(|r| r.summary.failed).sum();
    if runs > 0 && ((runs - failed) as f64) < MIN_SUCCESS_FRACTION * runs as f64 {
        return Err(CliError::Physics(format!("{failed} of {runs} runs failed")));
    }
    if failed > 0 {
        log::warn!("{failed} of {runs} runs failed; see the error column");
    }
    Ok(())
}

pub fn satd_pulses(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    warn_detuning(config.physics.detuning_mhz);
    let physics = config.physics();
    let spec = objective_spec(physics, config.satd.frame, config);
    let pulses = satd_pipeline(&config.satd.base(), physics.duration, physics.detuning, spec.cap())
        .map_err(|e| CliError::Physics(e.to_string()))?;
    let n = config.satd.samples;
    PulseTable::from_pulses(&pulses, n, Metadata::for_run(config)).write(&out.join("pulses.csv"))?;

    let efficiency = crab_opt::efficiency_of(&pulses, &spec).map_err(|e| CliError::Physics(e.to_string()))?;
    let (peak, peak_time) = pulses.peak(n);
    let (stokes_peak, pump_peak) = pulses.peak_times(n);
    let (stokes_area, pump_area) = pulses.areas(n);
    formats::write_json(
        &out.join("summary.json"),
        &with_header(
            config,
            json!({
                "frame": config.satd.frame,
                "duration_us": pulses.duration,
                "cap_rad_per_us": pulses.cap,
                "peak_rad_per_us": peak,
                "peak_mhz": to_mhz(peak),
                "peak_time_us": peak_time,
                "stokes_peak_time_us": stokes_peak,
                "pump_peak_time_us": pump_peak,
                "stokes_area_rad": stokes_area,
                "pump_area_rad": pump_area,
                "efficiency": efficiency,
            }),
        ),
    )
}

/// Optimizes and writes the pulses and report. An unmet threshold still
/// leaves the best pulses on disk.
pub fn crab_optimize(config: &RunConfig, out: &Path, pool: &Pool) -> Result<(), CliError> {
    warn_detuning(config.physics.detuning_mhz);
    let report = optimize_report(config, config.crab.frame, pool)?;
    write_report(config, out, &report)?;
    let eta = report.best_efficiency();
    if eta < config.crab.threshold {
        return Err(CliError::Threshold(format!(
            "best efficiency {eta:.6} below {} after {} evaluations",
            config.crab.threshold, report.evaluations
        )));
    }
    Ok(())
}

fn optimize_report(config: &RunConfig, frame: Frame, pool: &Pool) -> Result<OptimizerReport, CliError> {
    let spec = objective_spec(config.physics(), frame, config);
    match crab_opt::optimize(&spec, &config.crab.budget(config.seed), pool) {
        Ok(r) => Ok(r),
        Err(OptimizeError::BudgetExhausted(r)) => Ok(*r),
        Err(e @ OptimizeError::InvalidBudget { .. }) => Err(CliError::Config(e.to_string())),
    }
}

fn write_report(config: &RunConfig, out: &Path, report: &OptimizerReport) -> Result<(), CliError> {
    let mut meta = Metadata::for_run(config);
    meta.push("efficiency", report.best_efficiency());
    PulseTable::from_pulses(&report.pulses(), config.crab.samples, meta).write(&out.join("pulses.csv"))?;
    formats::write_json(
        &out.join("report.json"),
        &with_header(
            config,
            json!({
                "threshold": config.crab.threshold,
                "best_efficiency": report.best_efficiency(),
                "threshold_met": report.best_efficiency() >= config.crab.threshold,
                "report": report,
            }),
        ),
    )
}

/// Reads an optimizer report from either a `report.json` artifact or a bare
/// serialized report.
pub fn read_report(path: &Path) -> Result<OptimizerReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let inner = value.get("report").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Dressed-frame pulses for simulation and ensembles; also written to
/// `pulses.csv` in `out`.
pub fn dressed_pulses(config: &RunConfig, out: &Path, pool: &Pool) -> Result<PulsePair, CliError> {
    let pulses = match &config.pulses {
        PulseSource::Crab => {
            let report = optimize_report(config, Frame::Dressed, pool)?;
            if report.best_efficiency() < config.crab.threshold {
                log::warn!(
                    "optimized pulses reach {:.6}, below the threshold {}",
                    report.best_efficiency(),
                    config.crab.threshold
                );
            }
            write_report(config, out, &report)?;
            return Ok(report.pulses());
        }
        PulseSource::Satd => {
            // Synthesized for the bare transfer; dressed runs use the same
            // lineshapes scaled up by sqrt(2).
            let physics = config.physics();
            let cap = physics.omega_max_s.min(physics.omega_max_p) * FRAC_1_SQRT_2;
            satd_pipeline(&config.satd.base(), physics.duration, physics.detuning, cap)
                .map_err(|e| CliError::Physics(e.to_string()))?
                .scaled(SQRT_2)
        }
        PulseSource::Report { path } => read_report(path)?.pulses(),
        PulseSource::Csv { path } => PulseTable::read(path)?.to_pulses()?,
    };
    PulseTable::from_pulses(&pulses, config.crab.samples, Metadata::for_run(config)).write(&out.join("pulses.csv"))?;
    Ok(pulses)
}

#[derive(Serialize)]
struct SimulateSummary {
    variant: &'static str,
    delta_rad_per_us: f64,
    efficiency: f64,
    peak_excited: f64,
    max_trace_error: f64,
    max_hermiticity_defect: f64,
    min_eigenvalue: f64,
}

/// One run at the configured shift, with the transfer trajectory.
pub fn simulate(config: &RunConfig, out: &Path, pool: &Pool) -> Result<(), CliError> {
    warn_detuning(config.physics.detuning_mhz);
    let dressed = dressed_pulses(config, out, pool)?;
    let variant = config.simulate.variant.variant();
    let physics = config.physics();
    let delta = physics.delta;
    let pulses = pulses_for_frame(&dressed, variant.frame);
    let settings = config.settings();
    let outcome = ensemble::run_once(delta, variant, &pulses, &physics, &settings)
        .map_err(|e| CliError::Physics(e.to_string()))?;

    let physics_err = |e: lindblad::LindbladError| CliError::Physics(e.to_string());
    let transfer_delta = if variant.dephase_transfer { delta } else { 0.0 };
    let rho0 = match variant.frame {
        Frame::Bare => DensityMatrix::basis(model::GROUND),
        Frame::Dressed if variant.dephase_init => {
            model::pi_half_pulse(&DensityMatrix::basis(model::GROUND), &physics, model::PREPARE_PHASE, delta)
                .map_err(physics_err)?
        }
        Frame::Dressed => {
            let pair = model::ideal_dressed_pair(physics.omega0, transfer_delta, config.convention)
                .map_err(|e| CliError::Physics(e.to_string()))?;
            DensityMatrix::pure(&pair.ket_minus)
        }
    };
    let transfer_cfg = physics.with_delta(transfer_delta);
    let solver = SolverOptions { samples: config.simulate.samples, ..config.solver };
    let traj = lindblad::propagate(&rho0, &pulses, &transfer_cfg, variant.frame, &solver).map_err(physics_err)?;
    let meta = Metadata::for_run(config);
    formats::write_trajectory(&out.join("trajectory.csv"), &meta, &traj, &transfer_cfg, variant.frame)?;

    let defect = traj.worst_defect();
    let summary = SimulateSummary {
        variant: variant.label(),
        delta_rad_per_us: delta,
        efficiency: outcome.efficiency,
        peak_excited: outcome.peak_excited,
        max_trace_error: defect.trace_error,
        max_hermiticity_defect: defect.hermiticity,
        min_eigenvalue: defect.min_eigenvalue,
    };
    formats::write_json(&out.join("summary.json"), &with_header(config, serde_json::to_value(summary).unwrap()))
}

pub fn sweep_detuning(config: &RunConfig, out: &Path, pool: &Pool) -> Result<(), CliError> {
    let section = &config.sweep_detuning;
    for &d in &section.detunings_mhz {
        warn_detuning(d);
    }
    let physics = config.physics();
    let detunings: Vec<f64> = section.detunings_mhz.iter().map(|&d| mhz(d)).collect();
    let mut points: Vec<(&str, DetuningPoint)> = Vec::new();
    for scheme in &section.schemes {
        let (name, scheme) = match scheme {
            SchemeName::Satd => ("satd", PulseScheme::Satd(config.satd.base())),
            SchemeName::Crab => ("crab", PulseScheme::Crab(config.crab.budget(config.seed))),
        };
        for p in ensemble::sweep_detuning(&detunings, &scheme, section.frame, &physics, pool) {
            if let Some(e) = &p.error {
                log::warn!("{name} at {} MHz: {e}", to_mhz(p.detuning));
            }
            points.push((name, p));
        }
    }
    formats::write_detuning(&out.join("detuning.csv"), &Metadata::for_run(config), &points)?;
    let rows: Vec<_> = points
        .iter()
        .map(|(scheme, p)| {
            json!({
                "scheme": scheme,
                "detuning_mhz": to_mhz(p.detuning),
                "efficiency": p.efficiency,
                "peak_amplitude_mhz": p.peak_amplitude.map(to_mhz),
                "error": p.error,
            })
        })
        .collect();
    formats::write_json(&out.join("summary.json"), &with_header(config, json!({ "points": rows })))?;
    let failed = points.iter().filter(|(_, p)| p.error.is_some()).count();
    if failed as f64 > (1.0 - MIN_SUCCESS_FRACTION) * points.len() as f64 {
        return Err(CliError::Physics(format!("{failed} of {} detuning points failed", points.len())));
    }
    Ok(())
}

pub fn sweep_sigma(config: &RunConfig, out: &Path, pool: &Pool) -> Result<(), CliError> {
    let section = &config.sweep_sigma;
    let dressed = dressed_pulses(config, out, pool)?;
    let physics = config.physics().with_delta(0.0);
    let settings = config.settings();
    let mut sweeps = Vec::new();
    for name in &section.variants {
        let variant = name.variant();
        let pulses = pulses_for_frame(&dressed, variant.frame);
        for &sigma_mhz in &section.sigmas_mhz {
            let model = DephasingModel { sigma: mhz(sigma_mhz), seed: config.seed };
            let result = run_ensemble(&model, section.runs_per_sigma, variant, &pulses, &physics, &settings, pool);
            sweeps.push((sigma_mhz, result));
        }
    }
    let meta = Metadata::for_run(config);
    formats::write_sigma_sweep(&out.join("sigma_runs.csv"), &out.join("sigma_summary.csv"), &meta, &sweeps)?;
    let points: Vec<_> = sweeps
        .iter()
        .map(|(sigma_mhz, r)| json!({ "variant": r.variant.label(), "sigma_mhz": sigma_mhz, "summary": r.summary }))
        .collect();
    formats::write_json(&out.join("summary.json"), &with_header(config, json!({ "points": points })))?;
    check_success(&sweeps.iter().map(|(_, r)| r).collect::<Vec<_>>())
}

pub fn histogram_variants(config: &RunConfig, out: &Path, pool: &Pool) -> Result<(), CliError> {
    let section = &config.histogram;
    let dressed = dressed_pulses(config, out, pool)?;
    let physics = config.physics().with_delta(0.0);
    let settings = config.settings();
    let model = DephasingModel { sigma: mhz(section.sigma_mhz), seed: config.seed };
    let meta = Metadata::for_run(config);
    let mut results = Vec::new();
    let mut entries = Vec::new();
    let mut means = serde_json::Map::new();
    for name in &section.variants {
        let variant = name.variant();
        let pulses = pulses_for_frame(&dressed, variant.frame);
        let result = run_ensemble(&model, section.runs, variant, &pulses, &physics, &settings, pool);
        let hist = ensemble::histogram(&result, section.bin_width);
        let label = variant.label();
        formats::write_results(&out.join(format!("results_{label}.csv")), &meta, &result)?;
        formats::write_histogram(&out.join(format!("histogram_{label}.csv")), &meta, &hist)?;
        let mode = hist.mode();
        entries.push(json!({
            "variant": label,
            "summary": result.summary,
            "mode_bin_left": hist.edges[mode],
            "mode_cluster_span": hist.mode_cluster_span(&result.efficiencies()),
            "outside": hist.outside,
        }));
        means.insert(label.to_string(), json!(result.summary.mean));
        results.push(result);
    }
    formats::write_json(
        &out.join("summary.json"),
        &with_header(
            config,
            json!({
                "sigma_mhz": section.sigma_mhz,
                "runs": section.runs,
                "bin_width": section.bin_width,
                "means": means,
                "variants": entries,
            }),
        ),
    )?;
    check_success(&results.iter().collect::<Vec<_>>())
}
