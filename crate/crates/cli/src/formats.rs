//! CSV and JSON artifacts. Every file opens with `# key: value` lines that
//! carry the resolved config and seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use dressed_stirap_core::ensemble::{DetuningPoint, EnsembleResult, Histogram};
use dressed_stirap_core::lindblad::Trajectory;
use dressed_stirap_core::model::{self, PhysicsConfig, Frame, to_mhz};
use dressed_stirap_core::pulses::{PulsePair, PulseSamples};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

/// Ordered `# key: value` header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn for_run(config: &RunConfig) -> Self {
        let mut m = Metadata::default();
        if let Some(e) = config.experiment {
            m.push("experiment", e.name());
        }
        m.push("seed", config.seed);
        m.push("config", config.echo());
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut m = Metadata::default();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| CliError::io(path, e))?;
            let Some(rest) = line.strip_prefix("# ") else { break };
            if let Some((k, v)) = rest.split_once(": ") {
                m.push(k, v);
            }
        }
        Ok(m)
    }
}

fn write_csv<R: Serialize>(path: &Path, meta: &Metadata, rows: impl IntoIterator<Item = R>) -> Result<(), CliError> {
    let io = |e| CliError::io(path, e);
    let mut file = BufWriter::new(File::create(path).map_err(io)?);
    meta.write_to(&mut file).map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(io)
}

fn read_rows<R: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<R>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<R>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
struct PulseRow {
    t_us: f64,
    omega_s_rad_per_us: f64,
    omega_p_rad_per_us: f64,
}

/// A uniformly sampled pulse pair with its header.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTable {
    pub duration: f64,
    pub cap: f64,
    pub samples: PulseSamples,
    pub metadata: Metadata,
}

impl PulseTable {
    pub fn from_pulses(pulses: &PulsePair, n: usize, metadata: Metadata) -> Self {
        PulseTable { duration: pulses.duration, cap: pulses.cap, samples: pulses.sample(n), metadata }
    }

    pub fn to_pulses(&self) -> Result<PulsePair, CliError> {
        PulsePair::tabulated(self.duration, self.cap, self.samples.stokes.clone(), self.samples.pump.clone())
            .map_err(|e| CliError::Physics(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut meta = self.metadata.clone();
        meta.0.retain(|(k, _)| k != "duration_us" && k != "cap_rad_per_us");
        meta.push("duration_us", self.duration).push("cap_rad_per_us", self.cap);
        let s = &self.samples;
        let rows = (0..s.times.len()).map(|i| PulseRow {
            t_us: s.times[i],
            omega_s_rad_per_us: s.stokes[i],
            omega_p_rad_per_us: s.pump[i],
        });
        write_csv(path, &meta, rows)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let metadata = Metadata::read_from(path)?;
        let number = |key: &str| -> Result<f64, CliError> {
            metadata
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Config(format!("{}: missing or invalid `{key}` header", path.display())))
        };
        let duration = number("duration_us")?;
        let cap = number("cap_rad_per_us")?;
        let rows: Vec<PulseRow> = read_rows(path)?;
        if rows.len() < 2 {
            return Err(CliError::Config(format!("{}: need at least two samples", path.display())));
        }
        let samples = PulseSamples {
            times: rows.iter().map(|r| r.t_us).collect(),
            stokes: rows.iter().map(|r| r.omega_s_rad_per_us).collect(),
            pump: rows.iter().map(|r| r.omega_p_rad_per_us).collect(),
        };
        Ok(PulseTable { duration, cap, samples, metadata })
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    t_us: f64,
    rho_00: f64,
    rho_m1m1: f64,
    rho_ee: f64,
    re_rho_0m1: f64,
    im_rho_0m1: f64,
}

/// States are written in the microwave frame.
pub fn write_trajectory(
    path: &Path,
    meta: &Metadata,
    traj: &Trajectory,
    cfg: &PhysicsConfig,
    frame: Frame,
) -> Result<(), CliError> {
    let rows = traj.times.iter().zip(&traj.states).map(|(&t, rho)| {
        let rho = model::to_microwave_frame(rho, t, cfg, frame);
        let c = rho.coherence(model::GROUND, model::SPIN);
        TrajectoryRow {
            t_us: t,
            rho_00: rho.population(model::GROUND),
            rho_m1m1: rho.population(model::SPIN),
            rho_ee: rho.population(model::EXCITED),
            re_rho_0m1: c.re,
            im_rho_0m1: c.im,
        }
    });
    write_csv(path, meta, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ResultRow {
    pub run_index: usize,
    pub delta_rad_per_us: f64,
    pub efficiency: f64,
    pub peak_excited: f64,
    pub error: String,
}

pub fn result_rows(result: &EnsembleResult) -> impl Iterator<Item = ResultRow> + '_ {
    result.records.iter().map(|r| ResultRow {
        run_index: r.index,
        delta_rad_per_us: r.delta,
        efficiency: r.efficiency,
        peak_excited: r.peak_excited,
        error: r.error.clone().unwrap_or_default(),
    })
}

pub fn write_results(path: &Path, meta: &Metadata, result: &EnsembleResult) -> Result<(), CliError> {
    write_csv(path, meta, result_rows(result))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    read_rows(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct HistogramRow {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

pub fn write_histogram(path: &Path, meta: &Metadata, h: &Histogram) -> Result<(), CliError> {
    let rows = h.counts.iter().enumerate().map(|(i, &count)| HistogramRow {
        bin_left: h.edges[i],
        bin_right: h.edges[i + 1],
        count,
    });
    write_csv(path, meta, rows)
}

pub fn read_histogram(path: &Path) -> Result<Vec<HistogramRow>, CliError> {
    read_rows(path)
}

#[derive(Serialize)]
struct DetuningRow<'a> {
    detuning_mhz: f64,
    scheme: &'a str,
    efficiency: Option<f64>,
    peak_amplitude_mhz: Option<f64>,
    error: &'a str,
}

pub fn write_detuning(path: &Path, meta: &Metadata, points: &[(&str, DetuningPoint)]) -> Result<(), CliError> {
    let rows = points.iter().map(|(scheme, p)| DetuningRow {
        detuning_mhz: to_mhz(p.detuning),
        scheme,
        efficiency: p.efficiency,
        peak_amplitude_mhz: p.peak_amplitude.map(to_mhz),
        error: p.error.as_deref().unwrap_or(""),
    });
    write_csv(path, meta, rows)
}

#[derive(Serialize)]
struct SigmaRunRow<'a> {
    sigma_mhz: f64,
    variant: &'a str,
    run_index: usize,
    delta_rad_per_us: f64,
    efficiency: f64,
    peak_excited: f64,
    error: &'a str,
}

#[derive(Serialize)]
struct SigmaSummaryRow<'a> {
    sigma_mhz: f64,
    variant: &'a str,
    runs: usize,
    failed: usize,
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
    mean_peak_excited: f64,
}

/// Per-run and per-point tables for a sweep over `sigma`.
pub fn write_sigma_sweep(
    runs_path: &Path,
    summary_path: &Path,
    meta: &Metadata,
    sweeps: &[(f64, EnsembleResult)],
) -> Result<(), CliError> {
    let runs = sweeps.iter().flat_map(|(sigma_mhz, r)| {
        r.records.iter().map(move |rec| SigmaRunRow {
            sigma_mhz: *sigma_mhz,
            variant: r.variant.label(),
            run_index: rec.index,
            delta_rad_per_us: rec.delta,
            efficiency: rec.efficiency,
            peak_excited: rec.peak_excited,
            error: rec.error.as_deref().unwrap_or(""),
        })
    });
    write_csv(runs_path, meta, runs)?;
    let summary = sweeps.iter().map(|(sigma_mhz, r)| SigmaSummaryRow {
        sigma_mhz: *sigma_mhz,
        variant: r.variant.label(),
        runs: r.summary.runs,
        failed: r.summary.failed,
        mean: r.summary.mean,
        std: r.summary.std,
        min: r.summary.min,
        max: r.summary.max,
        mean_peak_excited: r.summary.mean_peak_excited,
    });
    write_csv(summary_path, meta, summary)
}

/// Collects the metadata of every artifact in `dir`, keyed by file name.
pub fn directory_metadata(dir: &Path) -> Result<BTreeMap<String, Metadata>, CliError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), Metadata::read_from(&path)?);
        }
    }
    Ok(out)
}
