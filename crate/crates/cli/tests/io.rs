use dressed_stirap::config::{parse_config, RunConfig};
use dressed_stirap::formats::{read_histogram, read_results, write_histogram, write_results, Metadata};
use dressed_stirap_core::ensemble::{DephasingModel, EnsembleResult, Histogram, RunRecord, RunVariant, Summary};

fn sample_result() -> EnsembleResult {
    let records = vec![
        RunRecord { index: 0, delta: 0.125, efficiency: 0.98, peak_excited: 1e-3, error: None },
        RunRecord { index: 1, delta: -3.5, efficiency: f64::NAN, peak_excited: f64::NAN, error: Some("step size underflow".into()) },
        RunRecord { index: 2, delta: 1.0 / 3.0, efficiency: 0.9712345678901234, peak_excited: 2e-3, error: None },
    ];
    let summary = Summary::of(&records);
    EnsembleResult { model: DephasingModel { sigma: 1.0, seed: 9 }, variant: RunVariant::TRANSFER_ONLY, records, summary }
}

#[test]
fn results_round_trip_with_failure_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let config = RunConfig { seed: 9, ..Default::default() };
    let result = sample_result();
    write_results(&path, &Metadata::for_run(&config), &result).unwrap();
    let rows = read_results(&path).unwrap();
    assert_eq!(rows.len(), 3);
    for (row, rec) in rows.iter().zip(&result.records) {
        assert_eq!(row.run_index, rec.index);
        assert_eq!(row.delta_rad_per_us.to_bits(), rec.delta.to_bits());
        if rec.error.is_none() {
            assert_eq!(row.efficiency.to_bits(), rec.efficiency.to_bits());
        }
    }
    assert!(rows[1].efficiency.is_nan());
    assert_eq!(rows[1].error, "step size underflow");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("run_index,delta_rad_per_us,efficiency,peak_excited"));
    let back = parse_config(&text, &path).unwrap();
    assert_eq!(back, config);
}

#[test]
fn histogram_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let values = [0.9712, 0.9713, 0.9751, 0.5, 1.0];
    let h = Histogram::new(&values, 0.005);
    write_histogram(&path, &Metadata::default(), &h).unwrap();
    let rows = read_histogram(&path).unwrap();
    assert_eq!(rows.len(), h.counts.len());
    assert_eq!(rows.iter().map(|r| r.count).sum::<usize>(), values.len());
    assert_eq!(rows[0].bin_left, 0.0);
    assert!((rows.last().unwrap().bin_right - 1.0).abs() < 1e-12);
}

#[test]
fn metadata_stops_at_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    std::fs::write(&path, "# seed: 4\n# duration_us: 0.72\na,b\n# late: 1\n").unwrap();
    let m = Metadata::read_from(&path).unwrap();
    assert_eq!(m.get("seed"), Some("4"));
    assert_eq!(m.get("late"), None);
}

#[test]
fn shipped_recipes_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let config = dressed_stirap::config::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(config.experiment.is_some(), "{}", path.display());
        config.validate().unwrap();
        seen += 1;
    }
    assert!(seen >= 6);
}
