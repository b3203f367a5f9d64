use std::path::Path;

use hes_flex::config::{CapacityMode, IrradianceSource, RunConfig, SignalSource};
use hes_flex::data_io::{read_trace, ReportValue};
use hes_flex::dispatch::validate_trace;
use hes_flex::experiments::{cmd_bid_sweep, cmd_envelope, cmd_synth_signal, cmd_track};
use hes_flex::flexibility::Scenario;
use hes_flex::market::PvStatistic;
use hes_flex::soc_guard::GuardConfig;
use hes_flex::{Error, ErrorKind};

fn cfg_in(dir: &Path) -> RunConfig {
    RunConfig {
        out_dir: dir.to_path_buf(),
        ..RunConfig::default()
    }
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn num(v: Option<&ReportValue>) -> f64 {
    match v {
        Some(ReportValue::Num(x)) => *x,
        Some(ReportValue::Int(x)) => *x as f64,
        other => panic!("not numeric: {other:?}"),
    }
}

#[test]
fn s1_tube_is_constant_around_moving_p0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        hours: 2.0,
        irradiance: IrradianceSource::Synthetic {
            seed: 1,
            start: 1_624_233_600 + 11 * 3600,
        },
        ..cfg_in(dir.path())
    };
    let out = cmd_envelope(&cfg, &[Scenario::S1, Scenario::S3]).unwrap();
    let s1 = rows(&out[0].path);
    assert_eq!(s1.len(), 3600);
    for r in &s1 {
        assert_eq!((r[4], r[5]), (-6.5, 6.5));
        assert!((r[3] - (r[2] - 1.5)).abs() < 1e-12);
    }
    let p0_min = s1.iter().map(|r| r[3]).fold(f64::INFINITY, f64::min);
    let p0_max = s1.iter().map(|r| r[3]).fold(f64::NEG_INFINITY, f64::max);
    assert!(p0_max > p0_min, "p0 should follow PV");
    for r in rows(&out[1].path) {
        assert_eq!((r[3], r[4], r[5]), (0.0, -5.0, 5.0));
    }
}

#[test]
fn night_s2_collapses_to_battery_band() {
    let dir = tempfile::tempdir().unwrap();
    // Midnight start: no sun.
    let out = cmd_envelope(&cfg_in(dir.path()), &[Scenario::S2]).unwrap();
    for r in rows(&out[0].path) {
        assert_eq!((r[2], r[3], r[4], r[5]), (0.0, 0.0, -5.0, 5.0));
    }
}

#[test]
fn inflated_capacity_saturates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        capacity: CapacityMode::Fixed(10.0),
        ..cfg_in(dir.path())
    };
    let out = cmd_track(&cfg).unwrap();
    assert!(out.run.stats.saturated_steps > 0);
    assert!(out.outcome.score < 1.0);
    assert_eq!(
        num(out.report.get("stats.saturated_steps")) as usize,
        out.run.stats.saturated_steps
    );
}

#[test]
fn guarded_four_hours_stays_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        hours: 4.0,
        guard: Some(GuardConfig::new(0.6, 0.4, 0.02)),
        signal: SignalSource::Synthetic {
            seed: 5,
            window_s: 900,
            bias: -0.2,
        },
        ..cfg_in(dir.path())
    };
    let out = cmd_track(&cfg).unwrap();
    let trace = read_trace(&out.trace_path).unwrap();
    assert_eq!(trace.len(), 7200);
    assert!(trace.iter().all(|r| r.soc_after >= 0.4 && r.soc_after <= 0.6));
    let fleet = cfg.fleet;
    validate_trace(&trace, &fleet, Scenario::S1, Some(0.5), fleet.battery.efficiencies()).unwrap();
    assert!(out.run.stats.guard_limited_steps > 0);
}

#[test]
fn track_with_oracle_reports_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        oracle: true,
        hours: 0.25,
        ..cfg_in(dir.path())
    };
    let out = cmd_track(&cfg).unwrap();
    let cmp = out.comparison.unwrap();
    assert_eq!(cmp.label, "offline-benchmark");
    assert!(cmp.objective_oracle <= cmp.objective_rule + 1e-9);
    let text = std::fs::read_to_string(&out.report_path).unwrap();
    assert!(text.contains("oracle.label = \"offline-benchmark\""));
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_track(&cfg_in(a.path())).unwrap();
    let rb = cmd_track(&cfg_in(b.path())).unwrap();
    assert_eq!(
        std::fs::read(ra.report_path).unwrap(),
        std::fs::read(rb.report_path).unwrap()
    );
    assert_eq!(
        std::fs::read(ra.trace_path).unwrap(),
        std::fs::read(rb.trace_path).unwrap()
    );
}

#[test]
fn constant_irradiance_gives_identical_bids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        irradiance: IrradianceSource::Constant(600.0),
        sweep_days: 2,
        ..cfg_in(dir.path())
    };
    let out = cmd_bid_sweep(&cfg).unwrap();
    let c0 = out.rows[0].mean_capacity;
    assert!(out.rows.iter().all(|r| (r.mean_capacity - c0).abs() < 1e-12));
    assert_eq!(out.rows.len(), PvStatistic::ALL.len());
}

#[test]
fn bid_capacity_rises_with_percentile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        sweep_days: 14,
        ..cfg_in(dir.path())
    };
    let out = cmd_bid_sweep(&cfg).unwrap();
    let c: Vec<f64> = out.rows.iter().map(|r| r.mean_capacity).collect();
    // mean, p50, p75, p95
    assert!(c[1] <= c[2] && c[2] <= c[3]);
    assert!(c[3] >= c[0]);
}

#[test]
fn dark_irradiance_file_is_insufficient() {
    let dir = tempfile::tempdir().unwrap();
    let irr = dir.path().join("irr.csv");
    let mut text = String::from("timestamp,ghi_wm2\n");
    for i in 0..120 {
        text.push_str(&format!("{},0\n", 1_624_233_600 + i * 60));
    }
    std::fs::write(&irr, text).unwrap();
    let cfg = RunConfig {
        irradiance: IrradianceSource::Csv(irr),
        ..cfg_in(dir.path())
    };
    let err = cmd_bid_sweep(&cfg).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn short_signal_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("sig.csv");
    std::fs::write(&sig, "timestamp,r\n0,0.1\n2,0.2\n4,-0.3\n").unwrap();
    let cfg = RunConfig {
        signal: SignalSource::Csv(sig),
        ..cfg_in(dir.path())
    };
    let err = cmd_track(&cfg).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn signal_file_drives_track() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        hours: 0.1,
        ..cfg_in(dir.path())
    };
    let path = cmd_synth_signal(&cfg).unwrap();
    let from_file = RunConfig {
        signal: SignalSource::Csv(path),
        ..cfg.clone()
    };
    let a = cmd_track(&cfg).unwrap();
    let b = cmd_track(&from_file).unwrap();
    assert_eq!(a.outcome, b.outcome);
}

#[test]
fn config_document_round_trip() {
    let doc = r#"
battery.p_max_mw = 4.0
battery.soc0 = 0.55
sim.scenario = "S4"
sim.hours = 2
market.capacity_mode = "decomposed"
market.statistic = "p75"
guard.enabled = true
guard.e_upper = 0.7
guard.e_lower = 0.3
[signal]
seed = 42
bias = 0.1
"#;
    let cfg = RunConfig::from_str_doc(doc).unwrap();
    assert_eq!(cfg.fleet.battery.p_max, 4.0);
    assert_eq!(cfg.scenario, Scenario::S4);
    assert_eq!(cfg.steps(), 3600);
    assert_eq!(cfg.capacity, CapacityMode::Decomposed(PvStatistic::P75));
    let g = cfg.guard.unwrap();
    assert!((g.buffer - 0.04).abs() < 1e-12);
    assert_eq!(
        cfg.signal,
        SignalSource::Synthetic {
            seed: 42,
            window_s: 900,
            bias: 0.1
        }
    );
}

#[test]
fn config_lists_every_problem() {
    let doc = "battery.soc0 = 2.0\nsim.scenario = \"S9\"\nmarket.lambda_c = \"ten\"\nnope = 1\n";
    let err = RunConfig::from_str_doc(doc).unwrap_err();
    let all = err.problems.join("\n");
    assert!(err.problems.len() >= 3, "{all}");
    assert!(
        all.contains("S9") && all.contains("lambda_c") && all.contains("nope"),
        "{all}"
    );
    assert_eq!(Error::from(err).kind(), ErrorKind::Config);
}
