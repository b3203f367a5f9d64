//! End-to-end experiment commands shared by the command-line runner and the
//! test suites. Each writes its outputs under the configured directory and
//! returns the computed data.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::assets::{pv_power, AssetFleet};
use crate::config::{CapacityMode, IrradianceSource, RunConfig, SignalSource};
use crate::data_io::{
    self, export_report, export_trace, group_by_season_hour, read_irradiance_csv, read_signal_csv, resample_hold,
    season_hour, synth_irradiance, synth_signal, write_csv, Report, Series,
};
use crate::flexibility::{envelope, FlexEnvelope, Scenario};
use crate::market::{self, decomposed_bid, max_flex_bid, pv_statistic, settle, MarketOutcome, PvStatistic};
use crate::oracle::{compare_with_rule, Comparison, OracleProblem};
use crate::soc_guard::{simulate, RunOutput};
use crate::Error;

/// Cadence of the irradiance samples used for bid statistics (s).
pub const SWEEP_IRRADIANCE_CADENCE: i64 = 60;

fn dt_whole(cfg: &RunConfig) -> i64 {
    cfg.dt_s as i64
}

fn series_to_pv(fleet: &AssetFleet, irr: &Series) -> Result<Vec<f64>, Error> {
    irr.values
        .iter()
        .map(|&g| pv_power(&fleet.pv, g).map_err(Error::from))
        .collect()
}

fn fit_cadence(series: Series, dt: i64, what: &str) -> Result<Series, Error> {
    if series.cadence == dt {
        Ok(series)
    } else if series.cadence % dt == 0 {
        Ok(resample_hold(&series, dt)?)
    } else {
        Err(Error::InsufficientData(format!(
            "{what} cadence {} s is not a multiple of the {dt} s step",
            series.cadence
        )))
    }
}

/// Irradiance over the horizon at the simulation step, starting at the
/// series start.
pub fn load_irradiance(cfg: &RunConfig, n: usize) -> Result<Series, Error> {
    let dt = dt_whole(cfg);
    let series = match &cfg.irradiance {
        IrradianceSource::Csv(path) => fit_cadence(read_irradiance_csv(path)?, dt, "irradiance")?,
        IrradianceSource::Synthetic { seed, start } => synth_irradiance(*seed, *start, dt, n),
        IrradianceSource::Constant(g) => Series {
            start: 0,
            cadence: dt,
            values: vec![*g; n],
            gaps: Vec::new(),
        },
    };
    if series.len() < n {
        return Err(Error::InsufficientData(format!(
            "irradiance covers {} steps, horizon needs {n}",
            series.len()
        )));
    }
    Ok(Series {
        values: series.values[..n].to_vec(),
        gaps: series.gaps.into_iter().filter(|&g| g < n).collect(),
        ..series
    })
}

pub fn load_pv(cfg: &RunConfig, n: usize) -> Result<Vec<f64>, Error> {
    series_to_pv(&cfg.fleet, &load_irradiance(cfg, n)?)
}

fn window_steps(cfg: &RunConfig, window_s: u64) -> usize {
    ((window_s as f64 / cfg.dt_s).round() as usize).max(1)
}

pub fn load_signal(cfg: &RunConfig, n: usize) -> Result<Vec<f64>, Error> {
    match &cfg.signal {
        SignalSource::Synthetic { seed, window_s, bias } => {
            Ok(synth_signal(*seed, n, window_steps(cfg, *window_s), *bias))
        }
        SignalSource::Csv(path) => {
            let s = fit_cadence(read_signal_csv(path)?, dt_whole(cfg), "signal")?;
            if s.len() < n {
                return Err(Error::InsufficientData(format!(
                    "signal has {} samples, horizon needs {n}",
                    s.len()
                )));
            }
            Ok(s.values[..n].to_vec())
        }
    }
}

fn envelopes(fleet: &AssetFleet, scenario: Scenario, pv: &[f64]) -> Result<Vec<FlexEnvelope>, Error> {
    pv.iter()
        .map(|&p| envelope(scenario, fleet, p).map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTrace {
    pub scenario: Scenario,
    pub pv: Vec<f64>,
    pub envelopes: Vec<FlexEnvelope>,
    pub path: PathBuf,
}

/// Per-step nominal point and deviation bounds for each scenario, written
/// as `envelope_<scenario>.csv`.
pub fn cmd_envelope(cfg: &RunConfig, scenarios: &[Scenario]) -> Result<Vec<EnvelopeTrace>, Error> {
    let n = cfg.steps();
    let pv = load_pv(cfg, n)?;
    let mut out = Vec::with_capacity(scenarios.len());
    for &scenario in scenarios {
        let envs = envelopes(&cfg.fleet, scenario, &pv)?;
        let path = cfg.out_dir.join(format!("envelope_{scenario}.csv"));
        write_envelope(&path, cfg.dt_s, &pv, &envs)?;
        out.push(EnvelopeTrace {
            scenario,
            pv: pv.clone(),
            envelopes: envs,
            path,
        });
    }
    Ok(out)
}

fn write_envelope(path: &std::path::Path, dt_s: f64, pv: &[f64], envs: &[FlexEnvelope]) -> Result<(), Error> {
    let rows = pv.iter().zip(envs).enumerate().map(|(k, (p, e))| {
        [
            k.to_string(),
            (k as f64 * dt_s).to_string(),
            p.to_string(),
            e.p0.to_string(),
            e.dp_lo.to_string(),
            e.dp_hi.to_string(),
        ]
    });
    Ok(write_csv(path, &["k", "t", "p_pv", "p0", "dp_lo", "dp_hi"], rows)?)
}

/// Bid for a horizon under the configured capacity mode.
pub fn resolve_capacity(cfg: &RunConfig, r: &[f64], pv: &[f64]) -> Result<f64, Error> {
    match cfg.capacity {
        CapacityMode::Fixed(c) => Ok(c),
        CapacityMode::MaxFlex => {
            let half: Vec<f64> = envelopes(&cfg.fleet, cfg.scenario, pv)?
                .iter()
                .map(FlexEnvelope::half_width)
                .collect();
            Ok(max_flex_bid(&half, r)?)
        }
        CapacityMode::Decomposed(stat) => {
            let s = pv_statistic(pv, stat)?;
            Ok(decomposed_bid(&cfg.fleet.battery, s.min(cfg.fleet.load.p_max))?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub capacity: f64,
    pub run: RunOutput,
    pub outcome: MarketOutcome,
    pub comparison: Option<Comparison>,
    pub report: Report,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
}

/// Rule-based tracking run with scoring, optional oracle comparison, trace
/// and report.
pub fn cmd_track(cfg: &RunConfig) -> Result<TrackOutput, Error> {
    let n = cfg.steps();
    let r = load_signal(cfg, n)?;
    let pv = load_pv(cfg, n)?;
    let capacity = resolve_capacity(cfg, &r, &pv)?;
    let run = simulate(
        &cfg.fleet,
        cfg.scenario,
        capacity,
        &r,
        &pv,
        cfg.soc0,
        cfg.guard.as_ref(),
    )?;
    if run.stats.saturated_steps > 0 {
        log::warn!(
            "capacity {capacity} MW exceeds the {} envelope on {} of {n} steps",
            cfg.scenario,
            run.stats.saturated_steps
        );
    }
    let delivered = run.delivered();
    let outcome = settle(capacity, &r, &delivered, &cfg.prices)?;
    let comparison = if cfg.oracle {
        let problem = OracleProblem {
            soc_grid: cfg.soc_grid,
            ..OracleProblem::new(cfg.fleet, capacity, r.clone(), pv.clone(), cfg.soc0)
        };
        Some(compare_with_rule(&problem)?)
    } else {
        None
    };
    let report = track_report(cfg, capacity, &run, &outcome, comparison.as_ref());
    let trace_path = cfg.out_dir.join("trace.csv");
    let report_path = cfg.out_dir.join("report.toml");
    export_trace(&run.records, &trace_path)?;
    export_report(&report, &report_path)?;
    Ok(TrackOutput {
        capacity,
        run,
        outcome,
        comparison,
        report,
        trace_path,
        report_path,
    })
}

fn capacity_mode_label(mode: CapacityMode) -> String {
    match mode {
        CapacityMode::Fixed(_) => "fixed".into(),
        CapacityMode::MaxFlex => "max-flex".into(),
        CapacityMode::Decomposed(s) => format!("decomposed-{s}"),
    }
}

fn track_report(
    cfg: &RunConfig,
    capacity: f64,
    run: &RunOutput,
    outcome: &MarketOutcome,
    cmp: Option<&Comparison>,
) -> Report {
    let mut rep = Report::new();
    rep.text("run.scenario", cfg.scenario.label())
        .int("run.steps", run.records.len() as i64)
        .num("run.dt_s", cfg.dt_s)
        .num("run.hours", cfg.hours)
        .num("run.soc0", cfg.soc0)
        .text("market.capacity_mode", &capacity_mode_label(cfg.capacity))
        .num("market.capacity_mw", capacity)
        .num("market.score", outcome.score.max(0.0))
        .num("market.score_raw", outcome.score)
        .num("market.mileage", outcome.mileage)
        .num("market.payment", outcome.payment)
        .flag("market.qualified", outcome.qualified)
        .num("market.lambda_c", cfg.prices.lambda_c)
        .num("market.lambda_m", cfg.prices.lambda_m)
        .flag("guard.enabled", cfg.guard.is_some());
    if let Some(g) = &cfg.guard {
        rep.num("guard.e_upper", g.e_upper)
            .num("guard.e_lower", g.e_lower)
            .num("guard.buffer", g.buffer);
    }
    let socs: Vec<f64> = run.soc_trajectory().collect();
    let st = run.stats;
    rep.int("stats.saturated_steps", st.saturated_steps as i64)
        .int("stats.unrealizable_steps", st.unrealizable_steps as i64)
        .int("stats.guard_limited_steps", st.guard_limited_steps as i64)
        .int("stats.soc_limited_steps", st.soc_limited_steps as i64)
        .num("soc.min", socs.iter().copied().fold(cfg.soc0, f64::min))
        .num("soc.max", socs.iter().copied().fold(cfg.soc0, f64::max))
        .num("soc.final", socs.last().copied().unwrap_or(cfg.soc0));
    if let Some(c) = cmp {
        rep.text("oracle.label", c.label)
            .text("oracle.backend", c.backend.label())
            .num("oracle.objective_rule", c.objective_rule)
            .num("oracle.objective_oracle", c.objective_oracle);
        if let Some(s) = c.score_rule {
            rep.num("oracle.score_rule", s);
        }
        if let Some(s) = c.score_oracle {
            rep.num("oracle.score_oracle", s);
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub statistic: PvStatistic,
    pub mean_capacity: f64,
    pub mean_score: f64,
    pub qualified_fraction: f64,
    pub hours: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub path: PathBuf,
}

/// One evaluated hour: its season-hour group and its PV at the step cadence.
struct HourInstance {
    group: (data_io::Season, u32),
    pv: Vec<f64>,
}

fn sweep_irradiance(cfg: &RunConfig) -> Result<Series, Error> {
    match &cfg.irradiance {
        IrradianceSource::Csv(path) => Ok(read_irradiance_csv(path)?),
        IrradianceSource::Synthetic { seed, start } => Ok(synth_irradiance(
            *seed,
            *start,
            SWEEP_IRRADIANCE_CADENCE,
            cfg.sweep_days as usize * 86_400 / SWEEP_IRRADIANCE_CADENCE as usize,
        )),
        IrradianceSource::Constant(g) => Ok(Series {
            start: 0,
            cadence: SWEEP_IRRADIANCE_CADENCE,
            values: vec![*g; cfg.sweep_days as usize * 86_400 / SWEEP_IRRADIANCE_CADENCE as usize],
            gaps: Vec::new(),
        }),
    }
}

/// Splits PV into whole UTC hours with any sunshine.
fn hour_instances(cfg: &RunConfig, irr: &Series, pv: &[f64]) -> Result<Vec<HourInstance>, Error> {
    let dt = dt_whole(cfg);
    if 3600 % irr.cadence != 0 || irr.cadence % dt != 0 {
        return Err(Error::InsufficientData(format!(
            "irradiance cadence {} s must divide an hour and be a multiple of the {dt} s step",
            irr.cadence
        )));
    }
    let per_hour = (3600 / irr.cadence) as usize;
    let hold = (irr.cadence / dt) as usize;
    let first = (0..irr.len()).find(|&i| irr.timestamp(i).rem_euclid(3600) == 0);
    let Some(first) = first else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for chunk in pv[first..].chunks_exact(per_hour).enumerate() {
        let (h, samples) = chunk;
        if samples.iter().all(|&p| p <= 0.0) {
            continue;
        }
        let ts = irr.timestamp(first + h * per_hour);
        out.push(HourInstance {
            group: season_hour(ts)?,
            pv: samples.iter().flat_map(|&p| std::iter::repeat_n(p, hold)).collect(),
        });
    }
    Ok(out)
}

/// Bid-capacity sensitivity to the PV statistic. Every daylight hour is bid
/// at battery rating plus half its season-hour statistic and tracked under
/// the sustainable-load scenario from the configured initial SoC; each hour
/// uses the same signal for every statistic.
pub fn cmd_bid_sweep(cfg: &RunConfig) -> Result<SweepOutput, Error> {
    let irr = sweep_irradiance(cfg)?;
    let pv = series_to_pv(&cfg.fleet, &irr)?;
    let pv_series = Series {
        values: pv.clone(),
        ..irr.clone()
    };
    let groups = group_by_season_hour(&pv_series)?;
    let hours = hour_instances(cfg, &irr, &pv)?;
    if hours.is_empty() {
        return Err(Error::InsufficientData(
            "no daylight hour in the irradiance data".into(),
        ));
    }
    let steps = hours[0].pv.len();
    let signals: Vec<Vec<f64>> = match &cfg.signal {
        SignalSource::Synthetic { seed, window_s, bias } => (0..hours.len())
            .map(|i| synth_signal(seed.wrapping_add(i as u64), steps, window_steps(cfg, *window_s), *bias))
            .collect(),
        SignalSource::Csv(_) => {
            let all = load_signal_all(cfg)?;
            if all.len() < steps {
                return Err(Error::InsufficientData(format!(
                    "signal shorter than one hour ({} samples)",
                    all.len()
                )));
            }
            let chunks: Vec<&[f64]> = all.chunks_exact(steps).collect();
            (0..hours.len()).map(|i| chunks[i % chunks.len()].to_vec()).collect()
        }
    };

    let mut stats: BTreeMap<(PvStatistic, (data_io::Season, u32)), f64> = BTreeMap::new();
    for stat in PvStatistic::ALL {
        for (&key, samples) in &groups {
            let value = pv_statistic(samples, stat).map_err(|e| match e {
                market::MarketError::EmptyGroup => {
                    Error::InsufficientData(format!("season-hour group {} {:02}h is empty", key.0.label(), key.1))
                }
                other => other.into(),
            })?;
            stats.insert((stat, key), value);
        }
    }

    let mut rows = Vec::with_capacity(PvStatistic::ALL.len());
    for stat in PvStatistic::ALL {
        let results: Vec<Result<(f64, f64), Error>> = hours
            .par_iter()
            .zip(signals.par_iter())
            .map(|(hour, r)| {
                let s = stats.get(&(stat, hour.group)).copied().ok_or_else(|| {
                    Error::InsufficientData(format!(
                        "season-hour group {} {:02}h is empty",
                        hour.group.0.label(),
                        hour.group.1
                    ))
                })?;
                let capacity = decomposed_bid(&cfg.fleet.battery, s.min(cfg.fleet.load.p_max))?;
                let run = simulate(
                    &cfg.fleet,
                    Scenario::S2,
                    capacity,
                    r,
                    &hour.pv,
                    cfg.soc0,
                    cfg.guard.as_ref(),
                )?;
                let score = market::performance_score(capacity, r, &run.delivered())?;
                Ok((capacity, score))
            })
            .collect();
        let results: Vec<(f64, f64)> = results.into_iter().collect::<Result<_, _>>()?;
        let n = results.len() as f64;
        rows.push(SweepRow {
            statistic: stat,
            mean_capacity: results.iter().map(|x| x.0).sum::<f64>() / n,
            mean_score: results.iter().map(|x| x.1).sum::<f64>() / n,
            qualified_fraction: results.iter().filter(|x| market::qualifies(x.1)).count() as f64 / n,
            hours: results.len(),
        });
    }

    let path = cfg.out_dir.join("bid_sweep.csv");
    write_sweep(&path, &rows)?;
    Ok(SweepOutput { rows, path })
}

fn load_signal_all(cfg: &RunConfig) -> Result<Vec<f64>, Error> {
    match &cfg.signal {
        SignalSource::Csv(path) => Ok(fit_cadence(read_signal_csv(path)?, dt_whole(cfg), "signal")?.values),
        SignalSource::Synthetic { .. } => load_signal(cfg, cfg.steps()),
    }
}

fn write_sweep(path: &std::path::Path, rows: &[SweepRow]) -> Result<(), Error> {
    let rows = rows.iter().map(|r| {
        [
            r.statistic.label().to_string(),
            r.mean_capacity.to_string(),
            r.mean_score.to_string(),
            r.qualified_fraction.to_string(),
            r.hours.to_string(),
        ]
    });
    Ok(write_csv(
        path,
        &[
            "statistic",
            "mean_capacity_mw",
            "mean_score",
            "qualified_fraction",
            "hours",
        ],
        rows,
    )?)
}

/// Writes the configured signal over the horizon as `signal.csv`.
pub fn cmd_synth_signal(cfg: &RunConfig) -> Result<PathBuf, Error> {
    let n = cfg.steps();
    let r = load_signal(cfg, n)?;
    let path = cfg.out_dir.join("signal.csv");
    let dt = dt_whole(cfg);
    let rows = r
        .iter()
        .enumerate()
        .map(|(k, v)| [(k as i64 * dt).to_string(), v.to_string()]);
    write_csv(&path, &data_io::SIGNAL_HEADER, rows)?;
    Ok(path)
}
