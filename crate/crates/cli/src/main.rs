//! `hesflex`: envelope, tracking, bid-sweep and signal-synthesis runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hes_flex::config::{CapacityMode, ConfigError, RunConfig, SignalSource};
use hes_flex::flexibility::Scenario;
use hes_flex::soc_guard::GuardConfig;
use hes_flex::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "hesflex",
    version,
    about = "Flexibility, dispatch and market scoring for PV + battery + load plants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write per-step flexibility envelopes for one or all scenarios.
    Envelope {
        #[command(flatten)]
        common: Common,
        /// Emit all five scenarios instead of the configured one.
        #[arg(long)]
        all: bool,
    },
    /// Run rule-based dispatch against the signal, score it, write trace and report.
    Track {
        #[command(flatten)]
        common: Common,
        /// Also solve the offline benchmark.
        #[arg(long)]
        oracle: bool,
    },
    /// Bid capacity and realized score per PV statistic.
    BidSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Write the configured regulation signal as CSV.
    SynthSignal {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// Configuration document; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Fixed bid capacity in MW.
    #[arg(long)]
    capacity: Option<f64>,
    #[arg(long)]
    hours: Option<f64>,
    /// SoC guard; `on` without a configured band uses 0.4 to 0.6.
    #[arg(long, value_enum)]
    guard: Option<Toggle>,
    /// Seed of the synthetic signal.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.scenario {
            cfg.scenario = s;
        }
        if let Some(c) = self.capacity {
            cfg.capacity = CapacityMode::Fixed(c);
        }
        if let Some(h) = self.hours {
            cfg.hours = h;
        }
        match self.guard {
            Some(Toggle::Off) => cfg.guard = None,
            Some(Toggle::On) if cfg.guard.is_none() => cfg.guard = Some(GuardConfig::with_default_buffer(0.6, 0.4)),
            _ => {}
        }
        if let Some(seed) = self.seed {
            match &mut cfg.signal {
                SignalSource::Synthetic { seed: s, .. } => *s = seed,
                SignalSource::Csv(_) => log::warn!("--seed ignored: signal comes from CSV"),
            }
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(ConfigError { problems }.into());
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Envelope { common, all } => {
            let cfg = common.load()?;
            let scenarios: Vec<Scenario> = if all {
                Scenario::ALL.to_vec()
            } else {
                vec![cfg.scenario]
            };
            for t in hes_flex::experiments::cmd_envelope(&cfg, &scenarios)? {
                println!("{}: {}", t.scenario, t.path.display());
            }
        }
        Command::Track { common, oracle } => {
            let mut cfg = common.load()?;
            cfg.oracle |= oracle;
            let out = hes_flex::experiments::cmd_track(&cfg)?;
            let o = &out.outcome;
            println!(
                "capacity {:.4} MW  score {:.6}  mileage {:.4}  payment {:.4}  qualified {}",
                out.capacity, o.score, o.mileage, o.payment, o.qualified
            );
            if let Some(c) = &out.comparison {
                println!(
                    "rule error {:.6}  {} error {:.6} ({})",
                    c.objective_rule,
                    c.label,
                    c.objective_oracle,
                    c.backend.label()
                );
            }
            println!("trace {}", out.trace_path.display());
            println!("report {}", out.report_path.display());
        }
        Command::BidSweep { common } => {
            let cfg = common.load()?;
            let out = hes_flex::experiments::cmd_bid_sweep(&cfg)?;
            println!(
                "{:<6} {:>10} {:>10} {:>10} {:>6}",
                "stat", "C_MW", "score", "qualified", "hours"
            );
            for r in &out.rows {
                println!(
                    "{:<6} {:>10.4} {:>10.4} {:>10.3} {:>6}",
                    r.statistic.label(),
                    r.mean_capacity,
                    r.mean_score,
                    r.qualified_fraction,
                    r.hours
                );
            }
            println!("table {}", out.path.display());
        }
        Command::SynthSignal { common } => {
            let cfg = common.load()?;
            println!("{}", hes_flex::experiments::cmd_synth_signal(&cfg)?.display());
        }
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Runtime => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
