//! Command-line harness: audits, entropy sweeps, tradeoff curves and the reference leakage grid,
//! written as headered CSV.

pub mod commands;
pub mod output;
pub mod settings;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use settings::Settings;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "privleak", version, about = "Per-record leakage audits and privacy-utility tradeoffs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Maximal per-record leakage of one or more mechanisms.
    Audit,
    /// Leakage as a function of the entropy bound b.
    SweepB,
    /// Minimal leakage subject to an expected-distortion bound D.
    Primal,
    /// Minimal distortion subject to a leakage bound L.
    Dual,
    /// Laplace and exponential leakage at eps = 1, n = 4 against reference values.
    Table3,
    /// Leakage and distortion of BSC, Laplace and exponential mechanisms.
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::SweepB => "sweep-b",
            Command::Primal => "primal",
            Command::Dual => "dual",
            Command::Table3 => "table3",
            Command::Compare => "compare",
        }
    }

    fn defaults(self) -> Settings {
        let mut s = Settings::from_pairs([
            ("query", "parity"),
            ("seed", "0"),
            ("restarts", "5"),
            ("strict", "false"),
            ("bits", "false"),
            ("extended", "false"),
        ]);
        let specific: &[(&str, &str)] = match self {
            Command::Audit => &[("n", "4"), ("mech", "bsc:0.3"), ("b", "0")],
            Command::SweepB => {
                &[("n", "4,5,6"), ("mech", "bsc:0.1,bsc:0.2,bsc:0.3,bsc:0.4"), ("grid", "0:max:20")]
            }
            Command::Primal => &[("n", "3"), ("b", "1.5"), ("grid", "0.05:0.45:9")],
            Command::Dual => &[("n", "2"), ("b", "0"), ("grid", "0.1*max:0.9*max:9"), ("zigzag", "false")],
            Command::Table3 => &[("n", "4"), ("eps", "1.0")],
            Command::Compare => &[("n", "4,5,6"), ("b", "0,0.5,1,1.5"), ("grid", "0.05:0.45:9"), ("eps", "0.25:4:16")],
        };
        for (k, v) in specific {
            s.set(k, *v);
        }
        s
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct Options {
    /// Record count, or a comma-separated list.
    #[arg(long, global = true)]
    pub n: Option<String>,
    /// parity, modsum:m or pairwise.
    #[arg(long, global = true)]
    pub query: Option<String>,
    /// bsc:p, laplace:eps, exp:eps or file:path; repeatable.
    #[arg(long, global = true)]
    pub mech: Vec<String>,
    /// Entropy bound(s) in nats; `max` is ln|X|.
    #[arg(long, global = true)]
    pub b: Option<String>,
    /// Distortion bound(s) for `primal`.
    #[arg(long = "D", global = true)]
    pub d: Option<String>,
    /// Leakage bound(s) for `dual`, nats.
    #[arg(long = "L", global = true)]
    pub l: Option<String>,
    /// Sweep grid, `lo:hi:count` or a list.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Privacy parameter(s) of the DP baselines.
    #[arg(long, global = true)]
    pub eps: Option<String>,
    #[arg(long, global = true, env = "PRIVLEAK_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exit nonzero when any row is infeasible.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Show leakage in bits (the nats column is always present).
    #[arg(long, global = true)]
    pub bits: bool,
    /// Three-symbol output for the exponential mechanism.
    #[arg(long, global = true)]
    pub extended: bool,
    /// Average penalty updates when the dual's leakage oscillates around L.
    #[arg(long, global = true)]
    pub zigzag: bool,
    /// Flat key=value file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

impl Options {
    fn as_settings(&self) -> Settings {
        let mut s = Settings::default();
        let pairs = [
            ("n", self.n.clone()),
            ("query", self.query.clone()),
            ("mech", (!self.mech.is_empty()).then(|| self.mech.join(","))),
            ("b", self.b.clone()),
            ("D", self.d.clone()),
            ("L", self.l.clone()),
            ("grid", self.grid.clone()),
            ("eps", self.eps.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("restarts", self.restarts.map(|v| v.to_string())),
            ("jobs", self.jobs.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, v);
            }
        }
        for (k, on) in [("strict", self.strict), ("bits", self.bits), ("extended", self.extended), ("zigzag", self.zigzag)] {
            if on {
                s.set(k, "true");
            }
        }
        s
    }
}

/// Defaults, then the config file, then flags.
pub fn effective_settings(cli: &Cli) -> Result<Settings> {
    let mut s = cli.command.defaults();
    if let Some(path) = &cli.opts.config {
        s.overlay(&settings::read_config(path)?);
    }
    s.overlay(&cli.opts.as_settings());
    Ok(s)
}

pub struct Report {
    pub csv: String,
    pub infeasible: usize,
    pub strict: bool,
}

impl Report {
    pub fn success(&self) -> bool {
        !(self.strict && self.infeasible > 0)
    }
}

pub fn execute(cli: &Cli) -> Result<Report> {
    let settings = effective_settings(cli)?;
    let jobs = match settings.raw("jobs") {
        Some(_) => settings.get::<usize>("jobs")?,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let strict = settings.flag("strict")?;
    let ctx = commands::Ctx::new(settings.clone())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let outcome = pool.install(|| match cli.command {
        Command::Audit => commands::audit(&ctx),
        Command::SweepB => commands::sweep_b(&ctx),
        Command::Primal => commands::primal(&ctx),
        Command::Dual => commands::dual(&ctx),
        Command::Table3 => commands::table3(&ctx),
        Command::Compare => commands::compare(&ctx),
    })?;
    let csv = outcome.table.render(cli.command.name(), &settings);
    if let Some(path) = &cli.opts.out {
        std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Report { csv, infeasible: outcome.infeasible, strict })
}
