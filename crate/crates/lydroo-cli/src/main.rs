//! Command-line runner: single simulations and arrival-rate sweeps.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use lydroo::{run_experiment, RunConfig, SchemeKind, SystemConfig64};

#[derive(Parser)]
#[command(
    name = "lydroo",
    about = "Online computation offloading simulator: drift-plus-penalty schemes over a multi-user MEC network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Lydroo,
    Lycd,
    Myopic,
    Exhaustive,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Lydroo => SchemeKind::Lydroo,
            SchemeArg::Lycd => SchemeKind::Lycd,
            SchemeArg::Myopic => SchemeKind::Myopic,
            SchemeArg::Exhaustive => SchemeKind::Exhaustive,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Decision scheme to run.
    #[arg(long, value_enum)]
    scheme: SchemeArg,

    /// Number of frames to simulate.
    #[arg(long, default_value_t = 10_000)]
    frames: u64,

    /// Experiment seed (drives channels, arrivals, network init, noise).
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Config file (flat key = value); defaults to the built-in 10-WD
    /// reference network.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Deterministic mode: serial evaluation and a pinned timing column,
    /// so equal (config, scheme, seed) produce byte-identical CSVs.
    #[arg(long)]
    sequential: bool,
}

impl CommonArgs {
    fn load_config(&self) -> anyhow::Result<SystemConfig64> {
        match &self.config {
            Some(path) => lydroo::load_config(path)
                .with_context(|| format!("loading config {}", path.display())),
            None => Ok(SystemConfig64::reference(10)),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme for a number of frames and write the per-frame CSV.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,

        /// Multiply every per-WD mean arrival rate.
        #[arg(long, default_value_t = 1.0)]
        lambda_scale: f64,

        /// Output CSV path (one row per frame).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the same scheme across several arrival-rate scales and emit one
    /// summary row per point.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,

        /// Comma-separated list of arrival-rate multipliers.
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_scales: Vec<f64>,

        /// Output CSV path for the summary table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            common,
            lambda_scale,
            out,
        } => {
            let cfg = common.load_config()?;
            let rc = RunConfig {
                scheme: common.scheme.into(),
                frames: common.frames,
                seed: common.seed,
                lambda_scale,
                sequential: common.sequential,
            };
            let output = run_experiment(&cfg, &rc, out.as_deref())?;
            print!("{}", output.summary.format_block());
            Ok(())
        }
        Command::Sweep {
            common,
            lambda_scales,
            out,
        } => {
            let cfg = common.load_config()?;
            let mut table = String::from(
                "lambda_scale,avg_weighted_rate_bps,max_avg_power_w,mean_total_queue_bits,tail_mean_total_queue_bits,stability,mean_decide_ms\n",
            );
            for scale in &lambda_scales {
                let rc = RunConfig {
                    scheme: common.scheme.into(),
                    frames: common.frames,
                    seed: common.seed,
                    lambda_scale: *scale,
                    sequential: common.sequential,
                };
                let output = run_experiment(&cfg, &rc, None)?;
                let s = &output.summary;
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},{},{}",
                    scale,
                    s.avg_weighted_rate_bps,
                    s.max_avg_power,
                    s.mean_total_queue_bits,
                    s.tail_mean_total_queue_bits,
                    s.stability.map_or("n/a", |v| v.as_str()),
                    s.mean_decide_ms
                );
                println!("== lambda_scale {scale}");
                print!("{}", s.format_block());
            }
            match out {
                Some(path) => std::fs::write(&path, table)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{table}"),
            }
            Ok(())
        }
    }
}
