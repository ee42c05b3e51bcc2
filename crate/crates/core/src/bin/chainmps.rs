use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use chainmps::config::{parse_override, ExperimentConfig};
use chainmps::experiment::{self, SchemeSpec};

#[derive(Parser)]
#[command(name = "chainmps", version, about = "Spin-boson dynamics with chain, star and interaction-picture MPS schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` file, or a `config.json` echo from an earlier run
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set N=20`; repeatable
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let overrides = self.set.iter().map(|s| parse_override(s)).collect::<chainmps::Result<Vec<_>>>()?;
        Ok(ExperimentConfig::load(self.config.as_deref(), &overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print chain coefficients and normal modes as JSON
    ChainCoeffs {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Write to this file instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Propagate one scheme and write trajectory, bond and config files
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write a gnuplot script next to the CSV files
        #[arg(long)]
        gnuplot: bool,
    },
    /// Run several schemes on the same bath and compare populations
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Schemes as `C`, `IC`, `S`, optionally with a local dimension (`C:60`)
        #[arg(long, value_delimiter = ',', default_value = "IC,C,S")]
        schemes: Vec<String>,
    },
    /// Compare a scheme against exact propagation of the same truncated model
    OracleCheck {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Time matched C and IC runs and evaluate the SVD cost model
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Local dimension for the chain run
        #[arg(long, default_value_t = 60)]
        chain_dim: usize,
        /// Local dimension for the interaction-picture run
        #[arg(long, default_value_t = 10)]
        interaction_dim: usize,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::ChainCoeffs { cfg, output } => {
            let cfg = cfg.resolve()?;
            let report = experiment::chain_coeffs(&cfg)?;
            match output {
                Some(path) => experiment::write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::Simulate { cfg, gnuplot } => {
            let cfg = cfg.resolve()?;
            let files = experiment::cmd_simulate(&cfg, gnuplot)
                .with_context(|| format!("simulation failed; partial output in {}", cfg.outdir.display()))?;
            println!("{}", files.trajectory.display());
        }
        Command::Compare { cfg, schemes } => {
            let cfg = cfg.resolve()?;
            let specs = schemes.iter().map(|s| s.parse()).collect::<chainmps::Result<Vec<SchemeSpec>>>()?;
            if specs.len() < 2 {
                bail!("compare needs at least two schemes");
            }
            let report = experiment::cmd_compare(&cfg, &specs)?;
            for s in &report.schemes {
                println!("{:>6}  d={:<3} max_bond={:<5} wall={:.2}s", s.label, s.local_dim, s.max_bond, s.wall_seconds);
            }
            for p in &report.pairwise {
                println!("{:>6} vs {:<6} max|dP|={:.3e}", p.a, p.b, p.max_abs_diff);
            }
        }
        Command::OracleCheck { cfg } => {
            let cfg = cfg.resolve()?;
            let rows = experiment::cmd_oracle_check(&cfg)?;
            let worst = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
            println!("{} max abs error {worst:.3e} over {} samples", cfg.scheme, rows.len());
        }
        Command::Bench { cfg, chain_dim, interaction_dim } => {
            let cfg = cfg.resolve()?;
            let report = experiment::cmd_bench(&cfg, chain_dim, interaction_dim)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
