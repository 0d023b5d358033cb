use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pmcflow::verify::{verify_suite, VerifyOptions};
use pmcflow::{parse_config, presets, run_scenario};

#[derive(Parser)]
#[command(name = "pmcflow", version, about = "Prescribed mean curvature flow scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config (a path, or the name of a preset).
    Run {
        config: String,
        /// Output directory for the series, summary and snapshots.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the invariant checks.
    Verify {
        /// Only checks whose name contains this pattern.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List the built-in presets.
    Scenarios,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let path = PathBuf::from(&config);
            let cfg = if path.exists() {
                parse_config(&path).with_context(|| format!("loading {config}"))?
            } else if let Some(src) = presets::source(&config) {
                pmcflow::parse_str(src).with_context(|| format!("preset {config}"))?
            } else {
                anyhow::bail!("{config}: no such file or preset");
            };
            let outcome = run_scenario(&cfg, Some(&out)).with_context(|| format!("running {}", cfg.name))?;
            let s = &outcome.summary;
            println!("{}: {} after {} steps ({:.2} s)", s.name, s.termination, s.steps, s.wall_time);
            if let Some(e) = &s.error {
                println!("  error: {e}");
            }
            for (name, c) in &s.checks {
                println!("  {:<20} {}  margin {:.4e}", name, if c.pass { "pass" } else { "FAIL" }, c.margin);
            }
            println!("  artifacts in {}", out.display());
            Ok(s.success())
        }
        Command::Verify { filter, seed } => {
            let report = verify_suite(&VerifyOptions {
                filter,
                seed,
                ..VerifyOptions::default()
            });
            for e in &report.entries {
                println!(
                    "{:<32} {}  margin {:.4e}  {}",
                    e.name,
                    if e.pass { "pass" } else { "FAIL" },
                    e.margin,
                    e.detail
                );
            }
            println!("{}", serde_json::to_string(&report)?);
            Ok(report.pass)
        }
        Command::Scenarios => {
            for (name, about, _) in presets::PRESETS {
                println!("{name:<24} {about}");
            }
            Ok(true)
        }
    }
}
