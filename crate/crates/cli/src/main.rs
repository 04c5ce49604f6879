//! `mhd2d <experiment> --config path.json [--set key=value ...]`
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;

mod config;
mod recipes;
mod report;

use config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "mhd2d", version, about = "Experiment driver for the 2-D MHD laboratory")]
struct Args {
    /// Recipe name, `list-experiments`, or `print-config`.
    experiment: String,
    /// JSON configuration; every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted override such as `grid.nx=128`; the value is parsed as JSON.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// `Ok(false)` when the experiment ran but an assertion failed.
fn run(args: Args) -> Result<bool> {
    match args.experiment.as_str() {
        "list-experiments" => {
            for (name, about, _) in recipes::RECIPES {
                println!("{name:<22} {about}");
            }
            return Ok(true);
        }
        "print-config" => {
            let cfg = ExperimentConfig::load(args.config.as_deref(), &args.set)?;
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            return Ok(true);
        }
        _ => {}
    }
    let name = args.experiment.as_str();
    let recipe = recipes::find(name)?;
    let cfg = ExperimentConfig::load(args.config.as_deref(), &args.set)?;
    if let Some(other) = cfg.experiment.as_deref() {
        if other != name {
            bail!("config names experiment `{other}` but `{name}` was requested");
        }
    }
    let mut ctx = recipes::Run::new(name, cfg)?;
    recipe(&mut ctx)?;
    ctx.report.write(&ctx.out)?;
    for a in &ctx.report.assertions {
        println!("{} {}: {:e} (expected {})", if a.pass { "PASS" } else { "FAIL" }, a.assertion, a.observed, a.expected);
    }
    println!("artifacts in {}", ctx.out.display());
    Ok(ctx.report.pass)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
