use std::path::PathBuf;
use std::process::ExitCode;

use aidrive::experiment::{
    map_csv, preset_text, run_batch, run_map, run_sweep, write_batch, write_sweep, RunConfig, PRESETS,
};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aidrive", version, about = "Active inference driver simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Preset name or path to a TOML run configuration.
    config: String,
    /// Master seed (overrides the configured one).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs (overrides the configured one).
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override any configuration key, e.g. `--set planner.policies=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of episodes and write traces and statistics.
    Run(Common),
    /// Run every cell of the configured sweep axes.
    Sweep(Common),
    /// Export the epistemic value map of the occlusion scene.
    Map(Common),
    /// List the embedded presets.
    Presets,
}

fn load(c: &Common) -> Result<RunConfig> {
    let text = match preset_text(&c.config) {
        Ok(t) => t.to_string(),
        Err(_) => std::fs::read_to_string(&c.config)
            .with_context(|| format!("`{}` is neither a preset nor a readable file", c.config))?,
    };
    let mut overrides = c.set.clone();
    if let Some(s) = c.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(r) = c.runs {
        overrides.push(format!("runs={r}"));
    }
    RunConfig::from_toml_with(&text, &overrides).with_context(|| format!("invalid configuration `{}`", c.config))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Presets => {
            for (name, text) in PRESETS {
                let about = text.lines().take_while(|l| l.starts_with('#')).map(|l| l.trim_start_matches('#').trim());
                println!("{name:<12} {}", about.collect::<Vec<_>>().join(" "));
            }
        }
        Command::Run(c) => {
            let cfg = load(&c)?;
            let batch = run_batch(&cfg)?;
            write_batch(&c.out, &cfg, &batch)?;
            for a in &batch.aggregate {
                println!("{:<22} {:>10.4}  [{:.4}, {:.4}]", a.metric, a.mean, a.ci_low, a.ci_high);
            }
            println!("wrote {} runs to {}", batch.traces.len(), c.out.display());
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let cells = run_sweep(&cfg)?;
            write_sweep(&c.out, &cfg, &cells)?;
            println!("wrote {} cells to {}", cells.len(), c.out.join("sweep.csv").display());
        }
        Command::Map(c) => {
            let cfg = load(&c)?;
            let points = run_map(&cfg)?;
            std::fs::create_dir_all(&c.out)?;
            let path = c.out.join("map.csv");
            std::fs::write(&path, map_csv(&points))?;
            println!("wrote {} grid points to {}", points.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
