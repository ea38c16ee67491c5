use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use saddle_imf::harness::{
    emit_table, run_checks, run_doa, run_experiment, write_doa_report, write_report, DoaConfig, ExperimentConfig,
    ExperimentReport, Format, Preset,
};
use saddle_imf::Execution;

#[derive(Parser, Debug)]
#[command(name = "imf", version, about = "Saddle search by iterative minimization")]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute the runs of a TOML experiment config.
    Run {
        config: PathBuf,
        /// Output directory (default: `output.dir`, else `out/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Domain-of-attraction scan from a TOML grid config.
    Doa {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a built-in preset: table1..table5, fig2.
    Bench {
        preset: Preset,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invariant suite over the builtin surfaces.
    Check {
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match dispatch(cli.command, exec) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command, exec: Execution) -> Result<bool> {
    match command {
        Command::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if exec == Execution::Sequential {
                cfg.execution = exec;
            }
            experiment(&cfg, out)
        }
        Command::Doa { config, out } => {
            let mut cfg = DoaConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if exec == Execution::Sequential {
                cfg.execution = exec;
            }
            doa(&cfg, out)
        }
        Command::Bench { preset, out } => {
            let dir = out.unwrap_or_else(|| Path::new("out").join(preset.to_string()));
            std::fs::create_dir_all(&dir)?;
            match preset.config() {
                Some(mut cfg) => {
                    cfg.execution = exec;
                    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
                    experiment(&cfg, Some(dir))
                }
                None => {
                    let mut cfg = saddle_imf::harness::presets::fig2();
                    cfg.execution = exec;
                    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
                    doa(&cfg, Some(dir))
                }
            }
        }
        Command::Check { json } => {
            let results = run_checks(exec)?;
            for r in &results {
                println!("{} {:<30} {:<18} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.problem, r.detail);
            }
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&results)?)?;
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn experiment(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<bool> {
    let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| Path::new("out").join(&cfg.name));
    info!("{}: {} variant(s) on {}", cfg.name, cfg.variant_configs().len(), cfg.problem.name);
    let report = run_experiment(cfg)?;
    write_report(&report, cfg, &dir)?;
    print_runs(&report)?;
    info!("wrote {}", dir.display());
    Ok(report.all_converged)
}

fn print_runs(report: &ExperimentReport) -> Result<()> {
    for s in &report.runs {
        let order = s.order.or(s.order_tail).map_or("-".to_string(), |o| format!("{o:.2}"));
        println!(
            "run {:>3} {:<16} {:?} iters {:>3} saddle {:<12} order {}",
            s.run,
            s.variant,
            s.status,
            s.iterations,
            s.saddle.as_deref().unwrap_or("-"),
            order
        );
    }
    print!("{}", emit_table(&report.columns(), Format::Markdown)?);
    Ok(())
}

fn doa(cfg: &DoaConfig, out: Option<PathBuf>) -> Result<bool> {
    let dir = out.unwrap_or_else(|| Path::new("out").join(&cfg.name));
    let report = run_doa(cfg)?;
    write_doa_report(&report, &dir)?;
    print!("{}", report.markdown());
    info!("wrote {}", dir.display());
    Ok(true)
}
