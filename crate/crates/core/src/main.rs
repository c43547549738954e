use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qrc::circuits::Preset;
use qrc::harness::checks::{run_checks, Suite, CSV_HEADER};
use qrc::harness::config::ExperimentConfig;
use qrc::harness::definition::{dump, preset_model};
use qrc::harness::experiment::{run_experiment, write_artifacts};
use qrc::harness::io::write_dataset;
use qrc::harness::{exit_code, EXIT_CHECK_FAILED};
use qrc::tasks::{build_dataset, make_task, Problem, TaskId};
use qrc::Result;

#[derive(Parser)]
#[command(name = "qrc", version, about = "Dissipative quantum reservoir computing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config. Flags override file values.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Sets the circuit, task and sampler seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run property suites and print `suite,check,measured,relation,bound,margin,status` lines.
    Check {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Target tasks.
    Task {
        #[command(subcommand)]
        action: TaskAction,
    },
    /// Reservoir definitions.
    Reservoir {
        #[command(subcommand)]
        action: ReservoirAction,
    },
}

#[derive(Subcommand)]
enum TaskAction {
    /// Write an input/target sequence as `l,u,y,segment` CSV.
    Gen {
        #[arg(long)]
        id: TaskId,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; emulation writes one `_seq{k}` file per sequence.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "multi_step")]
        problem: Problem,
        #[arg(long)]
        dim: Option<usize>,
    },
}

#[derive(Subcommand)]
enum ReservoirAction {
    /// Print or write a preset's circuit definition.
    Dump {
        #[arg(long)]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn sequence_path(out: &Path, k: usize) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "task".into(), |s| s.to_string_lossy().into_owned());
    let ext = out.extension().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_seq{k}.{ext}"))
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let report = run_experiment(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            write_artifacts(&report, &cfg.out)?;
            println!("task,problem,reservoir,nmse_train,nmse_test");
            for r in report.nmse_rows() {
                println!("{},{},{},{},{}", r.task, r.problem, r.reservoir, r.nmse_train, r.nmse_test);
            }
            Ok(true)
        }
        Command::Check { suite, seed } => {
            let report = run_checks(suite, seed)?;
            println!("{CSV_HEADER}");
            for c in &report.checks {
                println!("{}", c.csv_line());
            }
            Ok(report.passed())
        }
        Command::Task {
            action: TaskAction::Gen { id, seed, out, problem, dim },
        } => {
            let task = make_task(id, dim.unwrap_or(id.default_dim()), seed)?;
            let seqs = build_dataset(&task, problem, seed)?;
            if seqs.len() == 1 {
                write_dataset(&out, &seqs[0])?;
            } else {
                for (k, d) in seqs.iter().enumerate() {
                    write_dataset(&sequence_path(&out, k), d)?;
                }
            }
            Ok(true)
        }
        Command::Reservoir {
            action: ReservoirAction::Dump { preset, seed, eps, out },
        } => {
            let model = preset_model(preset, seed, eps)?;
            let text = dump(&model, Some(&format!("{} seed={seed}", preset.name())))?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
