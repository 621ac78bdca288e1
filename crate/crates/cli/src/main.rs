//! `reclaim`: analytics, augmentation, search and the four scoring runs.
//!
//! Exit codes: 0 success, 2 configuration or I/O error, 3 data error,
//! 4 missing dependency (a threshold run before its parent, a report with no
//! runs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reclaim_core::corpus::load_corpus;
use reclaim_core::pipeline::{
    analyze, baseline, emit_report, execute_run, read_artifact, write_augmented, write_fixture, write_study,
    PipelineConfig, RunId,
};
use reclaim_core::synthetic::ShiftSpec;
use reclaim_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "reclaim", version, about = "Multilingual reclamation classifier pipeline")]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true, default_value = "reclaim.json")]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label distribution and chi-square test; `--baseline` adds the
    /// embedding-source comparison.
    Analyze {
        #[arg(long)]
        baseline: bool,
    },
    /// Back-translate the corpus into `<output>/augmented.jsonl`.
    Augment,
    /// Hyperparameter search only, into `<output>/hpo/<id>/`.
    Hpo {
        #[arg(long, default_value = "run1")]
        id: RunId,
    },
    /// Execute one of run1..run4 into `<output>/<id>/`.
    Run {
        #[arg(long)]
        id: RunId,
    },
    /// Plot-ready CSV/JSON for every completed run, into `<output>/report/`.
    Report,
    /// Write a synthetic corpus, feature files and config into a directory.
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 500)]
        per_lang: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
}

fn load(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn report(cfg: &PipelineConfig) -> Result<Vec<PathBuf>, Error> {
    let mut artifacts = Vec::new();
    for run in RunId::ALL {
        let dir = cfg.run_dir(run);
        if dir.join("metrics.json").exists() {
            artifacts.push(read_artifact(&dir, run)?);
        }
    }
    if artifacts.is_empty() {
        return Err(Error::Dependency(format!(
            "no completed runs under {}; execute `run --id run1` first",
            cfg.output_dir.display()
        )));
    }
    let corpus = load_corpus(&cfg.corpus_path)?;
    emit_report(&corpus, &artifacts, cfg.seed, &cfg.output_dir.join("report"))
}

fn synth(cli: &Cli, dir: &Path, per_lang: usize, trials: usize, k: usize) -> Result<Vec<PathBuf>, Error> {
    let seed = cli.seed.unwrap_or(0);
    let spec = ShiftSpec {
        per_lang,
        seed,
        ..ShiftSpec::default()
    };
    Ok(vec![write_fixture(dir, &spec, trials, k, seed)?])
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Synth { dir, per_lang, trials, k } => print_paths(&synth(cli, dir, *per_lang, *trials, *k)?),
        Command::Analyze { baseline: with_baseline } => {
            let cfg = load(cli)?;
            print_paths(&analyze(&cfg)?);
            if *with_baseline {
                print_paths(&[baseline(&cfg)?]);
            }
        }
        Command::Augment => print_paths(&write_augmented(&load(cli)?)?),
        Command::Hpo { id } => {
            let (study, files) = write_study(&load(cli)?, *id)?;
            print_paths(&files);
            let best = study.best();
            eprintln!(
                "best trial {} value {}: {}",
                best.trial_id,
                best.final_value.unwrap_or(f64::NAN),
                serde_json::to_string(&best.params)?
            );
        }
        Command::Run { id } => {
            let (art, files) = execute_run(&load(cli)?, *id)?;
            print_paths(&files);
            eprintln!("{id}: macro-F1 {:.4}", art.summary.metrics.macro_f1);
        }
        Command::Report => print_paths(&report(&load(cli)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config | ErrorKind::Io => 2,
                ErrorKind::Data => 3,
                ErrorKind::Dependency => 4,
            })
        }
    }
}
