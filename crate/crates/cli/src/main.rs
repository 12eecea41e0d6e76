use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use thermo_enclosure::config::benchmark_config;
use thermo_enclosure::output::{num, write_validation};
use thermo_enclosure::pipeline::{self, Overrides, RunSummary, BOUNDS_FILE, VALIDATION_FILE};
use thermo_enclosure::validate::{self, Level};
use thermo_enclosure::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "thermo-enclosure", version, about = "Enclosure-method cavity reconstruction for thermoelastic bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON). Defaults to the benchmark experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for concurrent solves.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Mesh refinement level, overriding the config.
    #[arg(long, global = true)]
    refine: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Closed forms against the quadrature oracle, identity battery and
    /// (full) lower-bound sweeps.
    ValidateAppendix {
        #[arg(long, value_enum, default_value = "quick")]
        level: LevelArg,
    },
    /// Write the benchmark mesh.
    Mesh,
    /// Solve once per probe and dump the fields as VTK.
    Solve {
        /// Laplace parameter (tau mode); defaults to the first grid value.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Indicator sweeps, one CSV per probe.
    Sweep,
    /// Distance fits from the sweep CSVs.
    Extract,
    /// Enclosure from the estimates CSV.
    Enclose,
    /// Full pipeline with manifest.
    Run,
}

fn report(s: &RunSummary) {
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    for e in &s.estimates {
        println!("{}: {} d_hat = {} (stderr {}, {} used, {} skipped)", e.probe_id, e.mode.name(), e.d_hat, e.stderr, e.n_used, e.n_skipped);
    }
    for (id, r) in &s.thresholds {
        println!("{id}: {} (rate {}, band {})", r.verdict.name(), r.rate, r.band);
    }
    if let Some(n) = s.possible_points {
        println!("enclosure: {n} possible grid points");
    }
    for f in &s.files {
        println!("wrote {}", f.display());
    }
}

fn validate_cmd(cfg: &ExperimentConfig, level: LevelArg) -> Result<bool, CliError> {
    let level = match level {
        LevelArg::Quick => Level::Quick,
        LevelArg::Full => Level::Full,
    };
    let rep = pipeline::with_workers(cfg.workers, || validate::validate(cfg, level))??;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join(VALIDATION_FILE);
    write_validation(&path, &rep.rows)?;
    println!("oracle: {} cases, max rel err {:e}, {} failures", validate::ORACLE_CASES, rep.max_oracle_rel_err, rep.oracle_failures);
    println!("identity: max rel err {:e}, {} failures", rep.max_identity_rel_err, rep.identity_failures);
    if !rep.bounds.is_empty() {
        let mut text = String::from("lemma,tau,ratio,power\n");
        for b in &rep.bounds {
            println!("{}: {}", b.lemma.id(), if b.passed { "positive-bounded" } else { "FAILED" });
            for r in &b.rows {
                text.push_str(&format!("{},{},{},{}\n", b.lemma.id(), num(r.tau), r.ratio.value().map_or("trivial".into(), num), num(r.power)));
            }
        }
        let bp = cfg.output_dir.join(BOUNDS_FILE);
        thermo_enclosure::output::write_text(&bp, &text)?;
        println!("wrote {}", bp.display());
    }
    println!("wrote {}", path.display());
    for f in &rep.failures {
        eprintln!("failed: {f}");
    }
    Ok(rep.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => benchmark_config(),
    };
    let cfg = Overrides { out: cli.out, workers: cli.workers, refine: cli.refine }.apply(cfg);
    let result = match cli.command {
        Command::ValidateAppendix { level } => match validate_cmd(&cfg, level) {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::from(2),
            Err(e) => Err(e),
        },
        Command::Mesh => pipeline::cmd_mesh(&cfg),
        Command::Solve { tau } => pipeline::cmd_solve(&cfg, tau),
        Command::Sweep => pipeline::cmd_sweep(&cfg),
        Command::Extract => pipeline::cmd_extract(&cfg),
        Command::Enclose => pipeline::cmd_enclose(&cfg),
        Command::Run => pipeline::run_experiment(&cfg),
    };
    match result {
        Ok(s) => {
            report(&s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
