use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bicx::algos::ProblemInstance;
use bicx::audit::{bic_margins_exact_with, bic_margins_mc, explorable_set, ExactConfig, Method};
use bicx::game::solve_recommendation_game;
use bicx::harness::{
    build_strategy, load_instance, run_experiment, sweep, write_sweep_csv, AuditMethod, Axis,
    ExperimentConfig,
};
use bicx::params::prior_params;
use bicx::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bicx",
    version,
    about = "Incentive-compatible bandit exploration toolkit"
)]
struct Cli {
    /// Experiment config (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (run) or file (other commands; stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute every prior-dependent parameter of an instance.
    Params {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Run an experiment and write its artifacts.
    Run,
    /// Audit the configured strategy and emit the margin report as CSV.
    Audit {
        #[arg(long, value_parser = parse_method)]
        method: Option<AuditMethod>,
        #[arg(long)]
        replicas: Option<u64>,
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Solve the recommendation game for one arm.
    GameSolve {
        #[arg(long)]
        instance: Option<PathBuf>,
        /// 1-based arm index (at least 2).
        #[arg(long)]
        arm: usize,
        /// Samples read per arm.
        #[arg(long)]
        depth: usize,
    },
    /// Classify the arms of an instance by explorability.
    ExploreSet {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Evaluate the parameters along one axis.
    Sweep {
        /// One of K, M, N, sigma, delta.
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
}

fn parse_method(s: &str) -> std::result::Result<AuditMethod, String> {
    match s {
        "auto" => Ok(AuditMethod::Auto),
        "exact" => Ok(AuditMethod::Exact),
        "mc" => Ok(AuditMethod::Mc),
        "none" => Ok(AuditMethod::None),
        _ => Err(format!("unknown audit method {s}")),
    }
}

enum Outcome {
    Done,
    AuditFailed(String),
}

fn config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = cli.seed {
        cfg.seeds.master = s;
    }
    Ok(cfg)
}

fn instance(cli: &Cli, file: &Option<PathBuf>) -> Result<ProblemInstance> {
    match file {
        Some(p) => load_instance(p),
        None => config(cli)?.build_instance(),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn io_err(p: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: p.display().to_string(),
        source: e,
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Params { instance: file } => {
            let inst = instance(cli, file)?;
            let constants = match &cli.config {
                Some(_) => config(cli)?.constants,
                None => Default::default(),
            };
            emit(&cli.out, &json(&prior_params(&inst, &constants)?)?)?;
        }
        Command::Run => {
            let cfg = config(cli)?;
            let summary = run_experiment(&cfg, cli.out.as_deref())?;
            if let Some(a) = summary.audit.filter(|a| !a.passed) {
                return Ok(Outcome::AuditFailed(format!(
                    "min margin {:e} below floor {:e}",
                    a.min_margin, a.floor
                )));
            }
        }
        Command::Audit {
            method,
            replicas,
            floor,
        } => {
            let mut cfg = config(cli)?;
            if let Some(m) = method {
                cfg.audit.method = *m;
            }
            if let Some(r) = replicas {
                cfg.audit.replicas = *r;
            }
            if let Some(f) = floor {
                cfg.audit.floor = *f;
            }
            cfg.validate()?;
            let inst = cfg.build_instance()?;
            let params = prior_params(&inst, &cfg.constants).ok();
            let (strategy, _) = build_strategy(&cfg, &inst, params.as_ref())?;
            let exact = || {
                bic_margins_exact_with(&inst, &strategy, &ExactConfig { cap: cfg.audit.cap }, None)
                    .map(|o| o.report)
            };
            let mc = || bic_margins_mc(&inst, &strategy, cfg.audit.replicas, cfg.seeds.master);
            let report = match cfg.audit.method {
                AuditMethod::Exact => exact()?,
                AuditMethod::Mc => mc()?,
                AuditMethod::Auto => match exact() {
                    Err(Error::EnumerationTooLarge(_)) => mc()?,
                    r => r?,
                },
                AuditMethod::None => return Err(Error::Config("audit method none".into())),
            };
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            emit(&cli.out, &String::from_utf8_lossy(&buf))?;
            let z = (report.method == Method::Mc).then_some(cfg.audit.z);
            let passed = report.passes(cfg.audit.floor, z);
            eprintln!(
                "{} audit: min margin {:e}, floor {:e}: {}",
                if report.method == Method::Mc {
                    "mc"
                } else {
                    "exact"
                },
                report.min_margin(),
                cfg.audit.floor,
                if passed { "PASS" } else { "FAIL" }
            );
            if !passed {
                return Ok(Outcome::AuditFailed("margin below floor".into()));
            }
        }
        Command::GameSolve {
            instance: file,
            arm,
            depth,
        } => {
            let inst = instance(cli, file)?;
            if *arm < 1 {
                return Err(Error::InvalidArgument("arms are 1-based".into()));
            }
            let game = match &cli.config {
                Some(_) => config(cli)?.schedule.game,
                None => Default::default(),
            };
            emit(
                &cli.out,
                &json(&solve_recommendation_game(&inst, arm - 1, *depth, &game)?)?,
            )?;
        }
        Command::ExploreSet { instance: file } => {
            let inst = instance(cli, file)?;
            emit(&cli.out, &json(&explorable_set(&inst))?)?;
        }
        Command::Sweep { axis, values } => {
            let cfg = config(cli)?;
            let rows = sweep(&cfg, *axis, values);
            let mut buf = Vec::new();
            write_sweep_csv(*axis, &rows, &mut buf)?;
            emit(&cli.out, &String::from_utf8_lossy(&buf))?;
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::AuditFailed(m)) => {
            eprintln!("audit failed: {m}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let _ = std::io::stderr().flush();
            match e {
                Error::AuditFailed(_) => ExitCode::from(3),
                e if e.is_validation() => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
