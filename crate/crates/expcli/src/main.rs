use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use d2dcomp_cli::config::{validate_config, ExperimentConfig};
use d2dcomp_cli::{experiment, output, recipes};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "d2dcomp", version, about = "Cache-assisted cooperative D2D delivery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        /// Replace the experiment with a built-in recipe.
        #[arg(long)]
        recipe: Option<String>,
        /// Leave the wall_time_ms column empty.
        #[arg(long)]
        no_timing: bool,
    },
    /// Check a config and list every violation.
    Validate { config: PathBuf },
    /// List the built-in recipes.
    ListRecipes,
}

enum Failure {
    Config(String),
    Numeric(String),
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn check(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let violations = validate_config(cfg);
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
    Err(Failure::Config(lines.join("\n")))
}

fn run(
    config: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<u64>,
    recipe: Option<String>,
    no_timing: bool,
) -> Result<(), Failure> {
    let mut cfg = load(config)?;
    if let Some(name) = &recipe {
        let r = recipes::find(name).ok_or_else(|| {
            let known: Vec<&str> = recipes::RECIPES.iter().map(|r| r.name).collect();
            Failure::Config(format!("unknown recipe `{name}` (known: {})", known.join(", ")))
        })?;
        cfg = r.apply_to(&cfg);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if no_timing {
        cfg.record_timing = false;
    }
    if out.is_some() {
        cfg.output = out;
    }
    check(&cfg)?;
    let path = cfg
        .output
        .clone()
        .ok_or_else(|| Failure::Config("output: no output path (set `output` or pass --out)".into()))?;
    let rows = experiment::run(&cfg).map_err(|e| Failure::Numeric(e.to_string()))?;
    let bytes = output::render(&cfg, recipe.as_deref(), &rows)
        .map_err(|e| Failure::Numeric(format!("serializing results: {e}")))?;
    output::write_atomic(&path, &bytes).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            trials,
            recipe,
            no_timing,
        } => run(&config, out, seed, trials, recipe, no_timing),
        Command::Validate { config } => load(&config).and_then(|cfg| check(&cfg)).map(|()| println!("ok")),
        Command::ListRecipes => {
            for r in &recipes::RECIPES {
                println!("{:<6} {}", r.name, r.description);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric error: {msg}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}
