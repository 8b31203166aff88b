use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

mod config;
mod presets;
mod run;

pub const THREADS_ENV: &str = "QGPHASE_THREADS";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn config(e: qgphase::Error) -> Self {
        match e {
            qgphase::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }

    fn library(e: qgphase::Error) -> Self {
        if e.is_numerical_guard() {
            CliError::Numerical(e.to_string())
        } else {
            Self::config(e)
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical guard: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "qgphase", version, about = "Gravitationally induced phases between quantum sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config file or a named preset.
    Run {
        /// Path to a config file, or `preset:<name>`.
        config: String,
        /// Override a scalar field, e.g. `--set seed=3` or
        /// `--set scenario.phase-compare.t=2.5`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
        /// Output directory; overrides the `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List presets, or print one as JSON.
    Presets { name: Option<String> },
    /// Print the config JSON schema.
    Schema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qgphase: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, set, out } => {
            configure_threads()?;
            let (cfg, dir) = match config.strip_prefix("preset:") {
                Some(name) => (presets::preset(name)?, PathBuf::from(".")),
                None => {
                    let path = Path::new(&config);
                    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
                    (config::load(path)?, dir)
                }
            };
            let mut cfg = config::apply_overrides(cfg, &set)?;
            if let Some(o) = out {
                cfg.output = o;
            }
            let output = run::execute(&cfg, &dir)?;
            write_outputs(&cfg, &output)?;
            println!("{}", cfg.output.display());
            Ok(())
        }
        Command::Presets { name: None } => {
            for n in presets::NAMES {
                println!("{n}");
            }
            Ok(())
        }
        Command::Presets { name: Some(n) } => {
            let v = presets::preset_value(&n)
                .ok_or_else(|| CliError::Config(format!("unknown preset `{n}`")))?;
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            Ok(())
        }
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&config::schema()).expect("json"));
            Ok(())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV}={raw} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn io(e: impl fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

fn write_outputs(cfg: &config::ScenarioConfig, out: &run::RunOutput) -> Result<(), CliError> {
    let root = &cfg.output;
    let tables = root.join("tables");
    std::fs::create_dir_all(&tables).map_err(io)?;
    let generated = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut report = out.report.clone();
    report["generated_unix"] = serde_json::json!(generated);
    report["tables"] = serde_json::json!(out.tables.iter().map(|t| format!("tables/{}.csv", t.name)).collect::<Vec<_>>());
    for t in &out.tables {
        let comment = format!(
            "qgphase {} table={} seed={} generated={generated}",
            cfg.scenario.kind(),
            t.name,
            cfg.seed
        );
        t.write_csv(&tables.join(format!("{}.csv", t.name)), &comment).map_err(io)?;
    }
    if !out.grids.is_empty() {
        let grids = root.join("grids");
        std::fs::create_dir_all(&grids).map_err(io)?;
        for g in &out.grids {
            g.field.save(&grids.join(&g.name), &g.quantity, &g.units).map_err(io)?;
        }
        report["grids"] = serde_json::json!(out.grids.iter().map(|g| format!("grids/{}", g.name)).collect::<Vec<_>>());
    }
    let text = serde_json::to_string_pretty(&report).map_err(io)?;
    std::fs::write(root.join("report.json"), text + "\n").map_err(io)
}
