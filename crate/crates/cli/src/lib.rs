//! Command-line front end: pick a scenario, apply overrides, run it, and
//! export the record.

use clap::{CommandFactory, Parser, ValueEnum};
use raftform_core::export::{write_outputs, Format};
use raftform_core::scenarios::{build_scenario, run, summarize, Overrides, ScenarioSpec};
use std::ffi::OsString;
use std::path::PathBuf;

pub const SCENARIOS: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "stress"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "raftform", about = "Run a formation-control scenario over a simulated Raft cluster")]
struct Args {
    /// Scenario label.
    #[arg(long, value_parser = SCENARIOS)]
    scenario: String,
    /// Run seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    agents: Option<usize>,
    /// Control gain k.
    #[arg(long)]
    gain: Option<f64>,
    /// Integration step per frame.
    #[arg(long)]
    dt: Option<f64>,
    /// Polygon radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Also write SVG charts of trajectories and errors.
    #[arg(long)]
    plot: bool,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
    /// Override file (`key = value` lines and `crash|recover|add <node> <frame>` lines).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub scenario: String,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub seed: u64,
    pub plot: bool,
    pub force: bool,
    pub overrides: Overrides,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags; carries clap's rendered usage message.
    Usage(clap::Error),
    Config(String),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{e}"),
            CliError::Config(e) => write!(f, "config: {e}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Parses flags and, if given, the override file. Flags win over the file.
pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv).map_err(CliError::Usage)?;
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Overrides::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => Overrides::default(),
    };
    let flags = Overrides {
        agents: args.agents,
        frames: args.frames,
        gain: args.gain,
        dt: args.dt,
        radius: args.radius,
        seed: args.seed,
        ..Default::default()
    };
    let mut overrides = file.merge(flags);
    let seed = overrides.seed.unwrap_or(0);
    overrides.seed = Some(seed);
    Ok(CliConfig {
        scenario: args.scenario,
        out_dir: args.out,
        format: args.format,
        seed,
        plot: args.plot,
        force: args.force,
        overrides,
    })
}

pub fn build_spec(config: &CliConfig) -> Result<ScenarioSpec, CliError> {
    build_scenario(&config.scenario, &config.overrides).map_err(|e| CliError::Config(e.to_string()))
}

/// Runs the configured scenario and writes its outputs. Returns the paths
/// written.
pub fn execute(config: &CliConfig) -> Result<Vec<PathBuf>, CliError> {
    let spec = build_spec(config)?;
    let record = run(&spec).map_err(|e| CliError::Run(e.to_string()))?;
    let summary = summarize(&record);
    if !summary.is_safe() {
        return Err(CliError::Run(format!("safety violations: {:?}", summary.violations)));
    }
    let format = match config.format {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Json => Format::Json,
    };
    write_outputs(&record, &config.out_dir, format, config.plot, config.force).map_err(|e| CliError::Run(e.to_string()))
}

/// Entry point shared by the binary and the tests. Returns the exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match parse_args(argv) {
        Ok(c) => c,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            if e.use_stderr() && !e.to_string().contains("Usage:") {
                eprintln!("\n{}", Args::command().render_usage());
            }
            return e.exit_code();
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(&config) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use raftform_core::raft::NodeId;

    #[test]
    fn defaults() {
        let c = parse_args(["raftform", "--scenario", "F", "--seed", "7"]).unwrap();
        assert_eq!((c.scenario.as_str(), c.seed, c.format), ("F", 7, OutputFormat::Csv));
        assert_eq!(c.out_dir, PathBuf::from("./out"));
        assert!(!c.plot && !c.force);
        let spec = build_spec(&c).unwrap();
        assert_eq!((spec.seed, spec.agents, spec.frames), (7, 3, 100));
    }

    #[test]
    fn usage_errors() {
        for argv in [
            vec!["raftform", "--scenario", "Z"],
            vec!["raftform"],
            vec!["raftform", "--scenario", "A", "--seed", "x"],
            vec!["raftform", "--scenario", "A", "--bogus"],
            vec!["raftform", "--scenario", "A", "--format", "xml"],
        ] {
            assert!(matches!(parse_args(argv.clone()), Err(CliError::Usage(_))), "{argv:?}");
        }
    }

    #[test]
    fn config_file_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("faults.txt");
        std::fs::write(&path, "seed = 4\nagents = 9\ncrash 1 30\ncrash 2 30\n").unwrap();
        let c = parse_args(["raftform", "--scenario", "C", "--agents", "6", "--config", path.to_str().unwrap()]).unwrap();
        assert_eq!(c.seed, 4);
        let spec = build_spec(&c).unwrap();
        assert_eq!(spec.agents, 6);
        assert_eq!(spec.faults.crashed_by(30), [NodeId(1), NodeId(2)].into());
    }

    #[test]
    fn bad_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "warp = 9\n").unwrap();
        let err = parse_args(["raftform", "--scenario", "C", "--config", path.to_str().unwrap()]).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        let missing = dir.path().join("missing.txt");
        assert!(parse_args(["raftform", "--scenario", "C", "--config", missing.to_str().unwrap()]).is_err());
    }
}
