use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use datagather::simulator::SimOptions;
use datagather::PlanConfig;
use datagather_cli::commands::{cmd_plan, cmd_simulate, cmd_sweep, plan_table, segment_raster, trace_lines};
use datagather_cli::config::{apply, load_config, parse_methods, render};
use datagather_cli::{load_scenario, CliError};

#[derive(Parser)]
#[command(name = "datagather", version, about = "Plan and simulate multi-agent data-gathering missions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every candidate and print the table with the winner marked.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Write the winner's per-cell segment labels to segments.csv.
        #[arg(long)]
        export_segments: bool,
    },
    /// Run seeded missions of the winning candidate.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        runs: Runs,
        #[arg(long)]
        export_segments: bool,
        /// Write each trial's events to trace_seed<N>.jsonl.
        #[arg(long)]
        export_trace: bool,
    },
    /// Estimated against executed metrics for every candidate.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        runs: Runs,
    },
}

#[derive(Args)]
struct Common {
    /// ASCII map: '#' obstacle, '.' free, 'O' operation center.
    #[arg(long)]
    scenario: PathBuf,
    /// key = value file of planner settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bap, pap, rap or all.
    #[arg(long, default_value = "all")]
    method: String,
    /// A collector count, or "sweep" for 0..=N/2.
    #[arg(long, default_value = "sweep")]
    collectors: String,
    /// Override one config key; wins over the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory for reports and exports; reports go to stdout without it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Runs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

impl Common {
    fn config(&self) -> Result<PlanConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => load_config(path)?,
            None => PlanConfig::default(),
        };
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{pair}'")))?;
            apply(&mut config, key.trim(), value.trim()).map_err(CliError::Usage)?;
        }
        config.methods = parse_methods(&self.method).map_err(CliError::Usage)?;
        config.fixed_collectors = match self.collectors.as_str() {
            "sweep" => None,
            n => Some(n.parse().map_err(|_| CliError::Usage(format!("--collectors expects a count or 'sweep', got '{n}'")))?),
        };
        config.validate()?;
        Ok(config)
    }

    fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self.out.as_deref().unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(dir)
    }

    /// Report to `<out>/<name>` when `--out` is set, else to stdout.
    fn emit(&self, name: &str, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(_) => write(&self.out_dir()?.join(name), text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan { common, export_segments } => {
            let grid = load_scenario(&common.scenario)?;
            let config = common.config()?;
            let plan = cmd_plan(&grid, &config)?;
            common.emit("plan.csv", &plan_table(&plan))?;
            if common.out.is_some() {
                write(&common.out_dir()?.join("config.txt"), &render(&config))?;
            }
            if export_segments {
                write(&common.out_dir()?.join("segments.csv"), &segment_raster(&grid, &plan.winner().partition))?;
            }
        }
        Command::Simulate { common, runs, export_segments, export_trace } => {
            let grid = load_scenario(&common.scenario)?;
            let config = common.config()?;
            let plan = cmd_plan(&grid, &config)?;
            let winner = plan.winner();
            eprintln!(
                "simulating {} with {} collectors (est_tc {}, est_md {})",
                winner.method, winner.n_collectors, winner.est_tc, winner.est_md
            );
            let report = cmd_simulate(&grid, &config, winner, runs.seed, runs.trials, &SimOptions::default(), export_trace)?;
            common.emit("trials.csv", &report.table())?;
            if export_segments {
                write(&common.out_dir()?.join("segments.csv"), &segment_raster(&grid, &winner.partition))?;
            }
            for (seed, trace) in report.seeds.iter().zip(&report.traces) {
                write(&common.out_dir()?.join(format!("trace_seed{seed}.jsonl")), &trace_lines(trace))?;
            }
        }
        Command::Sweep { common, runs } => {
            let grid = load_scenario(&common.scenario)?;
            let config = common.config()?;
            let report = cmd_sweep(&grid, &config, runs.seed, runs.trials)?;
            common.emit("sweep.csv", &report.table())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
