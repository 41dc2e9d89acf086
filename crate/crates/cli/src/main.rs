use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use gaudin_lab::config::RunConfig;
use gaudin_lab::report::{Report, Status};
use gaudin_lab::runner::run_jobs;
use gaudin_lab::suites::{jobs_for, Setup};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Tensors,
    Zeroth,
    Symmetry,
    S1,
    Oper,
    Stokes,
    Bethe,
    TwoPoint,
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Tensors => "tensors",
            Command::Zeroth => "zeroth",
            Command::Symmetry => "symmetry",
            Command::S1 => "s1",
            Command::Oper => "oper",
            Command::Stokes => "stokes",
            Command::Bethe => "bethe",
            Command::TwoPoint => "two-point",
            Command::All => "all",
        }
    }
}

/// Exact and numerical checks for cubic affine sl_M Gaudin models.
#[derive(Parser, Debug)]
#[command(name = "gaudin-lab", version)]
struct Cli {
    command: Command,
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    depth: Option<i64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "GAUDIN_LAB_JOBS", default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::from_file(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(m) = cli.m {
        cfg.m = m;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.draws {
        cfg.draws = d;
    }
    if let Some(d) = cli.depth {
        cfg.depth = d;
    }
    let setup = match Setup::new(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let jobs = jobs_for(cli.command.name(), &setup).expect("every command has a suite");
    let report = Report::new(cli.command.name(), cfg.seed, run_jobs(jobs, cli.jobs));
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let written = match &cli.out {
        Some(p) => std::fs::write(p, json + "\n"),
        None => writeln!(std::io::stdout(), "{json}"),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(2);
    }
    if let Some(f) = report.first_failure() {
        eprintln!("first failure: {} ({})", f.name, f.detail);
    }
    if report.status == Status::Pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
