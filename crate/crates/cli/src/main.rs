//! Experiment runner: learn, baseline, eval and validate subcommands.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qace_cli::config::{parse_seeds, ExperimentConfig, SeedSpec};
use qace_cli::{run, Failure};

#[derive(Parser, Debug)]
#[command(name = "qace", version, about = "Query-driven learning of capability models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Benchmark name (cafe, warehouse, driver, first-responder, elevator)
    #[arg(long)]
    domain: Option<String>,
    /// Seeds: "1..30", "1,4,9" or a single value
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long)]
    node_budget: Option<usize>,
    #[arg(long)]
    walk_limit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML experiment file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    snapshot_every: Option<u64>,
    #[arg(long)]
    test_samples: Option<usize>,
    #[arg(long)]
    time_limit: Option<f64>,
    /// Add wall-clock columns to CSV output
    #[arg(long)]
    wall_time: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Learn models with the query-driven learner
    Learn(Common),
    /// Learn models by random exploration
    Baseline {
        #[command(flatten)]
        common: Common,
        /// Simulator steps per seed; defaults to the learner's final count
        #[arg(long)]
        step_budget: Option<u64>,
    },
    /// Score model files against a benchmark's held-out problems
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
    /// Check parsing, round-trips, sizes and identifiability
    Validate {
        /// Only this benchmark
        #[arg(long)]
        domain: Option<String>,
        /// A benchmark tree (with manifest.json) or a directory holding
        /// domain.pddl and problem files
        dir: Option<PathBuf>,
    },
}

fn build_config(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &c.domain {
        cfg.domain = Some(d.clone());
    }
    if let Some(s) = &c.seeds {
        cfg.seeds = SeedSpec::List(parse_seeds(s)?);
    }
    if let Some(v) = c.eta {
        cfg.eta = v;
    }
    if let Some(v) = c.node_budget {
        cfg.node_budget = v;
    }
    if let Some(v) = c.walk_limit {
        cfg.walk_limit = v;
    }
    if let Some(v) = &c.out {
        cfg.out = v.clone();
    }
    if let Some(v) = c.snapshot_every {
        cfg.snapshot_every = v;
    }
    if let Some(v) = c.test_samples {
        cfg.test_samples = v;
    }
    if let Some(v) = c.time_limit {
        cfg.time_limit_s = v;
    }
    cfg.wall_time |= c.wall_time;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Learn(c) => build_config(&c).and_then(|cfg| run::learn(&cfg)),
        Command::Baseline { common, step_budget } => build_config(&common).and_then(|mut cfg| {
            if step_budget.is_some() {
                cfg.step_budget = step_budget;
            }
            run::baseline(&cfg)
        }),
        Command::Eval { common, models } => build_config(&common).and_then(|cfg| run::eval(&cfg, &models)),
        Command::Validate { domain, dir } => run::validate(domain.as_deref(), dir.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
