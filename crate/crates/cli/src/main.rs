use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dervalue_cli::commands::AnalyticArgs;
use dervalue_cli::output::Manifest;
use dervalue_cli::{run, Command, Overrides, RunConfig, RunError};

#[derive(Parser)]
#[command(name = "dervalue", version, about = "Value of rooftop PV and storage for households and aggregators")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the file and DERVALUE_OUT_DIR).
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
    /// Master seed; also seeds the synthetic population and random adoption.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for the machine default.
    #[arg(long)]
    threads: Option<usize>,
    /// Synthetic population size (adds a [synth] section if missing).
    #[arg(long)]
    households: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic population and write it in the input formats.
    Synth(Common),
    /// Build every rate, write the rate and sizing audits.
    Prices(Common),
    /// Bills and savings under each policy.
    Savings(Common),
    /// Value of forecast information per household.
    Voi(Common),
    /// Value of coordination across adoption patterns and levels.
    Coord(Common),
    /// Closed-form two-type model: value of coordination against adoption.
    Analytic {
        #[arg(long, default_value_t = 2.0)]
        e: f64,
        #[arg(long, default_value_t = 0.75)]
        pa: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        #[arg(long, default_value_t = 100)]
        n: u32,
        /// Points along the adoption axis.
        #[arg(long, default_value_t = 100)]
        steps: u32,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Everything above in one run.
    All(Common),
    /// Check a configuration and list every problem.
    Validate(Common),
    /// Repeat the run recorded in an output manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load(c: &Common) -> Result<RunConfig, RunError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: c.seed,
        out_dir: c.out_dir.clone(),
        threads: c.threads,
        households: c.households,
    });
    Ok(cfg)
}

fn dispatch(cmd: Cmd) -> Result<i32, RunError> {
    let (command, cfg) = match cmd {
        Cmd::Synth(c) => (Command::Synth, load(&c)?),
        Cmd::Prices(c) => (Command::Prices, load(&c)?),
        Cmd::Savings(c) => (Command::Savings, load(&c)?),
        Cmd::Voi(c) => (Command::Voi, load(&c)?),
        Cmd::Coord(c) => (Command::Coord, load(&c)?),
        Cmd::All(c) => (Command::All, load(&c)?),
        Cmd::Analytic { e, pa, q, r, n, steps, out_dir } => {
            let cfg = load(&Common { out_dir, ..Default::default() })?;
            (Command::Analytic(AnalyticArgs { e, pa, q, r, n, steps }), cfg)
        }
        Cmd::Validate(c) => {
            let diags = load(&c)?.validate();
            for (path, msg) in &diags {
                println!("{path}: {msg}");
            }
            if diags.is_empty() {
                println!("ok");
                return Ok(0);
            }
            return Ok(1);
        }
        Cmd::Rerun { manifest, out_dir, threads } => {
            let m = Manifest::read(&manifest)?;
            let mut cfg = m.config;
            cfg.apply(&Overrides { out_dir, threads, ..Default::default() });
            (m.command, cfg)
        }
    };
    let report = run(&command, &cfg)?;
    eprintln!("{} files written", report.files.len());
    if report.solver_failures() > 0 {
        eprintln!("{} work items failed; see failures.csv", report.solver_failures());
        return Ok(3);
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                RunError::Config(diags) => {
                    eprintln!("error: invalid configuration");
                    for (path, msg) in diags {
                        eprintln!("  {path}: {msg}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
