use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mm_core::config::{ExperimentConfig, Suite};
use mm_core::harness::{run_suite, write_fields, write_outputs};
use mm_core::report::{to_csv, to_json, Format};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    Geometry,
    Transport,
    Evolve,
    Verify,
    Laws,
    Ns,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Geometry => Suite::Geometry,
            SuiteArg::Transport => Suite::Transport,
            SuiteArg::Evolve => Suite::Evolve,
            SuiteArg::Verify => Suite::Verify,
            SuiteArg::Laws => Suite::Laws,
            SuiteArg::Ns => Suite::Ns,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Runs a verification suite and writes its report.
#[derive(Debug, Parser)]
#[command(name = "mm", version)]
struct Args {
    suite: SuiteArg,
    /// key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: Args) -> Result<bool, mm_core::Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    // the subcommand decides which suite runs
    cfg.suite = args.suite.into();
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    if let Some(f) = args.format {
        cfg.format = match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        };
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if let Some(n) = std::env::var("MM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second initialization only fails if a pool already exists, which is harmless here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = run_suite(&cfg)?;
    match &cfg.out {
        Some(path) => write_outputs(&cfg, &out, path)?,
        None => {
            let body = match cfg.format {
                Format::Csv => to_csv(&out.rows),
                Format::Json => to_json(&out.rows)?,
            };
            write_fields(&cfg, &out)?;
            print!("{body}");
        }
    }
    for r in out.rows.iter().filter(|r| !r.pass) {
        eprintln!("FAIL {}/{} at {}: error {:e} > {:e}", r.suite, r.case, r.resolution, r.error, r.tolerance);
    }
    Ok(out.all_pass())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("mm: {e}");
            ExitCode::from(2)
        }
    }
}
