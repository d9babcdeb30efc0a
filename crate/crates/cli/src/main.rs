use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;

/// Run a dielq configuration.
///
/// Exit codes: 0 success, 2 invalid configuration or input, 3 computation
/// failure, 4 failed invariant checks.
#[derive(Debug, Parser)]
#[command(name = "dielq", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Directory for all artifacts.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Cap on worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// 0 errors only, 1 warnings, 2 progress, 3 debug.
    #[arg(long, default_value_t = 1)]
    verbosity: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbosity {
        0 => LevelFilter::Error,
        1 => LevelFilter::Warn,
        2 => LevelFilter::Info,
        3 => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match dielq::run_file(&args.config, &args.out_dir, args.threads) {
        Ok(summary) => {
            for a in &summary.artifacts {
                log::info!("wrote {}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dielq: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
