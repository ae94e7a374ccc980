//! Configuration-driven front end. Exit codes: 0 when every check passed,
//! 1 when a check failed, 2 for configuration or I/O problems.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use heatflow::config::{parse_config, Mode};
use heatflow::runner::run_experiment;
use heatflow::verify;

#[derive(Parser)]
#[command(
    name = "heatflow",
    about = "Heat-flow monotonicity experiments and verification suites"
)]
struct Cli {
    /// qcurve, qprime, residual, weighted, lemma, hausdorff_young, limits,
    /// constants or verify
    mode: String,

    /// Experiment configuration file (line-oriented key = value)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV reports
    #[arg(long, default_value = ".")]
    out: PathBuf,

    /// Smaller grids, tolerances relaxed x100
    #[arg(long)]
    coarse: bool,

    /// With the verify mode: print criterion names without running
    #[arg(long)]
    list: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(mode) = Mode::parse(&cli.mode) else {
        eprintln!("unknown mode `{}`", cli.mode);
        return ExitCode::from(2);
    };

    if cli.list {
        if mode != Mode::Verify {
            eprintln!("--list only applies to the verify mode");
            return ExitCode::from(2);
        }
        for name in verify::criterion_names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }

    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None if mode == Mode::Verify => "mode = verify\nname = acceptance\n".to_string(),
        None => {
            eprintln!("mode `{}` needs --config", cli.mode);
            return ExitCode::from(2);
        }
    };

    let mut spec = match parse_config(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    // The positional mode wins, so one config file can serve several modes.
    spec.mode = mode;

    match run_experiment(&spec, &cli.out, cli.coarse) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
