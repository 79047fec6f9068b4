use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use axicav::analytic;
use axicav::studies::{self, StudyConfig, StudyKind};
use axicav::Error;

#[derive(Parser)]
#[command(name = "axicav", version, about = "Eigenmodes of axisymmetric cavities, one azimuthal mode at a time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error of a target mode over a mesh ladder, with fitted slope
    Converge(StudyArgs),
    /// Count computed eigenvalues without an analytic counterpart
    Spurious(StudyArgs),
    /// Target mode error versus quadrature degree
    Quadsweep(StudyArgs),
    /// Convergence of TC(alpha, beta) for several parameter pairs
    Alphabeta(StudyArgs),
    /// Power of r of the in-plane unknown near the axis
    Regularity(StudyArgs),
    /// Closed-form pillbox spectrum as CSV
    Analytic {
        #[arg(long = "R", default_value_t = 1.0)]
        radius: f64,
        #[arg(long = "L", default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        n: i32,
        #[arg(long)]
        lmax: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `output` key of the config
    #[arg(long)]
    output: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidOrder { .. }
        | Error::TcViolation { .. }
        | Error::Constraint(_) => 2,
        _ => 3,
    }
}

fn run_study(kind: StudyKind, args: StudyArgs) -> ExitCode {
    let mut cfg = match StudyConfig::load(&args.config, Some(kind)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if args.output.is_some() {
        cfg.output = args.output;
    }
    let outcome = match studies::run_study(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{kind} failed: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &cfg.output {
        Some(path) => studies::write_csv(&outcome.rows, path),
        None => studies::write_csv_to(&outcome.rows, std::io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("cannot write results: {e}");
        return ExitCode::from(3);
    }
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    for (label, s) in &outcome.slopes {
        eprintln!("{label}: slope {s:.4}");
    }
    let failures = outcome.threshold_failures(&cfg);
    for f in &failures {
        eprintln!("threshold: {f}");
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Converge(a) => run_study(StudyKind::Converge, a),
        Command::Spurious(a) => run_study(StudyKind::Spurious, a),
        Command::Quadsweep(a) => run_study(StudyKind::QuadSweep, a),
        Command::Alphabeta(a) => run_study(StudyKind::AlphaBeta, a),
        Command::Regularity(a) => run_study(StudyKind::Regularity, a),
        Command::Analytic { radius, length, n, lmax, output } => {
            let modes = match analytic::pillbox_spectrum(radius, length, n, lmax) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let res = match output {
                Some(p) => {
                    std::fs::File::create(&p).map_err(Error::from).and_then(|f| analytic::write_table(&modes, f))
                }
                None => analytic::write_table(&modes, std::io::stdout().lock()),
            };
            match res {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(3)
                }
            }
        }
    }
}
