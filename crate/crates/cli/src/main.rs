//! Experiment driver: config -> sampling -> optimization -> metrics, emitting
//! plot-ready CSVs, plus an in-process geometry/gradient selftest.

mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use covertan::experiment::{run_experiment, ExperimentKind, ExperimentSpec};
use covertan::optimizer::Variant;
use covertan::Error;

#[derive(Parser)]
#[command(
    name = "covertan",
    about = "Artificial-noise basis design for multi-jammer covert communication",
    version
)]
struct Cli {
    /// key=value experiment file (a previous run's manifest works)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// output directory
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,

    /// master seed (overrides the config's seed when given)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// worker threads for sweep points (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// solver variant
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Option<Variant>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-iteration traces for several basis ranks at fixed n
    Convergence,
    /// Summary metrics versus the jammer count n
    SweepN,
    /// Summary metrics versus the jamming power P_j
    SweepPj,
    /// Run the manifold and gradient property suites and print pass/fail
    GeometrySelftest,
}

fn parse_variant(s: &str) -> Result<Variant, Error> {
    s.parse()
}

fn build_spec(cli: &Cli, kind: ExperimentKind) -> Result<ExperimentSpec<f64>, Error> {
    let seed = cli.seed.unwrap_or(7);
    let mut spec = match &cli.config {
        Some(path) => {
            let mut spec = covertan::experiment::load_spec::<f64>(path)?;
            spec.kind = kind;
            if let Some(s) = cli.seed {
                spec.opts.seed = s;
                spec.eval_seed = s.wrapping_add(1);
            }
            spec
        }
        None => ExperimentSpec::desk_default(kind, seed)?,
    };
    if let Some(v) = cli.variant {
        spec.opts.variant = v;
    }
    spec.validate()?;
    Ok(spec)
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Numerical(_)
        | Error::Domain(_)
        | Error::RankDeficient { .. }
        | Error::NoSolution(_)
        | Error::DegenerateData(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn run_kind(cli: &Cli, kind: ExperimentKind) -> Result<(), Error> {
    let spec = build_spec(cli, kind)?;
    let files = run_experiment(&spec, &cli.out)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", cli.out.join("manifest.txt").display());
    Ok(())
}

fn main() -> ExitCode {
    // usage problems are validation errors (exit 1); help/version exit 0
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: failed to set thread count: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Convergence => run_kind(&cli, ExperimentKind::Convergence),
        Command::SweepN => run_kind(&cli, ExperimentKind::SweepN),
        Command::SweepPj => run_kind(&cli, ExperimentKind::SweepPj),
        Command::GeometrySelftest => {
            return if selftest::run_all(cli.seed.unwrap_or(7)) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            };
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
