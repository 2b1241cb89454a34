use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use ddplace::bench::{
    emit_results, run_montecarlo, run_reactor, run_vary_t, Experiment, ExperimentConfig,
};
use ddplace::io;
use ddplace::signals::is_persistently_exciting;
use ddplace::{
    assign_eigenstructure, extract_data_matrices, identify_least_squares, place_poles_with,
    simulate, Error, PlaceOptions, SimulationConfig, Tolerance,
};
use nalgebra::DVector;

/// Pole placement and eigenstructure assignment from input/state data.
#[derive(Debug, Parser)]
#[command(name = "ddplace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check persistency of excitation of the recorded input.
    PeCheck {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        order: usize,
    },
    /// Compute a feedback gain from data.
    Place {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        poles: PathBuf,
        /// Eigenvector matrix; switches to eigenstructure assignment.
        #[arg(long)]
        eigvecs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Seed for the random nullspace combinations.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate a system under unit-variance Gaussian input from rest.
    Simulate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long = "T")]
        horizon: usize,
        /// Process noise variance.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark and write records.csv, timings.csv and summary.json.
    Bench {
        experiment: BenchKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; defaults to `output_path` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Least-squares model identification.
    Identify {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BenchKind {
    Reactor,
    VaryT,
    Montecarlo,
}

impl From<BenchKind> for Experiment {
    fn from(kind: BenchKind) -> Self {
        match kind {
            BenchKind::Reactor => Experiment::Reactor,
            BenchKind::VaryT => Experiment::VaryT,
            BenchKind::Montecarlo => Experiment::Montecarlo,
        }
    }
}

fn pe_check(trajectory: &Path, order: usize) -> ddplace::Result<ExitCode> {
    let traj = io::read_trajectory(trajectory)?;
    let report = is_persistently_exciting(traj.inputs(), order, &Tolerance::default())?;
    println!("order: {}", report.order);
    println!("hankel columns: {}", report.columns);
    println!("rank: {} (required {})", report.rank, report.required_rank);
    if !report.enough_columns {
        println!("too few samples: need at least {} Hankel columns", report.required_rank);
    }
    println!("persistently exciting: {}", report.persistently_exciting);
    Ok(if report.persistently_exciting {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn place(
    trajectory: &Path,
    poles: &Path,
    eigvecs: Option<&Path>,
    out: &Path,
    seed: u64,
) -> ddplace::Result<()> {
    let dm = extract_data_matrices(&io::read_trajectory(trajectory)?)?;
    let spec = io::read_pole_spec(poles, eigvecs)?;
    let tol = Tolerance::default();
    let result = if spec.eigenvectors().is_some() {
        assign_eigenstructure(&dm, &spec, &tol)?
    } else {
        let opts = PlaceOptions {
            seed,
            ..PlaceOptions::default()
        };
        place_poles_with(&dm, &spec, &tol, &opts)?
    };
    io::write_gain_result(out, &result)
}

fn run_simulation(system: &Path, horizon: usize, noise: f64, seed: u64, out: &Path) -> ddplace::Result<()> {
    let sys = io::read_system(system)?;
    let cfg = SimulationConfig {
        horizon,
        x0: DVector::zeros(sys.state_dim()),
        noise_variance: noise,
        ..SimulationConfig::gaussian(sys.state_dim(), horizon, seed)
    };
    io::write_trajectory(out, &simulate(&sys, &cfg)?)
}

fn bench(kind: BenchKind, config: Option<&Path>, out: Option<&Path>) -> ddplace::Result<()> {
    let mut cfg = match config {
        Some(path) => serde_json::from_str::<ExperimentConfig>(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = kind.into();
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_path.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::InvalidArgument("no output directory: pass --out or set output_path".into()))?;
    let records = match cfg.experiment {
        Experiment::Reactor => {
            let report = run_reactor(&cfg)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("reactor.json"), report.to_json()?)?;
            vec![report.to_record()]
        }
        Experiment::VaryT => run_vary_t(&cfg)?,
        Experiment::Montecarlo => run_montecarlo(&cfg)?,
    };
    emit_results(&records, &cfg, &dir)?;
    println!("wrote {} records to {}", records.len(), dir.display());
    Ok(())
}

fn identify(trajectory: &Path, out: &Path) -> ddplace::Result<()> {
    let dm = extract_data_matrices(&io::read_trajectory(trajectory)?)?;
    let model = identify_least_squares(&dm, &Tolerance::default())?;
    io::write_identified_model(out, &model)
}

fn run(cli: Cli) -> ddplace::Result<ExitCode> {
    match cli.command {
        Command::PeCheck { trajectory, order } => return pe_check(&trajectory, order),
        Command::Place {
            trajectory,
            poles,
            eigvecs,
            out,
            seed,
        } => place(&trajectory, &poles, eigvecs.as_deref(), &out, seed)?,
        Command::Simulate {
            system,
            horizon,
            noise,
            seed,
            out,
        } => run_simulation(&system, horizon, noise, seed, &out)?,
        Command::Bench {
            experiment,
            config,
            out,
        } => bench(experiment, config.as_deref(), out.as_deref())?,
        Command::Identify { trajectory, out } => identify(&trajectory, &out)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
