use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qfisher::estimation::{compare_tomography, optimal_measurement_with};
use qfisher::io::{
    load_json, trajectory_records, write_trajectory_csv, ChannelSpec, ObservableSpec, OptimalReport, Scenario,
    StateSpec, TomographyReport, Tolerances, TrajectoryMetadata,
};
use qfisher::spin_boson::trajectory;
use qfisher::validation::run_validation;
use qfisher::{Error, GeneratorBasis, StructureConstants};

const EXIT_IO: u8 = 1;
const EXIT_SPEC: u8 = 3;
const EXIT_SINGULAR: u8 = 4;
const EXIT_ACCURACY: u8 = 5;
const EXIT_VALIDATION: u8 = 6;
const EXIT_NUMERICAL: u8 = 7;

#[derive(Parser)]
#[command(name = "qfisher", version, about = "Optimal measurements through known quantum noise")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "QFISHER_THREADS")]
    threads: Option<usize>,

    /// Tolerance override, repeatable: injectivity, optimality, quadrature_rel.
    #[arg(long = "tol", global = true, value_name = "KEY=VALUE")]
    tol: Vec<String>,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal measurement, its Fisher information and the SLD cross-check.
    Optimal(PipelineArgs),
    /// Optimal vs qubit-tomography Fisher information.
    CompareTomography(PipelineArgs),
    /// Spin-boson trajectory of the optimal measurement direction.
    SpinBoson {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the self-check suite.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only properties whose name starts with this prefix.
        #[arg(long)]
        suite: Option<String>,
        /// Scale A by 1.01 on one side of the Cramér–Rao equality check.
        #[arg(long)]
        perturb: bool,
    },
}

#[derive(clap::Args)]
struct PipelineArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long)]
    observable: PathBuf,
    /// Input state; maximally mixed when absent.
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Lib(Error),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::SingularChannel { .. } => EXIT_SINGULAR,
        Error::QuadratureAccuracy { .. } => EXIT_ACCURACY,
        Error::OptimalityViolation(_) | Error::BoundaryState { .. } => EXIT_NUMERICAL,
        _ => EXIT_SPEC,
    }
}

fn tolerances(overrides: &[String], mut base: Tolerances) -> Result<Tolerances, Error> {
    for item in overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| Error::Spec {
            path: "--tol".into(),
            message: format!("expected KEY=VALUE, got `{item}`"),
        })?;
        let value: f64 = value.trim().parse().map_err(|_| Error::Spec {
            path: format!("--tol {key}"),
            message: format!("`{value}` is not a number"),
        })?;
        base.set(key.trim(), value)?;
    }
    Ok(base)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(bytes).map_err(Error::from),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s.into_bytes()
}

struct Pipeline {
    basis: GeneratorBasis,
    sc: StructureConstants,
    channel: qfisher::AffineChannel,
    observable: qfisher::ObservableRepr,
    state: qfisher::BlochVector,
}

fn load_pipeline(args: &PipelineArgs) -> Result<Pipeline, Error> {
    let channel_spec: ChannelSpec = load_json(&args.channel)?;
    let kraus = channel_spec.to_kraus()?;
    let basis = GeneratorBasis::new(kraus.dim())?;
    let channel = qfisher::channel::affine_repr(&kraus, &basis)?;
    let observable = load_json::<ObservableSpec>(&args.observable)?.resolve(&basis)?;
    let state = match &args.state {
        Some(p) => load_json::<StateSpec>(p)?.resolve(&basis)?,
        None => StateSpec::default().resolve(&basis)?,
    };
    let sc = StructureConstants::new(&basis);
    Ok(Pipeline {
        basis,
        sc,
        channel,
        observable,
        state,
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Optimal(args) => {
            let tol = tolerances(&cli.tol, Tolerances::default())?;
            let p = load_pipeline(&args)?;
            let opt = optimal_measurement_with(
                &p.channel,
                &p.observable,
                &p.state,
                &p.basis,
                &p.sc,
                tol.injectivity,
                tol.optimality,
            )?;
            emit(out, &to_json(&OptimalReport::new(&opt)))?;
        }
        Command::CompareTomography(args) => {
            let p = load_pipeline(&args)?;
            let cmp = compare_tomography(&p.channel, &p.observable, &p.state, &p.basis, &p.sc)?;
            emit(out, &to_json(&TomographyReport::from(cmp)))?;
        }
        Command::SpinBoson { scenario, format } => {
            let spec: Scenario = load_json(&scenario)?;
            let mut plan = spec.plan()?;
            plan.tolerances = tolerances(&cli.tol, plan.tolerances)?;
            let traj = trajectory(
                &plan.grid,
                plan.theta_obs,
                &plan.rho0,
                plan.pulses.as_ref(),
                &plan.bath,
                plan.tolerances.trajectory_options(),
            )?;
            let meta = TrajectoryMetadata::new(&spec, &plan);
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_trajectory_csv(&traj, &mut buf)?;
                    emit(out, &buf)?;
                    if let Some(path) = out {
                        let mut sidecar = path.as_os_str().to_owned();
                        sidecar.push(".meta.json");
                        emit(Some(Path::new(&sidecar)), &to_json(&meta))?;
                    }
                }
                Format::Json => {
                    let doc = serde_json::json!({
                        "metadata": meta,
                        "records": trajectory_records(&traj),
                    });
                    emit(out, &to_json(&doc))?;
                }
            }
        }
        Command::Validate { seed, suite, perturb } => {
            let report = run_validation(seed, perturb, suite.as_deref());
            if report.properties.is_empty() {
                return Err(Error::Spec {
                    path: "--suite".into(),
                    message: format!(
                        "no property matches `{}` (known: {})",
                        suite.unwrap_or_default(),
                        qfisher::validation::property_names().join(", ")
                    ),
                }
                .into());
            }
            emit(out, &to_json(&report))?;
            if !report.passed {
                return Err(Failure::Validation(report.failures().join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_SPEC);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not start thread pool: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Validation(names)) => {
            eprintln!("error: validation failed: {names}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
