use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rimu_core::nalgebra::{Matrix3, Vector3};
use rimu_core::{
    build_reference, evaluate_fom, multi_start, solve, verify_covariance, ConvergenceTrace,
    FomKind, PlatonicSolid, ReferenceKind, Solution,
};
use serde::Serialize;

use crate::files::{
    configuration_from_rows, covariance_from_rows, noise_from_matrix, read_json, read_matrix,
    rows_of, to_json, FomChoice, ProblemFile, SolutionFile, DEFAULT_SEED, TOOL_VERSION,
};
use crate::{CliError, Status};

pub const TRACE_HEADER: &str = "iter,objective,inner_sweeps,optimality_defect";

#[derive(Debug, Parser)]
#[command(
    name = "rimu-opt",
    version,
    about = "Optimal sensing-axis configurations for redundant inertial sensors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an A- or D-optimal design problem.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        /// Solution file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration convergence trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Overrides the problem file's criterion.
        #[arg(long, value_enum)]
        fom: Option<FomArg>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Evaluate figures of merit of a configuration.
    Eval {
        /// Configuration: an m×3 array or a file with an `H` field.
        h: PathBuf,
        /// Noise covariance: an m×m array or a file with an `R` field.
        r: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        fom: EvalFom,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a closed-form reference geometry.
    Reference {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Number of sensors, required for the cone families.
        #[arg(long)]
        m: Option<usize>,
        /// Rotation of the cone about its axis, radians.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phase: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the empirical estimation error covariance with its prediction.
    Montecarlo {
        h: PathBuf,
        r: PathBuf,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// True state `x,y,z`; zero when omitted.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        truth: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FomArg {
    A,
    D,
}

impl From<FomArg> for FomChoice {
    fn from(arg: FomArg) -> Self {
        match arg {
            FomArg::A => FomChoice::A,
            FomArg::D => FomChoice::D,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalFom {
    All,
    A,
    D,
    Determinant,
    Gdop,
    #[value(name = "max_eig")]
    MaxEig,
    #[value(name = "ellipsoid_volume")]
    EllipsoidVolume,
}

impl EvalFom {
    fn kinds(self) -> Vec<FomKind> {
        match self {
            EvalFom::All => FomKind::ALL.to_vec(),
            EvalFom::A => vec![FomKind::ATrace],
            EvalFom::D => vec![FomKind::DLogDet],
            EvalFom::Determinant => vec![FomKind::Determinant],
            EvalFom::Gdop => vec![FomKind::Gdop],
            EvalFom::MaxEig => vec![FomKind::MaxEig],
            EvalFom::EllipsoidVolume => vec![FomKind::EllipsoidVolume(1.0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Triad,
    Class1,
    Class2,
    Cube,
    Octahedron,
    Dodecahedron,
    Icosahedron,
}

impl KindArg {
    fn name(self) -> &'static str {
        match self {
            KindArg::Triad => "triad",
            KindArg::Class1 => "class1",
            KindArg::Class2 => "class2",
            KindArg::Cube => "cube",
            KindArg::Octahedron => "octahedron",
            KindArg::Dodecahedron => "dodecahedron",
            KindArg::Icosahedron => "icosahedron",
        }
    }
}

pub fn run(cli: Cli) -> Result<Status, CliError> {
    match cli.command {
        Command::Solve {
            problem,
            out,
            trace,
            fom,
            seed,
            restarts,
        } => cmd_solve(
            &problem,
            out.as_deref(),
            trace.as_deref(),
            fom,
            seed,
            restarts,
        ),
        Command::Eval { h, r, fom, out } => cmd_eval(&h, &r, fom, out.as_deref()),
        Command::Reference {
            kind,
            m,
            phase,
            out,
        } => cmd_reference(kind, m, phase, out.as_deref()),
        Command::Montecarlo {
            h,
            r,
            samples,
            seed,
            truth,
            out,
        } => cmd_montecarlo(&h, &r, samples, seed, truth, out.as_deref()),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn trace_csv(trace: &ConvergenceTrace) -> String {
    let mut csv = String::from(TRACE_HEADER);
    csv.push('\n');
    for r in trace.records() {
        writeln!(
            csv,
            "{},{},{},{}",
            r.iteration, r.objective, r.inner_sweeps, r.optimality_defect
        )
        .expect("writing to a String");
    }
    csv
}

pub fn solution_file(solution: &Solution) -> SolutionFile {
    SolutionFile {
        h: rows_of(&solution.config),
        objective: Some(solution.objective),
        fom: Some(solution.criterion.fom().name().to_owned()),
        iterations: Some(solution.outer_iters),
        converged: Some(solution.converged),
        optimality_defect: solution.config.optimality_defect(),
        tool_version: TOOL_VERSION.to_owned(),
        seed: solution.seed,
        kind: None,
    }
}

fn cmd_solve(
    problem_path: &Path,
    out: Option<&Path>,
    trace: Option<&Path>,
    fom: Option<FomArg>,
    seed: Option<u64>,
    restarts: Option<usize>,
) -> Result<Status, CliError> {
    let mut problem: ProblemFile = read_json(problem_path)?;
    if let Some(fom) = fom {
        problem.fom = fom.into();
    }
    let noise = problem.noise()?;
    let initial = problem.initial()?;
    let mut settings = problem.settings();
    if let Some(seed) = seed {
        settings.seed = seed;
    }
    if let Some(restarts) = restarts {
        settings.restarts = restarts;
    }
    settings
        .validate()
        .map_err(|e| CliError::input(format!("settings: {e}")))?;
    if initial.is_some() && settings.restarts > 1 {
        return Err(CliError::input("H0 cannot be combined with restarts > 1"));
    }

    let solution = if settings.restarts > 1 {
        let result = multi_start(&noise, &settings).map_err(solver_error)?;
        info!(
            "{} restarts, objective spread {:e}",
            settings.restarts, result.spread
        );
        result.best
    } else {
        solve(&noise, &settings, initial).map_err(solver_error)?
    };

    emit(&to_json(&solution_file(&solution)), out)?;
    if let Some(path) = trace {
        fs::write(path, trace_csv(&solution.trace))
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    if solution.converged {
        Ok(Status::Success)
    } else {
        warn!(
            "stopped after {} outer iterations without converging",
            solution.outer_iters
        );
        eprintln!(
            "rimu-opt: not converged after {} outer iterations",
            solution.outer_iters
        );
        Ok(Status::NotConverged)
    }
}

fn solver_error(e: rimu_core::Error) -> CliError {
    CliError::input(format!("solver failed: {e}"))
}

fn load_pair(
    h: &Path,
    r: &Path,
) -> Result<(rimu_core::SensorConfiguration, rimu_core::NoiseModel), CliError> {
    let config = configuration_from_rows(&read_matrix(h, "H")?, "H")?;
    let noise = noise_from_matrix(covariance_from_rows(&read_matrix(r, "R")?)?)?;
    if config.m() != noise.m() {
        return Err(CliError::input(format!(
            "dimension mismatch: H has {} rows, R is {}×{}",
            config.m(),
            noise.m(),
            noise.m()
        )));
    }
    Ok((config, noise))
}

fn cmd_eval(h: &Path, r: &Path, fom: EvalFom, out: Option<&Path>) -> Result<Status, CliError> {
    let (config, noise) = load_pair(h, r)?;
    let mut record = serde_json::Map::new();
    for kind in fom.kinds() {
        let value =
            evaluate_fom(&config, &noise, kind).map_err(|e| CliError::input(e.to_string()))?;
        // Adding +0 turns a -0 result into 0.
        record.insert(kind.name().to_owned(), (value + 0.0).into());
    }
    record.insert(
        "optimality_defect".to_owned(),
        config.optimality_defect().into(),
    );
    emit(&to_json(&record), out)?;
    Ok(Status::Success)
}

fn cmd_reference(
    kind: KindArg,
    m: Option<usize>,
    phase: f64,
    out: Option<&Path>,
) -> Result<Status, CliError> {
    let need_m =
        || m.ok_or_else(|| CliError::input(format!("--m is required for --kind {}", kind.name())));
    let reference = match kind {
        KindArg::Triad => ReferenceKind::OrthogonalTriad,
        KindArg::Class1 => ReferenceKind::ClassOneCone {
            m: need_m()?,
            phase,
        },
        KindArg::Class2 => ReferenceKind::ClassTwoCone {
            m: need_m()?,
            phase,
        },
        KindArg::Cube => ReferenceKind::PlatonicAxes(PlatonicSolid::Cube),
        KindArg::Octahedron => ReferenceKind::PlatonicAxes(PlatonicSolid::Octahedron),
        KindArg::Dodecahedron => ReferenceKind::PlatonicAxes(PlatonicSolid::Dodecahedron),
        KindArg::Icosahedron => ReferenceKind::PlatonicAxes(PlatonicSolid::Icosahedron),
    };
    let config = build_reference(reference).map_err(|e| CliError::input(e.to_string()))?;
    let file = SolutionFile {
        h: rows_of(&config),
        objective: None,
        fom: None,
        iterations: None,
        converged: None,
        optimality_defect: config.optimality_defect(),
        tool_version: TOOL_VERSION.to_owned(),
        seed: None,
        kind: Some(kind.name().to_owned()),
    };
    emit(&to_json(&file), out)?;
    Ok(Status::Success)
}

#[derive(Debug, Serialize)]
struct McRecord {
    samples: usize,
    seed: u64,
    relative_frobenius_error: f64,
    empirical_cov: Vec<Vec<f64>>,
    predicted_cov: Vec<Vec<f64>>,
    empirical_mean_error: Vec<f64>,
}

fn rows3(m: &Matrix3<f64>) -> Vec<Vec<f64>> {
    (0..3)
        .map(|i| (0..3).map(|j| m[(i, j)]).collect())
        .collect()
}

fn cmd_montecarlo(
    h: &Path,
    r: &Path,
    samples: usize,
    seed: u64,
    truth: Option<Vec<f64>>,
    out: Option<&Path>,
) -> Result<Status, CliError> {
    let (config, noise) = load_pair(h, r)?;
    let truth = match truth.as_deref() {
        None => Vector3::zeros(),
        Some(&[x, y, z]) => Vector3::new(x, y, z),
        Some(t) => {
            return Err(CliError::input(format!(
                "--truth: expected 3 values, got {}",
                t.len()
            )))
        }
    };
    let report = verify_covariance(&config, &noise, &truth, samples, seed)
        .map_err(|e| CliError::input(e.to_string()))?;
    let record = McRecord {
        samples: report.samples,
        seed: report.seed,
        relative_frobenius_error: report.relative_frobenius_error,
        empirical_cov: rows3(&report.empirical_cov),
        predicted_cov: rows3(&report.predicted_cov),
        empirical_mean_error: report.empirical_mean_error.iter().copied().collect(),
    };
    emit(&to_json(&record), out)?;
    Ok(Status::Success)
}
