//! Command-line toolkit: worst-case certification, performance-problem
//! solves, fixed-step method synthesis, and the bundled experiments.

mod experiments;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use ssep::certificates::{nonsmooth_certificate, smooth_certificate};
use ssep::classes::ClassSpec;
use ssep::pep::build_gfom_pep;
use ssep::runners::{run_method, MethodSpec, OracleSpec};
use ssep::sdp::{
    extract_certificate, solve, verify_certificate, SolveStatus, SolverOptions,
};
use ssep::synthesis::{
    factorize, synthesize_steps, to_canonical, CanonicalForm, FactoredForm, StepCoefficients,
};

#[derive(Parser)]
#[command(
    name = "ssep",
    about = "Performance estimation and fixed-step method synthesis for first-order convex minimization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print and check the closed-form worst-case certificate for a class.
    Certify(CertifyArgs),
    /// Solve the greedy-method performance problem and report its value.
    SolvePep(SolvePepArgs),
    /// Solve, extract the dual certificate, and emit a fixed-step method.
    Synthesize(SynthesizeArgs),
    /// Factor a canonical step-size table into two-momentum coefficients.
    Factorize(FactorizeArgs),
    /// Run a method against a problem description and export the trajectory.
    Run(RunArgs),
    /// Reproduce the N = 10 synthesis table across condition numbers.
    Table1(experiments::Table1Args),
    /// Reproduce the per-iteration worst-case comparison data.
    Figure1(experiments::Figure1Args),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassKind {
    Smooth,
    Nonsmooth,
}

#[derive(Args, Clone)]
struct ClassArgs {
    /// Function class.
    #[arg(long, value_enum)]
    class: ClassKind,
    /// Strong convexity parameter (smooth class).
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Smoothness constant L (smooth class).
    #[arg(long = "L", default_value_t = 1.0)]
    smoothness: f64,
    /// Subgradient norm bound M (nonsmooth class).
    #[arg(long = "M", default_value_t = 1.0)]
    bound: f64,
    /// Initial distance bound R.
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
}

impl ClassArgs {
    fn class(&self) -> ClassSpec<f64> {
        match self.class {
            ClassKind::Smooth => ClassSpec::smooth(self.mu, self.smoothness),
            ClassKind::Nonsmooth => ClassSpec::nonsmooth(self.bound),
        }
    }

    /// Class normalized to unit primary parameter (L = 1 or M = 1), for
    /// solving at reference scale.
    fn normalized_class(&self) -> ClassSpec<f64> {
        match self.class {
            ClassKind::Smooth => ClassSpec::smooth(self.mu / self.smoothness, 1.0),
            ClassKind::Nonsmooth => ClassSpec::nonsmooth(1.0),
        }
    }

    /// Bound multiplier from the normalized (unit-parameter, unit-radius)
    /// problem to the requested one.
    fn omega_scale(&self) -> f64 {
        match self.class {
            ClassKind::Smooth => self.smoothness * self.radius * self.radius,
            ClassKind::Nonsmooth => self.bound * self.radius,
        }
    }

    /// Step-size multiplier from normalized to requested units.
    fn step_scale(&self) -> f64 {
        match self.class {
            ClassKind::Smooth => 1.0 / self.smoothness,
            ClassKind::Nonsmooth => self.radius / self.bound,
        }
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-9)]
    gap_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    feas_tol: f64,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions<f64> {
        SolverOptions {
            gap_tol: self.gap_tol,
            feas_tol: self.feas_tol,
            ..SolverOptions::default()
        }
    }
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    class: ClassArgs,
    #[arg(long = "N")]
    n: usize,
    /// Feasibility tolerance for the verification report.
    #[arg(long, default_value_t = 1e-9)]
    feas_tol: f64,
    /// Emit the certificate as JSON instead of the summary line.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolvePepArgs {
    #[command(flatten)]
    class: ClassArgs,
    #[arg(long = "N")]
    n: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    class: ClassArgs,
    #[arg(long = "N")]
    n: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FactorizeArgs {
    /// Canonical step-size table: output of `synthesize`, or a bare table.
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "L", default_value_t = 1.0)]
    smoothness: f64,
    /// Emit the factored form as JSON instead of coefficient CSV.
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// Coefficient CSV output (the default).
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodKind {
    Gfom,
    Subgradient,
    SubgradientLs,
    Ogm,
    OgmLs,
    Um,
    Fgm,
    Canonical,
    Factored,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    method: MethodKind,
    /// Problem description JSON (quadratic, abs, nesterov_max,
    /// polyhedral_max).
    #[arg(long)]
    problem: PathBuf,
    #[arg(long = "N")]
    n: usize,
    /// Start point as comma-separated numbers; defaults to the origin.
    #[arg(long)]
    x0: Option<String>,
    /// Steps file for canonical/factored methods (output of `synthesize` or
    /// `factorize`).
    #[arg(long)]
    steps: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long = "L", default_value_t = 1.0)]
    smoothness: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    bound: f64,
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Output schema of `synthesize`: the certificate's bound together with the
/// aggregation weights and the eliminated step-size table.
#[derive(Serialize, Deserialize)]
struct SynthesisFile {
    class: ClassSpec<f64>,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "R")]
    radius: f64,
    omega: f64,
    steps: StepCoefficients<f64>,
    h: CanonicalForm<f64>,
}

pub(crate) struct CliError {
    stage: String,
    message: String,
}

impl CliError {
    pub(crate) fn new(stage: &str, message: impl ToString) -> Self {
        CliError {
            stage: stage.to_string(),
            message: message.to_string(),
        }
    }
}

type CliResult = Result<(), CliError>;

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify(args) => certify(args),
        Command::SolvePep(args) => solve_pep(args),
        Command::Synthesize(args) => synthesize(args),
        Command::Factorize(args) => factorize_cmd(args),
        Command::Run(args) => run_cmd(args),
        Command::Table1(args) => experiments::table1(args),
        Command::Figure1(args) => experiments::figure1(args),
    };
    if let Err(e) = result {
        eprintln!(
            "{}",
            serde_json::json!({ "stage": e.stage, "error": e.message })
        );
        std::process::exit(1);
    }
}

pub(crate) fn emit(out: &Option<PathBuf>, content: &str) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::new("write-output", format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

/// Six significant digits, scientific.
pub(crate) fn fmt6(v: f64) -> String {
    format!("{v:.5e}")
}

fn certify(args: CertifyArgs) -> CliResult {
    let stage = "certify";
    let cert = match args.class.class {
        ClassKind::Nonsmooth => {
            nonsmooth_certificate(args.class.bound, args.class.radius, args.n)
                .map_err(|e| CliError::new(stage, e))?
        }
        ClassKind::Smooth => {
            if args.class.mu != 0.0 {
                return Err(CliError::new(
                    stage,
                    "no closed-form certificate exists for mu > 0; use `synthesize`",
                ));
            }
            smooth_certificate(args.class.smoothness, args.class.radius, args.n)
                .map_err(|e| CliError::new(stage, e))?
        }
    };
    let problem = build_gfom_pep(&args.class.class(), args.n, args.class.radius)
        .map_err(|e| CliError::new(stage, e))?;
    let report =
        verify_certificate(&problem, &cert, args.feas_tol).map_err(|e| CliError::new(stage, e))?;
    let mut text = String::new();
    if args.json {
        let mut value = serde_json::to_value(&cert).map_err(|e| CliError::new(stage, e))?;
        value["verification"] = serde_json::json!({
            "psd_min_eig": report.psd_min_eig,
            "equality_residual": report.equality_residual,
            "sign_violations": report.sign_violations,
            "feasible": report.feasible(args.feas_tol),
        });
        writeln!(text, "{}", serde_json::to_string_pretty(&value).unwrap()).unwrap();
    } else {
        writeln!(text, "omega = {}", fmt6(cert.omega)).unwrap();
        writeln!(
            text,
            "psd_min_eig = {}  equality_residual = {}",
            fmt6(report.psd_min_eig),
            fmt6(report.equality_residual)
        )
        .unwrap();
    }
    emit(&args.out, &text)?;
    if report.feasible(args.feas_tol) {
        Ok(())
    } else {
        Err(CliError::new(
            stage,
            format!(
                "certificate failed verification: min eigenvalue {}, equality residual {}",
                report.psd_min_eig, report.equality_residual
            ),
        ))
    }
}

/// Normalized greedy-method solve; the caller rescales outputs.
pub(crate) fn solve_normalized_gfom(
    class: &ClassSpec<f64>,
    n: usize,
    opts: &SolverOptions<f64>,
    stage: &str,
) -> Result<(ssep::SdpProblem64, ssep::SdpSolution64), CliError> {
    let problem = build_gfom_pep(class, n, 1.0).map_err(|e| CliError::new(stage, e))?;
    let sol = solve(&problem, opts);
    if sol.status != SolveStatus::Optimal {
        return Err(CliError::new(
            stage,
            format!(
                "solver returned {:?} (gap {:.2e}, primal residual {:.2e}, dual residual {:.2e})",
                sol.status, sol.relative_gap, sol.primal_residual, sol.dual_residual
            ),
        ));
    }
    Ok((problem, sol))
}

fn solve_pep(args: SolvePepArgs) -> CliResult {
    let stage = "solve-pep";
    args.class
        .class()
        .validate()
        .map_err(|e| CliError::new(stage, e))?;
    let (_, sol) =
        solve_normalized_gfom(&args.class.normalized_class(), args.n, &args.solver.options(), stage)?;
    let omega = sol.primal_objective * args.class.omega_scale();
    let mut text = String::new();
    if args.json {
        writeln!(
            text,
            "{}",
            serde_json::json!({
                "omega": omega,
                "normalized_value": sol.primal_objective,
                "status": sol.status,
                "iterations": sol.iterations,
                "relative_gap": sol.relative_gap,
            })
        )
        .unwrap();
    } else {
        writeln!(text, "omega = {}", fmt6(omega)).unwrap();
    }
    emit(&args.out, &text)
}

fn synthesize(args: SynthesizeArgs) -> CliResult {
    let stage = "synthesize";
    args.class
        .class()
        .validate()
        .map_err(|e| CliError::new(stage, e))?;
    let (problem, sol) =
        solve_normalized_gfom(&args.class.normalized_class(), args.n, &args.solver.options(), stage)?;
    let cert = extract_certificate(&problem, &sol).map_err(|e| CliError::new(stage, e))?;
    let steps = synthesize_steps(&cert).map_err(|e| CliError::new(stage, e))?;
    let h = to_canonical(&steps);

    // Rescale from the unit-parameter problem to the requested one: the
    // aggregation diagonals are scale-free, the gradient weights carry the
    // step-size units.
    let scale = args.class.step_scale();
    let mut beta = std::collections::BTreeMap::new();
    let mut gamma = std::collections::BTreeMap::new();
    for i in 1..=args.n {
        for j in 0..i {
            let v = steps.beta(i, j);
            if v != 0.0 {
                beta.insert((i, j), v * scale);
            }
        }
        for j in 1..=i {
            let v = steps.gamma(i, j);
            if v != 0.0 {
                gamma.insert((i, j), v);
            }
        }
    }
    let steps_scaled =
        StepCoefficients::new(args.n, beta, gamma).map_err(|e| CliError::new(stage, e))?;
    let h_scaled = CanonicalForm::new(
        h.rows()
            .iter()
            .map(|row| row.iter().map(|v| v * scale).collect())
            .collect(),
    )
    .map_err(|e| CliError::new(stage, e))?;

    let file = SynthesisFile {
        class: args.class.class(),
        n: args.n,
        radius: args.class.radius,
        omega: sol.primal_objective * args.class.omega_scale(),
        steps: steps_scaled,
        h: h_scaled,
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| CliError::new(stage, e))?;
    emit(&args.out, &format!("{text}\n"))
}

fn read_canonical(path: &PathBuf, stage: &str) -> Result<CanonicalForm<f64>, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(stage, format!("{}: {e}", path.display())))?;
    if let Ok(file) = serde_json::from_str::<SynthesisFile>(&raw) {
        return Ok(file.h);
    }
    serde_json::from_str::<CanonicalForm<f64>>(&raw).map_err(|e| {
        CliError::new(
            stage,
            format!("{} is neither a synthesis file nor a step-size table: {e}", path.display()),
        )
    })
}

fn factorize_cmd(args: FactorizeArgs) -> CliResult {
    let stage = "factorize";
    let h = read_canonical(&args.input, stage)?;
    let factored = factorize(&h, args.smoothness).map_err(|e| CliError::new(stage, e))?;
    let text = if args.json {
        format!(
            "{}\n",
            serde_json::to_string_pretty(&factored).map_err(|e| CliError::new(stage, e))?
        )
    } else {
        factored.coefficients_csv()
    };
    emit(&args.out, &text)
}

fn run_cmd(args: RunArgs) -> CliResult {
    let stage = "run";
    let raw = std::fs::read_to_string(&args.problem)
        .map_err(|e| CliError::new(stage, format!("{}: {e}", args.problem.display())))?;
    let spec: OracleSpec<f64> =
        serde_json::from_str(&raw).map_err(|e| CliError::new(stage, e))?;
    let oracle = spec.build().map_err(|e| CliError::new(stage, e))?;
    let x0 = match &args.x0 {
        Some(csv) => {
            let values: Result<Vec<f64>, _> =
                csv.split(',').map(|v| v.trim().parse::<f64>()).collect();
            DVector::from_vec(values.map_err(|e| CliError::new(stage, e))?)
        }
        None => DVector::zeros(oracle.dim()),
    };
    if x0.len() != oracle.dim() {
        return Err(CliError::new(
            stage,
            format!("start point has dimension {}, problem has {}", x0.len(), oracle.dim()),
        ));
    }

    let method = match args.method {
        MethodKind::Gfom => MethodSpec::Gfom,
        MethodKind::Subgradient => MethodSpec::SsepSubgradient {
            bound: args.bound,
            radius: args.radius,
            horizon: args.n,
        },
        MethodKind::SubgradientLs => MethodSpec::SsepSubgradientLs,
        MethodKind::Ogm => MethodSpec::Ogm {
            smoothness: args.smoothness,
            horizon: args.n,
        },
        MethodKind::OgmLs => MethodSpec::OgmLs { horizon: args.n },
        MethodKind::Um => MethodSpec::Um { horizon: args.n },
        MethodKind::Fgm => MethodSpec::Fgm {
            mu: args.mu,
            smoothness: args.smoothness,
        },
        MethodKind::Canonical => {
            let path = args.steps.as_ref().ok_or_else(|| {
                CliError::new(stage, "`--steps` is required for canonical methods")
            })?;
            MethodSpec::Canonical {
                steps: read_canonical(path, stage)?,
            }
        }
        MethodKind::Factored => {
            let path = args.steps.as_ref().ok_or_else(|| {
                CliError::new(stage, "`--steps` is required for factored methods")
            })?;
            let raw = std::fs::read_to_string(path)
                .map_err(|e| CliError::new(stage, format!("{}: {e}", path.display())))?;
            let form: FactoredForm<f64> = serde_json::from_str(&raw)
                .or_else(|_| {
                    // Accept a synthesis file by factorizing its table.
                    serde_json::from_str::<SynthesisFile>(&raw)
                        .map_err(|e| CliError::new(stage, e))
                        .and_then(|f| {
                            factorize(&f.h, args.smoothness).map_err(|e| CliError::new(stage, e))
                        })
                })?;
            MethodSpec::Factored {
                form,
                smoothness: args.smoothness,
            }
        }
    };

    let trajectory =
        run_method(&method, oracle.as_ref(), &x0, args.n).map_err(|e| CliError::new(stage, e))?;
    emit(&args.out, &trajectory.to_csv(oracle.optimal_value()))
}
