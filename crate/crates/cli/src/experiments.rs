//! The two bundled experiments: the synthesis table over condition numbers
//! and the per-iteration worst-case comparison.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use ssep::classes::ClassSpec;
use ssep::pep::build_fixed_step_pep;
use ssep::runners::fgm_canonical_steps;
use ssep::sdp::{extract_certificate, solve, SolveStatus, SolverOptions};
use ssep::synthesis::{expand, factorize, synthesize_steps, to_canonical, CanonicalForm};

use crate::{emit, fmt6, solve_normalized_gfom, CliError};

/// Parses a condition number, with `inf` meaning no strong convexity.
pub(crate) fn parse_kappa(s: &str) -> Result<f64, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 1.0 {
        Ok(v)
    } else {
        Err("condition number must exceed 1 (or be `inf`)".to_string())
    }
}

fn kappa_label(kappa: f64) -> String {
    if kappa.is_infinite() {
        "inf".to_string()
    } else {
        format!("{kappa}")
    }
}

fn class_for_kappa(kappa: f64) -> ClassSpec<f64> {
    // kappa = inf is exactly mu = 0, not a large finite surrogate.
    let mu = if kappa.is_infinite() { 0.0 } else { 1.0 / kappa };
    ClassSpec::smooth(mu, 1.0)
}

#[derive(Args)]
pub(crate) struct Table1Args {
    /// Condition numbers to process (repeatable; `inf` allowed).
    #[arg(long = "kappa", value_parser = parse_kappa, default_values_t = [f64::INFINITY, 1000.0, 100.0, 50.0])]
    kappas: Vec<f64>,
    #[arg(long = "N", default_value_t = 10)]
    n: usize,
    /// Gap tolerance for the certificate-extraction solve; momentum
    /// extraction amplifies dual noise through divisions, so this is kept
    /// tight by default.
    #[arg(long, default_value_t = 1e-10)]
    gap_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    feas_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub(crate) struct Table1Column {
    pub kappa: f64,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
    pub gfom_bound: f64,
    pub unfactored_bound: f64,
    pub factored_bound: f64,
    pub step_residual: f64,
}

/// Full synthesis pipeline for one condition number: greedy-method solve,
/// certificate extraction, elimination to step sizes, two-momentum
/// factorization, and the two validation solves.
pub(crate) fn table1_column(
    kappa: f64,
    n: usize,
    extract_opts: &SolverOptions<f64>,
) -> Result<Table1Column, CliError> {
    let label = kappa_label(kappa);
    let class = class_for_kappa(kappa);
    let (problem, sol) = solve_normalized_gfom(
        &class,
        n,
        extract_opts,
        &format!("table1.solve-gfom(kappa={label})"),
    )?;
    let cert = extract_certificate(&problem, &sol)
        .map_err(|e| CliError::new(&format!("table1.extract(kappa={label})"), e))?;
    let steps = synthesize_steps(&cert)
        .map_err(|e| CliError::new(&format!("table1.synthesize(kappa={label})"), e))?;
    let h = to_canonical(&steps);
    let factored = factorize(&h, 1.0)
        .map_err(|e| CliError::new(&format!("table1.factorize(kappa={label})"), e))?;

    let validation_opts = SolverOptions::default();
    let solve_fixed = |steps: &CanonicalForm<f64>, stage: &str| -> Result<f64, CliError> {
        let problem = build_fixed_step_pep(&class, n, 1.0, steps)
            .map_err(|e| CliError::new(stage, e))?;
        let sol = solve(&problem, &validation_opts);
        if sol.status != SolveStatus::Optimal {
            return Err(CliError::new(
                stage,
                format!("solver returned {:?} (gap {:.2e})", sol.status, sol.relative_gap),
            ));
        }
        Ok(sol.primal_objective)
    };
    let unfactored = solve_fixed(&h, &format!("table1.validate-steps(kappa={label})"))?;
    let regenerated = expand(&factored, 1.0);
    let refactored = solve_fixed(
        &regenerated,
        &format!("table1.validate-factored(kappa={label})"),
    )?;

    Ok(Table1Column {
        kappa,
        zeta: (1..=n).map(|i| factored.zeta(i)).collect(),
        eta: (1..=n).map(|i| factored.eta(i)).collect(),
        gfom_bound: sol.primal_objective,
        unfactored_bound: unfactored,
        factored_bound: refactored,
        step_residual: factored.residual(),
    })
}

pub(crate) fn table1(args: Table1Args) -> Result<(), CliError> {
    let opts = SolverOptions {
        gap_tol: args.gap_tol,
        feas_tol: args.feas_tol,
        ..SolverOptions::default()
    };
    let columns = args
        .kappas
        .iter()
        .map(|&kappa| table1_column(kappa, args.n, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = String::from("kappa,i,zeta,eta\n");
    for col in &columns {
        for i in 1..=args.n {
            writeln!(
                out,
                "{},{},{},{}",
                kappa_label(col.kappa),
                i,
                fmt6(col.zeta[i - 1]),
                fmt6(col.eta[i - 1])
            )
            .unwrap();
        }
    }
    out.push_str("kappa,quantity,value\n");
    for col in &columns {
        let label = kappa_label(col.kappa);
        writeln!(out, "{label},gfom_bound_denominator,{}", fmt6(1.0 / col.gfom_bound)).unwrap();
        writeln!(
            out,
            "{label},ssep_bound_denominator,{}",
            fmt6(1.0 / col.unfactored_bound)
        )
        .unwrap();
        writeln!(
            out,
            "{label},ssep_factored_bound_denominator,{}",
            fmt6(1.0 / col.factored_bound)
        )
        .unwrap();
        writeln!(out, "{label},max_step_residual,{}", fmt6(col.step_residual)).unwrap();
    }
    emit(&args.out, &out)
}

#[derive(Args)]
pub(crate) struct Figure1Args {
    #[arg(long = "kappa", value_parser = parse_kappa, default_value = "100")]
    kappa: f64,
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 15)]
    n_max: usize,
    #[arg(long, default_value_t = 1e-10)]
    gap_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    feas_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub(crate) struct Figure1Row {
    pub n: usize,
    pub fgm: f64,
    pub gfom: f64,
    pub ssep: f64,
}

/// Worst-case values at one horizon: greedy method, the synthesized
/// fixed-step method, and the constant-inertia fast gradient method.
pub(crate) fn figure1_row(
    kappa: f64,
    n: usize,
    extract_opts: &SolverOptions<f64>,
) -> Result<Figure1Row, CliError> {
    let label = kappa_label(kappa);
    let class = class_for_kappa(kappa);
    let mu = if kappa.is_infinite() { 0.0 } else { 1.0 / kappa };

    let (problem, sol) = solve_normalized_gfom(
        &class,
        n,
        extract_opts,
        &format!("figure1.solve-gfom(kappa={label},N={n})"),
    )?;
    let cert = extract_certificate(&problem, &sol)
        .map_err(|e| CliError::new(&format!("figure1.extract(kappa={label},N={n})"), e))?;
    let steps = synthesize_steps(&cert)
        .map_err(|e| CliError::new(&format!("figure1.synthesize(kappa={label},N={n})"), e))?;
    let h = to_canonical(&steps);

    let validation_opts = SolverOptions::default();
    let fixed_value = |table: &CanonicalForm<f64>, stage: String| -> Result<f64, CliError> {
        let problem =
            build_fixed_step_pep(&class, n, 1.0, table).map_err(|e| CliError::new(&stage, e))?;
        let sol = solve(&problem, &validation_opts);
        if sol.status != SolveStatus::Optimal {
            return Err(CliError::new(
                &stage,
                format!("solver returned {:?} (gap {:.2e})", sol.status, sol.relative_gap),
            ));
        }
        Ok(sol.primal_objective)
    };
    let ssep = fixed_value(&h, format!("figure1.validate-ssep(kappa={label},N={n})"))?;
    let fgm_steps = fgm_canonical_steps(mu, 1.0, n);
    let fgm = fixed_value(&fgm_steps, format!("figure1.validate-fgm(kappa={label},N={n})"))?;

    Ok(Figure1Row {
        n,
        fgm,
        gfom: sol.primal_objective,
        ssep,
    })
}

pub(crate) fn figure1(args: Figure1Args) -> Result<(), CliError> {
    let opts = SolverOptions {
        gap_tol: args.gap_tol,
        feas_tol: args.feas_tol,
        ..SolverOptions::default()
    };
    let mut out = String::from("n,fgm,gfom,ssep\n");
    for n in args.n_min..=args.n_max {
        let row = figure1_row(args.kappa, n, &opts)?;
        writeln!(
            out,
            "{},{},{},{}",
            row.n,
            fmt6(row.fgm),
            fmt6(row.gfom),
            fmt6(row.ssep)
        )
        .unwrap();
    }
    emit(&args.out, &out)
}
