use std::path::Path;

use clap::ValueEnum;
use evalexpr::{ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use halfline_core::certifier::{self, SolvabilityCertificate, Verdict};
use halfline_core::manufactured::{self, ExpPolyVec};
use halfline_core::operator::{OperatorModel, PerturbationSet};
use halfline_core::pencil::{self, A4Bound};
use halfline_core::perturbed::{self, NeumannOptions};
use halfline_core::verifier;
use halfline_core::{grid, Grid, SolveStatus, WeightedGridFunction};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Config, Family, ForcingSpec};
use crate::output;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Certify,
    Solve,
    Verify,
    Sweep,
}

pub const EXIT_INADMISSIBLE: u8 = 2;

pub const REPORT: &str = "report.json";
pub const SOLUTION: &str = "solution.csv";
pub const SWEEP: &str = "sweep.csv";

#[derive(Serialize)]
struct GridInfo {
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "N")]
    n: usize,
    step: f64,
    kappa: f64,
}

impl From<&Grid> for GridInfo {
    fn from(g: &Grid) -> Self {
        Self {
            t: g.t_max(),
            n: g.len(),
            step: g.step(),
            kappa: g.kappa(),
        }
    }
}

#[derive(Serialize)]
struct SolveSection {
    status: SolveStatus,
    iterations: usize,
    residual: f64,
    trace_norms: [f64; 3],
    f_norm: f64,
    u_w4_norm: f64,
    /// `‖u‖_{W⁴,κ} / ‖f‖_{L2,κ}`.
    norm_ratio: f64,
    empirical_ratio: Option<f64>,
    phi: [Vec<f64>; 3],
    /// Relative `W⁴` error against the manufactured solution.
    manufactured_error: Option<f64>,
}

#[derive(Serialize)]
struct Report<'a> {
    mode: Mode,
    seed: u64,
    certificate: &'a SolvabilityCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

struct Problem {
    a: OperatorModel,
    p: PerturbationSet,
    kappa: f64,
    cert: SolvabilityCertificate,
}

impl Problem {
    fn new(config: &Config) -> Result<Self, CliError> {
        let a = config.operator()?;
        let p = config.perturbations(&a)?;
        let cert = certifier::certify(&a, &p, config.kappa);
        Ok(Self {
            a,
            p,
            kappa: config.kappa,
            cert,
        })
    }
}

/// Runs one mode and returns the exit status; failures after the
/// certificate is known still leave a report behind.
pub fn run(config: &Config, mode: Mode, out: &Path) -> Result<u8, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let problem = Problem::new(config)?;
    let report_path = out.join(REPORT);
    let write = |grid: Option<&Grid>, result: Option<serde_json::Value>, error: Option<String>| {
        output::write_json(
            &report_path,
            &Report {
                mode,
                seed: config.seed,
                certificate: &problem.cert,
                grid: grid.map(GridInfo::from),
                result,
                error,
            },
        )
    };

    match mode {
        Mode::Sweep => {
            let rows = certifier::sweep(
                &problem.a,
                &problem.p,
                &config.kappa_values(problem.a.lambda0()),
            );
            output::write_sweep(&out.join(SWEEP), &rows)?;
            write(
                None,
                Some(serde_json::to_value(SweepSection {
                    lambda0: problem.a.lambda0(),
                    rows,
                })?),
                None,
            )?;
            return Ok(0);
        }
        _ if problem.cert.verdict == Verdict::InadmissibleWeight => {
            write(None, None, None)?;
            return Ok(EXIT_INADMISSIBLE);
        }
        Mode::Certify => write(None, None, None)?,
        Mode::Solve => {
            let attempt = solve(config, &problem, out);
            match attempt {
                Ok((grid, section)) => {
                    write(Some(&grid), Some(serde_json::to_value(section)?), None)?
                }
                Err(e) => {
                    write(None, None, Some(e.to_string()))?;
                    return Err(e);
                }
            }
        }
        Mode::Verify => {
            let section = verify(config, &problem)?;
            write(None, Some(serde_json::to_value(section)?), None)?;
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct SweepSection {
    lambda0: f64,
    rows: Vec<SolvabilityCertificate>,
}

struct Forcing {
    f: WeightedGridFunction,
    exact: Option<ExpPolyVec>,
}

fn grid_for(config: &Config, lambda0: f64, rate: Option<f64>) -> Result<Grid, CliError> {
    let (kappa, n) = (config.kappa, config.grid.n);
    let grid = match (config.grid.auto_t, config.grid.t, rate) {
        (false, Some(t), _) => Grid::new(t, n, kappa)?,
        (_, _, Some(rate)) => manufactured::solve_grid(lambda0, rate, kappa, n)?,
        _ => Grid::auto(lambda0, kappa, n)?,
    };
    Ok(grid)
}

fn forcing(config: &Config, problem: &Problem) -> Result<Forcing, CliError> {
    let (a, n) = (&problem.a, config.dimension);
    let spec = config
        .forcing
        .as_ref()
        .ok_or_else(|| CliError::Config("solve needs a forcing".into()))?;
    match spec {
        ForcingSpec::Manufactured {
            family,
            rate,
            direction,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let exact = match family {
                Family::T3Exp => {
                    let x = match direction {
                        Some(d) => DVector::from_column_slice(d).normalize(),
                        None => manufactured::random_unit_vector(&mut rng, n),
                    };
                    ExpPolyVec::t3_exp(rate.unwrap_or(a.lambda0()), x)
                }
                Family::Random => {
                    manufactured::random_w4_sample(&mut rng, a.lambda0(), config.kappa, n)
                }
            };
            let grid = grid_for(config, a.lambda0(), Some(exact.terms()[0].rate))?;
            let f = exact
                .apply_p0(a)
                .add(&exact.apply_p1(&problem.p))
                .sample(grid);
            Ok(Forcing {
                f,
                exact: Some(exact),
            })
        }
        ForcingSpec::Expression { components } => {
            let trees = components
                .iter()
                .map(|c| {
                    evalexpr::build_operator_tree::<DefaultNumericTypes>(c)
                        .map_err(|e| CliError::Config(format!("forcing expression {c:?}: {e}")))
                })
                .collect::<Result<Vec<Node>, _>>()?;
            let grid = grid_for(config, a.lambda0(), None)?;
            let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
            let mut samples = DMatrix::zeros(grid.len(), n);
            for k in 0..grid.len() {
                ctx.set_value("t".into(), Value::Float(grid.node(k)))
                    .expect("t is always a float");
                for (i, tree) in trees.iter().enumerate() {
                    samples[(k, i)] = tree.eval_number_with_context(&ctx).map_err(|e| {
                        CliError::Config(format!("forcing expression {:?}: {e}", components[i]))
                    })?;
                }
            }
            Ok(Forcing {
                f: WeightedGridFunction::new(grid, samples)?,
                exact: None,
            })
        }
        ForcingSpec::SamplesFile { path } => Ok(Forcing {
            f: read_samples(path, n, config.kappa)?,
            exact: None,
        }),
    }
}

fn read_samples(path: &Path, n: usize, kappa: f64) -> Result<WeightedGridFunction, CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != n + 1 {
            return Err(CliError::Config(format!(
                "{}: expected {} columns",
                path.display(),
                n + 1
            )));
        }
        let row = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    let len = rows.len();
    if len < 2 || rows[0][0] != 0.0 {
        return Err(CliError::Config(format!(
            "{}: samples must start at t = 0",
            path.display()
        )));
    }
    let t_max = rows[len - 1][0];
    let grid = Grid::new(t_max, len, kappa)?;
    for (k, row) in rows.iter().enumerate() {
        if (row[0] - grid.node(k)).abs() > 1e-9 * t_max {
            return Err(CliError::Config(format!(
                "{}: nodes are not uniform",
                path.display()
            )));
        }
    }
    Ok(WeightedGridFunction::new(
        grid,
        DMatrix::from_fn(len, n, |k, i| rows[k][i + 1]),
    )?)
}

fn solve(config: &Config, problem: &Problem, out: &Path) -> Result<(Grid, SolveSection), CliError> {
    let Forcing { f, exact } = forcing(config, problem)?;
    let options = NeumannOptions {
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
    };
    let r = perturbed::neumann_solve(&f, &problem.a, &problem.p, problem.kappa, options)?;
    output::write_solution(&out.join(SOLUTION), &r.solution)?;
    let manufactured_error = match &exact {
        Some(e) => {
            let err = r.solution.sub(&e.sample(*f.grid()))?;
            Some(grid::sobolev_norm(&err, &problem.a)? / e.sobolev_norm(&problem.a, problem.kappa))
        }
        None => None,
    };
    let section = SolveSection {
        status: r.status,
        iterations: r.iterations,
        residual: r.residual,
        trace_norms: r.trace_norms,
        f_norm: grid::l2k_norm(&f),
        u_w4_norm: grid::sobolev_norm(&r.solution, &problem.a)?,
        norm_ratio: r.norm_ratio,
        empirical_ratio: r.empirical_ratio,
        phi: r
            .correction
            .phi
            .clone()
            .map(|p| p.iter().copied().collect()),
        manufactured_error,
    };
    Ok((*f.grid(), section))
}

#[derive(Serialize)]
struct SampleCheck {
    rate: f64,
    energy_gap: f64,
    aux_holds: bool,
    /// `lhs / rhs` of `‖Aʲu^{(4−j)}‖ ≤ c_j‖P₀u‖`.
    cj_estimate_ratios: [f64; 4],
    cj_estimate_violations: usize,
    boundedness_holds: bool,
}

#[derive(Serialize)]
struct VerifySection {
    samples: usize,
    max_energy_gap: f64,
    aux_failures: usize,
    /// Trials in which at least one of the estimates with `c_j(κ)` failed.
    cj_estimate_failures: usize,
    boundedness_failures: usize,
    norm_equivalence: [f64; 2],
    xi4_bound: f64,
    a4_bound: A4Bound,
    /// `min |P₀(iξ+κ/2; λ)| / ((λ₀² − κ²/4)(λ₀ + κ/2)²)` over the sampled
    /// `ξ` and the spectrum.
    symbol_bound_ratio: f64,
    trials: Vec<SampleCheck>,
}

fn verify(config: &Config, problem: &Problem) -> Result<VerifySection, CliError> {
    let (a, kappa) = (&problem.a, problem.kappa);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trials = Vec::with_capacity(config.verify.samples);
    for _ in 0..config.verify.samples {
        let (exact, u) = verifier::sample_family(&mut rng, a, kappa);
        let energy = verifier::check_energy_identity(&u, a, kappa)?;
        let aux = verifier::check_aux_estimates(&u, a, kappa)?;
        let est = verifier::check_estimate_16(&u, a, kappa)?;
        let bound = verifier::check_p0_boundedness(&u, a, kappa)?;
        trials.push(SampleCheck {
            rate: exact.terms()[0].rate,
            energy_gap: energy.gap,
            aux_holds: aux.holds(),
            cj_estimate_ratios: est.estimates.map(|i| i.lhs / i.rhs),
            cj_estimate_violations: est.violations(),
            boundedness_holds: bound.holds,
        });
    }
    let norm_equivalence =
        verifier::check_norm_equivalence(&mut rng, config.verify.samples.max(1), a, kappa)?;

    let xs = pencil::composite_xi_grid(a.lambda0(), 4001);
    let lower = pencil::symbol_lower_bound(a.lambda0(), kappa)?;
    let symbol_bound_ratio = xs
        .iter()
        .flat_map(|&xi| {
            a.eigenvalues()
                .iter()
                .map(move |&l| pencil::symbol(pencil::shifted(xi, kappa), l).norm())
        })
        .fold(f64::INFINITY, f64::min)
        / lower;

    Ok(VerifySection {
        samples: trials.len(),
        max_energy_gap: trials.iter().map(|t| t.energy_gap).fold(0.0, f64::max),
        aux_failures: trials.iter().filter(|t| !t.aux_holds).count(),
        cj_estimate_failures: trials
            .iter()
            .filter(|t| t.cj_estimate_violations > 0)
            .count(),
        boundedness_failures: trials.iter().filter(|t| !t.boundedness_holds).count(),
        norm_equivalence: [norm_equivalence.0, norm_equivalence.1],
        xi4_bound: pencil::bound_xi4(a, kappa, &xs)?,
        a4_bound: pencil::bound_a4(a, kappa, &xs)?,
        symbol_bound_ratio,
        trials,
    })
}
