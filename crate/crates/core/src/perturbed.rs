//! Neumann-series solve of `P₀u + P₁u = f` through `(E + P₁P₀⁻¹)z = f`,
//! `u = P₀⁻¹z`.

use crate::certifier;
use crate::error::{Error, Result};
use crate::grid::{self, WeightedGridFunction};
use crate::operator::{OperatorModel, PerturbationSet};
use crate::principal::{self, PrincipalSolver, SolveReport, SolveStatus};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Increments below this fraction of `‖f‖` are dominated by the roundoff of
/// the third-derivative stencil on fine grids and do not enter the empirical
/// contraction ratio.
const RATIO_FLOOR: f64 = 1e-7;

/// Once increments are this small relative to `‖f‖` and stop decreasing, the
/// iteration has reached the discretization floor and is stopped.
const STAGNATION_LEVEL: f64 = 1e-6;

/// `Σ_j A_j d^{4-j}u/dt^{4-j}`.
pub fn apply_p1(u: &WeightedGridFunction, p: &PerturbationSet) -> Result<WeightedGridFunction> {
    if u.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: u.dim(),
        });
    }
    let mut out = WeightedGridFunction::zeros(*u.grid(), u.dim());
    for j in 1..=4 {
        let c = p.coefficient(j);
        if c.iter().all(|&x| x == 0.0) {
            continue;
        }
        let d = grid::derivative(u, 4 - j)?;
        out = out.add(&d.apply(c))?;
    }
    Ok(out)
}

/// `P₀u + P₁u`.
pub fn apply_p(
    u: &WeightedGridFunction,
    a: &OperatorModel,
    p: &PerturbationSet,
) -> Result<WeightedGridFunction> {
    principal::apply_p0(u, a)?.add(&apply_p1(u, p)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Iterates `z⁰ = f`, `z^{m+1} = f - P₁P₀⁻¹z^m` on `f`'s grid with weight
/// `κ`. Runs even when the certificate fails, labelling the result
/// uncertified.
pub fn neumann_solve(
    f: &WeightedGridFunction,
    a: &OperatorModel,
    p: &PerturbationSet,
    kappa: f64,
    options: NeumannOptions,
) -> Result<SolveReport> {
    let f = f.with_kappa(kappa);
    let solver = PrincipalSolver::new(a, *f.grid())?;
    neumann_with(&solver, &f, p, options)
}

/// [`neumann_solve`] reusing a prepared principal solver.
pub fn neumann_with(
    solver: &PrincipalSolver,
    f: &WeightedGridFunction,
    p: &PerturbationSet,
    options: NeumannOptions,
) -> Result<SolveReport> {
    let a = solver.operator();
    let kappa = solver.grid().kappa();
    let f = f.with_kappa(kappa);
    let cert = certifier::certify(a, p, kappa);
    let status = if cert.is_certified() {
        SolveStatus::Certified
    } else {
        SolveStatus::Uncertified
    };
    let f_norm = grid::l2k_norm(&f);

    let mut z = f.clone();
    let mut increments = Vec::new();
    let mut iterations = 0;
    let (u, correction) = loop {
        let (u, correction) = solver.invert(&z)?;
        iterations += 1;
        if p.is_zero() {
            break (u, correction);
        }
        let next = f.sub(&apply_p1(&u, p)?)?;
        let step = grid::l2k_norm(&next.sub(&z)?);
        z = next;
        let stagnated = increments.last().is_some_and(|&prev| step >= prev)
            && step <= STAGNATION_LEVEL * f_norm;
        increments.push(step);
        if step <= options.tol * f_norm || stagnated {
            break solver.invert(&z)?;
        }
        let diverging = !step.is_finite() || step > 1e8 * f_norm.max(f64::MIN_POSITIVE);
        if diverging || iterations >= options.max_iter {
            return Err(Error::NotContractive {
                iterations,
                q: empirical_ratio(&increments, f_norm).unwrap_or(cert.q_or_inf()),
            });
        }
    };

    let residual = principal::relative(grid::l2k_norm(&apply_p(&u, a, p)?.sub(&f)?), f_norm);
    let threshold = options.tol.max(principal::RESIDUAL_THRESHOLD);
    if residual > threshold {
        return Err(Error::ResidualTooLarge {
            residual,
            threshold,
        });
    }
    Ok(SolveReport {
        trace_norms: grid::trace_norms(&u, a)?,
        norm_ratio: principal::relative(grid::sobolev_norm(&u, a)?, f_norm),
        solution: u,
        correction,
        residual,
        iterations,
        empirical_ratio: if p.is_zero() {
            None
        } else {
            Some(empirical_ratio(&increments, f_norm).unwrap_or(0.0))
        },
        status,
    })
}

/// Largest ratio of successive increments above the roundoff floor.
fn empirical_ratio(increments: &[f64], f_norm: f64) -> Option<f64> {
    let floor = RATIO_FLOOR * f_norm;
    increments
        .windows(2)
        .filter(|w| w[0] > floor && w[1] > floor)
        .map(|w| w[1] / w[0])
        .fold(None, |acc: Option<f64>, r| {
            Some(acc.map_or(r, |m| m.max(r)))
        })
}
