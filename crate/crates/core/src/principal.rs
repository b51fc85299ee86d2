//! Solve of `P₀(d/dt; A)u = f` on the half-line with `u(0) = u′(0) = u″(0) = 0`.
//!
//! `f` is continued by zero to `t < 0`, the full-line problem for
//! `v = u e^{-κt/2}` is solved by FFT convolution with its Green's function,
//! and the three decaying homogeneous solutions
//! `e^{-tA}φ₀ + tAe^{-tA}φ₁ + t²A²e^{-tA}φ₂` remove the traces at `t = 0`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, Grid, WeightedGridFunction};
use crate::operator::OperatorModel;
use crate::pencil::{self, PencilCoefficients};

pub const RESIDUAL_THRESHOLD: f64 = 1e-3;

/// `φ₀, φ₁, φ₂` of the semigroup correction.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCorrection {
    pub phi: [DVector<f64>; 3],
}

impl BoundaryCorrection {
    pub fn zero(n: usize) -> Self {
        Self {
            phi: [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)],
        }
    }
}

/// Outcome of a solve, shared by the principal and perturbed solvers.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: WeightedGridFunction,
    pub correction: BoundaryCorrection,
    /// `‖Pu - f‖_{L2,κ} / ‖f‖_{L2,κ}` with grid derivatives.
    pub residual: f64,
    /// `‖A^{7/2-j} u^{(j)}(0)‖` for `j = 0, 1, 2`.
    pub trace_norms: [f64; 3],
    /// `‖u‖_{W⁴,κ} / ‖f‖_{L2,κ}`.
    pub norm_ratio: f64,
    pub iterations: usize,
    /// Largest ratio of successive Neumann increments, when iterating.
    pub empirical_ratio: Option<f64>,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Certified,
    Uncertified,
}

/// Exact triangular solve for the correction coefficients given
/// `ũ₀(0), ũ₀′(0), ũ₀″(0)`.
pub fn boundary_phis(traces: [&DVector<f64>; 3], a: &OperatorModel) -> Result<BoundaryCorrection> {
    for t in traces {
        a.check_vec(t)?;
    }
    let a_inv = a.int_power(-1);
    let a_inv2 = a.int_power(-2);
    let phi0 = -traces[0];
    let phi1 = &phi0 - &a_inv * traces[1];
    let phi2 = 0.5 * (-(&a_inv2 * traces[2]) - &phi0 + 2.0 * &phi1);
    Ok(BoundaryCorrection {
        phi: [phi0, phi1, phi2],
    })
}

/// `u₀ + e^{-tA}φ₀ + tAe^{-tA}φ₁ + t²A²e^{-tA}φ₂` at every node.
pub fn assemble_solution(
    u0: &WeightedGridFunction,
    phi: &BoundaryCorrection,
    a: &OperatorModel,
) -> Result<WeightedGridFunction> {
    if u0.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: u0.dim(),
        });
    }
    for p in &phi.phi {
        a.check_vec(p)?;
    }
    let modal = phi.phi.clone().map(|p| a.to_modal(&p));
    let lams = a.eigenvalues();
    let grid = *u0.grid();
    let mut samples = u0.samples().clone();
    for k in 0..grid.len() {
        let t = grid.node(k);
        let c = DVector::from_fn(a.dim(), |i, _| {
            let l = lams[i];
            let lt = l * t;
            (-lt).exp() * (modal[0][i] + lt * modal[1][i] + lt * lt * modal[2][i])
        });
        let v = a.from_modal(&c);
        for (j, x) in v.iter().enumerate() {
            samples[(k, j)] += x;
        }
    }
    WeightedGridFunction::new(grid, samples)
}

/// `-u⁗ - 2Au‴ + 2A³u′ + A⁴u` with grid derivatives.
pub fn apply_p0(u: &WeightedGridFunction, a: &OperatorModel) -> Result<WeightedGridFunction> {
    if u.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: u.dim(),
        });
    }
    let coeffs = PencilCoefficients::EXPANSION.0;
    let mut out = WeightedGridFunction::zeros(*u.grid(), u.dim());
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let d = grid::derivative(u, 4 - k)?;
        let term = if k == 0 {
            d
        } else {
            d.apply(&a.int_power(k as i32))
        };
        out = out.add(&term.scale(c))?;
    }
    Ok(out)
}

/// Full-line convolution with the Green's function of `P₀(d/dt + κ/2; λ)`
/// for every eigenvalue of `A`, with kernels precomputed for one grid.
pub struct PrincipalSolver {
    a: OperatorModel,
    grid: Grid,
    fft_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Aliased resolvent symbol sampled at the FFT frequencies, one row per
    /// eigenvalue.
    kernels: Vec<Vec<Complex64>>,
}

impl std::fmt::Debug for PrincipalSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PrincipalSolver")
            .field("grid", &self.grid)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl PrincipalSolver {
    pub fn new(a: &OperatorModel, grid: Grid) -> Result<Self> {
        let kappa = grid.kappa();
        pencil::check_admissible(a.lambda0(), kappa)?;
        let needed = grid::min_nodes(4);
        if grid.len() < needed {
            return Err(Error::GridTooSmall {
                needed,
                got: grid.len(),
            });
        }
        // Zero padding until the slower branch of the Green's function of
        // v, decaying like e^{-(λ₀ - |κ|/2)|t|}, has dropped by e^{-40}
        // across the wrap.
        let h = grid.step();
        let decay = a.lambda0() - 0.5 * kappa.abs();
        let wrap = (40.0 / (h * decay)).ceil() as usize;
        let fft_len = (grid.len() + wrap).max(2 * grid.len()).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let kernels = a
            .eigenvalues()
            .iter()
            .map(|&lam| {
                (0..fft_len)
                    .map(|m| {
                        let xi = 2.0 * PI * m as f64 / (fft_len as f64 * h);
                        pencil::sampled_resolvent_symbol(xi, lam, kappa, h)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            a: a.clone(),
            grid,
            fft_len,
            forward,
            inverse,
            kernels,
        })
    }

    pub fn operator(&self) -> &OperatorModel {
        &self.a
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check_input(&self, f: &WeightedGridFunction) -> Result<()> {
        if f.dim() != self.a.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.a.dim(),
                got: f.dim(),
            });
        }
        if f.len() != self.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// Particular solution `ũ₀` of the full-line problem restricted to the grid.
    pub fn fullline(&self, f: &WeightedGridFunction) -> Result<WeightedGridFunction> {
        self.check_input(f)?;
        let n = self.grid.len();
        let half_kappa = 0.5 * self.grid.kappa();
        let modal = f.samples() * self.a.eigenbasis();
        let mut out_modal = DMatrix::zeros(n, self.a.dim());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (i, kernel) in self.kernels.iter().enumerate() {
            buf.fill(Complex64::new(0.0, 0.0));
            for k in 0..n {
                let t = self.grid.node(k);
                // trapezoid weights; the jump at t = 0 takes half its value
                let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
                buf[k] = Complex64::new(w * modal[(k, i)] * (-half_kappa * t).exp(), 0.0);
            }
            self.forward.process(&mut buf);
            for (b, kv) in buf.iter_mut().zip(kernel) {
                *b *= kv;
            }
            self.inverse.process(&mut buf);
            let scale = (self.fft_len as f64).recip();
            for k in 0..n {
                let t = self.grid.node(k);
                out_modal[(k, i)] = buf[k].re * scale * (half_kappa * t).exp();
            }
        }
        WeightedGridFunction::new(self.grid, out_modal * self.a.eigenbasis().transpose())
    }

    /// `P₀⁻¹f` without the residual check.
    pub fn invert(
        &self,
        f: &WeightedGridFunction,
    ) -> Result<(WeightedGridFunction, BoundaryCorrection)> {
        let u0 = self.fullline(f)?;
        let traces = [
            grid::derivative_at_origin(&u0, 0)?,
            grid::derivative_at_origin(&u0, 1)?,
            grid::derivative_at_origin(&u0, 2)?,
        ];
        let phi = boundary_phis([&traces[0], &traces[1], &traces[2]], &self.a)?;
        let u = assemble_solution(&u0, &phi, &self.a)?;
        Ok((u, phi))
    }

    /// `P₀⁻¹f` with the residual, trace and norm-ratio report.
    pub fn solve(&self, f: &WeightedGridFunction) -> Result<SolveReport> {
        let (u, correction) = self.invert(f)?;
        let f_norm = grid::l2k_norm(f);
        let residual = relative(grid::l2k_norm(&apply_p0(&u, &self.a)?.sub(f)?), f_norm);
        if residual > RESIDUAL_THRESHOLD {
            return Err(Error::ResidualTooLarge {
                residual,
                threshold: RESIDUAL_THRESHOLD,
            });
        }
        Ok(SolveReport {
            trace_norms: grid::trace_norms(&u, &self.a)?,
            norm_ratio: relative(grid::sobolev_norm(&u, &self.a)?, f_norm),
            solution: u,
            correction,
            residual,
            iterations: 1,
            empirical_ratio: None,
            status: SolveStatus::Certified,
        })
    }
}

/// `num / den`, zero when both vanish.
pub(crate) fn relative(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Full-line particular solution `ũ₀` on `f`'s grid with weight `κ`.
pub fn fullline_solve(
    f: &WeightedGridFunction,
    a: &OperatorModel,
    kappa: f64,
) -> Result<WeightedGridFunction> {
    let f = f.with_kappa(kappa);
    PrincipalSolver::new(a, *f.grid())?.fullline(&f)
}

/// `P₀⁻¹f` on `f`'s grid with weight `κ`, with residual check.
pub fn principal_solve(
    f: &WeightedGridFunction,
    a: &OperatorModel,
    kappa: f64,
) -> Result<SolveReport> {
    let f = f.with_kappa(kappa);
    PrincipalSolver::new(a, *f.grid())?.solve(&f)
}
