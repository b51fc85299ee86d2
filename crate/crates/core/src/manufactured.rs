//! Vector functions of the form `Σ e^{-a_i t} p_i(t) x_i` with exact
//! derivatives, operator images and weighted integrals. Used to build
//! manufactured solutions and as closed-form oracles for quadrature.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::grid::{Grid, WeightedGridFunction};
use crate::operator::{OperatorModel, PerturbationSet};
use crate::pencil::PencilCoefficients;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolyTerm {
    pub rate: f64,
    /// Polynomial coefficients in ascending powers of `t`.
    pub poly: Vec<f64>,
    pub dir: DVector<f64>,
}

impl ExpPolyTerm {
    fn scalar(&self, t: f64) -> f64 {
        let p = self.poly.iter().rev().fold(0.0, |acc, &c| acc * t + c);
        (-self.rate * t).exp() * p
    }

    fn differentiate(&self) -> Self {
        let mut poly: Vec<f64> = self.poly.iter().map(|&c| -self.rate * c).collect();
        for (m, &c) in self.poly.iter().enumerate().skip(1) {
            poly[m - 1] += m as f64 * c;
        }
        Self {
            rate: self.rate,
            poly,
            dir: self.dir.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpPolyVec {
    dim: usize,
    terms: Vec<ExpPolyTerm>,
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// `∫₀^∞ e^{-ct} p(t) q(t) dt`, infinite when `c ≤ 0`.
fn exp_poly_product_integral(c: f64, p: &[f64], q: &[f64]) -> f64 {
    if c <= 0.0 {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    for (m, &pm) in p.iter().enumerate() {
        for (k, &qk) in q.iter().enumerate() {
            if pm != 0.0 && qk != 0.0 {
                total += pm * qk * factorial(m + k) / c.powi((m + k + 1) as i32);
            }
        }
    }
    total
}

impl ExpPolyVec {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn single(rate: f64, poly: Vec<f64>, dir: DVector<f64>) -> Self {
        Self {
            dim: dir.len(),
            terms: vec![ExpPolyTerm { rate, poly, dir }],
        }
    }

    /// `t³ e^{-rate·t} x`.
    pub fn t3_exp(rate: f64, x: DVector<f64>) -> Self {
        Self::single(rate, vec![0.0, 0.0, 0.0, 1.0], x)
    }

    /// `e^{-tA}(φ₀ + tAφ₁ + t²A²φ₂)`, split along the eigenvectors of `A`.
    pub fn semigroup_correction(a: &OperatorModel, phi: [&DVector<f64>; 3]) -> Self {
        let mut out = Self::zero(a.dim());
        let modal = phi.map(|p| a.to_modal(p));
        for (i, &lam) in a.eigenvalues().iter().enumerate() {
            let poly = vec![modal[0][i], lam * modal[1][i], lam * lam * modal[2][i]];
            if poly.iter().any(|&c| c != 0.0) {
                out.terms.push(ExpPolyTerm {
                    rate: lam,
                    poly,
                    dir: a.eigenbasis().column(i).into_owned(),
                });
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[ExpPolyTerm] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        for term in &self.terms {
            v.axpy(term.scalar(t), &term.dir, 1.0);
        }
        v
    }

    pub fn derivative(&self, order: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..order {
            out.terms = out.terms.iter().map(ExpPolyTerm::differentiate).collect();
        }
        out
    }

    /// `t ↦ M u(t)`.
    pub fn apply(&self, m: &DMatrix<f64>) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ExpPolyTerm {
                rate: t.rate,
                poly: t.poly.clone(),
                dir: m * &t.dir,
            })
            .collect();
        Self {
            dim: m.nrows(),
            terms,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.dir *= c;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        out
    }

    /// `t ↦ e^{-κt/2} u(t)`.
    pub fn unweighted(&self, kappa: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.rate += 0.5 * kappa;
        }
        out
    }

    /// `∫₀^∞ e^{-κt} (u(t), v(t)) dt`.
    pub fn weighted_inner(&self, other: &Self, kappa: f64) -> f64 {
        let mut total = 0.0;
        for s in &self.terms {
            for o in &other.terms {
                let dot = s.dir.dot(&o.dir);
                if dot != 0.0 {
                    total +=
                        dot * exp_poly_product_integral(s.rate + o.rate + kappa, &s.poly, &o.poly);
                }
            }
        }
        total
    }

    pub fn weighted_norm(&self, kappa: f64) -> f64 {
        self.weighted_inner(self, kappa).max(0.0).sqrt()
    }

    /// `(‖u⁗‖² + ‖A⁴u‖²)^{1/2}` in `L_{2,κ}`.
    pub fn sobolev_norm(&self, a: &OperatorModel, kappa: f64) -> f64 {
        let d4 = self.derivative(4).weighted_norm(kappa);
        let a4 = self.apply(&a.int_power(4)).weighted_norm(kappa);
        d4.hypot(a4)
    }

    /// `P₀(d/dt; A)u`, evaluated eigenvector by eigenvector so that exact
    /// cancellations (kernel elements) survive as zero coefficients.
    pub fn apply_p0(&self, a: &OperatorModel) -> Self {
        let coeffs = PencilCoefficients::EXPANSION.0;
        let mut out = Self::zero(self.dim);
        for term in &self.terms {
            let mut derivs = vec![term.clone()];
            for d in 0..4 {
                let next = derivs[d].differentiate();
                derivs.push(next);
            }
            let modal = a.to_modal(&term.dir);
            for (i, &lam) in a.eigenvalues().iter().enumerate() {
                if modal[i] == 0.0 {
                    continue;
                }
                let mut poly = vec![0.0; term.poly.len()];
                for (k, &c) in coeffs.iter().enumerate() {
                    for (slot, &p) in poly.iter_mut().zip(&derivs[4 - k].poly) {
                        *slot += c * lam.powi(k as i32) * p * modal[i];
                    }
                }
                out.terms.push(ExpPolyTerm {
                    rate: term.rate,
                    poly,
                    dir: a.eigenbasis().column(i).into_owned(),
                });
            }
        }
        out
    }

    /// `Σ_j A_j u^{(4-j)}`.
    pub fn apply_p1(&self, p: &PerturbationSet) -> Self {
        let mut out = Self::zero(self.dim);
        for j in 1..=4 {
            let c = p.coefficient(j);
            if c.iter().any(|&x| x != 0.0) {
                out = out.add(&self.derivative(4 - j).apply(c));
            }
        }
        out
    }

    pub fn sample(&self, grid: Grid) -> WeightedGridFunction {
        WeightedGridFunction::from_fn(grid, self.dim, |t| self.eval(t))
    }
}

/// Random unit vector in `R^n`.
pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return v / norm;
        }
    }
}

/// Decay-rate window `[lo, hi]` for the random family. For `κ < 0` the lower
/// end is raised so that the sample stays in `L_{2,κ}` with some margin.
pub fn family_rate_range(lambda0: f64, kappa: f64) -> (f64, f64) {
    let lo = (0.5 * lambda0).max(-0.5 * kappa + 0.25 * lambda0);
    (lo, 2.0 * lambda0)
}

/// `u(t) = t³ e^{-at} p(t) x` with `a` drawn from [`family_rate_range`], `p`
/// of degree at most 3 with coefficients in `[-1, 1]` and `x` a unit vector.
pub fn random_w4_sample<R: Rng>(rng: &mut R, lambda0: f64, kappa: f64, n: usize) -> ExpPolyVec {
    let (lo, hi) = family_rate_range(lambda0, kappa);
    let rate = rng.gen_range(lo..=hi);
    let mut poly = vec![0.0; 7];
    loop {
        for c in &mut poly[3..] {
            *c = rng.gen_range(-1.0..=1.0);
        }
        if poly[3..].iter().any(|c: &f64| c.abs() > 0.05) {
            break;
        }
    }
    ExpPolyVec::single(rate, poly, random_unit_vector(rng, n))
}

/// Grid of `n` nodes long enough for a sample decaying like `e^{-rate·t}`
/// to be negligible at the far end in `L_{2,κ}`.
pub fn resolving_grid(rate: f64, kappa: f64, n: usize) -> Grid {
    let t_max = 60.0 / (2.0 * rate + kappa);
    Grid::new(t_max, n, kappa).expect("positive length and enough nodes")
}

/// Like [`resolving_grid`], but also long enough for the homogeneous modes
/// of `A` (see [`Grid::auto_length`]), as needed when solving for the sample.
pub fn solve_grid(lambda0: f64, rate: f64, kappa: f64, n: usize) -> crate::error::Result<Grid> {
    let t_max = Grid::auto_length(lambda0, kappa)?.max(60.0 / (2.0 * rate + kappa));
    Grid::new(t_max, n, kappa)
}
