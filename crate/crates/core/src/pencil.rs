//! The pencil `P₀(μ; A) = (-μE + A)(μE + A)³` and its resolvent on the line
//! `μ = iξ + κ/2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::OperatorModel;

/// Coefficients of `μ⁴, μ³A, μ²A², μA³, A⁴` in the expansion of `P₀(μ; A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PencilCoefficients(pub [f64; 5]);

impl PencilCoefficients {
    pub const EXPANSION: Self = Self([-1.0, -2.0, 0.0, 2.0, 1.0]);

    /// Multiply out `(-μ + 1)(μ + 1)³` as a polynomial in `μ`.
    pub fn expand() -> Self {
        // ascending powers of μ
        let mut poly = vec![1.0, -1.0];
        for _ in 0..3 {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, &c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] += c;
            }
            poly = next;
        }
        Self([poly[4], poly[3], poly[2], poly[1], poly[0]])
    }

    /// `Σ cₖ μ^{4-k} λ^k`.
    pub fn evaluate(&self, mu: Complex64, lambda: f64) -> Complex64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, &c)| c * mu.powi(4 - k as i32) * lambda.powi(k as i32))
            .sum()
    }
}

/// Scalar symbol `(-μ + λ)(μ + λ)³`.
pub fn symbol(mu: Complex64, lambda: f64) -> Complex64 {
    let p = mu + lambda;
    (lambda - mu) * p * p * p
}

/// `μ = iξ + κ/2`.
pub fn shifted(xi: f64, kappa: f64) -> Complex64 {
    Complex64::new(0.5 * kappa, xi)
}

pub fn check_admissible(lambda0: f64, kappa: f64) -> Result<()> {
    if kappa.abs() < 2.0 * lambda0 {
        Ok(())
    } else {
        Err(Error::InadmissibleWeight {
            kappa,
            limit: 2.0 * lambda0,
        })
    }
}

/// `(λ₀² - κ²/4)(λ₀ + κ/2)²`, a lower bound for `|P₀(iξ+κ/2; λ)|` over
/// `ξ ∈ R`, `λ ≥ λ₀`.
pub fn symbol_lower_bound(lambda0: f64, kappa: f64) -> Result<f64> {
    check_admissible(lambda0, kappa)?;
    let k = 0.5 * kappa;
    Ok((lambda0 * lambda0 - k * k) * (lambda0 + k).powi(2))
}

fn real_to_modal(a: &OperatorModel, g: &DVector<Complex64>) -> DVector<Complex64> {
    let q = a.eigenbasis();
    let re = q.tr_mul(&g.map(|z| z.re));
    let im = q.tr_mul(&g.map(|z| z.im));
    re.zip_map(&im, Complex64::new)
}

fn modal_to_real(a: &OperatorModel, c: &DVector<Complex64>) -> DVector<Complex64> {
    let q = a.eigenbasis();
    let re = q * c.map(|z| z.re);
    let im = q * c.map(|z| z.im);
    re.zip_map(&im, Complex64::new)
}

/// `P₀⁻¹(iξ + κ/2; A) g`.
pub fn resolvent_apply(
    a: &OperatorModel,
    xi: f64,
    kappa: f64,
    g: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    check_admissible(a.lambda0(), kappa)?;
    a.check_vec_len(g.len())?;
    let mu = shifted(xi, kappa);
    let mut modal = real_to_modal(a, g);
    for (c, &lam) in modal.iter_mut().zip(a.eigenvalues().iter()) {
        *c /= symbol(mu, lam);
    }
    Ok(modal_to_real(a, &modal))
}

/// `P₀(μ; A) g`.
pub fn pencil_apply(
    a: &OperatorModel,
    mu: Complex64,
    g: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    a.check_vec_len(g.len())?;
    let mut modal = real_to_modal(a, g);
    for (c, &lam) in modal.iter_mut().zip(a.eigenvalues().iter()) {
        *c *= symbol(mu, lam);
    }
    Ok(modal_to_real(a, &modal))
}

/// `sup_ξ ‖ξ⁴ P₀⁻¹(iξ+κ/2; A)‖` sampled on `xi_grid`.
pub fn bound_xi4(a: &OperatorModel, kappa: f64, xi_grid: &[f64]) -> Result<f64> {
    check_admissible(a.lambda0(), kappa)?;
    let mut best: f64 = 0.0;
    for &xi in xi_grid {
        let mu = shifted(xi, kappa);
        let xi4 = xi.powi(4);
        for &lam in a.eigenvalues().iter() {
            best = best.max(xi4 / symbol(mu, lam).norm());
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct A4Bound {
    /// `max` over the ξ-grid and the spectrum of `λ⁴ / |P₀(iξ+κ/2; λ)|`.
    pub measured: f64,
    /// `λ₀⁴ / ((λ₀² - κ²/4)(λ₀ + κ/2)²)`.
    pub closed_form: f64,
    /// `max_{λ ∈ σ(A)} λ⁴ / ((λ² - κ²/4)(λ + κ/2)²)`: the ξ-free bound
    /// before the supremum over the spectrum is replaced by its value at `λ₀`.
    pub spectral_bound: f64,
}

fn a4_closed(lambda: f64, kappa: f64) -> f64 {
    let k = 0.5 * kappa;
    lambda.powi(4) / ((lambda * lambda - k * k) * (lambda + k).powi(2))
}

/// `sup_ξ ‖A⁴ P₀⁻¹(iξ+κ/2; A)‖` sampled on `xi_grid`, with its closed forms.
pub fn bound_a4(a: &OperatorModel, kappa: f64, xi_grid: &[f64]) -> Result<A4Bound> {
    check_admissible(a.lambda0(), kappa)?;
    let mut measured: f64 = 0.0;
    for &xi in xi_grid {
        let mu = shifted(xi, kappa);
        for &lam in a.eigenvalues().iter() {
            measured = measured.max(lam.powi(4) / symbol(mu, lam).norm());
        }
    }
    let spectral_bound = a
        .eigenvalues()
        .iter()
        .map(|&l| a4_closed(l, kappa))
        .fold(0.0, f64::max);
    Ok(A4Bound {
        measured,
        closed_form: a4_closed(a.lambda0(), kappa),
        spectral_bound,
    })
}

/// Symmetric composite ξ-grid on `[-10⁴λ₀, 10⁴λ₀]`: linear on `|ξ| ≤ 10λ₀`,
/// logarithmic beyond, always containing `ξ = 0`. Holds at least `points`
/// values.
pub fn composite_xi_grid(lambda0: f64, points: usize) -> Vec<f64> {
    let per_side = points.max(8) / 4 + 1;
    let inner = 10.0 * lambda0;
    let outer = 1e4 * lambda0;
    let mut xs = Vec::with_capacity(4 * per_side + 1);
    xs.push(0.0);
    for i in 1..=per_side {
        let x = inner * i as f64 / per_side as f64;
        xs.push(x);
        xs.push(-x);
    }
    let ratio = (outer / inner).ln();
    for i in 1..=per_side {
        let x = inner * (ratio * i as f64 / per_side as f64).exp();
        xs.push(x);
        xs.push(-x);
    }
    xs.sort_by(f64::total_cmp);
    xs
}

/// `Σ_{p∈Z} 1 / P₀(i(ξ + 2πp/h) + κ/2; λ)` in closed form.
///
/// This is the discrete-time Fourier transform of `h·G(t_k)`, where `G` is
/// the full-line Green's function of `P₀(d/dt + κ/2; λ)` sampled with step
/// `h`. Multiplying a DFT by it performs the trapezoid-rule convolution with
/// `G` exactly, instead of the spectrally truncated one.
pub fn sampled_resolvent_symbol(xi: f64, lambda: f64, kappa: f64, h: f64) -> Complex64 {
    // 1/((λ-μ)(λ+μ)³) = a/(λ-μ) + b₁/(λ+μ) + b₂/(λ+μ)² + b₃/(λ+μ)³
    let two_l = 2.0 * lambda;
    let a = two_l.powi(-3);
    let (b1, b2, b3) = (a, two_l.powi(-2), two_l.recip());
    let half = 0.5 * h;

    // Σ_p 1/(z + 2πip/h)^m for m = 1, 2, 3
    let z = Complex64::new(lambda + 0.5 * kappa, xi);
    let x = z * half;
    let coth = x.tanh().inv();
    let csch2 = x.sinh().powi(2).inv();
    let s1 = coth * half;
    let s2 = csch2 * half * half;
    let s3 = coth * csch2 * half * half * half;

    // 1/(λ-μ) = -1/(zp) with zp = -(λ - κ/2) + iξ
    let zp = Complex64::new(-(lambda - 0.5 * kappa), xi);
    let sa = -(zp * half).tanh().inv() * half;

    sa * a + s1 * b1 + s2 * b2 + s3 * b3
}

/// Matrix form of [`symbol`] for tests and diagnostics.
pub fn symbol_matrix(a: &OperatorModel, mu: Complex64) -> (DMatrix<f64>, DMatrix<f64>) {
    let re = a.spectral_map(|l| symbol(mu, l).re);
    let im = a.spectral_map(|l| symbol(mu, l).im);
    (re, im)
}
