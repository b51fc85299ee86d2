//! Truncated half-line grids, weighted norms and grid derivatives.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::OperatorModel;

/// Uniform grid on `[0, T]` carrying the weight exponent `κ` of `L_{2,κ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    t_max: f64,
    n: usize,
    kappa: f64,
}

impl Grid {
    pub fn new(t_max: f64, n: usize, kappa: f64) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "truncation length must be positive, got {t_max}"
            )));
        }
        if n < 2 {
            return Err(Error::GridTooSmall { needed: 2, got: n });
        }
        if !kappa.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "kappa must be finite, got {kappa}"
            )));
        }
        Ok(Self { t_max, n, kappa })
    }

    /// Truncation length such that the slowest homogeneous mode `e^{-λ₀t}`
    /// has decayed by `e^{-40}` in squared `L_{2,κ}` norm:
    /// `T = 40 / (2λ₀ + κ)`.
    pub fn auto_length(lambda0: f64, kappa: f64) -> Result<f64> {
        if !(kappa.abs() < 2.0 * lambda0) {
            return Err(Error::InadmissibleWeight {
                kappa,
                limit: 2.0 * lambda0,
            });
        }
        Ok(40.0 / (2.0 * lambda0 + kappa))
    }

    pub fn auto(lambda0: f64, kappa: f64, n: usize) -> Result<Self> {
        Self::new(Self::auto_length(lambda0, kappa)?, n, kappa)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn step(&self) -> f64 {
        self.t_max / (self.n - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.t_max
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.node(k))
    }

    /// `e^{-κ t_k}`.
    pub fn weight(&self, k: usize) -> f64 {
        (-self.kappa * self.node(k)).exp()
    }

    /// Trapezoid weights with fourth-order end corrections (Gregory);
    /// plain trapezoid below eight nodes.
    pub fn quadrature_weight(&self, k: usize) -> f64 {
        const ENDS: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
        let h = self.step();
        let from_end = k.min(self.n - 1 - k);
        if self.n < 8 {
            return if from_end == 0 { 0.5 * h } else { h };
        }
        ENDS.get(from_end).map_or(h, |w| w * h)
    }

    /// Same nodes, different weight exponent.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self { kappa, ..*self }
    }
}

/// An `H`-valued function sampled on a [`Grid`]: row `k` holds `u(t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGridFunction {
    grid: Grid,
    samples: DMatrix<f64>,
}

impl WeightedGridFunction {
    pub fn new(grid: Grid, samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: samples.nrows(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        Self {
            grid,
            samples: DMatrix::zeros(grid.len(), dim),
        }
    }

    /// Sample `t ↦ u(t)` at every node.
    pub fn from_fn(grid: Grid, dim: usize, mut u: impl FnMut(f64) -> DVector<f64>) -> Self {
        let mut samples = DMatrix::zeros(grid.len(), dim);
        for k in 0..grid.len() {
            let v = u(grid.node(k));
            assert_eq!(v.len(), dim, "sampled vector has wrong dimension");
            samples.set_row(k, &v.transpose());
        }
        Self { grid, samples }
    }

    /// `u(t) = s(t) x` for a scalar profile `s`.
    pub fn from_scalar(grid: Grid, x: &DVector<f64>, s: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, x.len(), |t| x * s(t))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> DMatrix<f64> {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn value(&self, k: usize) -> DVector<f64> {
        self.samples.row(k).transpose()
    }

    /// Apply a matrix at every node: `t ↦ M u(t)`.
    pub fn apply(&self, m: &DMatrix<f64>) -> Self {
        Self {
            grid: self.grid,
            samples: &self.samples * m.transpose(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            samples: &self.samples * c,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            grid: self.grid,
            samples: &self.samples + &other.samples,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            grid: self.grid,
            samples: &self.samples - &other.samples,
        })
    }

    /// Multiply node `k` by `g(t_k)`.
    pub fn pointwise(&self, g: impl Fn(f64) -> f64) -> Self {
        let mut samples = self.samples.clone();
        for k in 0..self.grid.len() {
            let s = g(self.grid.node(k));
            samples.row_mut(k).scale_mut(s);
        }
        Self {
            grid: self.grid,
            samples,
        }
    }

    /// Same samples under a different weight exponent.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self {
            grid: self.grid.with_kappa(kappa),
            samples: self.samples.clone(),
        }
    }

    /// `t ↦ u(t) e^{-κt/2}` viewed in the unweighted space.
    pub fn unweighted(&self) -> Self {
        let half = 0.5 * self.grid.kappa();
        self.pointwise(|t| (-half * t).exp()).with_kappa(0.0)
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid.len() != other.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                got: other.grid.len(),
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

/// Weighted inner product `∫ (u, v) e^{-κt} dt` by the trapezoid rule.
pub fn l2k_inner(u: &WeightedGridFunction, v: &WeightedGridFunction) -> Result<f64> {
    u.check_compatible(v)?;
    let g = u.grid();
    let mut acc = 0.0;
    for k in 0..g.len() {
        let dot = u.samples.row(k).dot(&v.samples.row(k));
        acc += g.quadrature_weight(k) * dot * g.weight(k);
    }
    Ok(acc)
}

/// Norm of `L_{2,κ}(R₊; H)` restricted to `[0, T]`.
pub fn l2k_norm(u: &WeightedGridFunction) -> f64 {
    let g = u.grid();
    let mut acc = 0.0;
    for k in 0..g.len() {
        acc += g.quadrature_weight(k) * u.samples.row(k).norm_squared() * g.weight(k);
    }
    acc.sqrt()
}

/// Unweighted trapezoid `L₂` norm, ignoring the grid's `κ`.
pub fn l2_norm(u: &WeightedGridFunction) -> f64 {
    let g = u.grid();
    let mut acc = 0.0;
    for k in 0..g.len() {
        acc += g.quadrature_weight(k) * u.samples.row(k).norm_squared();
    }
    acc.sqrt()
}

/// Finite-difference weights (Fornberg) for the `order`-th derivative at `z`
/// from nodes `x`.
pub fn fornberg_weights(z: f64, x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let m = order;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

const FD_ACCURACY: usize = 6;

/// Sixth-order stencils for one derivative order, in units of `h = 1`.
#[derive(Debug)]
struct Stencil {
    order: usize,
    half: usize,
    central: Vec<f64>,
    /// `boundary[i]` evaluates at node `i` from nodes `0..width`.
    boundary: Vec<Vec<f64>>,
}

impl Stencil {
    fn build(order: usize) -> Self {
        let half = order.div_ceil(2) - 1 + FD_ACCURACY / 2;
        let offsets: Vec<f64> = (0..=2 * half).map(|i| i as f64 - half as f64).collect();
        let central = fornberg_weights(0.0, &offsets, order);
        let width = order + FD_ACCURACY;
        let nodes: Vec<f64> = (0..width).map(|i| i as f64).collect();
        let boundary = (0..half)
            .map(|i| fornberg_weights(i as f64, &nodes, order))
            .collect();
        Self {
            order,
            half,
            central,
            boundary,
        }
    }

    fn width(&self) -> usize {
        (self.order + FD_ACCURACY).max(2 * self.half + 1)
    }

    fn get(order: usize) -> &'static Stencil {
        static CACHE: [OnceLock<Stencil>; 4] = [
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
        ];
        CACHE[order - 1].get_or_init(|| Stencil::build(order))
    }

    fn apply_column(&self, u: &[f64], out: &mut [f64], scale: f64) {
        let n = u.len();
        let half = self.half;
        let width = self.order + FD_ACCURACY;
        let sign = if self.order.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        for (i, w) in self.boundary.iter().enumerate() {
            out[i] = scale * w.iter().zip(&u[..width]).map(|(a, b)| a * b).sum::<f64>();
            // mirrored stencil at the right end
            let r = n - 1 - i;
            out[r] = sign
                * scale
                * w.iter()
                    .enumerate()
                    .map(|(j, a)| a * u[n - 1 - j])
                    .sum::<f64>();
        }
        for i in half..n - half {
            let window = &u[i - half..=i + half];
            out[i] = scale
                * self
                    .central
                    .iter()
                    .zip(window)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
    }
}

/// Nodes needed by [`derivative`] of the given order.
pub fn min_nodes(order: usize) -> usize {
    match order {
        0 => 1,
        d => Stencil::get(d).width(),
    }
}

/// `d^order u / dt^order` by sixth-order finite differences: centered in the
/// interior, one-sided near both ends. Orders `0..=4`.
pub fn derivative(u: &WeightedGridFunction, order: usize) -> Result<WeightedGridFunction> {
    assert!(order <= 4, "derivative order must be at most 4");
    if order == 0 {
        return Ok(u.clone());
    }
    let stencil = Stencil::get(order);
    let n = u.len();
    if n < stencil.width() {
        return Err(Error::GridTooSmall {
            needed: stencil.width(),
            got: n,
        });
    }
    let scale = u.grid().step().powi(-(order as i32));
    let mut out = DMatrix::zeros(n, u.dim());
    for c in 0..u.dim() {
        let col: Vec<f64> = u.samples.column(c).iter().copied().collect();
        let mut d = vec![0.0; n];
        stencil.apply_column(&col, &mut d, scale);
        out.set_column(c, &DVector::from_vec(d));
    }
    Ok(WeightedGridFunction {
        grid: u.grid,
        samples: out,
    })
}

/// `d^order u / dt^order` at `t = 0` only, using the one-sided stencil.
pub fn derivative_at_origin(u: &WeightedGridFunction, order: usize) -> Result<DVector<f64>> {
    assert!(order <= 4, "derivative order must be at most 4");
    if order == 0 {
        return Ok(u.value(0));
    }
    let stencil = Stencil::get(order);
    if u.len() < stencil.width() {
        return Err(Error::GridTooSmall {
            needed: stencil.width(),
            got: u.len(),
        });
    }
    let scale = u.grid().step().powi(-(order as i32));
    let w = &stencil.boundary[0];
    let mut out = DVector::zeros(u.dim());
    for (j, &c) in w.iter().enumerate() {
        out.axpy(c * scale, &u.value(j), 1.0);
    }
    Ok(out)
}

/// `(‖u⁗‖² + ‖A⁴u‖²)^{1/2}` in `L_{2,κ}`.
pub fn sobolev_norm(u: &WeightedGridFunction, a: &OperatorModel) -> Result<f64> {
    let d4 = derivative(u, 4)?;
    let a4u = u.apply(&a.int_power(4));
    Ok((l2k_norm(&d4).powi(2) + l2k_norm(&a4u).powi(2)).sqrt())
}

/// Trace-sense boundary values `‖A^{7/2-j} u^{(j)}(0)‖`, `j = 0, 1, 2`.
pub fn trace_norms(u: &WeightedGridFunction, a: &OperatorModel) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (j, slot) in out.iter_mut().enumerate() {
        let d = derivative_at_origin(u, j)?;
        *slot = (a.frac_power(3.5 - j as f64) * d).norm();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(grid: Grid, f: impl Fn(f64) -> f64) -> WeightedGridFunction {
        WeightedGridFunction::from_scalar(grid, &DVector::from_vec(vec![1.0]), f)
    }

    #[test]
    fn grid_nodes() {
        let g = Grid::new(2.0, 5, 0.3).unwrap();
        let t: Vec<f64> = g.nodes().collect();
        assert_eq!(t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!((0..5).all(|k| g.weight(k) > 0.0));
        assert!(Grid::new(0.0, 5, 0.0).is_err());
        assert!(matches!(
            Grid::new(1.0, 1, 0.0),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn auto_length_rejects_critical_weight() {
        assert_relative_eq!(Grid::auto_length(1.0, 0.0).unwrap(), 20.0);
        assert!(matches!(
            Grid::auto_length(1.0, 2.0),
            Err(Error::InadmissibleWeight { .. })
        ));
    }

    #[test]
    fn l2k_examples() {
        let g = Grid::new(10.0, 101, 0.0).unwrap();
        assert_eq!(l2k_norm(&WeightedGridFunction::zeros(g, 3)), 0.0);

        // ∫ e^{-2t} = 1/2
        let g = Grid::new(40.0, 40001, 0.0).unwrap();
        assert!((l2k_norm(&scalar(g, |t| (-t).exp())) - 0.5f64.sqrt()).abs() < 1e-4);
        // ∫ e^{-3t} = 1/3
        let g = Grid::new(60.0, 60001, 1.0).unwrap();
        assert!((l2k_norm(&scalar(g, |t| (-t).exp())) - (1.0f64 / 3.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn zero_weight_matches_unweighted_norm_exactly() {
        let g = Grid::new(5.0, 257, 0.0).unwrap();
        let u = scalar(g, |t| (t * 1.3).sin() * (-t).exp());
        assert_eq!(l2k_norm(&u), l2_norm(&u));
    }

    #[test]
    fn stencils_exact_on_polynomials() {
        let g = Grid::new(1.0, 21, 0.0).unwrap();
        for deg in 0..=6 {
            let u = scalar(g, |t| t.powi(deg));
            for order in 1..=4usize {
                let d = derivative(&u, order).unwrap();
                for k in 0..g.len() {
                    let t = g.node(k);
                    let exact = if order as i32 > deg {
                        0.0
                    } else {
                        let falling: f64 = (0..order as i32).map(|i| (deg - i) as f64).product();
                        falling * t.powi(deg - order as i32)
                    };
                    assert!(
                        (d.samples()[(k, 0)] - exact).abs() < 1e-6,
                        "deg {deg} order {order} node {k}: {} vs {exact}",
                        d.samples()[(k, 0)]
                    );
                }
            }
        }
    }

    #[test]
    fn fourth_derivative_of_quartic() {
        let g = Grid::new(2.0, 41, 0.0).unwrap();
        let d = derivative(&scalar(g, |t| t.powi(4)), 4).unwrap();
        assert!(d.samples().iter().all(|&v| (v - 24.0).abs() < 1e-6));
    }

    #[test]
    fn first_derivative_of_exponential() {
        let g = Grid::new(5.0, 501, 0.0).unwrap();
        let d = derivative(&scalar(g, |t| (-t).exp()), 1).unwrap();
        for k in 0..g.len() {
            assert!((d.samples()[(k, 0)] + (-g.node(k)).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = Grid::new(3.0, 31, 0.0).unwrap();
        let u = WeightedGridFunction::from_scalar(g, &DVector::from_vec(vec![2.0, -1.0]), |_| 1.0);
        for order in 1..=4 {
            assert!(derivative(&u, order).unwrap().samples().amax() < 1e-8);
        }
    }

    #[test]
    fn small_grids_are_rejected() {
        let g = Grid::new(1.0, 9, 0.0).unwrap();
        let u = scalar(g, |t| t);
        assert!(derivative(&u, 3).is_ok());
        assert!(matches!(
            derivative(&u, 4),
            Err(Error::GridTooSmall { needed: 10, got: 9 })
        ));
    }

    #[test]
    fn composed_first_derivatives_match_second() {
        let g = Grid::new(10.0, 501, 0.0).unwrap();
        let u = scalar(g, |t| t * t * (-t).exp() * (2.0 * t).cos());
        let dd = derivative(&derivative(&u, 1).unwrap(), 1).unwrap();
        let d2 = derivative(&u, 2).unwrap();
        assert!((dd.samples() - d2.samples()).amax() < 1e-5);
    }

    #[test]
    fn sobolev_examples() {
        let a1 = OperatorModel::identity(1);
        let g = Grid::new(40.0, 8001, 0.0).unwrap();
        let u = scalar(g, |t| (-t).exp());
        assert_relative_eq!(sobolev_norm(&u, &a1).unwrap(), 1.0, epsilon = 1e-3);
        let a2 = OperatorModel::from_spectrum(&[2.0], None).unwrap();
        assert_relative_eq!(
            sobolev_norm(&u, &a2).unwrap(),
            128.5f64.sqrt(),
            epsilon = 1e-2
        );
        assert_eq!(
            sobolev_norm(&WeightedGridFunction::zeros(g, 1), &a1).unwrap(),
            0.0
        );
    }

    #[test]
    fn trace_examples() {
        let a = OperatorModel::identity(2);
        let x = DVector::from_vec(vec![0.6, 0.8]);
        let g = Grid::new(20.0, 2001, 0.0).unwrap();
        let u = WeightedGridFunction::from_scalar(g, &x, |t| t.powi(3) * (-t).exp());
        assert!(trace_norms(&u, &a).unwrap().iter().all(|&v| v < 1e-5));
        let u = WeightedGridFunction::from_scalar(g, &x, |t| (-t).exp());
        for v in trace_norms(&u, &a).unwrap() {
            assert!((v - 1.0).abs() < 1e-5);
        }
        let u = WeightedGridFunction::from_scalar(g, &x, |t| t * t * (-t).exp());
        let tr = trace_norms(&u, &a).unwrap();
        assert!(tr[0] < 1e-4 && tr[1] < 1e-4 && (tr[2] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn substitution_isometry() {
        let g = Grid::new(30.0, 3001, 0.7).unwrap();
        let u = scalar(g, |t| t * (-t).exp());
        let v = u.unweighted();
        assert_eq!(v.grid().kappa(), 0.0);
        assert_relative_eq!(l2k_norm(&u), l2k_norm(&v), max_relative = 1e-12);
    }
}
