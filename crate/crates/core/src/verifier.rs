//! Quadrature checks of the identities and estimates behind solvability in
//! the weighted space, evaluated on sampled functions.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::certifier::{self, gamma};
use crate::error::{Error, Result};
use crate::grid::{self, Grid, WeightedGridFunction};
use crate::manufactured::{self, ExpPolyVec};
use crate::operator::OperatorModel;
use crate::pencil;
use crate::principal::{self, relative};

pub const BOUNDARY_TOL: f64 = 1e-6;
pub const TRACE_TOL: f64 = 1e-6;
/// Relative slack for the estimates with constants `c_j`.
pub const ESTIMATE_SLACK: f64 = 1e-4;
/// Absolute slack for the auxiliary estimates and the boundedness check.
pub const ABS_SLACK: f64 = 1e-6;

/// Left side, right side and `lhs ≤ rhs` up to the stated slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    fn relative(lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + slack),
        }
    }

    fn absolute(lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + slack,
        }
    }

    /// `rhs / lhs`, infinite for a vanishing left side.
    pub fn margin(&self) -> f64 {
        if self.lhs == 0.0 {
            f64::INFINITY
        } else {
            self.rhs / self.lhs
        }
    }
}

/// Both sides of `Re(h, A²w) = ‖Aw′‖² + ‖A²w‖² − (κ²/4)‖Aw‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Unweighted `w = u e^{-κt/2}` and `h = (−(d/dt + κ/2)² + A²)w`.
struct Auxiliary {
    w: WeightedGridFunction,
    w1: WeightedGridFunction,
    h: WeightedGridFunction,
}

fn auxiliary(u: &WeightedGridFunction, a: &OperatorModel, kappa: f64) -> Result<Auxiliary> {
    if u.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: u.dim(),
        });
    }
    let value = u.value(0).norm();
    if value > BOUNDARY_TOL {
        return Err(Error::BoundaryConditionViolated { value });
    }
    let w = u.with_kappa(kappa).unweighted();
    let w1 = grid::derivative(&w, 1)?;
    let w2 = grid::derivative(&w, 2)?;
    let a2 = a.int_power(2);
    // −w″ − κw′ − (κ²/4)w + A²w
    let h = w
        .apply(&a2)
        .sub(&w2)?
        .sub(&w1.scale(kappa))?
        .sub(&w.scale(0.25 * kappa * kappa))?;
    Ok(Auxiliary { w, w1, h })
}

pub fn check_energy_identity(
    u: &WeightedGridFunction,
    a: &OperatorModel,
    kappa: f64,
) -> Result<EnergyIdentity> {
    let aux = auxiliary(u, a, kappa)?;
    let a1 = a.matrix();
    let a2w = aux.w.apply(&a.int_power(2));
    let lhs = grid::l2k_inner(&aux.h, &a2w)?;
    let rhs = grid::l2k_norm(&aux.w1.apply(a1)).powi(2) + grid::l2k_norm(&a2w).powi(2)
        - 0.25 * kappa * kappa * grid::l2k_norm(&aux.w.apply(a1)).powi(2);
    let scale = lhs.abs().max(rhs.abs());
    let gap = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    Ok(EnergyIdentity { lhs, rhs, gap })
}

/// `‖A²w‖ ≤ γ⁻¹‖h‖` and `‖Aw′‖² ≤ ¼γ⁻¹‖h‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxEstimates {
    pub a2w: Inequality,
    pub aw_prime: Inequality,
}

impl AuxEstimates {
    pub fn holds(&self) -> bool {
        self.a2w.holds && self.aw_prime.holds
    }
}

pub fn check_aux_estimates(
    u: &WeightedGridFunction,
    a: &OperatorModel,
    kappa: f64,
) -> Result<AuxEstimates> {
    pencil::check_admissible(a.lambda0(), kappa)?;
    let aux = auxiliary(u, a, kappa)?;
    let g = gamma(a.lambda0(), kappa);
    let h = grid::l2k_norm(&aux.h);
    let a2w = grid::l2k_norm(&aux.w.apply(&a.int_power(2)));
    let aw1 = grid::l2k_norm(&aux.w1.apply(a.matrix()));
    Ok(AuxEstimates {
        a2w: Inequality::absolute(a2w, h / g, ABS_SLACK),
        aw_prime: Inequality::absolute(aw1 * aw1, 0.25 * h * h / g, ABS_SLACK),
    })
}

/// `y = (d/dt + A)²u = u″ + 2Au′ + A²u`.
pub fn second_order_substitution(
    u: &WeightedGridFunction,
    a: &OperatorModel,
) -> Result<WeightedGridFunction> {
    let u1 = grid::derivative(u, 1)?;
    let u2 = grid::derivative(u, 2)?;
    u2.add(&u1.apply(&(2.0 * a.matrix())))?
        .add(&u.apply(&a.int_power(2)))
}

fn check_domain(u: &WeightedGridFunction, a: &OperatorModel) -> Result<()> {
    let traces = grid::trace_norms(u, a)?;
    let scale = grid::sobolev_norm(u, a)?.max(1.0);
    for (order, &trace) in traces.iter().enumerate() {
        if trace > TRACE_TOL * scale {
            return Err(Error::NotInDomain { order, trace });
        }
    }
    Ok(())
}

/// `‖Aʲ u^{(4−j)}‖_{L2,κ}`, `j = 1..4`.
pub fn intermediate_norms(u: &WeightedGridFunction, a: &OperatorModel) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let j = i + 1;
        let d = grid::derivative(u, 4 - j)?;
        *slot = grid::l2k_norm(&d.apply(&a.int_power(j as i32)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate16 {
    /// `‖Aʲu^{(4−j)}‖ ≤ c_j‖P₀u‖`, `j = 1..4`.
    pub estimates: [Inequality; 4],
    /// `‖A²u″‖² + 2‖A³u′‖² + ‖A⁴u‖² ≤ γ⁻²‖P₀u‖²`.
    pub combined_a4: Inequality,
    /// `‖Au‴‖² + 2‖A²u″‖² + ‖A³u′‖² ≤ ¼γ⁻¹‖P₀u‖²`.
    pub combined_a3: Inequality,
}

impl Estimate16 {
    pub fn violations(&self) -> usize {
        self.estimates
            .iter()
            .chain([&self.combined_a4, &self.combined_a3])
            .filter(|i| !i.holds)
            .count()
    }
}

pub fn check_estimate_16(
    u: &WeightedGridFunction,
    a: &OperatorModel,
    kappa: f64,
) -> Result<Estimate16> {
    let c = certifier::constants(a.lambda0(), kappa)?;
    let u = u.with_kappa(kappa);
    check_domain(&u, a)?;
    let f = grid::l2k_norm(&principal::apply_p0(&u, a)?);
    let n = intermediate_norms(&u, a)?;
    let g = gamma(a.lambda0(), kappa);
    let estimates = [0, 1, 2, 3].map(|i| Inequality::relative(n[i], c[i] * f, ESTIMATE_SLACK));
    let sq = n.map(|x| x * x);
    Ok(Estimate16 {
        estimates,
        combined_a4: Inequality::relative(
            sq[1] + 2.0 * sq[2] + sq[3],
            f * f / (g * g),
            ESTIMATE_SLACK,
        ),
        combined_a3: Inequality::relative(
            sq[0] + 2.0 * sq[1] + sq[2],
            0.25 * f * f / g,
            ESTIMATE_SLACK,
        ),
    })
}

/// `‖P₀u‖² ≤ 4‖u‖²_{W⁴} + 16(‖Au‴‖² + ‖A³u′‖²)`.
pub fn check_p0_boundedness(
    u: &WeightedGridFunction,
    a: &OperatorModel,
    kappa: f64,
) -> Result<Inequality> {
    let u = u.with_kappa(kappa);
    check_domain(&u, a)?;
    let p0 = grid::l2k_norm(&principal::apply_p0(&u, a)?);
    let w4 = grid::sobolev_norm(&u, a)?;
    let n = intermediate_norms(&u, a)?;
    Ok(Inequality::absolute(
        p0 * p0,
        4.0 * w4 * w4 + 16.0 * (n[0] * n[0] + n[2] * n[2]),
        ABS_SLACK,
    ))
}

/// Nodes used when sampling members of the random family.
pub const FAMILY_NODES: usize = 2048;

/// A random member of the family sampled on a grid that resolves it.
pub fn sample_family<R: Rng>(
    rng: &mut R,
    a: &OperatorModel,
    kappa: f64,
) -> (ExpPolyVec, WeightedGridFunction) {
    let u = manufactured::random_w4_sample(rng, a.lambda0(), kappa, a.dim());
    let grid: Grid = manufactured::resolving_grid(u.terms()[0].rate, kappa, FAMILY_NODES);
    let sampled = u.sample(grid);
    (u, sampled)
}

/// Range of `‖P₀u‖_{L2,κ} / ‖u‖_{W⁴,κ}` over random members of the family.
pub fn check_norm_equivalence<R: Rng>(
    rng: &mut R,
    sample_count: usize,
    a: &OperatorModel,
    kappa: f64,
) -> Result<(f64, f64)> {
    pencil::check_admissible(a.lambda0(), kappa)?;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for _ in 0..sample_count {
        let (_, u) = sample_family(rng, a, kappa);
        let r = relative(
            grid::l2k_norm(&principal::apply_p0(&u, a)?),
            grid::sobolev_norm(&u, a)?,
        );
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Random symmetric positive definite matrix with spectrum in `[lo, hi]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = g.qr().q();
    let mut eig: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    eig[0] = lo;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eig));
    let m = &q * d * q.transpose();
    0.5 * (&m + m.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn one() -> (OperatorModel, DVector<f64>) {
        (OperatorModel::identity(1), DVector::from_vec(vec![1.0]))
    }

    #[test]
    fn energy_identity_examples() {
        let (a, x) = one();
        let grid = Grid::new(30.0, 4001, 0.0).unwrap();
        let zero = WeightedGridFunction::zeros(grid, 1);
        let e = check_energy_identity(&zero, &a, 0.0).unwrap();
        assert_eq!((e.lhs, e.rhs, e.gap), (0.0, 0.0, 0.0));

        // w = te^{-t}: ‖w′‖² + ‖w‖² = 1/4 + 1/4
        let u = ExpPolyVec::single(1.0, vec![0.0, 1.0], x.clone());
        let e = check_energy_identity(&u.sample(grid), &a, 0.0).unwrap();
        assert_relative_eq!(e.rhs, 0.5, max_relative = 1e-5);
        assert!(e.gap <= 1e-3);

        let grid = grid.with_kappa(1.0);
        let e = check_energy_identity(&u.sample(grid), &a, 1.0).unwrap();
        assert!(e.gap <= 1e-3);
        // oracle with w = te^{-3t/2}: ‖w′‖² + ‖w‖² − ¼‖w‖²
        let w = u.unweighted(1.0);
        let oracle =
            w.derivative(1).weighted_norm(0.0).powi(2) + 0.75 * w.weighted_norm(0.0).powi(2);
        assert_relative_eq!(e.rhs, oracle, max_relative = 1e-5);

        let bad = WeightedGridFunction::from_scalar(grid, &x, |t| (-t).exp());
        assert!(matches!(
            check_energy_identity(&bad, &a, 0.0),
            Err(Error::BoundaryConditionViolated { .. })
        ));
    }

    #[test]
    fn aux_estimates_examples() {
        let (a, x) = one();
        let grid = Grid::new(30.0, 4001, 0.0).unwrap();
        let r = check_aux_estimates(&WeightedGridFunction::zeros(grid, 1), &a, 0.0).unwrap();
        assert!(r.holds());
        let u = ExpPolyVec::single(1.0, vec![0.0, 1.0], x).sample(grid);
        let r = check_aux_estimates(&u, &a, 0.0).unwrap();
        assert!(r.a2w.margin() > 1.0 && r.aw_prime.margin() > 1.0);
    }

    #[test]
    fn estimate_16_t3() {
        let (a, x) = one();
        let grid = Grid::new(40.0, 4001, 0.0).unwrap();
        let u = ExpPolyVec::t3_exp(1.0, x);
        let r = check_estimate_16(&u.sample(grid), &a, 0.0).unwrap();
        assert_eq!(r.violations(), 0);
        // quadrature against the closed-form oracle
        let f = u.apply_p0(&a).weighted_norm(0.0);
        assert_relative_eq!(r.estimates[3].rhs, f, max_relative = 1e-6);
        assert_relative_eq!(
            r.estimates[3].lhs,
            u.weighted_norm(0.0),
            max_relative = 1e-6
        );
        assert_relative_eq!(
            r.estimates[0].lhs,
            u.derivative(3).weighted_norm(0.0),
            max_relative = 1e-6
        );

        let zero = check_estimate_16(&WeightedGridFunction::zeros(grid, 1), &a, 0.0).unwrap();
        assert_eq!(zero.violations(), 0);
    }

    #[test]
    fn estimate_16_rejects_nonzero_traces() {
        let (a, x) = one();
        let grid = Grid::new(40.0, 4001, 0.0).unwrap();
        let u = ExpPolyVec::single(1.0, vec![0.0, 0.0, 1.0], x).sample(grid);
        assert!(matches!(
            check_estimate_16(&u, &a, 0.0),
            Err(Error::NotInDomain { order: 2, .. })
        ));
    }

    #[test]
    fn boundedness_t3() {
        let (a, x) = one();
        let grid = Grid::new(40.0, 4001, 0.0).unwrap();
        let r = check_p0_boundedness(&ExpPolyVec::t3_exp(1.0, x).sample(grid), &a, 0.0).unwrap();
        assert!(r.holds && r.margin() > 1.0);
    }

    #[test]
    fn norm_equivalence_single_sample() {
        let (a, x) = one();
        let grid = Grid::new(40.0, 4001, 0.0).unwrap();
        let u = ExpPolyVec::t3_exp(1.0, x).sample(grid);
        let r = grid::l2k_norm(&principal::apply_p0(&u, &a).unwrap())
            / grid::sobolev_norm(&u, &a).unwrap();
        assert!(r > 0.0 && r.is_finite());
    }

    #[test]
    fn substitution_vanishes_at_origin() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
        let a = OperatorModel::new(&m).unwrap();
        let grid = Grid::new(30.0, 2001, 0.0).unwrap();
        let u = ExpPolyVec::t3_exp(1.2, DVector::from_vec(vec![0.6, 0.8])).sample(grid);
        let y = second_order_substitution(&u, &a).unwrap();
        assert!(y.value(0).norm() < 1e-6);
    }

    #[test]
    fn random_spd_spectrum() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = random_spd(&mut rng, 5, 1.0, 4.0);
        let a = OperatorModel::new(&m).unwrap();
        assert_relative_eq!(a.lambda0(), 1.0, epsilon = 1e-12);
        assert!(a.lambda_max() <= 4.0 + 1e-12);
    }
}
