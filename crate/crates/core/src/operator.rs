//! Finite-dimensional model of the operator `A` and its spectral calculus.
//!
//! `A` is self-adjoint and positive definite on `R^n`; everything (fractional
//! powers, the semigroup `e^{-tA}`, resolvents) is routed through one
//! eigendecomposition computed at construction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Self-adjoint positive-definite operator stored as `Q diag(λ) Qᵀ`.
#[derive(Debug, Clone)]
pub struct OperatorModel {
    eigenvalues: DVector<f64>,
    eigenbasis: DMatrix<f64>,
    matrix: DMatrix<f64>,
}

impl OperatorModel {
    /// Eigendecompose a symmetric positive-definite matrix.
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let scale = matrix.amax().max(1.0);
        let asymmetry = (matrix - matrix.transpose()).amax();
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { asymmetry });
        }
        let sym = (matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut eigenbasis = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            eigenbasis.set_column(dst, &eig.eigenvectors.column(src));
        }

        let min_eigenvalue = eigenvalues[0];
        if !(min_eigenvalue > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(Self {
            eigenvalues,
            eigenbasis,
            matrix: sym,
        })
    }

    /// Build `Q diag(λ) Qᵀ` from a spectrum and (optionally) a basis.
    ///
    /// A user-supplied basis only needs to be orthonormal to `1e-10`; the
    /// resulting matrix is re-decomposed so the stored basis meets the tighter
    /// orthogonality tolerance.
    pub fn from_spectrum(eigenvalues: &[f64], eigenbasis: Option<&DMatrix<f64>>) -> Result<Self> {
        let n = eigenvalues.len();
        let q = match eigenbasis {
            Some(q) => {
                if q.nrows() != n || q.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: q.nrows(),
                    });
                }
                q.clone()
            }
            None => DMatrix::identity(n, n),
        };
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
        Self::new(&(&q * d * q.transpose()))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            eigenvalues: DVector::from_element(n, 1.0),
            eigenbasis: DMatrix::identity(n, n),
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending spectrum.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors, ordered like [`eigenvalues`](Self::eigenvalues).
    pub fn eigenbasis(&self) -> &DMatrix<f64> {
        &self.eigenbasis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower bound of the spectrum.
    pub fn lambda0(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `Q diag(g(λᵢ)) Qᵀ` for an arbitrary scalar function.
    pub fn spectral_map(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let q = &self.eigenbasis;
        let mut scaled = q.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(g(lam));
        }
        scaled * q.transpose()
    }

    /// `A^s` for any real `s`.
    pub fn frac_power(&self, s: f64) -> DMatrix<f64> {
        if s == 0.0 {
            return DMatrix::identity(self.dim(), self.dim());
        }
        self.spectral_map(|lam| lam.powf(s))
    }

    /// `A^k` for an integer exponent, exact on the stored spectrum.
    pub fn int_power(&self, k: i32) -> DMatrix<f64> {
        if k == 0 {
            return DMatrix::identity(self.dim(), self.dim());
        }
        self.spectral_map(|lam| lam.powi(k))
    }

    /// `e^{-tA} φ`.
    pub fn semigroup_apply(&self, t: f64, phi: &DVector<f64>) -> Result<DVector<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        self.check_vec(phi)?;
        if t == 0.0 {
            return Ok(phi.clone());
        }
        let mut modal = self.eigenbasis.tr_mul(phi);
        for (c, &lam) in modal.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= (-lam * t).exp();
        }
        Ok(&self.eigenbasis * modal)
    }

    /// Coordinates of `v` in the eigenbasis.
    pub fn to_modal(&self, v: &DVector<f64>) -> DVector<f64> {
        self.eigenbasis.tr_mul(v)
    }

    pub fn from_modal(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.eigenbasis * c
    }

    pub(crate) fn check_vec(&self, v: &DVector<f64>) -> Result<()> {
        self.check_vec_len(v.len())
    }

    pub(crate) fn check_vec_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    pub(crate) fn check_square(&self, m: &DMatrix<f64>) -> Result<()> {
        let n = self.dim();
        if m.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
        if m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.ncols(),
            });
        }
        Ok(())
    }
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// The coefficients `A₁..A₄` and their normalized forms `B_j = A_j A^{-j}`.
#[derive(Debug, Clone)]
pub struct PerturbationSet {
    raw: [DMatrix<f64>; 4],
    normalized: [DMatrix<f64>; 4],
    betas: [f64; 4],
}

impl PerturbationSet {
    /// From the raw coefficients `A_j`.
    pub fn new(a: &OperatorModel, coeffs: [DMatrix<f64>; 4]) -> Result<Self> {
        for m in &coeffs {
            a.check_square(m)?;
        }
        let normalized: [DMatrix<f64>; 4] =
            std::array::from_fn(|j| &coeffs[j] * a.int_power(-(j as i32 + 1)));
        let betas = std::array::from_fn(|j| op_norm(&normalized[j]));
        Ok(Self {
            raw: coeffs,
            normalized,
            betas,
        })
    }

    /// From the normalized coefficients `B_j`; stores `A_j = B_j A^j`.
    pub fn from_normalized(a: &OperatorModel, normalized: [DMatrix<f64>; 4]) -> Result<Self> {
        for m in &normalized {
            a.check_square(m)?;
        }
        let raw = std::array::from_fn(|j| &normalized[j] * a.int_power(j as i32 + 1));
        let betas = std::array::from_fn(|j| op_norm(&normalized[j]));
        Ok(Self {
            raw,
            normalized,
            betas,
        })
    }

    pub fn zero(n: usize) -> Self {
        let z = || DMatrix::zeros(n, n);
        Self {
            raw: [z(), z(), z(), z()],
            normalized: [z(), z(), z(), z()],
            betas: [0.0; 4],
        }
    }

    pub fn dim(&self) -> usize {
        self.raw[0].nrows()
    }

    /// `A_j` for `j` in `1..=4`.
    pub fn coefficient(&self, j: usize) -> &DMatrix<f64> {
        &self.raw[j - 1]
    }

    /// `B_j = A_j A^{-j}` for `j` in `1..=4`.
    pub fn normalized(&self, j: usize) -> &DMatrix<f64> {
        &self.normalized[j - 1]
    }

    /// `β_j = ‖B_j‖`, index 0 holding `β₁`.
    pub fn betas(&self) -> [f64; 4] {
        self.betas
    }

    pub fn is_zero(&self) -> bool {
        self.raw.iter().all(|m| m.iter().all(|&x| x == 0.0))
    }
}

/// Alias matching the operation names used throughout the crate.
pub fn make_operator(matrix: &DMatrix<f64>) -> Result<OperatorModel> {
    OperatorModel::new(matrix)
}

pub fn make_perturbations(a: &OperatorModel, coeffs: [DMatrix<f64>; 4]) -> Result<PerturbationSet> {
    PerturbationSet::new(a, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn identity_spectrum() {
        let a = make_operator(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(a.eigenvalues().as_slice(), &[1.0, 1.0]);
        assert_eq!(a.lambda0(), 1.0);
    }

    #[test]
    fn diagonal_spectrum_sorted() {
        let a = make_operator(&diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(a.eigenvalues().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(a.lambda0(), 1.0);
    }

    #[test]
    fn two_by_two_spectrum() {
        // (2-λ)² - 1 = 0  =>  λ ∈ {1, 3}
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let a = make_operator(&m).unwrap();
        assert_relative_eq!(a.eigenvalues()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(a.eigenvalues()[1], 3.0, epsilon = 1e-14);
        let q = a.eigenbasis();
        let qtq = q.transpose() * q;
        assert!((qtq - DMatrix::identity(2, 2)).amax() < ORTHOGONALITY_TOL);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(make_operator(&m), Err(Error::NotSymmetric { .. })));
        let m = diag(&[1.0, -1.0]);
        assert!(matches!(
            make_operator(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let m = diag(&[1.0, 0.0]);
        assert!(matches!(
            make_operator(&m),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn frac_power_examples() {
        let i3 = make_operator(&DMatrix::identity(3, 3)).unwrap();
        assert!((i3.frac_power(3.5) - DMatrix::identity(3, 3)).amax() < 1e-15);
        let a = make_operator(&diag(&[4.0])).unwrap();
        assert_relative_eq!(a.frac_power(0.5)[(0, 0)], 2.0, epsilon = 1e-15);
        let a = make_operator(&diag(&[1.0, 4.0])).unwrap();
        let p = a.frac_power(-2.0);
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(p[(1, 1)], 0.0625, epsilon = 1e-15);
        assert!(p[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn frac_power_one_recovers_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let a = make_operator(&m).unwrap();
        assert!((a.frac_power(1.0) - &m).amax() < 1e-12);
    }

    #[test]
    fn semigroup_examples() {
        let a = make_operator(&diag(&[1.0])).unwrap();
        let phi = DVector::from_vec(vec![1.0]);
        let out = a.semigroup_apply(1.0, &phi).unwrap();
        assert_relative_eq!(out[0], (-1.0f64).exp(), epsilon = 1e-15);

        let a = make_operator(&diag(&[1.0, 2.0])).unwrap();
        let phi = DVector::from_vec(vec![1.0, 1.0]);
        let out = a.semigroup_apply(2f64.ln(), &phi).unwrap();
        assert_relative_eq!(out[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.25, epsilon = 1e-15);

        let phi = DVector::from_vec(vec![0.3, -0.7]);
        assert_eq!(a.semigroup_apply(0.0, &phi).unwrap(), phi);
        assert!(matches!(
            a.semigroup_apply(-1.0, &phi),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn perturbation_examples() {
        let a = make_operator(&DMatrix::identity(2, 2)).unwrap();
        let z = || DMatrix::zeros(2, 2);
        let p = make_perturbations(&a, [z(), z(), z(), z()]).unwrap();
        assert_eq!(p.betas(), [0.0; 4]);

        let p = make_perturbations(&a, [z(), z(), z(), DMatrix::identity(2, 2) * 0.5]).unwrap();
        assert_relative_eq!(p.betas()[3], 0.5, epsilon = 1e-15);

        let a = make_operator(&diag(&[1.0, 2.0])).unwrap();
        let p = make_perturbations(&a, [z(), diag(&[0.0, 4.0]), z(), z()]).unwrap();
        assert!((p.normalized(2) - diag(&[0.0, 1.0])).amax() < 1e-14);
        assert_relative_eq!(p.betas()[1], 1.0, epsilon = 1e-14);

        let bad = DMatrix::zeros(3, 3);
        assert!(matches!(
            make_perturbations(&a, [bad, z(), z(), z()]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalized_round_trip() {
        let a = make_operator(&diag(&[1.5, 2.5])).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.05]);
        let z = || DMatrix::zeros(2, 2);
        let p = PerturbationSet::from_normalized(&a, [z(), z(), b.clone(), z()]).unwrap();
        let q = PerturbationSet::new(&a, [z(), z(), p.coefficient(3).clone(), z()]).unwrap();
        assert!((q.normalized(3) - &b).amax() < 1e-13);
    }

    #[test]
    fn op_norm_examples() {
        assert_eq!(op_norm(&DMatrix::zeros(3, 3)), 0.0);
        assert_relative_eq!(op_norm(&DMatrix::identity(4, 4)), 1.0, epsilon = 1e-15);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert_relative_eq!(op_norm(&m), 2.0, epsilon = 1e-15);
    }
}
