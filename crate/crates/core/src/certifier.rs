//! Closed-form solvability certificate for the perturbed problem.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{OperatorModel, PerturbationSet};

/// `γ(λ₀) = 1 - κ²/(4λ₀²)`.
pub fn gamma(lambda0: f64, kappa: f64) -> f64 {
    1.0 - kappa * kappa / (4.0 * lambda0 * lambda0)
}

pub fn is_admissible(lambda0: f64, kappa: f64) -> bool {
    kappa.abs() < 2.0 * lambda0
}

/// `(c₁, c₂, c₃, c₄) = (½γ^{-1/2}, (2√2)⁻¹γ^{-1/2}, ½γ^{-1/2}, γ⁻¹)`.
pub fn constants(lambda0: f64, kappa: f64) -> Result<[f64; 4]> {
    if !is_admissible(lambda0, kappa) {
        return Err(Error::InadmissibleWeight {
            kappa,
            limit: 2.0 * lambda0,
        });
    }
    let g = gamma(lambda0, kappa);
    let r = g.sqrt().recip();
    Ok([0.5 * r, r / (2.0 * 2f64.sqrt()), 0.5 * r, g.recip()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    RegularlySolvableCertified,
    Uncertified,
    InadmissibleWeight,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::RegularlySolvableCertified => "REGULARLY_SOLVABLE_CERTIFIED",
            Verdict::Uncertified => "UNCERTIFIED",
            Verdict::InadmissibleWeight => "INADMISSIBLE_WEIGHT",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Constants and contraction sum are absent when the weight is inadmissible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityCertificate {
    pub kappa: f64,
    pub lambda0: f64,
    pub gamma: f64,
    pub constants: Option<[f64; 4]>,
    pub betas: [f64; 4],
    pub q: Option<f64>,
    pub admissible: bool,
    pub verdict: Verdict,
}

impl SolvabilityCertificate {
    /// `c₄`, infinite past the critical weight.
    pub fn c4(&self) -> f64 {
        self.constants.map_or(f64::INFINITY, |c| c[3])
    }

    /// Contraction sum, infinite past the critical weight.
    pub fn q_or_inf(&self) -> f64 {
        self.q.unwrap_or(f64::INFINITY)
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::RegularlySolvableCertified
    }
}

pub fn certify(a: &OperatorModel, p: &PerturbationSet, kappa: f64) -> SolvabilityCertificate {
    let lambda0 = a.lambda0();
    let betas = p.betas();
    let constants = constants(lambda0, kappa).ok();
    let q = constants.map(|c| c.iter().zip(&betas).map(|(c, b)| c * b).sum::<f64>());
    let verdict = match q {
        None => Verdict::InadmissibleWeight,
        Some(q) if q < 1.0 => Verdict::RegularlySolvableCertified,
        Some(_) => Verdict::Uncertified,
    };
    SolvabilityCertificate {
        kappa,
        lambda0,
        gamma: gamma(lambda0, kappa),
        constants,
        betas,
        q,
        admissible: constants.is_some(),
        verdict,
    }
}

/// Certificates over a list of weights.
pub fn sweep(
    a: &OperatorModel,
    p: &PerturbationSet,
    kappas: &[f64],
) -> Vec<SolvabilityCertificate> {
    kappas.iter().map(|&k| certify(a, p, k)).collect()
}

/// Blow-up of the constants as `|κ| → 2λ₀` for the unperturbed operator.
pub fn critical_sweep(a: &OperatorModel, kappas: &[f64]) -> Vec<SolvabilityCertificate> {
    sweep(a, &PerturbationSet::zero(a.dim()), kappas)
}

/// `lo, lo + step, …` up to `hi` inclusive, each value rounded to nine
/// decimals so that accumulated steps land on the intended points.
pub fn kappa_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "sweep step must be positive");
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9)
        .collect()
}
