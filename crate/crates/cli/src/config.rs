//! JSON problem definition.

use std::path::{Path, PathBuf};

use halfline_core::operator::{OperatorModel, PerturbationSet};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::CliError;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dimension: usize,
    #[serde(rename = "operator_A")]
    pub operator_a: OperatorSpec,
    #[serde(default)]
    pub perturbations: Option<PerturbationSpec>,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
}

/// Dense rows, or a spectrum with an optional orthonormal basis whose
/// columns are the eigenvectors.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum OperatorSpec {
    Rows {
        rows: Rows,
    },
    Spectrum {
        eigenvalues: Vec<f64>,
        eigenbasis: Option<Rows>,
    },
}

/// `A1..A4`, or `B1..B4 = A_j A^{-j}` when `normalized` is set. Missing
/// entries are zero.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub normalized: bool,
    #[serde(rename = "A1")]
    pub a1: Option<Rows>,
    #[serde(rename = "A2")]
    pub a2: Option<Rows>,
    #[serde(rename = "A3")]
    pub a3: Option<Rows>,
    #[serde(rename = "A4")]
    pub a4: Option<Rows>,
    #[serde(rename = "B1")]
    pub b1: Option<Rows>,
    #[serde(rename = "B2")]
    pub b2: Option<Rows>,
    #[serde(rename = "B3")]
    pub b3: Option<Rows>,
    #[serde(rename = "B4")]
    pub b4: Option<Rows>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[serde(rename = "N", default = "default_nodes")]
    pub n: usize,
    #[serde(rename = "auto_T", default = "yes")]
    pub auto_t: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t: None,
            n: default_nodes(),
            auto_t: true,
        }
    }
}

fn default_nodes() -> usize {
    2048
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingSpec {
    /// `f = P₀u* + P₁u*` for a known `u*`.
    Manufactured {
        #[serde(default)]
        family: Family,
        rate: Option<f64>,
        direction: Option<Vec<f64>>,
    },
    /// One expression in `t` per component.
    Expression { components: Vec<String> },
    /// CSV with columns `t, f_1, …, f_n` on a uniform grid starting at 0.
    SamplesFile { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `u* = t³e^{-at}x`.
    #[default]
    T3Exp,
    /// A seeded member of the verifier's random family.
    Random,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

fn default_tol() -> f64 {
    halfline_core::perturbed::DEFAULT_TOL
}

fn default_max_iter() -> usize {
    halfline_core::perturbed::DEFAULT_MAX_ITER
}

/// Absolute `κ` range; defaults to `[-2.2λ₀, 2.2λ₀]` in steps of `0.1λ₀`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            samples: default_samples(),
        }
    }
}

fn default_samples() -> usize {
    20
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn matrix(name: &str, rows: &Rows, n: usize) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(format!("{name} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: Config = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        // sample files are looked up next to the config
        if let Some(ForcingSpec::SamplesFile { path: p }) = &mut config.forcing {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.dimension == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !self.kappa.is_finite() {
            return Err(invalid("kappa must be finite"));
        }
        if !self.grid.auto_t && self.grid.t.is_none() {
            return Err(invalid("grid.T is required when auto_T is false"));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(invalid("solver.tol and solver.max_iter must be positive"));
        }
        if let Some(s) = &self.sweep {
            if !(s.step > 0.0) || !(s.to >= s.from) {
                return Err(invalid("sweep needs from <= to and a positive step"));
            }
        }
        match &self.forcing {
            Some(ForcingSpec::Expression { components }) if components.len() != self.dimension => {
                Err(invalid(format!(
                    "forcing needs {} expressions",
                    self.dimension
                )))
            }
            Some(ForcingSpec::Manufactured {
                direction: Some(d), ..
            }) if d.len() != self.dimension => Err(invalid(format!(
                "forcing direction must have {} entries",
                self.dimension
            ))),
            Some(ForcingSpec::Manufactured {
                family: Family::Random,
                rate,
                direction,
            }) if rate.is_some() || direction.is_some() => Err(invalid(
                "the random family draws its own rate and direction",
            )),
            Some(ForcingSpec::Manufactured { rate: Some(r), .. }) if !(*r > 0.0) => {
                Err(invalid("manufactured rate must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn operator(&self) -> Result<OperatorModel, CliError> {
        let n = self.dimension;
        let a = match &self.operator_a {
            OperatorSpec::Rows { rows } => OperatorModel::new(&matrix("operator_A", rows, n)?)?,
            OperatorSpec::Spectrum {
                eigenvalues,
                eigenbasis,
            } => {
                if eigenvalues.len() != n {
                    return Err(invalid(format!("operator_A needs {n} eigenvalues")));
                }
                let q = eigenbasis
                    .as_ref()
                    .map(|q| matrix("eigenbasis", q, n))
                    .transpose()?;
                OperatorModel::from_spectrum(eigenvalues, q.as_ref())?
            }
        };
        Ok(a)
    }

    pub fn perturbations(&self, a: &OperatorModel) -> Result<PerturbationSet, CliError> {
        let n = self.dimension;
        let Some(p) = &self.perturbations else {
            return Ok(PerturbationSet::zero(n));
        };
        let (used, unused, prefix) = if p.normalized {
            (
                [&p.b1, &p.b2, &p.b3, &p.b4],
                [&p.a1, &p.a2, &p.a3, &p.a4],
                'B',
            )
        } else {
            (
                [&p.a1, &p.a2, &p.a3, &p.a4],
                [&p.b1, &p.b2, &p.b3, &p.b4],
                'A',
            )
        };
        if unused.iter().any(|m| m.is_some()) {
            let other = if p.normalized { 'A' } else { 'B' };
            return Err(invalid(format!(
                "perturbations: {other}_j given but normalized = {}",
                p.normalized
            )));
        }
        let mut coeffs: [DMatrix<f64>; 4] = std::array::from_fn(|_| DMatrix::zeros(n, n));
        for (j, m) in used.iter().enumerate() {
            if let Some(rows) = m {
                coeffs[j] = matrix(&format!("{prefix}{}", j + 1), rows, n)?;
            }
        }
        let set = if p.normalized {
            PerturbationSet::from_normalized(a, coeffs)?
        } else {
            PerturbationSet::new(a, coeffs)?
        };
        Ok(set)
    }

    pub fn kappa_values(&self, lambda0: f64) -> Vec<f64> {
        let s = self.sweep.unwrap_or(SweepSpec {
            from: -2.2 * lambda0,
            to: 2.2 * lambda0,
            step: 0.1 * lambda0,
        });
        halfline_core::certifier::kappa_range(s.from, s.to, s.step)
    }
}
