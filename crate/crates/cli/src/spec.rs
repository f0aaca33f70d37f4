//! System description read from JSON, and the affine simplex maps used to
//! scale or shift the uncertainty set.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use polya_core::{homogenize, Exponent, MatrixPolynomial, Term};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One monomial of `A(α)`: exponent and row-major coefficient matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialSpec {
    pub exponent: Vec<u32>,
    pub matrix: Vec<Vec<f64>>,
}

impl MonomialSpec {
    pub fn from_matrix(exponent: Vec<u32>, m: &DMatrix<f64>) -> Self {
        let matrix = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        MonomialSpec { exponent, matrix }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub dp: usize,
    pub d1: usize,
    pub d2: usize,
    pub delta: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub workers: usize,
    pub bisect_lo: Option<f64>,
    pub bisect_hi: Option<f64>,
    pub bisect_tol: f64,
    pub max_trials: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            dp: 1,
            d1: 0,
            d2: 0,
            delta: 1e-3,
            eps: 1e-8,
            max_iter: 200,
            workers: 1,
            bisect_lo: None,
            bisect_hi: None,
            bisect_tol: 1e-3,
            max_trials: 40,
            samples: 1000,
            seed: 0,
        }
    }
}

/// `g_i(α) = scale·α_i + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineSimplexMap {
    pub scale: f64,
    pub offset: f64,
}

impl AffineSimplexMap {
    /// Symmetric box of half-width `|ρ|` around the origin:
    /// `g_i = 2|ρ|(α_i − 1/2)`.
    pub fn centered(rho: f64) -> Self {
        AffineSimplexMap {
            scale: 2.0 * rho.abs(),
            offset: -rho.abs(),
        }
    }

    /// `g_i = (1 − L)α_i + L`, whose image has coordinate sum `(1 − L) + lL`.
    pub fn shifted(shift: f64) -> Self {
        AffineSimplexMap {
            scale: 1.0 - shift,
            offset: shift,
        }
    }

    /// `Σ_i g_i(α)` for any `α` in the simplex.
    pub fn image_sum(&self, l: usize) -> f64 {
        self.scale + l as f64 * self.offset
    }

    pub fn apply(&self, alpha: &[f64]) -> Vec<f64> {
        alpha.iter().map(|a| self.scale * a + self.offset).collect()
    }

    /// Checks the image sum against the sum the caller expects.
    pub fn check_target(&self, l: usize, target: f64, tol: f64) -> Result<()> {
        let sum = self.image_sum(l);
        if (sum - target).abs() > tol * (1.0 + target.abs()) {
            return Err(CliError::Spec(format!(
                "map image sum {sum} differs from the declared target {target}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n: usize,
    pub l: usize,
    pub monomials: Vec<MonomialSpec>,
    #[serde(default)]
    pub options: AnalysisOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<AffineSimplexMap>,
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SystemSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.l == 0 {
            return Err(CliError::Spec("n and l must be positive".into()));
        }
        if self.monomials.is_empty() {
            return Err(CliError::Spec("no monomials given".into()));
        }
        for (i, m) in self.monomials.iter().enumerate() {
            if m.exponent.len() != self.l {
                return Err(CliError::Spec(format!(
                    "monomial {} has an exponent of length {}, expected {}",
                    i + 1,
                    m.exponent.len(),
                    self.l
                )));
            }
            if m.matrix.len() != self.n || m.matrix.iter().any(|r| r.len() != self.n) {
                return Err(CliError::Spec(format!(
                    "monomial {} is not a {n}x{n} matrix",
                    i + 1,
                    n = self.n
                )));
            }
            if m.matrix.iter().flatten().any(|v| !v.is_finite()) {
                return Err(CliError::Spec(format!("monomial {} has a non-finite entry", i + 1)));
            }
        }
        let o = &self.options;
        if o.workers == 0 {
            return Err(CliError::Spec("at least one worker is required".into()));
        }
        if !(o.delta >= 0.0 && o.eps > 0.0 && o.bisect_tol > 0.0) {
            return Err(CliError::Spec(
                "delta must be nonnegative, eps and bisect_tol positive".into(),
            ));
        }
        Ok(())
    }

    /// The terms as written, before any map.
    pub fn terms(&self) -> Result<Vec<Term>> {
        self.monomials
            .iter()
            .map(|m| {
                let rows: Vec<f64> = m.matrix.iter().flatten().copied().collect();
                Ok(Term::new(
                    Exponent::new(m.exponent.clone())?,
                    DMatrix::from_row_slice(self.n, self.n, &rows),
                ))
            })
            .collect()
    }

    /// Homogeneous `A(g(α))`, or `A(α)` when no map is set.
    pub fn polynomial(&self) -> Result<MatrixPolynomial> {
        let mut terms = self.terms()?;
        if let Some(map) = &self.map {
            terms = substitute(&terms, map, self.l);
        }
        Ok(homogenize(self.l, self.n, &terms)?)
    }

    /// Largest absolute value of any coefficient entry.
    pub fn max_abs(&self) -> f64 {
        self.monomials
            .iter()
            .flat_map(|m| m.matrix.iter().flatten())
            .fold(0.0, |a: f64, v| a.max(v.abs()))
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Expands `Σ_t C_t Π_i (scale·α_i + offset)^{t_i}` over monomials.
///
/// Zero coefficients are kept so the result has the same top degree as the
/// input whatever the map.
pub fn substitute(terms: &[Term], map: &AffineSimplexMap, l: usize) -> Vec<Term> {
    let mut out: BTreeMap<Vec<u32>, DMatrix<f64>> = BTreeMap::new();
    for t in terms {
        // one list of (power, weight) per variable
        let factors: Vec<Vec<(u32, f64)>> = t
            .exponent
            .entries()
            .iter()
            .map(|&e| {
                (0..=e)
                    .map(|p| {
                        let w = binomial(e, p) * map.scale.powi(p as i32) * map.offset.powi((e - p) as i32);
                        (p, w)
                    })
                    .collect()
            })
            .collect();
        let mut partial: Vec<(Vec<u32>, f64)> = vec![(Vec::with_capacity(l), 1.0)];
        for f in &factors {
            let mut next = Vec::with_capacity(partial.len() * f.len());
            for (e, w) in &partial {
                for &(p, wp) in f {
                    let mut e2 = e.clone();
                    e2.push(p);
                    next.push((e2, w * wp));
                }
            }
            partial = next;
        }
        for (e, w) in partial {
            let n = t.coeff.nrows();
            *out.entry(e).or_insert_with(|| DMatrix::zeros(n, n)) += &t.coeff * w;
        }
    }
    out.into_iter()
        .map(|(e, c)| Term::new(Exponent::new(e).expect("nonempty exponent"), c))
        .collect()
}
