//! Matrix-valued polynomials in the uncertain parameters.
//!
//! A [`MatrixPolynomial`] is homogeneous: it stores one `n×n` coefficient per
//! exponent of `W_d`, positionally in lexicographic order (zeros kept).
//! Non-homogeneous input is given as a list of [`Term`]s and brought into
//! homogeneous form with [`homogenize`]; on the unit simplex both agree.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::monomial::{enumerate, Exponent, MonomialBasis};

/// One monomial `coeff · α^exponent` of a possibly non-homogeneous polynomial.
#[derive(Clone, Debug)]
pub struct Term {
    pub exponent: Exponent,
    pub coeff: DMatrix<f64>,
}

impl Term {
    pub fn new(exponent: Exponent, coeff: DMatrix<f64>) -> Self {
        Term { exponent, coeff }
    }
}

/// Homogeneous `l`-variate polynomial with `n×n` real coefficients.
#[derive(Clone, Debug)]
pub struct MatrixPolynomial {
    n: usize,
    basis: MonomialBasis,
    coeffs: Vec<DMatrix<f64>>,
}

impl MatrixPolynomial {
    /// Zero polynomial of the given degree.
    pub fn zeros(l: usize, n: usize, degree: usize) -> Result<Self> {
        let basis = enumerate(l, degree)?;
        let coeffs = vec![DMatrix::zeros(n, n); basis.len()];
        Ok(MatrixPolynomial { n, basis, coeffs })
    }

    /// Builds from coefficients listed in lexicographic order of `W_degree`.
    pub fn from_coeffs(l: usize, n: usize, degree: usize, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        let basis = enumerate(l, degree)?;
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients for degree {degree} in {l} variables, got {}",
                basis.len(),
                coeffs.len()
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| c.nrows() != n || c.ncols() != n) {
            return Err(Error::DimensionMismatch(format!(
                "coefficient is {}x{}, expected {n}x{n}",
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(MatrixPolynomial { n, basis, coeffs })
    }

    pub fn num_vars(&self) -> usize {
        self.basis.num_vars()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    /// Coefficient at 1-based lexicographic index.
    pub fn coeff(&self, index: usize) -> Option<&DMatrix<f64>> {
        index.checked_sub(1).and_then(|p| self.coeffs.get(p))
    }

    pub fn coeff_of(&self, gamma: &Exponent) -> Option<&DMatrix<f64>> {
        self.basis.position(gamma).map(|p| &self.coeffs[p])
    }

    pub fn coeff_mut_of(&mut self, gamma: &Exponent) -> Option<&mut DMatrix<f64>> {
        self.basis.position(gamma).map(move |p| &mut self.coeffs[p])
    }

    /// `Σ_γ P_⟨γ⟩ α^γ`.
    pub fn evaluate(&self, alpha: &[f64]) -> Result<DMatrix<f64>> {
        if alpha.len() != self.num_vars() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} entries, polynomial has {} variables",
                alpha.len(),
                self.num_vars()
            )));
        }
        let mut acc = DMatrix::zeros(self.n, self.n);
        for (gamma, c) in self.basis.iter().zip(&self.coeffs) {
            let w = gamma.monomial_value(alpha);
            if w != 0.0 {
                acc += c * w;
            }
        }
        Ok(acc)
    }

    /// Sum of all coefficients, i.e. the value at `α = 1⃗`.
    pub fn coefficient_sum(&self) -> DMatrix<f64> {
        self.coeffs
            .iter()
            .fold(DMatrix::zeros(self.n, self.n), |acc, c| acc + c)
    }

    /// Largest absolute coefficient entry.
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| (c - c.transpose()).amax() <= tol)
    }
}

/// Multiplies each term of degree `d_i` by `(Σ_j α_j)^{d − d_i}`, where `d` is
/// the largest term degree, and collects like terms.
///
/// Terms may repeat exponents; they are summed.
pub fn homogenize(l: usize, n: usize, terms: &[Term]) -> Result<MatrixPolynomial> {
    if l == 0 {
        return Err(Error::InvalidConfig("polynomial needs at least one variable".into()));
    }
    for t in terms {
        if t.exponent.len() != l {
            return Err(Error::MalformedExponent(format!(
                "{:?} has {} entries, expected {l}",
                t.exponent,
                t.exponent.len()
            )));
        }
        if t.coeff.nrows() != n || t.coeff.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "term {:?} has a {}x{} coefficient, expected {n}x{n}",
                t.exponent,
                t.coeff.nrows(),
                t.coeff.ncols()
            )));
        }
    }
    let degree = terms.iter().map(|t| t.exponent.degree()).max().unwrap_or(0);
    let mut out = MatrixPolynomial::zeros(l, n, degree)?;
    for t in terms {
        let pad = degree - t.exponent.degree();
        // (Σα)^pad = Σ_{η ∈ W_pad} multinomial(η) α^η
        for eta in enumerate(l, pad)?.iter() {
            let w = eta.multinomial()? as f64;
            let target = t.exponent.add(eta);
            let slot = out
                .coeff_mut_of(&target)
                .expect("padded exponent has the target degree");
            *slot += &t.coeff * w;
        }
    }
    Ok(out)
}

/// `A(α)ᵀ P(α) + P(α) A(α)`.
pub fn lyapunov_residual(a: &MatrixPolynomial, p: &MatrixPolynomial, alpha: &[f64]) -> Result<DMatrix<f64>> {
    if a.num_vars() != p.num_vars() || a.dim() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}-variate {}x{}, P is {}-variate {}x{}",
            a.num_vars(),
            a.dim(),
            a.dim(),
            p.num_vars(),
            p.dim(),
            p.dim()
        )));
    }
    let av = a.evaluate(alpha)?;
    let pv = p.evaluate(alpha)?;
    Ok(av.transpose() * &pv + &pv * &av)
}
