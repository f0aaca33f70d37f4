//! Polya coefficient tables.
//!
//! For a Lyapunov candidate `P(α) = Σ_h P_h α^h` of degree `d_p`, the
//! coefficients of `(Σα)^{d1} P(α)` are linear in the `P_h`:
//! `Σ_h β[h,γ] P_h`. Likewise the coefficients of
//! `(Σα)^{d2} (Aᵀ(α)P(α) + P(α)A(α))` are `Σ_h (H[h,γ]ᵀ P_h + P_h H[h,γ])`.
//! Both tables are built by the same shift-and-sum recursion over `W_1`:
//! column `γ` of the next table is the sum of the columns `γ − e_k` of the
//! previous one. Columns are independent, which is what the parallel set-up
//! partitions on.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::monomial::{cardinality, enumerate, MonomialBasis};
use crate::polymatrix::MatrixPolynomial;

/// Degrees and sizes of one Polya relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolyaConfig {
    /// Number of uncertain parameters.
    pub l: usize,
    /// State dimension.
    pub n: usize,
    /// Degree of `P(α)`.
    pub d_p: usize,
    /// Degree of the homogeneous `A(α)`.
    pub d_a: usize,
    /// Polya exponent applied to `P(α)`.
    pub d1: usize,
    /// Polya exponent applied to `AᵀP + PA`.
    pub d2: usize,
}

impl PolyaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidConfig("need at least one uncertain parameter".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("state dimension must be positive".into()));
        }
        Ok(())
    }

    /// Degree of `P(α)A(α)`.
    pub fn d_pa(&self) -> usize {
        self.d_p + self.d_a
    }

    /// `L0 = f(l, d_p)`, the number of coefficients of `P(α)`.
    pub fn l0(&self) -> Result<usize> {
        cardinality(self.l, self.d_p)
    }

    /// `L = f(l, d_p + d1)`.
    pub fn num_p_blocks(&self) -> Result<usize> {
        cardinality(self.l, self.d_p + self.d1)
    }

    /// `M = f(l, d_pa + d2)`.
    pub fn num_lyap_blocks(&self) -> Result<usize> {
        cardinality(self.l, self.d_pa() + self.d2)
    }

    /// `Ñ = n(n+1)/2`.
    pub fn sym_dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// `K = L0 · Ñ`, the number of dual variables.
    pub fn num_dual_vars(&self) -> Result<usize> {
        self.l0()?
            .checked_mul(self.sym_dim())
            .ok_or(Error::Overflow("number of dual variables"))
    }
}

/// Integer coefficients `β[h, γ]`, `h ∈ W_{d_p}`, `γ ∈ W_{d_p + i}`.
#[derive(Clone, Debug)]
pub struct BetaTable {
    rows: MonomialBasis,
    cols: MonomialBasis,
    exponent: usize,
    // column-major: data[col * rows + row]
    data: Vec<u64>,
}

impl BetaTable {
    pub fn rows(&self) -> &MonomialBasis {
        &self.rows
    }

    pub fn cols(&self) -> &MonomialBasis {
        &self.cols
    }

    /// Number of Polya iterations applied so far.
    pub fn exponent(&self) -> usize {
        self.exponent
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    /// `β[h, γ]` by 1-based indices.
    pub fn get(&self, h: usize, gamma: usize) -> u64 {
        self.data[(gamma - 1) * self.num_rows() + (h - 1)]
    }

    /// Column `γ` (0-based position) across all rows.
    pub fn column(&self, col: usize) -> &[u64] {
        let r = self.num_rows();
        &self.data[col * r..(col + 1) * r]
    }

    pub fn row_sums(&self) -> Result<Vec<u64>> {
        let mut sums = vec![0u64; self.num_rows()];
        for col in 0..self.num_cols() {
            for (s, v) in sums.iter_mut().zip(self.column(col)) {
                *s = s.checked_add(*v).ok_or(Error::Overflow("beta row sum"))?;
            }
        }
        Ok(sums)
    }

    pub(crate) fn from_parts(rows: MonomialBasis, cols: MonomialBasis, exponent: usize, data: Vec<u64>) -> Self {
        debug_assert_eq!(data.len(), rows.len() * cols.len());
        BetaTable {
            rows,
            cols,
            exponent,
            data,
        }
    }
}

/// Matrix coefficients `H[h, γ]`, `h ∈ W_{d_p}`, `γ ∈ W_{d_pa + i}`.
#[derive(Clone, Debug)]
pub struct HTable {
    rows: MonomialBasis,
    cols: MonomialBasis,
    exponent: usize,
    n: usize,
    // column-major like BetaTable
    data: Vec<DMatrix<f64>>,
}

impl HTable {
    pub fn rows(&self) -> &MonomialBasis {
        &self.rows
    }

    pub fn cols(&self) -> &MonomialBasis {
        &self.cols
    }

    pub fn exponent(&self) -> usize {
        self.exponent
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    /// `H[h, γ]` by 1-based indices.
    pub fn get(&self, h: usize, gamma: usize) -> &DMatrix<f64> {
        &self.data[(gamma - 1) * self.num_rows() + (h - 1)]
    }

    pub fn column(&self, col: usize) -> &[DMatrix<f64>] {
        let r = self.num_rows();
        &self.data[col * r..(col + 1) * r]
    }

    pub fn row_sums(&self) -> Vec<DMatrix<f64>> {
        let mut sums = vec![DMatrix::zeros(self.n, self.n); self.num_rows()];
        for col in 0..self.num_cols() {
            for (s, v) in sums.iter_mut().zip(self.column(col)) {
                *s += v;
            }
        }
        sums
    }

    pub(crate) fn from_parts(
        rows: MonomialBasis,
        cols: MonomialBasis,
        exponent: usize,
        n: usize,
        data: Vec<DMatrix<f64>>,
    ) -> Self {
        debug_assert_eq!(data.len(), rows.len() * cols.len());
        HTable {
            rows,
            cols,
            exponent,
            n,
            data,
        }
    }
}

/// Kronecker-delta table at `d1 = 0`.
pub fn init_beta(config: &PolyaConfig) -> Result<BetaTable> {
    config.validate()?;
    let rows = enumerate(config.l, config.d_p)?;
    let r = rows.len();
    let mut data = vec![0u64; r * r];
    for i in 0..r {
        data[i * r + i] = 1;
    }
    Ok(BetaTable::from_parts(rows.clone(), rows, 0, data))
}

/// Columns `range` (0-based positions in `next_cols`) of the next β table.
pub fn beta_columns(prev: &BetaTable, next_cols: &MonomialBasis, range: Range<usize>) -> Result<Vec<u64>> {
    let r = prev.num_rows();
    let l = prev.rows.num_vars();
    let mut out = vec![0u64; r * range.len()];
    for (slot, col) in range.enumerate() {
        let gamma = &next_cols.exponents()[col];
        let dst = &mut out[slot * r..(slot + 1) * r];
        for k in 0..l {
            let Some(src_col) = gamma.minus_unit(k).and_then(|s| prev.cols.position(&s)) else {
                continue;
            };
            for (d, s) in dst.iter_mut().zip(prev.column(src_col)) {
                *d = d.checked_add(*s).ok_or(Error::Overflow("beta coefficient"))?;
            }
        }
    }
    Ok(out)
}

/// One Polya iteration on β.
pub fn iterate_beta(prev: &BetaTable) -> Result<BetaTable> {
    let next_cols = enumerate(prev.rows.num_vars(), prev.cols.degree() + 1)?;
    let data = beta_columns(prev, &next_cols, 0..next_cols.len())?;
    Ok(BetaTable::from_parts(
        prev.rows.clone(),
        next_cols,
        prev.exponent + 1,
        data,
    ))
}

/// β after `config.d1` iterations.
pub fn beta_table(config: &PolyaConfig) -> Result<BetaTable> {
    let mut t = init_beta(config)?;
    for _ in 0..config.d1 {
        t = iterate_beta(&t)?;
    }
    Ok(t)
}

fn check_a(config: &PolyaConfig, a: &MatrixPolynomial) -> Result<()> {
    config.validate()?;
    if a.num_vars() != config.l || a.dim() != config.n || a.degree() != config.d_a {
        return Err(Error::DimensionMismatch(format!(
            "A(α) is {}-variate, {}x{}, degree {}; configuration expects {}-variate, {}x{}, degree {}",
            a.num_vars(),
            a.dim(),
            a.dim(),
            a.degree(),
            config.l,
            config.n,
            config.n,
            config.d_a
        )));
    }
    Ok(())
}

/// Columns `range` of the initial H table: `H[h, γ] = A_{γ − h}` when
/// `γ − h` is a valid exponent, zero otherwise.
pub fn init_h_columns(
    config: &PolyaConfig,
    a: &MatrixPolynomial,
    rows: &MonomialBasis,
    cols: &MonomialBasis,
    range: Range<usize>,
) -> Result<Vec<DMatrix<f64>>> {
    check_a(config, a)?;
    let n = config.n;
    let mut out = Vec::with_capacity(rows.len() * range.len());
    for col in range {
        let gamma = &cols.exponents()[col];
        for h in rows.iter() {
            let m = gamma
                .checked_sub(h)
                .and_then(|lambda| a.coeff_of(&lambda).cloned())
                .unwrap_or_else(|| DMatrix::zeros(n, n));
            out.push(m);
        }
    }
    Ok(out)
}

/// H table at `d2 = 0`.
pub fn init_h(config: &PolyaConfig, a: &MatrixPolynomial) -> Result<HTable> {
    check_a(config, a)?;
    let rows = enumerate(config.l, config.d_p)?;
    let cols = enumerate(config.l, config.d_pa())?;
    let data = init_h_columns(config, a, &rows, &cols, 0..cols.len())?;
    Ok(HTable::from_parts(rows, cols, 0, config.n, data))
}

/// Columns `range` of the next H table.
pub fn h_columns(prev: &HTable, next_cols: &MonomialBasis, range: Range<usize>) -> Vec<DMatrix<f64>> {
    let r = prev.num_rows();
    let l = prev.rows.num_vars();
    let n = prev.n;
    let mut out = vec![DMatrix::zeros(n, n); r * range.len()];
    for (slot, col) in range.enumerate() {
        let gamma = &next_cols.exponents()[col];
        let dst = &mut out[slot * r..(slot + 1) * r];
        for k in 0..l {
            let Some(src_col) = gamma.minus_unit(k).and_then(|s| prev.cols.position(&s)) else {
                continue;
            };
            for (d, s) in dst.iter_mut().zip(prev.column(src_col)) {
                *d += s;
            }
        }
    }
    out
}

/// One Polya iteration on H.
pub fn iterate_h(prev: &HTable) -> Result<HTable> {
    let next_cols = enumerate(prev.rows.num_vars(), prev.cols.degree() + 1)?;
    let data = h_columns(prev, &next_cols, 0..next_cols.len());
    Ok(HTable::from_parts(
        prev.rows.clone(),
        next_cols,
        prev.exponent + 1,
        prev.n,
        data,
    ))
}

/// H after `config.d2` iterations.
pub fn h_table(config: &PolyaConfig, a: &MatrixPolynomial) -> Result<HTable> {
    let mut t = init_h(config, a)?;
    for _ in 0..config.d2 {
        t = iterate_h(&t)?;
    }
    Ok(t)
}

/// Evaluates both Polya-multiplied conditions from the tables:
/// `(Σ_γ [Σ_h β[h,γ] P_h] α^γ, Σ_γ [Σ_h H[h,γ]ᵀP_h + P_h H[h,γ]] α^γ)`.
pub fn reconstruct_condition(
    beta: &BetaTable,
    h: &HTable,
    p: &MatrixPolynomial,
    alpha: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = p.dim();
    if p.coeffs().len() != beta.num_rows() || p.coeffs().len() != h.num_rows() || h.n != n {
        return Err(Error::DimensionMismatch("P(α) does not match the table rows".into()));
    }
    if alpha.len() != p.num_vars() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} entries, expected {}",
            alpha.len(),
            p.num_vars()
        )));
    }
    let mut first = DMatrix::zeros(n, n);
    for (col, gamma) in beta.cols.iter().enumerate() {
        let w = gamma.monomial_value(alpha);
        let mut c = DMatrix::zeros(n, n);
        for (b, ph) in beta.column(col).iter().zip(p.coeffs()) {
            if *b != 0 {
                c += ph * (*b as f64);
            }
        }
        first += c * w;
    }
    let mut second = DMatrix::zeros(n, n);
    for (col, gamma) in h.cols.iter().enumerate() {
        let w = gamma.monomial_value(alpha);
        let mut c = DMatrix::zeros(n, n);
        for (hm, ph) in h.column(col).iter().zip(p.coeffs()) {
            c += hm.transpose() * ph + ph * hm;
        }
        second += c * w;
    }
    Ok((first, second))
}
