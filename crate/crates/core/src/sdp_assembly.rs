//! Assembly of the block-diagonal SDP from the Polya tables.
//!
//! Primal: maximize `tr(CX)` subject to `tr(B_k X) = 1`, `X ⪰ 0`.
//! Dual: minimize `Σ y_k` subject to `Σ y_k B_k − C ⪰ 0`.
//!
//! The dual variable `y` holds the upper triangles of the coefficients of
//! `P(α)`: slice `h` of length `Ñ = n(n+1)/2` maps to `P_h` through
//! [`v_map`]. The first `L` diagonal blocks encode positivity of the
//! coefficients of `(Σα)^{d1} P(α)` (offset by a `δ` margin), the last `M`
//! blocks negativity of the coefficients of `(Σα)^{d2} (AᵀP + PA)`.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polya::{beta_table, h_table, BetaTable, HTable, PolyaConfig};
use crate::polymatrix::MatrixPolynomial;
use crate::sdp_solver::BlockDiagMatrix;

/// Basis `E_1 … E_Ñ` of symmetric `n×n` matrices.
///
/// `E_k` for `k ≤ n` is the diagonal unit `e_k e_kᵀ`. The remaining ones are
/// `F + Fᵀ` for the off-diagonal units `F = e_i e_jᵀ`, `i < j`, listed by
/// diagonal offset: `(1,2), (2,3), …, (n−1,n), (1,3), …, (1,n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl SymBasis {
    pub fn new(n: usize) -> Self {
        let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        for offset in 1..n {
            pairs.extend((0..n - offset).map(|i| (i, i + offset)));
        }
        SymBasis { n, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `Ñ = n(n+1)/2`.
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// 0-based `(row, col)` of the unit behind `E_k`, `k` 1-based, `row ≤ col`.
    pub fn pair(&self, k: usize) -> Result<(usize, usize)> {
        k.checked_sub(1)
            .and_then(|p| self.pairs.get(p).copied())
            .ok_or(Error::IndexOutOfRange {
                index: k,
                max: self.dim(),
            })
    }

    pub fn matrix(&self, k: usize) -> Result<DMatrix<f64>> {
        let (i, j) = self.pair(k)?;
        let mut m = DMatrix::zeros(self.n, self.n);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
        Ok(m)
    }

    pub(crate) fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// `V_h(x) = Σ_j E_j x_{j + Ñ(h−1)}`, `h` 1-based.
pub fn v_map(sym: &SymBasis, h: usize, x: &[f64]) -> Result<DMatrix<f64>> {
    let nt = sym.dim();
    if nt == 0 || !x.len().is_multiple_of(nt) {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} is not a whole number of {nt}-slices",
            x.len()
        )));
    }
    let slices = x.len() / nt;
    if h == 0 || h > slices {
        return Err(Error::IndexOutOfRange { index: h, max: slices });
    }
    let slice = &x[(h - 1) * nt..h * nt];
    let mut m = DMatrix::zeros(sym.n, sym.n);
    for (&(i, j), &v) in sym.pairs.iter().zip(slice) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

/// `K = f(l, d_p) · n(n+1)/2`.
pub fn compute_k(config: &PolyaConfig) -> Result<usize> {
    config.num_dual_vars()
}

/// Non-zero entries of one constraint matrix `B_k` within one diagonal block.
///
/// Both triangles are listed.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintBlock {
    /// 0-based constraint index `k`.
    pub index: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl ConstraintBlock {
    fn from_dense(index: usize, m: &DMatrix<f64>) -> Option<Self> {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        (!entries.is_empty()).then_some(ConstraintBlock { index, entries })
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    /// `tr(B M) = Σ B_pq M_qp`.
    #[inline]
    pub fn trace_with(&self, m: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(p, q, v)| v * m[(q, p)]).sum()
    }

    /// `out += t · B`.
    #[inline]
    pub fn add_scaled_to(&self, t: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += t * v;
        }
    }

    /// `M · B` exploiting sparsity of `B`.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for &(c, d, v) in &self.entries {
            let src = m.column(c);
            let mut dst = out.column_mut(d);
            dst.axpy(v, &src, 1.0);
        }
        out
    }
}

/// The assembled SDP.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    config: PolyaConfig,
    delta: f64,
    sym: SymBasis,
    l0: usize,
    num_p: usize,
    num_lyap: usize,
    k: usize,
    c: Vec<f64>,
    blocks: Vec<Vec<ConstraintBlock>>,
    a: Vec<f64>,
}

impl SdpProblem {
    /// Builds from per-block pieces. `c` holds the scalar multiplier of the
    /// identity in each block of `C`.
    pub fn from_parts(config: PolyaConfig, delta: f64, c: Vec<f64>, blocks: Vec<Vec<ConstraintBlock>>) -> Result<Self> {
        config.validate()?;
        let l0 = config.l0()?;
        let num_p = config.num_p_blocks()?;
        let num_lyap = config.num_lyap_blocks()?;
        let k = config.num_dual_vars()?;
        let total = num_p + num_lyap;
        if c.len() != total || blocks.len() != total {
            return Err(Error::DimensionMismatch(format!(
                "expected {total} blocks, got {} C entries and {} constraint blocks",
                c.len(),
                blocks.len()
            )));
        }
        Ok(SdpProblem {
            config,
            delta,
            sym: SymBasis::new(config.n),
            l0,
            num_p,
            num_lyap,
            k,
            c,
            blocks,
            a: vec![1.0; k],
        })
    }

    pub fn config(&self) -> &PolyaConfig {
        &self.config
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sym_basis(&self) -> &SymBasis {
        &self.sym
    }

    /// Block size `n`.
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn l0(&self) -> usize {
        self.l0
    }

    /// `L`, the number of positivity blocks.
    pub fn num_p_blocks(&self) -> usize {
        self.num_p
    }

    /// `M`, the number of Lyapunov blocks.
    pub fn num_lyap_blocks(&self) -> usize {
        self.num_lyap
    }

    pub fn num_blocks(&self) -> usize {
        self.num_p + self.num_lyap
    }

    /// `K`.
    pub fn num_constraints(&self) -> usize {
        self.k
    }

    /// Side length of the primal matrix, `(L + M) n`.
    pub fn primal_dim(&self) -> usize {
        self.num_blocks() * self.config.n
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn c_scalars(&self) -> &[f64] {
        &self.c
    }

    pub fn c(&self) -> BlockDiagMatrix {
        BlockDiagMatrix::scaled_identity(&self.c, self.config.n)
    }

    /// Constraint pieces living in block `j` (0-based), ascending in `k`.
    pub fn block_constraints(&self, j: usize) -> &[ConstraintBlock] {
        &self.blocks[j]
    }

    /// `B_k` materialized, `k` 0-based.
    pub fn constraint_matrix(&self, k: usize) -> BlockDiagMatrix {
        let n = self.config.n;
        let mut out = BlockDiagMatrix::zeros(self.num_blocks(), n);
        for (j, cons) in self.blocks.iter().enumerate() {
            if let Ok(pos) = cons.binary_search_by_key(&k, |c| c.index) {
                *out.block_mut(j) = cons[pos].to_dense(n);
            }
        }
        out
    }

    /// Coefficients `P_h = V_h(y)`, `h = 1 … L0`.
    pub fn lyapunov_coeffs(&self, y: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        if y.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "dual vector has {} entries, expected {}",
                y.len(),
                self.k
            )));
        }
        (1..=self.l0).map(|h| v_map(&self.sym, h, y)).collect()
    }

    /// `P(α)` built from a dual vector.
    pub fn lyapunov_polynomial(&self, y: &[f64]) -> Result<MatrixPolynomial> {
        MatrixPolynomial::from_coeffs(self.config.l, self.config.n, self.config.d_p, self.lyapunov_coeffs(y)?)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "positivity margin must be finite and non-negative, got {delta}"
        )));
    }
    Ok(())
}

/// Multinomial weights `d_p! / (h_1! ⋯ h_l!)` of the table rows.
pub fn row_weights(beta: &BetaTable) -> Result<Vec<f64>> {
    beta.rows().iter().map(|h| h.multinomial().map(|m| m as f64)).collect()
}

/// Scalar multipliers of the identity in the blocks `range` of `C`.
pub fn c_scalars(config: &PolyaConfig, delta: f64, beta: &BetaTable, range: Range<usize>) -> Result<Vec<f64>> {
    check_delta(delta)?;
    let num_p = config.num_p_blocks()?;
    let weights = row_weights(beta)?;
    Ok(range
        .map(|j| {
            if j < num_p {
                let mass: f64 = beta.column(j).iter().zip(&weights).map(|(&b, w)| b as f64 * w).sum();
                delta * mass
            } else {
                0.0
            }
        })
        .collect())
}

/// `C = diag(C_1, …, C_{L+M})`.
pub fn assemble_c(config: &PolyaConfig, delta: f64, beta: &BetaTable) -> Result<BlockDiagMatrix> {
    let total = config.num_p_blocks()? + config.num_lyap_blocks()?;
    Ok(BlockDiagMatrix::scaled_identity(
        &c_scalars(config, delta, beta, 0..total)?,
        config.n,
    ))
}

fn check_tables(config: &PolyaConfig, beta: &BetaTable, h: &HTable) -> Result<()> {
    let (l0, num_p, num_lyap) = (config.l0()?, config.num_p_blocks()?, config.num_lyap_blocks()?);
    if beta.num_rows() != l0
        || h.num_rows() != l0
        || beta.num_cols() != num_p
        || h.num_cols() != num_lyap
        || h.dim() != config.n
    {
        return Err(Error::DimensionMismatch(format!(
            "tables are {}x{} and {}x{}, configuration expects {l0}x{num_p} and {l0}x{num_lyap}",
            beta.num_rows(),
            beta.num_cols(),
            h.num_rows(),
            h.num_cols()
        )));
    }
    Ok(())
}

/// Constraint pieces for blocks `range`, one list per block.
pub fn assemble_blocks(
    config: &PolyaConfig,
    beta: &BetaTable,
    h: &HTable,
    range: Range<usize>,
) -> Result<Vec<Vec<ConstraintBlock>>> {
    check_tables(config, beta, h)?;
    let sym = SymBasis::new(config.n);
    let num_p = beta.num_cols();
    Ok(range
        .map(|j| {
            if j < num_p {
                positivity_block(&sym, beta.column(j))
            } else {
                lyapunov_block(&sym, h.column(j - num_p))
            }
        })
        .collect())
}

// B_{k,j} = β[h,j] E_s with k = (h, s).
fn positivity_block(sym: &SymBasis, column: &[u64]) -> Vec<ConstraintBlock> {
    let nt = sym.dim();
    let mut out = Vec::new();
    for (row, &b) in column.iter().enumerate() {
        if b == 0 {
            continue;
        }
        let b = b as f64;
        for (s, &(i, j)) in sym.pairs().iter().enumerate() {
            let entries = if i == j {
                vec![(i, i, b)]
            } else {
                vec![(i, j, b), (j, i, b)]
            };
            out.push(ConstraintBlock {
                index: row * nt + s,
                entries,
            });
        }
    }
    out
}

// B_{k,j} = −(Hᵀ E_s + E_s H) with k = (h, s).
fn lyapunov_block(sym: &SymBasis, column: &[DMatrix<f64>]) -> Vec<ConstraintBlock> {
    let nt = sym.dim();
    let n = sym.n();
    let mut out = Vec::new();
    for (row, hm) in column.iter().enumerate() {
        if hm.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (s, &(i, j)) in sym.pairs().iter().enumerate() {
            // E_s H has rows i and j of H swapped into rows j and i.
            let mut eh = DMatrix::zeros(n, n);
            eh.row_mut(i).copy_from(&hm.row(j));
            if i != j {
                eh.row_mut(j).copy_from(&hm.row(i));
            }
            let m = -(&eh + eh.transpose());
            if let Some(c) = ConstraintBlock::from_dense(row * nt + s, &m) {
                out.push(c);
            }
        }
    }
    out
}

/// All `K` constraint matrices, materialized.
pub fn assemble_b(config: &PolyaConfig, beta: &BetaTable, h: &HTable) -> Result<Vec<BlockDiagMatrix>> {
    let total = config.num_p_blocks()? + config.num_lyap_blocks()?;
    let blocks = assemble_blocks(config, beta, h, 0..total)?;
    let n = config.n;
    let mut out = vec![BlockDiagMatrix::zeros(total, n); config.num_dual_vars()?];
    for (j, cons) in blocks.iter().enumerate() {
        for c in cons {
            *out[c.index].block_mut(j) = c.to_dense(n);
        }
    }
    Ok(out)
}

/// Serial set-up: Polya tables and SDP assembly in one go.
pub fn build_problem(config: &PolyaConfig, a: &MatrixPolynomial, delta: f64) -> Result<SdpProblem> {
    check_delta(delta)?;
    let beta = beta_table(config)?;
    let h = h_table(config, a)?;
    problem_from_tables(config, delta, &beta, &h)
}

pub fn problem_from_tables(config: &PolyaConfig, delta: f64, beta: &BetaTable, h: &HTable) -> Result<SdpProblem> {
    let total = beta.num_cols() + h.num_cols();
    let c = c_scalars(config, delta, beta, 0..total)?;
    let blocks = assemble_blocks(config, beta, h, 0..total)?;
    SdpProblem::from_parts(*config, delta, c, blocks)
}

/// Assignment of contiguous block ranges to workers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    ranges: Vec<Range<usize>>,
}

impl BlockPartition {
    /// The first `count mod workers` workers get one extra block.
    pub fn balanced(count: usize, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("need at least one worker".into()));
        }
        let base = count / workers;
        let extra = count % workers;
        let mut start = 0;
        let ranges = (0..workers)
            .map(|w| {
                let len = base + usize::from(w < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        Ok(BlockPartition { ranges })
    }

    /// `floor(count / workers)` each, the remainder appended to the last worker.
    pub fn remainder_last(count: usize, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("need at least one worker".into()));
        }
        let base = count / workers;
        let ranges = (0..workers)
            .map(|w| {
                let end = if w + 1 == workers { count } else { (w + 1) * base };
                w * base..end
            })
            .collect();
        Ok(BlockPartition { ranges })
    }

    pub fn workers(&self) -> usize {
        self.ranges.len()
    }

    pub fn range(&self, worker: usize) -> Range<usize> {
        self.ranges[worker].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    /// Worker owning block `j` (0-based).
    pub fn owner(&self, block: usize) -> Option<usize> {
        self.ranges.iter().position(|r| r.contains(&block))
    }
}

/// Balanced partition of the problem's blocks over `workers`.
pub fn partition(problem: &SdpProblem, workers: usize) -> Result<BlockPartition> {
    BlockPartition::balanced(problem.num_blocks(), workers)
}
