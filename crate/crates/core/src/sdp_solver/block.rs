use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Block-diagonal matrix with equally sized square blocks.
///
/// Only the diagonal blocks are stored, so no operation here can produce
/// entries outside them.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDiagMatrix {
    n: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl BlockDiagMatrix {
    pub fn zeros(count: usize, n: usize) -> Self {
        BlockDiagMatrix {
            n,
            blocks: vec![DMatrix::zeros(n, n); count],
        }
    }

    pub fn identity(count: usize, n: usize) -> Self {
        BlockDiagMatrix {
            n,
            blocks: vec![DMatrix::identity(n, n); count],
        }
    }

    /// `diag(s_1 I, …, s_m I)`.
    pub fn scaled_identity(scalars: &[f64], n: usize) -> Self {
        BlockDiagMatrix {
            n,
            blocks: scalars.iter().map(|&s| DMatrix::identity(n, n) * s).collect(),
        }
    }

    pub fn from_blocks(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = blocks.first().map_or(0, |b| b.nrows());
        if let Some(b) = blocks.iter().find(|b| b.nrows() != n || b.ncols() != n) {
            return Err(Error::DimensionMismatch(format!(
                "block is {}x{}, expected {n}x{n}",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(BlockDiagMatrix { n, blocks })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self) -> usize {
        self.n
    }

    /// Side length of the full matrix.
    pub fn dim(&self) -> usize {
        self.n * self.blocks.len()
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut DMatrix<f64> {
        &mut self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<DMatrix<f64>> {
        self.blocks
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.blocks.len() != other.blocks.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} blocks of size {} vs {} blocks of size {}",
                self.blocks.len(),
                self.n,
                other.blocks.len(),
                other.n
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    /// Blockwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_map(other, |a, b| a * b))
    }

    fn zip_map(&self, other: &Self, f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>) -> Self {
        BlockDiagMatrix {
            n: self.n,
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        BlockDiagMatrix {
            n: self.n,
            blocks: self.blocks.iter().map(|b| b * s).collect(),
        }
    }

    /// `self += t · other`.
    pub fn axpy(&mut self, t: f64, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a += b * t;
        }
        Ok(())
    }

    /// `tr(selfᵀ other)`, the Frobenius inner product.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.dot(b)).sum())
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn symmetric_part(&self) -> Self {
        BlockDiagMatrix {
            n: self.n,
            blocks: self.blocks.iter().map(symmetrize).collect(),
        }
    }

    /// Largest `|B − Bᵀ|` entry over all blocks.
    pub fn asymmetry(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - b.transpose()).amax())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// Positive definiteness by blockwise Cholesky.
    pub fn is_positive_definite(&self) -> bool {
        self.blocks.iter().all(|b| b.clone().cholesky().is_some())
    }

    /// Inverse of a positive definite matrix, block by block.
    pub fn inverse_pd(&self) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                b.clone()
                    .cholesky()
                    .map(|c| c.inverse())
                    .ok_or_else(|| Error::Numerical(format!("block {} is not positive definite", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockDiagMatrix { n: self.n, blocks })
    }

    /// Smallest eigenvalue across blocks of the symmetric part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| SymmetricEigen::new(symmetrize(b)).eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(|b| b.amax()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for (i, b) in self.blocks.iter().enumerate() {
            out.view_mut((i * self.n, i * self.n), (self.n, self.n)).copy_from(b);
        }
        out
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
