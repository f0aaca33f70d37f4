//! Per-block work of one interior-point iteration, for a contiguous range of
//! blocks. A serial solve runs one kernel over all blocks; the parallel
//! runtime gives each worker its own.

use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};

use super::block::symmetrize;
use super::sum::{zeros, Compensated};
use super::{Step1Report, Step2Report, Step3Report, Step4Report, StepRule};
use crate::error::{Error, Result};
use crate::sdp_assembly::SdpProblem;

/// Position of `(k, l)`, `k ≤ l`, in the row-major packed upper triangle of
/// a `dim × dim` matrix.
#[inline]
pub fn packed_index(dim: usize, k: usize, l: usize) -> usize {
    debug_assert!(k <= l && l < dim);
    k * (2 * dim - k + 1) / 2 + (l - k)
}

pub struct BlockKernel<'p> {
    problem: &'p SdpProblem,
    range: Range<usize>,
    x: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    zinv: Vec<DMatrix<f64>>,
    g: Vec<DMatrix<f64>>,
    dx_hat: Vec<DMatrix<f64>>,
    dz_hat: Vec<DMatrix<f64>>,
    dx: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
}

impl<'p> BlockKernel<'p> {
    /// Starts from `X = Z = I` on the owned blocks.
    pub fn new(problem: &'p SdpProblem, range: Range<usize>) -> Self {
        let n = problem.n();
        let eye = vec![DMatrix::identity(n, n); range.len()];
        Self::with_iterate(problem, range, eye.clone(), eye)
    }

    pub fn with_iterate(
        problem: &'p SdpProblem,
        range: Range<usize>,
        x: Vec<DMatrix<f64>>,
        z: Vec<DMatrix<f64>>,
    ) -> Self {
        let n = problem.n();
        let zero = vec![DMatrix::zeros(n, n); range.len()];
        BlockKernel {
            problem,
            range,
            x,
            z,
            zinv: zero.clone(),
            g: zero.clone(),
            dx_hat: zero.clone(),
            dz_hat: zero.clone(),
            dx: zero.clone(),
            dz: zero,
        }
    }

    pub fn range(&self) -> Range<usize> {
        self.range.clone()
    }

    pub fn x(&self) -> &[DMatrix<f64>] {
        &self.x
    }

    pub fn z(&self) -> &[DMatrix<f64>] {
        &self.z
    }

    pub fn into_iterate(self) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        (self.x, self.z)
    }

    pub(crate) fn predictor_directions(&self) -> (&[DMatrix<f64>], &[DMatrix<f64>]) {
        (&self.dx_hat, &self.dz_hat)
    }

    pub(crate) fn total_directions(&self) -> (&[DMatrix<f64>], &[DMatrix<f64>]) {
        (&self.dx, &self.dz)
    }

    /// `Σ_k y_k B_{k,j}` for global block `j`.
    fn bt_block(&self, j: usize, y: &[f64]) -> DMatrix<f64> {
        let n = self.problem.n();
        let mut out = DMatrix::zeros(n, n);
        for c in self.problem.block_constraints(j) {
            let v = y[c.index];
            if v != 0.0 {
                c.add_scaled_to(v, &mut out);
            }
        }
        out
    }

    fn c_block(&self, j: usize) -> DMatrix<f64> {
        let n = self.problem.n();
        DMatrix::identity(n, n) * self.problem.c_scalars()[j]
    }

    /// Contributions to `ω_k = tr(B_k Z⁻¹ G X)` and to the upper triangle of
    /// `Λ_{kl} = tr(B_k Z⁻¹ B_l X)`.
    pub fn step1(&mut self, y: &[f64]) -> Result<Step1Report> {
        let kdim = self.problem.num_constraints();
        let mut omega = zeros(kdim);
        let mut lambda = zeros(kdim * (kdim + 1) / 2);
        for (b, j) in self.range.clone().enumerate() {
            let zinv = self.z[b]
                .clone()
                .cholesky()
                .map(|c| c.inverse())
                .ok_or_else(|| Error::Numerical(format!("dual slack block {} lost definiteness", j + 1)))?;
            let g = -self.bt_block(j, y) + &self.z[b] + self.c_block(j);
            let x = &self.x[b];
            let q = &zinv * &g * x;
            let cons = self.problem.block_constraints(j);
            let w: Vec<DMatrix<f64>> = cons.iter().map(|c| c.left_mul(&zinv) * x).collect();
            for (p, ck) in cons.iter().enumerate() {
                omega[ck.index].add(ck.trace_with(&q));
                for (cl, wl) in cons[p..].iter().zip(&w[p..]) {
                    lambda[packed_index(kdim, ck.index, cl.index)].add(ck.trace_with(wl));
                }
            }
            self.zinv[b] = zinv;
            self.g[b] = g;
        }
        Ok(Step1Report { omega, lambda })
    }

    /// Predictor directions for the owned blocks, and contributions to
    /// `tr(B_k Z⁻¹)` and `tr(B_k Z⁻¹ ΔẐ ΔX̂)`.
    pub fn step2(&mut self, dy_hat: &[f64]) -> Step2Report {
        let kdim = self.problem.num_constraints();
        let mut delta = zeros(kdim);
        let mut tau = zeros(kdim);
        for (b, j) in self.range.clone().enumerate() {
            let dz_hat = self.bt_block(j, dy_hat) - &self.g[b];
            let dx_hat = symmetrize(&(-&self.x[b] - &self.zinv[b] * &dz_hat * &self.x[b]));
            let second = &self.zinv[b] * &dz_hat * &dx_hat;
            for c in self.problem.block_constraints(j) {
                delta[c.index].add(c.trace_with(&self.zinv[b]));
                tau[c.index].add(c.trace_with(&second));
            }
            self.dx_hat[b] = dx_hat;
            self.dz_hat[b] = dz_hat;
        }
        Step2Report { delta, tau }
    }

    /// Corrector and total directions, then the largest admissible steps on
    /// the owned blocks.
    pub fn step3(&mut self, dy_bar: &[f64], mu: f64, rule: &StepRule) -> Step3Report {
        for (b, j) in self.range.clone().enumerate() {
            let dz_bar = self.bt_block(j, dy_bar);
            let zinv = &self.zinv[b];
            let dx_bar =
                symmetrize(&(zinv * mu - zinv * &self.dz_hat[b] * &self.dx_hat[b] - zinv * &dz_bar * &self.x[b]));
            self.dx[b] = &self.dx_hat[b] + dx_bar;
            self.dz[b] = &self.dz_hat[b] + dz_bar;
        }
        Step3Report {
            t_primal: admissible_step(&self.x, &self.dx, rule),
            t_dual: admissible_step(&self.z, &self.dz, rule),
        }
    }

    /// Takes the step and reports the quantities the root needs.
    pub fn step4(&mut self, t_primal: f64, t_dual: f64, y: &[f64]) -> Step4Report {
        let kdim = self.problem.num_constraints();
        let mut report = Step4Report {
            complementarity: Compensated::default(),
            primal_cost: Compensated::default(),
            trace_x: Compensated::default(),
            dual_residual_sq: Compensated::default(),
            constraint_values: zeros(kdim),
            slack_definite: true,
        };
        for (b, j) in self.range.clone().enumerate() {
            self.x[b] += &self.dx[b] * t_primal;
            self.z[b] += &self.dz[b] * t_dual;
            let x = &self.x[b];
            let c = self.c_block(j);
            report.complementarity.add(self.z[b].dot(x));
            report.primal_cost.add(c.dot(x));
            report.trace_x.add(x.trace());
            let slack = self.bt_block(j, y) - c;
            report.dual_residual_sq.add((&self.z[b] - &slack).norm_squared());
            report.slack_definite &= slack.cholesky().is_some();
            for con in self.problem.block_constraints(j) {
                report.constraint_values[con.index].add(con.trace_with(x));
            }
        }
        report
    }
}

/// Largest `t` with `M + s·D ≻ 0` for all `s ∈ [0, t]`, `+∞` when unbounded.
pub fn max_step(m: &DMatrix<f64>, d: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l();
    // L⁻¹ D L⁻ᵀ
    let left = l.solve_lower_triangular(d)?;
    let both = l.solve_lower_triangular(&left.transpose())?;
    let lam = SymmetricEigen::new(symmetrize(&both)).eigenvalues.min();
    Some(if lam >= 0.0 { f64::INFINITY } else { -1.0 / lam })
}

/// Fraction-to-boundary step over a set of blocks, confirmed by Cholesky
/// and shortened geometrically when the confirmation fails. Returns 0 when
/// no step above the floor is admissible.
pub fn admissible_step(m: &[DMatrix<f64>], d: &[DMatrix<f64>], rule: &StepRule) -> f64 {
    let mut t_max = f64::INFINITY;
    for (mb, db) in m.iter().zip(d) {
        match max_step(mb, db) {
            Some(t) => t_max = t_max.min(t),
            None => return 0.0,
        }
    }
    let mut t = if t_max.is_finite() {
        (rule.fraction * t_max).min(1.0)
    } else {
        1.0
    };
    while t >= rule.floor {
        if m.iter().zip(d).all(|(mb, db)| (mb + db * t).cholesky().is_some()) {
            return t;
        }
        t *= rule.backtrack;
    }
    0.0
}
