//! Primal-dual predictor-corrector interior-point method for the assembled
//! block-diagonal SDP.
//!
//! Every iterate and direction is stored blockwise, so the block-diagonal
//! structure is kept by construction. One iteration runs in four worker
//! phases separated by root phases:
//!
//! 1. workers: `ω`, `Λ` contributions; root: solve `Λ Δŷ = Ω1`
//! 2. workers: predictor directions, `tr(B_k Z⁻¹)`, `tr(B_k Z⁻¹ΔẐΔX̂)`;
//!    root: solve `Λ Δȳ = Ω2`
//! 3. workers: corrector and total directions, admissible steps; root: take
//!    the minimum
//! 4. workers: update, report `tr(ZX)`, `tr(CX)` and residual data; root:
//!    update `μ`, test termination
//!
//! The root side lives in [`Driver`], which talks to any [`WorkerPool`].

mod block;
mod kernel;
mod sum;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

pub use block::BlockDiagMatrix;
pub use kernel::{admissible_step, max_step, packed_index, BlockKernel};
pub use sum::Compensated;
use sum::{reduce, reduce_scalar, values};

use crate::error::{Error, Result};
use crate::sdp_assembly::SdpProblem;

/// Step-length rule shared by all workers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRule {
    /// Fraction of the distance to the boundary of the cone.
    pub fraction: f64,
    /// Shrink factor when the Cholesky confirmation fails.
    pub backtrack: f64,
    /// Steps below this are treated as a stall.
    pub floor: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule {
            fraction: 0.98,
            backtrack: 0.9,
            floor: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Absolute duality-gap tolerance.
    pub eps: f64,
    pub max_iter: usize,
    /// Centering factor applied to the average complementarity.
    pub sigma: f64,
    /// Tolerance on primal and dual infeasibility at termination.
    pub feasibility_tol: f64,
    /// `tr(X)` or `|Σy|` beyond this is reported as divergence.
    pub divergence_bound: f64,
    pub step: StepRule,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            eps: 1e-8,
            max_iter: 200,
            sigma: 1.0 / 3.0,
            feasibility_tol: 1e-7,
            divergence_bound: 1e10,
            step: StepRule::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverStatus {
    Feasible,
    MaxIterations,
    NumericalFailure,
}

/// One row of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub mu: f64,
    pub gap: f64,
    pub t_primal: f64,
    pub t_dual: f64,
    pub primal_cost: f64,
    pub dual_cost: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

pub const LOG_HEADER: &str = "iteration,mu,gap,t_p,t_d,phi,psi";

/// The iteration log as CSV.
pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.iteration, r.mu, r.gap, r.t_primal, r.t_dual, r.primal_cost, r.dual_cost
        );
    }
    out
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub status: SolverStatus,
    /// Why the solve stopped short of `Feasible`.
    pub reason: Option<String>,
    pub y: Vec<f64>,
    pub gap: f64,
    pub primal_cost: f64,
    pub dual_cost: f64,
    /// `P_h = V_h(y)`, `h = 1 … L0`.
    pub p_coeffs: Vec<DMatrix<f64>>,
    pub log: Vec<LogRow>,
}

impl SolverResult {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SolverStatus::Feasible
    }
}

/// Worker output of phase 1. `lambda` is a packed upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct Step1Report {
    pub omega: Vec<Compensated>,
    pub lambda: Vec<Compensated>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step2Report {
    pub delta: Vec<Compensated>,
    pub tau: Vec<Compensated>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step3Report {
    pub t_primal: f64,
    pub t_dual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step4Report {
    pub complementarity: Compensated,
    pub primal_cost: Compensated,
    pub trace_x: Compensated,
    pub dual_residual_sq: Compensated,
    pub constraint_values: Vec<Compensated>,
    pub slack_definite: bool,
}

/// The worker side of an iteration. Each call returns one report per
/// worker, in ascending worker order.
pub trait WorkerPool {
    fn step1(&mut self, y: &[f64]) -> Result<Vec<Step1Report>>;
    fn step2(&mut self, dy_hat: &[f64]) -> Result<Vec<Step2Report>>;
    fn step3(&mut self, dy_bar: &[f64], mu: f64) -> Result<Vec<Step3Report>>;
    fn step4(&mut self, t_primal: f64, t_dual: f64, y: &[f64]) -> Result<Vec<Step4Report>>;
}

/// A single in-thread worker owning every block.
pub struct SerialPool<'p> {
    kernel: BlockKernel<'p>,
    rule: StepRule,
}

impl<'p> SerialPool<'p> {
    pub fn new(problem: &'p SdpProblem, rule: StepRule) -> Self {
        SerialPool {
            kernel: BlockKernel::new(problem, 0..problem.num_blocks()),
            rule,
        }
    }

    pub fn kernel(&self) -> &BlockKernel<'p> {
        &self.kernel
    }
}

impl WorkerPool for SerialPool<'_> {
    fn step1(&mut self, y: &[f64]) -> Result<Vec<Step1Report>> {
        Ok(vec![self.kernel.step1(y)?])
    }

    fn step2(&mut self, dy_hat: &[f64]) -> Result<Vec<Step2Report>> {
        Ok(vec![self.kernel.step2(dy_hat)])
    }

    fn step3(&mut self, dy_bar: &[f64], mu: f64) -> Result<Vec<Step3Report>> {
        Ok(vec![self.kernel.step3(dy_bar, mu, &self.rule)])
    }

    fn step4(&mut self, t_primal: f64, t_dual: f64, y: &[f64]) -> Result<Vec<Step4Report>> {
        Ok(vec![self.kernel.step4(t_primal, t_dual, y)])
    }
}

/// Unpacks a row-major upper triangle into a full symmetric matrix.
pub fn unpack_symmetric(dim: usize, packed: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        for l in k..dim {
            let v = packed[packed_index(dim, k, l)];
            m[(k, l)] = v;
            m[(l, k)] = v;
        }
    }
    m
}

/// Cholesky factorization of the Schur complement matrix, retried once
/// with a small diagonal shift.
pub fn factor_scm(lambda: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = lambda.clone().cholesky() {
        return Ok(c);
    }
    let k = lambda.nrows().max(1);
    let shift = 1e-12 * lambda.trace().abs() / k as f64;
    let mut shifted = lambda.clone();
    for i in 0..lambda.nrows() {
        shifted[(i, i)] += shift;
    }
    shifted
        .cholesky()
        .ok_or_else(|| Error::Numerical("Schur complement matrix is not positive definite".into()))
}

/// Root side of the method.
pub struct Driver<'p, W: WorkerPool> {
    problem: &'p SdpProblem,
    options: SolverOptions,
    pool: W,
    y: Vec<f64>,
    mu: f64,
    log: Vec<LogRow>,
    primal_cost: f64,
    dual_cost: f64,
    converged: bool,
}

impl<'p, W: WorkerPool> Driver<'p, W> {
    /// Starts from `X = Z = I`, `y = 0`.
    pub fn new(problem: &'p SdpProblem, options: SolverOptions, pool: W) -> Self {
        let n = problem.n() as f64;
        Driver {
            problem,
            options,
            pool,
            y: vec![0.0; problem.num_constraints()],
            mu: options.sigma,
            log: Vec::new(),
            primal_cost: problem.c_scalars().iter().sum::<f64>() * n,
            dual_cost: 0.0,
            converged: false,
        }
    }

    pub fn pool(&self) -> &W {
        &self.pool
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    fn order(&self) -> f64 {
        self.problem.primal_dim().max(1) as f64
    }

    /// One predictor-corrector iteration. Returns whether the termination
    /// test passed.
    pub fn iterate(&mut self) -> Result<bool> {
        let kdim = self.problem.num_constraints();

        let r1 = self.pool.step1(&self.y)?;
        let omega = reduce(kdim, r1.iter().map(|r| &r.omega[..]));
        let packed = reduce(kdim * (kdim + 1) / 2, r1.iter().map(|r| &r.lambda[..]));
        let lambda = unpack_symmetric(kdim, &packed);
        let chol = factor_scm(&lambda)?;
        let omega1 = DVector::from_iterator(kdim, omega.iter().zip(self.problem.a()).map(|(w, a)| w - a));
        let dy_hat = chol.solve(&omega1);

        let r2 = self.pool.step2(dy_hat.as_slice())?;
        let delta = reduce(kdim, r2.iter().map(|r| &r.delta[..]));
        let tau = reduce(kdim, r2.iter().map(|r| &r.tau[..]));
        let omega2 = DVector::from_iterator(kdim, delta.iter().zip(&tau).map(|(d, t)| self.mu * d - t));
        let dy_bar = chol.solve(&omega2);

        let r3 = self.pool.step3(dy_bar.as_slice(), self.mu)?;
        let t_primal = r3.iter().map(|r| r.t_primal).fold(1.0, f64::min);
        let t_dual = r3.iter().map(|r| r.t_dual).fold(1.0, f64::min);
        if t_primal < self.options.step.floor && t_dual < self.options.step.floor {
            return Err(Error::Numerical("no admissible step above the floor".into()));
        }
        for (yi, (a, b)) in self.y.iter_mut().zip(dy_hat.iter().zip(dy_bar.iter())) {
            *yi += t_dual * (a + b);
        }

        let r4 = self.pool.step4(t_primal, t_dual, &self.y)?;
        let complementarity = reduce_scalar(r4.iter().map(|r| r.complementarity));
        let trace_x = reduce_scalar(r4.iter().map(|r| r.trace_x));
        let dual_res_sq = reduce_scalar(r4.iter().map(|r| r.dual_residual_sq));
        let primal_cost = reduce_scalar(r4.iter().map(|r| r.primal_cost));
        let slack_definite = r4.iter().all(|r| r.slack_definite);
        let bx = reduce(kdim, r4.iter().map(|r| &r.constraint_values[..]));
        let primal_residual = bx
            .iter()
            .zip(self.problem.a())
            .map(|(v, a)| (v - a).abs())
            .fold(0.0, f64::max);
        let dual_residual = dual_res_sq.sqrt();
        let dual_cost: f64 = self.y.iter().zip(self.problem.a()).map(|(y, a)| y * a).sum();
        let gap = (dual_cost - primal_cost).abs();
        self.mu = self.options.sigma * complementarity / self.order();
        self.primal_cost = primal_cost;
        self.dual_cost = dual_cost;
        self.log.push(LogRow {
            iteration: self.log.len() + 1,
            mu: self.mu,
            gap,
            t_primal,
            t_dual,
            primal_cost,
            dual_cost,
            primal_residual,
            dual_residual,
        });

        if !(gap.is_finite() && self.mu.is_finite() && trace_x.is_finite()) {
            return Err(Error::Numerical("iterate is no longer finite".into()));
        }
        if trace_x > self.options.divergence_bound || dual_cost.abs() > self.options.divergence_bound {
            return Err(Error::Numerical(
                "iterates diverge; the dual constraints appear infeasible".into(),
            ));
        }
        self.converged = gap <= self.options.eps
            && primal_residual <= self.options.feasibility_tol
            && dual_residual <= self.options.feasibility_tol
            && slack_definite;
        Ok(self.converged)
    }

    /// Iterates until termination and packages the outcome.
    pub fn run(self) -> SolverResult {
        self.run_with_pool().0
    }

    /// As [`Driver::run`], handing the pool back.
    pub fn run_with_pool(mut self) -> (SolverResult, W) {
        let mut failure = None;
        while !self.converged && self.log.len() < self.options.max_iter {
            if let Err(e) = self.iterate() {
                failure = Some(e.to_string());
                break;
            }
        }
        self.finish(failure)
    }

    fn finish(self, failure: Option<String>) -> (SolverResult, W) {
        let (status, reason) = if self.converged {
            (SolverStatus::Feasible, None)
        } else if let Some(f) = failure {
            (SolverStatus::NumericalFailure, Some(f))
        } else {
            (
                SolverStatus::MaxIterations,
                Some(format!("no convergence within {} iterations", self.options.max_iter)),
            )
        };
        let p_coeffs = self.problem.lyapunov_coeffs(&self.y).unwrap_or_default();
        let result = SolverResult {
            status,
            reason,
            gap: (self.dual_cost - self.primal_cost).abs(),
            primal_cost: self.primal_cost,
            dual_cost: self.dual_cost,
            y: self.y,
            p_coeffs,
            log: self.log,
        };
        (result, self.pool)
    }
}

/// Serial solve.
pub fn solve(problem: &SdpProblem, options: &SolverOptions) -> SolverResult {
    Driver::new(problem, *options, SerialPool::new(problem, options.step)).run()
}

/// Primal-dual iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x: BlockDiagMatrix,
    pub y: Vec<f64>,
    pub z: BlockDiagMatrix,
    pub mu: f64,
    pub iteration: usize,
    pub primal_cost: f64,
    pub dual_cost: f64,
}

impl SolverState {
    /// `X = Z = I`, `y = 0`.
    pub fn initial(problem: &SdpProblem, options: &SolverOptions) -> Self {
        let (count, n) = (problem.num_blocks(), problem.n());
        SolverState {
            x: BlockDiagMatrix::identity(count, n),
            y: vec![0.0; problem.num_constraints()],
            z: BlockDiagMatrix::identity(count, n),
            mu: options.sigma,
            iteration: 0,
            primal_cost: problem.c_scalars().iter().sum::<f64>() * n as f64,
            dual_cost: 0.0,
        }
    }

    fn check(&self, problem: &SdpProblem) -> Result<()> {
        let (count, n) = (problem.num_blocks(), problem.n());
        if self.x.num_blocks() != count
            || self.z.num_blocks() != count
            || self.x.block_size() != n
            || self.z.block_size() != n
            || self.y.len() != problem.num_constraints()
        {
            return Err(Error::DimensionMismatch("iterate does not match the problem".into()));
        }
        Ok(())
    }

    fn kernel<'p>(&self, problem: &'p SdpProblem) -> Result<BlockKernel<'p>> {
        self.check(problem)?;
        Ok(BlockKernel::with_iterate(
            problem,
            0..problem.num_blocks(),
            self.x.blocks().to_vec(),
            self.z.blocks().to_vec(),
        ))
    }
}

fn check_operand(problem: &SdpProblem, x: &BlockDiagMatrix) -> Result<()> {
    if x.num_blocks() != problem.num_blocks() || x.block_size() != problem.n() {
        return Err(Error::DimensionMismatch(format!(
            "operand has {} blocks of size {}, problem has {} of size {}",
            x.num_blocks(),
            x.block_size(),
            problem.num_blocks(),
            problem.n()
        )));
    }
    Ok(())
}

/// `B(X) = (tr(B_1 X), …, tr(B_K X))`.
pub fn apply_b(problem: &SdpProblem, x: &BlockDiagMatrix) -> Result<Vec<f64>> {
    check_operand(problem, x)?;
    let mut out = vec![0.0; problem.num_constraints()];
    for (j, xb) in x.blocks().iter().enumerate() {
        for c in problem.block_constraints(j) {
            out[c.index] += c.trace_with(xb);
        }
    }
    Ok(out)
}

/// `Bᵀ(y) = Σ y_k B_k`.
pub fn apply_bt(problem: &SdpProblem, y: &[f64]) -> Result<BlockDiagMatrix> {
    if y.len() != problem.num_constraints() {
        return Err(Error::DimensionMismatch(format!(
            "vector has {} entries, expected {}",
            y.len(),
            problem.num_constraints()
        )));
    }
    let mut out = BlockDiagMatrix::zeros(problem.num_blocks(), problem.n());
    for j in 0..problem.num_blocks() {
        let block = out.block_mut(j);
        for c in problem.block_constraints(j) {
            c.add_scaled_to(y[c.index], block);
        }
    }
    Ok(out)
}

/// Schur complement matrix `Λ` and right-hand side `Ω1 = B(Z⁻¹GX) − a`.
pub fn build_scm(problem: &SdpProblem, state: &SolverState) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut kernel = state.kernel(problem)?;
    let r = kernel.step1(&state.y)?;
    let kdim = problem.num_constraints();
    let omega1 = values(&r.omega).iter().zip(problem.a()).map(|(w, a)| w - a).collect();
    Ok((unpack_symmetric(kdim, &values(&r.lambda)), omega1))
}

/// All search directions of one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDirections {
    pub dy_hat: Vec<f64>,
    pub dx_hat: BlockDiagMatrix,
    pub dz_hat: BlockDiagMatrix,
    pub dy_bar: Vec<f64>,
    pub dx_bar: BlockDiagMatrix,
    pub dz_bar: BlockDiagMatrix,
    pub dx: BlockDiagMatrix,
    pub dy: Vec<f64>,
    pub dz: BlockDiagMatrix,
}

/// Predictor and corrector directions at `state`.
pub fn search_directions(problem: &SdpProblem, state: &SolverState) -> Result<StepDirections> {
    let kdim = problem.num_constraints();
    let mut kernel = state.kernel(problem)?;
    let r1 = kernel.step1(&state.y)?;
    let chol = factor_scm(&unpack_symmetric(kdim, &values(&r1.lambda)))?;
    let omega1 = DVector::from_iterator(kdim, values(&r1.omega).iter().zip(problem.a()).map(|(w, a)| w - a));
    let dy_hat = chol.solve(&omega1);
    let r2 = kernel.step2(dy_hat.as_slice());
    let omega2 = DVector::from_iterator(
        kdim,
        values(&r2.delta)
            .iter()
            .zip(values(&r2.tau))
            .map(|(d, t)| state.mu * d - t),
    );
    let dy_bar = chol.solve(&omega2);
    kernel.step3(dy_bar.as_slice(), state.mu, &StepRule::default());
    let collect = |m: &[DMatrix<f64>]| BlockDiagMatrix::from_blocks(m.to_vec());
    let (dx_hat, dz_hat) = kernel.predictor_directions();
    let (dx_hat, dz_hat) = (collect(dx_hat)?, collect(dz_hat)?);
    let (dx, dz) = kernel.total_directions();
    let (dx, dz) = (collect(dx)?, collect(dz)?);
    Ok(StepDirections {
        dy: dy_hat.iter().zip(dy_bar.iter()).map(|(a, b)| a + b).collect(),
        dx_bar: dx.sub(&dx_hat)?,
        dz_bar: dz.sub(&dz_hat)?,
        dy_hat: dy_hat.as_slice().to_vec(),
        dy_bar: dy_bar.as_slice().to_vec(),
        dx_hat,
        dz_hat,
        dx,
        dz,
    })
}

/// `(Δŷ, ΔX̂, ΔẐ)`.
pub fn predictor(problem: &SdpProblem, state: &SolverState) -> Result<(Vec<f64>, BlockDiagMatrix, BlockDiagMatrix)> {
    let d = search_directions(problem, state)?;
    Ok((d.dy_hat, d.dx_hat, d.dz_hat))
}

/// `(Δȳ, ΔX̄, ΔZ̄)`.
pub fn corrector(problem: &SdpProblem, state: &SolverState) -> Result<(Vec<f64>, BlockDiagMatrix, BlockDiagMatrix)> {
    let d = search_directions(problem, state)?;
    Ok((d.dy_bar, d.dx_bar, d.dz_bar))
}

/// Primal and dual step lengths keeping `X` and `Z` positive definite.
pub fn line_search(
    state: &SolverState,
    dx: &BlockDiagMatrix,
    dz: &BlockDiagMatrix,
    rule: &StepRule,
) -> Result<(f64, f64)> {
    let t_p = admissible_step(state.x.blocks(), dx.blocks(), rule);
    let t_d = admissible_step(state.z.blocks(), dz.blocks(), rule);
    if t_p < rule.floor || t_d < rule.floor {
        return Err(Error::Numerical("no admissible step above the floor".into()));
    }
    Ok((t_p, t_d))
}

/// One full iteration on an explicit state.
pub fn iterate(problem: &SdpProblem, state: &SolverState, options: &SolverOptions) -> Result<(SolverState, LogRow)> {
    let kernel = state.kernel(problem)?;
    let mut driver = Driver {
        problem,
        options: *options,
        pool: SerialPool {
            kernel,
            rule: options.step,
        },
        y: state.y.clone(),
        mu: state.mu,
        log: Vec::new(),
        primal_cost: state.primal_cost,
        dual_cost: state.dual_cost,
        converged: false,
    };
    driver.iterate()?;
    let row = LogRow {
        iteration: state.iteration + 1,
        ..driver.log[0]
    };
    let (x, z) = driver.pool.kernel.into_iterate();
    Ok((
        SolverState {
            x: BlockDiagMatrix::from_blocks(x)?,
            y: driver.y,
            z: BlockDiagMatrix::from_blocks(z)?,
            mu: driver.mu,
            iteration: state.iteration + 1,
            primal_cost: driver.primal_cost,
            dual_cost: driver.dual_cost,
        },
        row,
    ))
}
