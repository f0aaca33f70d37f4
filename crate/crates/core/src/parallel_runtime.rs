//! Root/worker execution of the set-up and the solver on threads.
//!
//! Workers only ever talk to the root: each holds a command receiver and a
//! clone of one shared reply sender. Every message passes through a
//! [`MessageBus`] that keeps an audit log. Worker contributions arrive as
//! compensated partial sums and are merged at the root in ascending worker
//! order, so results depend neither on scheduling nor on the worker count.
//! Each compensated value counts as two scalars.

use std::fmt::Write as _;
use std::ops::Range;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;

use crate::error::{Error, Result};
use crate::monomial::{cardinality, enumerate, MonomialBasis};
use crate::polya::{beta_columns, h_columns, init_beta, init_h_columns, BetaTable, HTable, PolyaConfig};
use crate::polymatrix::MatrixPolynomial;
use crate::sdp_assembly::{assemble_blocks, c_scalars, BlockPartition, ConstraintBlock, SdpProblem};
use crate::sdp_solver::{
    BlockKernel, Driver, SolverOptions, SolverResult, Step1Report, Step2Report, Step3Report, Step4Report, StepRule,
    WorkerPool,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RuntimeConfig {
    pub workers: usize,
    /// Sum worker contributions in worker order rather than arrival order.
    pub deterministic_reduction: bool,
}

impl RuntimeConfig {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidConfig("need at least one worker".into()));
        }
        Ok(RuntimeConfig {
            workers,
            deterministic_reduction: true,
        })
    }

    /// Blocks per worker before the remainder, `floor((L+M)/N)`.
    pub fn blocks_per_worker(&self, num_blocks: usize) -> usize {
        num_blocks / self.workers
    }
}

fn run_ranges<T: Send>(partition: &BlockPartition, work: impl Fn(Range<usize>) -> Result<T> + Sync) -> Result<Vec<T>> {
    if partition.workers() == 1 {
        return Ok(vec![work(partition.range(0))?]);
    }
    let work = &work;
    thread::scope(|s| {
        let handles: Vec<_> = partition
            .ranges()
            .iter()
            .cloned()
            .map(|r| s.spawn(move || work(r)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("set-up worker panicked"))
            .collect()
    })
}

fn next_beta(prev: &BetaTable, workers: usize) -> Result<BetaTable> {
    let next_cols = enumerate(prev.rows().num_vars(), prev.cols().degree() + 1)?;
    let part = BlockPartition::remainder_last(next_cols.len(), workers)?;
    let pieces = run_ranges(&part, |r| beta_columns(prev, &next_cols, r))?;
    Ok(BetaTable::from_parts(
        prev.rows().clone(),
        next_cols,
        prev.exponent() + 1,
        pieces.concat(),
    ))
}

fn next_h(prev: &HTable, workers: usize) -> Result<HTable> {
    let next_cols = enumerate(prev.rows().num_vars(), prev.cols().degree() + 1)?;
    let part = BlockPartition::remainder_last(next_cols.len(), workers)?;
    let pieces = run_ranges(&part, |r| Ok(h_columns(prev, &next_cols, r)))?;
    Ok(HTable::from_parts(
        prev.rows().clone(),
        next_cols,
        prev.exponent() + 1,
        prev.dim(),
        pieces.concat(),
    ))
}

fn first_h(config: &PolyaConfig, a: &MatrixPolynomial, workers: usize) -> Result<HTable> {
    let rows: MonomialBasis = enumerate(config.l, config.d_p)?;
    let cols = enumerate(config.l, config.d_pa())?;
    let part = BlockPartition::remainder_last(cols.len(), workers)?;
    let pieces = run_ranges(&part, |r| init_h_columns(config, a, &rows, &cols, r))?;
    Ok(HTable::from_parts(rows, cols, 0, config.n, pieces.concat()))
}

/// Polya tables with every iteration split by columns over `workers`.
pub fn polya_tables(config: &PolyaConfig, a: &MatrixPolynomial, workers: usize) -> Result<(BetaTable, HTable)> {
    let mut beta = init_beta(config)?;
    for _ in 0..config.d1 {
        beta = next_beta(&beta, workers)?;
    }
    let mut h = first_h(config, a, workers)?;
    for _ in 0..config.d2 {
        h = next_h(&h, workers)?;
    }
    Ok((beta, h))
}

/// Parallel set-up: Polya tables, then each worker assembles its own
/// contiguous range of blocks.
pub fn run_setup(
    config: &PolyaConfig,
    a: &MatrixPolynomial,
    delta: f64,
    runtime: &RuntimeConfig,
) -> Result<(SdpProblem, BlockPartition)> {
    let (beta, h) = polya_tables(config, a, runtime.workers)?;
    let total = beta.num_cols() + h.num_cols();
    let part = BlockPartition::balanced(total, runtime.workers)?;
    let pieces = run_ranges(&part, |r| {
        Ok((
            c_scalars(config, delta, &beta, r.clone())?,
            assemble_blocks(config, &beta, &h, r)?,
        ))
    })?;
    let mut c = Vec::with_capacity(total);
    let mut blocks: Vec<Vec<ConstraintBlock>> = Vec::with_capacity(total);
    for (cs, bs) in pieces {
        c.extend(cs);
        blocks.extend(bs);
    }
    Ok((SdpProblem::from_parts(*config, delta, c, blocks)?, part))
}

/// A node of the star: the root or worker `i` (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Root,
    Worker(usize),
}

impl Node {
    /// 1-based graph label; the root is node 1.
    pub fn label(self) -> usize {
        match self {
            Node::Root => 1,
            Node::Worker(i) => i + 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PayloadKind {
    DualVector,
    PredictorStep,
    CorrectorStep,
    StepLengths,
    ScmContribution,
    CorrectorRhs,
    AdmissibleSteps,
    IterateSummary,
    Shutdown,
}

impl PayloadKind {
    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::DualVector => "dual_vector",
            PayloadKind::PredictorStep => "predictor_step",
            PayloadKind::CorrectorStep => "corrector_step",
            PayloadKind::StepLengths => "step_lengths",
            PayloadKind::ScmContribution => "scm_contribution",
            PayloadKind::CorrectorRhs => "corrector_rhs",
            PayloadKind::AdmissibleSteps => "admissible_steps",
            PayloadKind::IterateSummary => "iterate_summary",
            PayloadKind::Shutdown => "shutdown",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MessageRecord {
    /// Global phase counter, four per iteration.
    pub step: usize,
    pub sender: Node,
    pub receiver: Node,
    pub kind: PayloadKind,
    pub scalars: usize,
}

/// Audit log of every message exchanged during a solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageBus {
    records: Vec<MessageRecord>,
}

impl MessageBus {
    pub fn records(&self) -> &[MessageRecord] {
        &self.records
    }

    fn record(&mut self, step: usize, sender: Node, receiver: Node, kind: PayloadKind, scalars: usize) {
        self.records.push(MessageRecord {
            step,
            sender,
            receiver,
            kind,
            scalars,
        });
    }

    /// Messages neither sent nor received by the root.
    pub fn worker_to_worker(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.sender != Node::Root && r.receiver != Node::Root)
            .count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,sender,receiver,payload_kind,scalar_count\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.step,
                r.sender.label(),
                r.receiver.label(),
                r.kind.name(),
                r.scalars
            );
        }
        out
    }
}

enum Command {
    Step1(Vec<f64>),
    Step2(Vec<f64>),
    Step3(Vec<f64>, f64),
    Step4(f64, f64, Vec<f64>),
    Stop,
}

enum Reply {
    Step1(Result<Step1Report>),
    Step2(Step2Report),
    Step3(Step3Report),
    Step4(Step4Report),
}

fn worker_loop(
    mut kernel: BlockKernel<'_>,
    rule: StepRule,
    id: usize,
    commands: Receiver<Command>,
    replies: Sender<(usize, Reply)>,
) {
    while let Ok(cmd) = commands.recv() {
        let reply = match cmd {
            Command::Step1(y) => Reply::Step1(kernel.step1(&y)),
            Command::Step2(dy) => Reply::Step2(kernel.step2(&dy)),
            Command::Step3(dy, mu) => Reply::Step3(kernel.step3(&dy, mu, &rule)),
            Command::Step4(tp, td, y) => Reply::Step4(kernel.step4(tp, td, &y)),
            Command::Stop => break,
        };
        if replies.send((id, reply)).is_err() {
            break;
        }
    }
}

/// Worker pool backed by threads and channels.
struct ChannelPool {
    commands: Vec<Sender<Command>>,
    replies: Receiver<(usize, Reply)>,
    bus: MessageBus,
    step: usize,
    kdim: usize,
    deterministic: bool,
}

impl ChannelPool {
    fn broadcast(&mut self, kind: PayloadKind, scalars: usize, make: impl Fn() -> Command) -> Result<()> {
        self.step += 1;
        for (w, tx) in self.commands.iter().enumerate() {
            self.bus.record(self.step, Node::Root, Node::Worker(w), kind, scalars);
            tx.send(make())
                .map_err(|_| Error::Numerical(format!("worker {w} stopped")))?;
        }
        Ok(())
    }

    fn gather<T>(&mut self, kind: PayloadKind, scalars: usize, unpack: impl Fn(Reply) -> Result<T>) -> Result<Vec<T>> {
        let mut got = Vec::with_capacity(self.commands.len());
        for _ in 0..self.commands.len() {
            let (w, reply) = self
                .replies
                .recv()
                .map_err(|_| Error::Numerical("worker channel closed".into()))?;
            self.bus.record(self.step, Node::Worker(w), Node::Root, kind, scalars);
            got.push((w, reply));
        }
        if self.deterministic {
            got.sort_by_key(|(w, _)| *w);
        }
        let mut out = Vec::with_capacity(got.len());
        let mut first_err = None;
        for (_, reply) in got {
            match unpack(reply) {
                Ok(v) => out.push(v),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn stop(&mut self) {
        for (w, tx) in self.commands.iter().enumerate() {
            self.bus
                .record(self.step, Node::Root, Node::Worker(w), PayloadKind::Shutdown, 0);
            let _ = tx.send(Command::Stop);
        }
    }
}

fn unexpected<T>() -> Result<T> {
    Err(Error::Numerical("worker answered out of phase".into()))
}

impl WorkerPool for ChannelPool {
    fn step1(&mut self, y: &[f64]) -> Result<Vec<Step1Report>> {
        let k = self.kdim;
        self.broadcast(PayloadKind::DualVector, k, || Command::Step1(y.to_vec()))?;
        self.gather(PayloadKind::ScmContribution, 2 * (k + k * (k + 1) / 2), |r| match r {
            Reply::Step1(r) => r,
            _ => unexpected(),
        })
    }

    fn step2(&mut self, dy_hat: &[f64]) -> Result<Vec<Step2Report>> {
        let k = self.kdim;
        self.broadcast(PayloadKind::PredictorStep, k, || Command::Step2(dy_hat.to_vec()))?;
        self.gather(PayloadKind::CorrectorRhs, 4 * k, |r| match r {
            Reply::Step2(r) => Ok(r),
            _ => unexpected(),
        })
    }

    fn step3(&mut self, dy_bar: &[f64], mu: f64) -> Result<Vec<Step3Report>> {
        let k = self.kdim;
        self.broadcast(PayloadKind::CorrectorStep, k + 1, || {
            Command::Step3(dy_bar.to_vec(), mu)
        })?;
        self.gather(PayloadKind::AdmissibleSteps, 2, |r| match r {
            Reply::Step3(r) => Ok(r),
            _ => unexpected(),
        })
    }

    fn step4(&mut self, t_primal: f64, t_dual: f64, y: &[f64]) -> Result<Vec<Step4Report>> {
        let k = self.kdim;
        self.broadcast(PayloadKind::StepLengths, k + 2, || {
            Command::Step4(t_primal, t_dual, y.to_vec())
        })?;
        self.gather(PayloadKind::IterateSummary, 2 * (k + 4) + 1, |r| match r {
            Reply::Step4(r) => Ok(r),
            _ => unexpected(),
        })
    }
}

/// Parallel solve: one thread per worker, each owning the blocks of its
/// partition range. Returns the result and the message audit log.
pub fn run_solve(
    problem: &SdpProblem,
    partition: &BlockPartition,
    options: &SolverOptions,
    runtime: &RuntimeConfig,
) -> Result<(SolverResult, MessageBus)> {
    let covered: usize = partition.sizes().iter().sum();
    if covered != problem.num_blocks() || partition.ranges().last().map_or(0, |r| r.end) != problem.num_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {covered} blocks, problem has {}",
            problem.num_blocks()
        )));
    }
    let rule = options.step;
    Ok(thread::scope(|s| {
        let (reply_tx, reply_rx) = channel();
        let mut commands = Vec::with_capacity(partition.workers());
        for (w, range) in partition.ranges().iter().cloned().enumerate() {
            let (tx, rx) = channel();
            commands.push(tx);
            let replies = reply_tx.clone();
            let kernel = BlockKernel::new(problem, range);
            s.spawn(move || worker_loop(kernel, rule, w, rx, replies));
        }
        drop(reply_tx);
        let pool = ChannelPool {
            commands,
            replies: reply_rx,
            bus: MessageBus::default(),
            step: 0,
            kdim: problem.num_constraints(),
            deterministic: runtime.deterministic_reduction,
        };
        let (result, mut pool) = Driver::new(problem, *options, pool).run_with_pool();
        pool.stop();
        (result, pool.bus)
    }))
}

/// Directed communication graph with 1-based node labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommGraph {
    adjacency: Vec<Vec<u8>>,
}

impl CommGraph {
    fn from_fn(nodes: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        CommGraph {
            adjacency: (1..=nodes)
                .map(|i| (1..=nodes).map(|j| u8::from(i != j && f(i, j))).collect())
                .collect(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    /// `(i, j)` pairs, 1-based, row-major.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.adjacency.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v == 1 {
                    out.push((i + 1, j + 1));
                }
            }
        }
        out
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.adjacency[node - 1].iter().map(|&v| v as usize).sum()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.adjacency.iter().map(|row| row[node - 1] as usize).sum()
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n");
        for i in 1..=self.nodes() {
            let _ = writeln!(out, "  {i};");
        }
        for (i, j) in self.edges() {
            let _ = writeln!(out, "  {i} -> {j};");
        }
        out.push_str("}\n");
        out
    }
}

/// Set-up communication model for one Polya iteration on `P(α)`: node `i`
/// owns monomial `i` of degree `d_p + d1` and sends to the owners of the
/// monomials of `(Σα) α^γ_i` in the next degree.
pub fn setup_comm_graph(l: usize, d_p: usize, d1: usize) -> Result<CommGraph> {
    let current = enumerate(l, d_p + d1)?;
    let next = enumerate(l, d_p + d1 + 1)?;
    let r = current.len();
    let targets: Vec<Vec<usize>> = current
        .iter()
        .map(|g| {
            (0..l)
                .filter_map(|k| next.index_of(&g.add(&crate::monomial::Exponent::unit(l, k))))
                .collect()
        })
        .collect();
    Ok(CommGraph::from_fn(next.len(), |i, j| {
        i <= r && targets[i - 1].contains(&j)
    }))
}

/// Star graph of the solver; node 1 is the root.
pub fn solver_comm_graph(nodes: usize) -> Result<CommGraph> {
    if nodes < 2 {
        return Err(Error::InvalidConfig(
            "the star needs a root and at least one worker".into(),
        ));
    }
    Ok(CommGraph::from_fn(nodes, |i, j| i == 1 || j == 1))
}

/// Closed-form operation and message counts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostModel {
    pub config: PolyaConfig,
    pub workers: usize,
    pub l0: usize,
    pub num_p_blocks: usize,
    pub num_lyap_blocks: usize,
    pub k: usize,
    /// Per worker and Polya iteration, for the constraint blocks.
    pub setup_flops: f64,
    /// Per worker and Polya iteration.
    pub setup_comm: f64,
    /// Per worker and solver iteration, for the Schur complement terms.
    pub solver_flops: f64,
    /// Cholesky factorization at the root.
    pub root_flops: f64,
    /// Scalars gathered by the root per solver iteration.
    pub communication: f64,
    /// Share of work that is spread over workers.
    pub decentralized: f64,
    /// Share of work done at the root.
    pub centralized: f64,
    pub speedup: f64,
}

impl CostModel {
    pub fn num_blocks(&self) -> usize {
        self.num_p_blocks + self.num_lyap_blocks
    }
}

/// Evaluates the cost model for `workers` processors.
pub fn cost_model(config: &PolyaConfig, workers: usize) -> Result<CostModel> {
    config.validate()?;
    if workers == 0 {
        return Err(Error::InvalidConfig("need at least one worker".into()));
    }
    let l0 = cardinality(config.l, config.d_p)?;
    let num_p = config.num_p_blocks()?;
    let num_lyap = config.num_lyap_blocks()?;
    let k = config.num_dual_vars()?;
    let total = num_p.checked_add(num_lyap).ok_or(Error::Overflow("block count"))?;
    let (n, kf, nw) = (config.n as f64, k as f64, workers as f64);
    let per_p = (num_p / workers) as f64;
    let per_lyap = (num_lyap / workers) as f64;
    let per_block = if workers < total { (total / workers) as f64 } else { 1.0 };
    let decentralized_total = total as f64 * kf * kf * n.powi(3);
    let root = kf.powi(3);
    let d = decentralized_total / (decentralized_total + root);
    let s = root / (decentralized_total + root);
    Ok(CostModel {
        config: *config,
        workers,
        l0,
        num_p_blocks: num_p,
        num_lyap_blocks: num_lyap,
        k,
        setup_flops: l0 as f64 * n.powi(3) * kf * (per_p + per_lyap),
        setup_comm: l0 as f64 * (per_p + per_lyap * n * n),
        solver_flops: per_block * kf * kf * n.powi(3),
        root_flops: root,
        communication: nw * kf * kf,
        decentralized: d,
        centralized: s,
        speedup: nw / (d + nw * s),
    })
}
