//! Feasibility analysis of one system and bisection on a margin parameter.

use std::time::Instant;

use polya_core::parallel_runtime::{run_setup, run_solve, RuntimeConfig};
use polya_core::sdp_solver::LogRow;
use polya_core::{MatrixPolynomial, PolyaConfig, SolverOptions, SolverResult};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::{grid_oracle, OracleSummary};
use crate::spec::{AffineSimplexMap, MonomialSpec, SystemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    RobustlyStableCertified,
    NotCertified,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
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

impl From<&LogRow> for LogEntry {
    fn from(r: &LogRow) -> Self {
        LogEntry {
            iteration: r.iteration,
            mu: r.mu,
            gap: r.gap,
            t_primal: r.t_primal,
            t_dual: r.t_dual,
            primal_cost: r.primal_cost,
            dual_cost: r.dual_cost,
            primal_residual: r.primal_residual,
            dual_residual: r.dual_residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: String,
    pub iterations: usize,
    pub gap: Option<f64>,
    pub primal_cost: Option<f64>,
    pub dual_cost: Option<f64>,
}

/// Echo of everything that determined the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub l: usize,
    pub d_p: usize,
    pub d_a: usize,
    pub d1: usize,
    pub d2: usize,
    pub delta: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub workers: usize,
    pub samples: usize,
    pub seed: u64,
    pub map: Option<AffineSimplexMap>,
    pub num_constraints: usize,
    pub num_blocks: usize,
    pub primal_dim: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timings {
    pub setup_secs: f64,
    pub solve_secs: f64,
    pub oracle_secs: f64,
    pub total_secs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginObjective {
    /// Largest half-width `ρ` of the box `[−ρ, ρ]^l` mapped from the simplex.
    MaximizeRho,
    /// Smallest shift `L` of the simplex `{(1 − L)α + L}`.
    MinimizeL,
}

impl MarginObjective {
    pub fn map(self, value: f64) -> AffineSimplexMap {
        match self {
            MarginObjective::MaximizeRho => AffineSimplexMap::centered(value),
            MarginObjective::MinimizeL => AffineSimplexMap::shifted(value),
        }
    }

    pub fn default_bracket(self) -> (f64, f64) {
        match self {
            MarginObjective::MaximizeRho => (0.0, 1.0),
            MarginObjective::MinimizeL => (-0.5, 0.5),
        }
    }

    /// Sign of the direction in which certification gets harder.
    fn harder(self) -> f64 {
        match self {
            MarginObjective::MaximizeRho => 1.0,
            MarginObjective::MinimizeL => -1.0,
        }
    }

    /// Nearest parameter value that cannot be relaxed further.
    fn easiest(self) -> f64 {
        match self {
            MarginObjective::MaximizeRho => 0.0,
            MarginObjective::MinimizeL => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub value: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub objective: MarginObjective,
    /// Best certified parameter value.
    pub value: Option<f64>,
    /// Closest value known not to certify.
    pub uncertified: Option<f64>,
    pub bracket_width: Option<f64>,
    pub trials: Vec<Trial>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub verdict: Verdict,
    pub reason: Option<String>,
    pub config: ConfigEcho,
    pub solver: Option<SolverSummary>,
    pub oracle: Option<OracleSummary>,
    pub margin: Option<MarginSummary>,
    /// Coefficients of `P(α)` when the solver found one.
    pub lyapunov: Vec<MonomialSpec>,
    pub log: Vec<LogEntry>,
    /// Wall-clock times are not serialized, so reports stay reproducible.
    #[serde(skip)]
    pub timings: Timings,
}

impl AnalysisReport {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::RobustlyStableCertified
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Everything `analyze` computes, including the raw solver output.
pub struct Analysis {
    pub report: AnalysisReport,
    pub a: MatrixPolynomial,
    pub p: Option<MatrixPolynomial>,
    pub result: SolverResult,
}

pub fn analyze(spec: &SystemSpec) -> Result<AnalysisReport> {
    Ok(analyze_full(spec)?.report)
}

/// Homogenize, map, set up, solve, then check any certificate on a sample
/// of the simplex. Only a solver certificate the oracle confirms counts.
pub fn analyze_full(spec: &SystemSpec) -> Result<Analysis> {
    spec.validate()?;
    let start = Instant::now();
    let opts = &spec.options;
    let a = spec.polynomial()?;
    let config = PolyaConfig {
        l: spec.l,
        n: spec.n,
        d_p: opts.dp,
        d_a: a.degree(),
        d1: opts.d1,
        d2: opts.d2,
    };
    config.validate()?;
    let runtime = RuntimeConfig::new(opts.workers)?;
    let (problem, partition) = run_setup(&config, &a, opts.delta, &runtime)?;
    let setup_secs = start.elapsed().as_secs_f64();

    let solver_options = SolverOptions {
        eps: opts.eps,
        max_iter: opts.max_iter,
        ..SolverOptions::default()
    };
    let t = Instant::now();
    let (result, _) = run_solve(&problem, &partition, &solver_options, &runtime)?;
    let solve_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (verdict, reason, oracle, p) = if result.is_feasible() {
        let p = problem.lyapunov_polynomial(&result.y)?;
        let oracle = grid_oracle(&a, &p, opts.samples, opts.seed)?;
        if oracle.passes() {
            (Verdict::RobustlyStableCertified, None, Some(oracle), Some(p))
        } else {
            let why = format!(
                "solver certificate rejected by the sampled check (min eig P = {:e}, max eig residual = {:e})",
                oracle.min_lambda_p, oracle.max_lambda_residual
            );
            (Verdict::NotCertified, Some(why), Some(oracle), Some(p))
        }
    } else {
        let why = result
            .reason
            .clone()
            .unwrap_or_else(|| format!("solver stopped with status {:?}", result.status));
        (Verdict::NotCertified, Some(why), None, None)
    };
    let oracle_secs = t.elapsed().as_secs_f64();

    let lyapunov = p
        .as_ref()
        .map(|p| {
            p.basis()
                .iter()
                .zip(p.coeffs())
                .map(|(e, c)| MonomialSpec::from_matrix(e.entries().to_vec(), c))
                .collect()
        })
        .unwrap_or_default();
    let report = AnalysisReport {
        verdict,
        reason,
        config: ConfigEcho {
            n: spec.n,
            l: spec.l,
            d_p: config.d_p,
            d_a: config.d_a,
            d1: config.d1,
            d2: config.d2,
            delta: opts.delta,
            eps: opts.eps,
            max_iter: opts.max_iter,
            workers: opts.workers,
            samples: opts.samples,
            seed: opts.seed,
            map: spec.map,
            num_constraints: problem.num_constraints(),
            num_blocks: problem.num_blocks(),
            primal_dim: problem.primal_dim(),
        },
        solver: Some(SolverSummary {
            status: format!("{:?}", result.status),
            iterations: result.iterations(),
            gap: finite(result.gap),
            primal_cost: finite(result.primal_cost),
            dual_cost: finite(result.dual_cost),
        }),
        oracle,
        margin: None,
        lyapunov,
        log: result.log.iter().map(LogEntry::from).collect(),
        timings: Timings {
            setup_secs,
            solve_secs,
            oracle_secs,
            total_secs: start.elapsed().as_secs_f64(),
        },
    };
    Ok(Analysis { report, a, p, result })
}

/// Bisection on the margin parameter.
///
/// The bracket comes from the options or the objective's default. If its
/// easy end does not certify it is moved toward the easiest value; if its hard
/// end certifies it is pushed outward with doubling width. Every trial counts
/// against `max_trials`. The returned report is the analysis at the best
/// certified value, with the trial history attached.
pub fn find_margin(spec: &SystemSpec, objective: MarginObjective) -> Result<AnalysisReport> {
    let opts = &spec.options;
    let (dlo, dhi) = objective.default_bracket();
    let lo = opts.bisect_lo.unwrap_or(dlo);
    let hi = opts.bisect_hi.unwrap_or(dhi);
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let dir = objective.harder();
    let (mut good, mut bad) = if dir > 0.0 { (lo, hi) } else { (hi, lo) };

    let mut trials = Vec::new();
    let run = |value: f64, trials: &mut Vec<Trial>| -> Result<AnalysisReport> {
        let mut s = spec.clone();
        s.map = Some(objective.map(value));
        let r = analyze(&s)?;
        trials.push(Trial {
            value,
            certified: r.is_certified(),
        });
        Ok(r)
    };
    let budget = opts.max_trials.max(1);

    let mut best = run(good, &mut trials)?;
    while !best.is_certified() && trials.len() < budget {
        let easiest = objective.easiest();
        if (good - easiest) * dir <= 0.0 {
            break;
        }
        let width = (bad - good).abs().max(opts.bisect_tol);
        let next = good - dir * width;
        let next = if (next - easiest) * dir < 0.0 { easiest } else { next };
        bad = good;
        good = next;
        best = run(good, &mut trials)?;
    }
    if !best.is_certified() {
        best.margin = Some(MarginSummary {
            objective,
            value: None,
            uncertified: Some(good),
            bracket_width: None,
            trials,
        });
        best.reason = Some(format!(
            "no certified parameter value found; last tried {good}: {}",
            best.reason.clone().unwrap_or_default()
        ));
        return Ok(best);
    }

    let mut bad_known = false;
    while trials.len() < budget {
        let r = run(bad, &mut trials)?;
        if !r.is_certified() {
            bad_known = true;
            break;
        }
        let width = (bad - good).abs().max(opts.bisect_tol);
        good = bad;
        best = r;
        bad = good + dir * 2.0 * width;
    }

    if bad_known {
        while (bad - good).abs() > opts.bisect_tol && trials.len() < budget {
            let mid = 0.5 * (good + bad);
            let r = run(mid, &mut trials)?;
            if r.is_certified() {
                good = mid;
                best = r;
            } else {
                bad = mid;
            }
        }
    }
    best.margin = Some(MarginSummary {
        objective,
        value: Some(good),
        uncertified: bad_known.then_some(bad),
        bracket_width: bad_known.then(|| (bad - good).abs()),
        trials,
    });
    if !bad_known {
        best.reason = Some("trial budget exhausted before an uncertified value was found".into());
    }
    Ok(best)
}
