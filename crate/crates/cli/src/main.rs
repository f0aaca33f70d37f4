use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polya_core::parallel_runtime::{cost_model, setup_comm_graph, solver_comm_graph};
use polya_core::PolyaConfig;
use polya_robust::models::{build_tokamak_model, cubic_system, LCMS_RADIUS, MU0, NOMINAL_ETA};
use polya_robust::report::MarginRow;
use polya_robust::{analyze, emit_report, find_margin, AnalysisReport, Artifacts, MarginObjective, Result, SystemSpec};

#[derive(Parser)]
#[command(
    name = "polya-robust",
    version,
    about = "Robust stability of linear systems with simplex-bounded uncertainty"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide robust stability of one system.
    Analyze(Common),
    /// Bisect on the size of the uncertainty set.
    Margin {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Objective::MinimizeL)]
        objective: Objective,
        /// Repeat the bisection for d1 = d2 = 0 … this value.
        #[arg(long)]
        sweep_max: Option<usize>,
    },
    /// Resistivity-uncertain flux diffusion model.
    Tokamak {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 7)]
        nx: usize,
        /// Nominal resistivity samples, `nx + 1` comma-separated values.
        #[arg(long, value_delimiter = ',')]
        eta: Option<Vec<f64>>,
        #[arg(long, default_value_t = LCMS_RADIUS)]
        radius: f64,
        /// Only assemble the program and print its sizes.
        #[arg(long)]
        structure_only: bool,
    },
    /// Communication graphs as DOT.
    Graph {
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 1)]
        dp: usize,
        #[arg(long, default_value_t = 0)]
        d1: usize,
        #[arg(long, env = "POLYA_WORKERS", default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operation counts and modelled speed-up.
    Costmodel {
        #[arg(long)]
        l: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        dp: usize,
        #[arg(long, default_value_t = 1)]
        da: usize,
        #[arg(long, default_value_t = 0)]
        d1: usize,
        #[arg(long, default_value_t = 0)]
        d2: usize,
        #[arg(long, env = "POLYA_WORKERS", default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    MinimizeL,
    MaximizeRho,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    dp: Option<usize>,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, env = "POLYA_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    bisect_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    bisect_hi: Option<f64>,
    #[arg(long)]
    bisect_tol: Option<f64>,
}

impl Common {
    fn apply(&self, spec: &mut SystemSpec) {
        let o = &mut spec.options;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { o.$f = v; } )* };
        }
        set!(dp, d1, d2, delta, eps, max_iter, workers, seed, samples, bisect_tol);
        if self.bisect_lo.is_some() {
            o.bisect_lo = self.bisect_lo;
        }
        if self.bisect_hi.is_some() {
            o.bisect_hi = self.bisect_hi;
        }
    }

    fn load(&self, fallback: Option<SystemSpec>) -> Result<SystemSpec> {
        let mut spec = match (&self.input, fallback) {
            (Some(path), _) => SystemSpec::load(path)?,
            (None, Some(spec)) => spec,
            (None, None) => {
                return Err(polya_robust::CliError::Spec("--input is required".into()));
            }
        };
        self.apply(&mut spec);
        spec.validate()?;
        Ok(spec)
    }
}

fn summarize(report: &AnalysisReport) {
    println!("verdict: {:?}", report.verdict);
    if let Some(reason) = &report.reason {
        println!("reason: {reason}");
    }
    let c = &report.config;
    println!(
        "program: {} constraints, {} blocks, primal dimension {}",
        c.num_constraints, c.num_blocks, c.primal_dim
    );
    if let Some(s) = &report.solver {
        println!("solver: {} after {} iterations", s.status, s.iterations);
    }
    if let Some(o) = &report.oracle {
        println!(
            "oracle: {} points, min eig P {:e}, max eig residual {:e}",
            o.points, o.min_lambda_p, o.max_lambda_residual
        );
    }
    if let Some(m) = &report.margin {
        match m.value {
            Some(v) => println!("margin: {v} ({} trials)", m.trials.len()),
            None => println!("margin: none ({} trials)", m.trials.len()),
        }
    }
}

fn finish(report: &AnalysisReport, out: Option<&PathBuf>, extra: &Artifacts<'_>) -> Result<ExitCode> {
    summarize(report);
    if let Some(dir) = out {
        for p in emit_report(report, extra, dir)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(if report.is_certified() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn margin_sweep(
    spec: &SystemSpec,
    objective: MarginObjective,
    sweep_max: Option<usize>,
) -> Result<(AnalysisReport, Vec<MarginRow>)> {
    let degrees: Vec<usize> = match sweep_max {
        Some(m) => (0..=m).collect(),
        None => vec![spec.options.d1],
    };
    let mut rows = Vec::new();
    let mut last = None;
    for d in degrees {
        let mut s = spec.clone();
        if sweep_max.is_some() {
            s.options.d1 = d;
            s.options.d2 = d;
        }
        let r = find_margin(&s, objective)?;
        let m = r.margin.as_ref();
        rows.push(MarginRow {
            d_p: s.options.dp,
            d1: s.options.d1,
            d2: s.options.d2,
            margin: m.and_then(|m| m.value),
            trials: m.map_or(0, |m| m.trials.len()),
        });
        last = Some(r);
    }
    Ok((last.expect("at least one sweep entry"), rows))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze(common) => {
            let spec = common.load(None)?;
            let report = analyze(&spec)?;
            finish(&report, common.out.as_ref(), &Artifacts::default())
        }
        Command::Margin {
            common,
            objective,
            sweep_max,
        } => {
            let spec = common.load(Some(cubic_system()))?;
            let objective = match objective {
                Objective::MinimizeL => MarginObjective::MinimizeL,
                Objective::MaximizeRho => MarginObjective::MaximizeRho,
            };
            let (report, rows) = margin_sweep(&spec, objective, sweep_max)?;
            print!("{}", polya_robust::report::margin_table_csv(&rows));
            finish(
                &report,
                common.out.as_ref(),
                &Artifacts {
                    margin_table: &rows,
                    graphs: &[],
                },
            )
        }
        Command::Tokamak {
            common,
            nx,
            eta,
            radius,
            structure_only,
        } => {
            let eta = eta.unwrap_or_else(|| NOMINAL_ETA.to_vec());
            let model = build_tokamak_model(nx, &eta, radius, MU0)?;
            let spec = common.load(Some(model.spec))?;
            if structure_only {
                let a = spec.polynomial()?;
                let config = PolyaConfig {
                    l: spec.l,
                    n: spec.n,
                    d_p: spec.options.dp,
                    d_a: a.degree(),
                    d1: spec.options.d1,
                    d2: spec.options.d2,
                };
                let problem = polya_core::sdp_assembly::build_problem(&config, &a, spec.options.delta)?;
                println!(
                    "constraints {} blocks {} primal dimension {}",
                    problem.num_constraints(),
                    problem.num_blocks(),
                    problem.primal_dim()
                );
                return Ok(ExitCode::SUCCESS);
            }
            let (report, rows) = margin_sweep(&spec, MarginObjective::MaximizeRho, None)?;
            finish(
                &report,
                common.out.as_ref(),
                &Artifacts {
                    margin_table: &rows,
                    graphs: &[],
                },
            )
        }
        Command::Graph {
            l,
            dp,
            d1,
            workers,
            out,
        } => {
            let setup = setup_comm_graph(l, dp, d1)?.to_dot("setup");
            let solver = solver_comm_graph(workers + 1)?.to_dot("solver");
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|source| polya_robust::CliError::Io {
                        path: dir.clone(),
                        source,
                    })?;
                    for (name, dot) in [("setup_graph", setup), ("solver_graph", solver)] {
                        let path = dir.join(format!("{name}.dot"));
                        std::fs::write(&path, dot).map_err(|source| polya_robust::CliError::Io {
                            path: path.clone(),
                            source,
                        })?;
                        println!("wrote {}", path.display());
                    }
                }
                None => print!("{setup}{solver}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Costmodel {
            l,
            n,
            dp,
            da,
            d1,
            d2,
            workers,
        } => {
            let config = PolyaConfig {
                l,
                n,
                d_p: dp,
                d_a: da,
                d1,
                d2,
            };
            let m = cost_model(&config, workers)?;
            let value = serde_json::json!({
                "workers": m.workers,
                "l0": m.l0,
                "p_blocks": m.num_p_blocks,
                "lyapunov_blocks": m.num_lyap_blocks,
                "blocks": m.num_blocks(),
                "constraints": m.k,
                "setup_flops": m.setup_flops,
                "setup_comm": m.setup_comm,
                "solver_flops": m.solver_flops,
                "root_flops": m.root_flops,
                "communication": m.communication,
                "decentralized": m.decentralized,
                "centralized": m.centralized,
                "speedup": m.speedup,
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("json value"));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
