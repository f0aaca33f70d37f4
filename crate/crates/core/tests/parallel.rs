mod common;

use common::*;
use nalgebra::DMatrix;
use polya_core::parallel_runtime::{
    cost_model, run_setup, run_solve, setup_comm_graph, solver_comm_graph, Node, PayloadKind, RuntimeConfig,
};
use polya_core::sdp_assembly::build_problem;
use polya_core::sdp_solver::solve;
use polya_core::{enumerate, MatrixPolynomial, PolyaConfig, SolverOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn stable_affine(seed: u64, l: usize, n: usize) -> MatrixPolynomial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_homogeneous(&mut rng, l, n, 1, false);
    let coeffs = a.coeffs().iter().map(|c| c - DMatrix::identity(n, n) * 2.0).collect();
    MatrixPolynomial::from_coeffs(l, n, 1, coeffs).unwrap()
}

#[test]
fn setup_is_independent_of_worker_count() {
    let config = PolyaConfig {
        l: 3,
        n: 2,
        d_p: 2,
        d_a: 1,
        d1: 2,
        d2: 3,
    };
    let a = stable_affine(1, 3, 2);
    let (serial, part1) = run_setup(&config, &a, 1e-3, &RuntimeConfig::new(1).unwrap()).unwrap();
    assert_eq!(part1.sizes(), vec![serial.num_blocks()]);
    assert_eq!(serial, build_problem(&config, &a, 1e-3).unwrap());
    for workers in [2, 4, 7] {
        let (par, part) = run_setup(&config, &a, 1e-3, &RuntimeConfig::new(workers).unwrap()).unwrap();
        assert_eq!(par, serial);
        let sizes = part.sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}

#[test]
fn one_worker_equals_serial_solve() {
    let config = PolyaConfig {
        l: 2,
        n: 2,
        d_p: 1,
        d_a: 1,
        d1: 2,
        d2: 2,
    };
    let a = stable_affine(2, 2, 2);
    let runtime = RuntimeConfig::new(1).unwrap();
    let (problem, part) = run_setup(&config, &a, 1e-3, &runtime).unwrap();
    let options = SolverOptions::default();
    let (par, _) = run_solve(&problem, &part, &options, &runtime).unwrap();
    let ser = solve(&problem, &options);
    assert_eq!(par.log, ser.log);
    assert_eq!(par.y, ser.y);
    assert_eq!(par.status, ser.status);
}

#[test]
fn eight_workers_match_one_and_use_a_star() {
    // 33 + 34 = 67 blocks
    let config = PolyaConfig {
        l: 2,
        n: 2,
        d_p: 1,
        d_a: 1,
        d1: 31,
        d2: 31,
    };
    let a = stable_affine(3, 2, 2);
    let options = SolverOptions::default();
    let one = RuntimeConfig::new(1).unwrap();
    let eight = RuntimeConfig::new(8).unwrap();
    let (problem, p1) = run_setup(&config, &a, 1e-3, &one).unwrap();
    assert!(problem.num_blocks() >= 64);
    let (_, p8) = run_setup(&config, &a, 1e-3, &eight).unwrap();
    let (r1, _) = run_solve(&problem, &p1, &options, &one).unwrap();
    let (r8, bus) = run_solve(&problem, &p8, &options, &eight).unwrap();
    assert!(!r1.log.is_empty());
    // compensated reductions make the grouping of blocks irrelevant
    assert_eq!(r1.log, r8.log);
    assert_eq!(r1.y, r8.y);

    assert_eq!(bus.worker_to_worker(), 0);
    let kdim = problem.num_constraints();
    let scm: Vec<_> = bus
        .records()
        .iter()
        .filter(|r| r.kind == PayloadKind::ScmContribution)
        .collect();
    assert_eq!(scm.len(), 8 * r8.iterations());
    assert!(scm
        .iter()
        .all(|r| r.scalars == 2 * (kdim + kdim * (kdim + 1) / 2) && r.receiver == Node::Root));
    let broadcasts = bus
        .records()
        .iter()
        .filter(|r| r.kind == PayloadKind::DualVector)
        .count();
    assert_eq!(broadcasts, 8 * r8.iterations());
    assert!(bus
        .to_csv()
        .starts_with("step,sender,receiver,payload_kind,scalar_count\n"));
}

#[test]
fn solve_rejects_a_partition_of_another_problem() {
    let config = PolyaConfig {
        l: 2,
        n: 1,
        d_p: 1,
        d_a: 1,
        d1: 0,
        d2: 0,
    };
    let a = stable_affine(4, 2, 1);
    let runtime = RuntimeConfig::new(2).unwrap();
    let (problem, _) = run_setup(&config, &a, 1e-3, &runtime).unwrap();
    let wrong = polya_core::BlockPartition::balanced(problem.num_blocks() + 1, 2).unwrap();
    assert!(run_solve(&problem, &wrong, &SolverOptions::default(), &runtime).is_err());
}

#[test]
fn setup_graph_examples() {
    let g = setup_comm_graph(2, 1, 2).unwrap();
    assert_eq!(g.edges(), vec![(1, 2), (2, 3), (3, 4), (4, 5)]);
    assert!(setup_comm_graph(1, 2, 3).unwrap().edges().is_empty());

    // brute force: γ sends to η when η − γ is a non-negative unit step
    let (l, d) = (3, 2);
    let cur = enumerate(l, d).unwrap();
    let next = enumerate(l, d + 1).unwrap();
    let mut want = Vec::new();
    for (i, g) in cur.iter().enumerate() {
        for (j, h) in next.iter().enumerate() {
            let step: Vec<i64> = h
                .entries()
                .iter()
                .zip(g.entries())
                .map(|(&a, &b)| a as i64 - b as i64)
                .collect();
            if step.iter().all(|&s| s >= 0) && i != j {
                want.push((i + 1, j + 1));
            }
        }
    }
    assert_eq!(setup_comm_graph(l, d, 0).unwrap().edges(), want);
}

#[test]
fn solver_graph_examples() {
    assert_eq!(solver_comm_graph(2).unwrap().edges(), vec![(1, 2), (2, 1)]);
    let g = solver_comm_graph(4).unwrap();
    assert_eq!(g.edges().len(), 6);
    assert!(g.edges().iter().all(|&(i, j)| i == 1 || j == 1));
    assert_eq!((g.out_degree(1), g.in_degree(1)), (3, 3));
    assert!((2..=4).all(|v| g.out_degree(v) == 1 && g.in_degree(v) == 1));
    assert!(solver_comm_graph(1).is_err());
}

#[test]
fn cost_model_checks() {
    let config = PolyaConfig {
        l: 10,
        n: 5,
        d_p: 2,
        d_a: 3,
        d1: 4,
        d2: 4,
    };
    let m = cost_model(&config, 4).unwrap();
    assert_eq!(m.num_blocks(), 53625);
    for n in [1, 5, 20, 100] {
        let config = PolyaConfig { n, ..config };
        let mut prev = 0.0;
        for workers in [1, 2, 4, 8, 16, 64, 256, 1024, 53625] {
            let sp = cost_model(&config, workers).unwrap().speedup;
            assert!(sp <= workers as f64 * (1.0 + 1e-12));
            assert!(sp >= prev);
            prev = sp;
        }
    }
    let big = PolyaConfig { n: 1_000_000, ..config };
    for workers in [1, 8, 200, 1000] {
        let m = cost_model(&big, workers).unwrap();
        assert!(m.speedup / workers as f64 >= 0.99);
    }
}
