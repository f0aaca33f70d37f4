mod common;

use common::*;
use nalgebra::DMatrix;
use polya_core::polya::{beta_table, h_table, reconstruct_condition};
use polya_core::sdp_assembly::{assemble_b, assemble_c, build_problem, compute_k, v_map};
use polya_core::sdp_solver::apply_bt;
use polya_core::{enumerate, BlockPartition, MatrixPolynomial, PolyaConfig, SymBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(l: usize, n: usize, d_p: usize, d_a: usize, d1: usize, d2: usize) -> PolyaConfig {
    PolyaConfig { l, n, d_p, d_a, d1, d2 }
}

#[test]
fn v_map_examples() {
    let sym = SymBasis::new(2);
    let mut x = vec![0.0; 6];
    x[0] = 1.0;
    assert_eq!(
        v_map(&sym, 1, &x).unwrap(),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
    );
    let mut x = vec![0.0; 6];
    x[3] = 1.0;
    assert_eq!(
        v_map(&sym, 2, &x).unwrap(),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
    );
    assert!(v_map(&sym, 3, &x).is_err());
    assert!(v_map(&sym, 1, &x[..5]).is_err());
}

#[test]
fn v_map_is_the_basis_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 1..=5 {
        let sym = SymBasis::new(n);
        let x: Vec<f64> = (0..3 * sym.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for h in 1..=3 {
            let mut want = DMatrix::zeros(n, n);
            for k in 1..=sym.dim() {
                want += sym.matrix(k).unwrap() * x[(h - 1) * sym.dim() + k - 1];
            }
            let got = v_map(&sym, h, &x).unwrap();
            assert_eq!(got, want);
            assert_eq!(got, got.transpose());
        }
    }
    let order: Vec<(usize, usize)> = (1..=6).map(|k| SymBasis::new(3).pair(k).unwrap()).collect();
    assert_eq!(order, vec![(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)]);
}

#[test]
fn c_example_against_expansion() {
    let config = cfg(2, 2, 1, 1, 1, 1);
    let beta = beta_table(&config).unwrap();
    let c = assemble_c(&config, 1.0, &beta).unwrap();
    let scalars: Vec<f64> = c.blocks().iter().map(|b| b[(0, 0)]).collect();
    assert_eq!(&scalars[..3], &[1.0, 2.0, 1.0]);
    assert!(scalars[3..].iter().all(|&s| s == 0.0));
    assert!(c.blocks().iter().all(|b| *b == DMatrix::identity(2, 2) * b[(0, 0)]));

    // δ·(Σα)^{d1}(Σα)^{d_p} for a larger case
    let config = cfg(3, 1, 2, 1, 2, 0);
    let beta = beta_table(&config).unwrap();
    let c = assemble_c(&config, 0.5, &beta).unwrap();
    let s = sum_power(3, 4);
    for (j, gamma) in beta.cols().iter().enumerate() {
        assert_eq!(c.block(j)[(0, 0)], 0.5 * s[gamma.entries()]);
    }

    let config = cfg(2, 1, 0, 1, 2, 0);
    let beta = beta_table(&config).unwrap();
    let c = assemble_c(&config, 0.1, &beta).unwrap();
    for j in 0..beta.num_cols() {
        assert_eq!(c.block(j)[(0, 0)], 0.1 * beta.get(1, j + 1) as f64);
    }
}

#[test]
fn compute_k_examples() {
    assert_eq!(compute_k(&cfg(8, 7, 1, 1, 1, 1)).unwrap(), 224);
    assert_eq!(compute_k(&cfg(1, 1, 0, 1, 0, 0)).unwrap(), 1);
    assert_eq!(compute_k(&cfg(3, 3, 2, 1, 0, 0)).unwrap(), 36);
}

#[test]
fn scalar_polya_inequalities() {
    // A(α) = a1 α1 + a2 α2, P(α) = p1 α1 + p2 α2, n = 1
    let (a1, a2) = (-1.5, 0.25);
    let a = MatrixPolynomial::from_coeffs(
        2,
        1,
        1,
        vec![DMatrix::from_element(1, 1, a1), DMatrix::from_element(1, 1, a2)],
    )
    .unwrap();
    let config = cfg(2, 1, 1, 1, 1, 1);
    let problem = build_problem(&config, &a, 0.0).unwrap();
    assert_eq!(problem.num_constraints(), 2);
    let (p1, p2) = (0.7, 1.3);
    let z = apply_bt(&problem, &[p1, p2]).unwrap();
    let got: Vec<f64> = z.blocks().iter().map(|b| b[(0, 0)]).collect();
    let want = [
        p1,
        p1 + p2,
        p2,
        -2.0 * p1 * a1,
        -2.0 * (p1 * a2 + p2 * a1 + p1 * a1),
        -2.0 * (p2 * a2 + p1 * a2 + p2 * a1),
        -2.0 * p2 * a2,
    ];
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-15);
    }
}

#[test]
fn dual_identity_and_semantics() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let l = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=3);
        let config = cfg(
            l,
            n,
            rng.gen_range(0..=2),
            rng.gen_range(1..=2),
            rng.gen_range(0..=2),
            rng.gen_range(0..=2),
        );
        let a = random_homogeneous(&mut rng, l, n, config.d_a, false);
        let delta = 1e-3;
        let problem = build_problem(&config, &a, delta).unwrap();
        let beta = beta_table(&config).unwrap();
        let h = h_table(&config, &a).unwrap();
        let y: Vec<f64> = (0..problem.num_constraints())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let p = problem.lyapunov_polynomial(&y).unwrap();
        let bt = apply_bt(&problem, &y).unwrap();
        let c = problem.c();
        let num_p = problem.num_p_blocks();

        // Lyapunov blocks: −Σ_h (H[h,γ]ᵀ P_h + P_h H[h,γ])
        for (col, j) in (num_p..problem.num_blocks()).enumerate() {
            let mut want = DMatrix::zeros(n, n);
            for (hm, ph) in h.column(col).iter().zip(p.coeffs()) {
                want -= hm.transpose() * ph + ph * hm;
            }
            assert!((bt.block(j) - want).amax() < 1e-12);
        }

        // evaluated slack against the reconstructed conditions
        let p_cols = enumerate(l, config.d_p + config.d1).unwrap();
        let l_cols = h.cols().clone();
        for _ in 0..20 {
            let alpha = random_simplex_point(&mut rng, l);
            let (first, second) = reconstruct_condition(&beta, &h, &p, &alpha).unwrap();
            let mut slack_p = DMatrix::zeros(n, n);
            for (j, g) in p_cols.iter().enumerate() {
                slack_p += (bt.block(j) - c.block(j)) * g.monomial_value(&alpha);
            }
            let want = &first - DMatrix::identity(n, n) * delta;
            assert!((slack_p - want).amax() < 1e-10 * (1.0 + first.amax()));
            let mut slack_l = DMatrix::zeros(n, n);
            for (col, g) in l_cols.iter().enumerate() {
                slack_l += bt.block(num_p + col) * g.monomial_value(&alpha);
            }
            assert!((slack_l + &second).amax() < 1e-10 * (1.0 + second.amax()));
        }
    }
}

#[test]
fn structure_and_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let config = cfg(3, 3, 1, 2, 1, 2);
    let a = random_homogeneous(&mut rng, 3, 3, 2, false);
    let problem = build_problem(&config, &a, 1e-3).unwrap();
    let beta = beta_table(&config).unwrap();
    let h = h_table(&config, &a).unwrap();
    let bs = assemble_b(&config, &beta, &h).unwrap();
    assert_eq!(bs.len(), problem.num_constraints());
    for (k, b) in bs.iter().enumerate() {
        assert!(b.is_symmetric(0.0));
        assert_eq!(b.num_blocks(), problem.num_blocks());
        assert_eq!(*b, problem.constraint_matrix(k));
    }
    assert_eq!(problem.primal_dim(), problem.num_blocks() * 3);
    assert_eq!(problem.c().num_blocks(), beta.num_cols() + h.num_cols());
    assert!(build_problem(&config, &a, -1.0).is_err());
}

#[test]
fn partition_examples() {
    assert_eq!(BlockPartition::balanced(24, 12).unwrap().sizes(), vec![2; 12]);
    let sizes = BlockPartition::balanced(24, 18).unwrap().sizes();
    assert_eq!(sizes.iter().filter(|&&s| s == 2).count(), 6);
    assert_eq!(sizes.iter().filter(|&&s| s == 1).count(), 12);
    assert_eq!(BlockPartition::balanced(5, 5).unwrap().sizes(), vec![1; 5]);
    for (count, workers) in [(7, 3), (100, 9), (3, 3), (64, 8)] {
        let p = BlockPartition::balanced(count, workers).unwrap();
        let sizes = p.sizes();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(sizes.iter().sum::<usize>(), count);
        let mut next = 0;
        for r in p.ranges() {
            assert_eq!(r.start, next);
            next = r.end;
        }
        assert_eq!(p.owner(count - 1), Some(workers - 1));
    }
}
