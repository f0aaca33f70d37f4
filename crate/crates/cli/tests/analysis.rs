use nalgebra::DMatrix;
use polya_core::MatrixPolynomial;
use polya_robust::analysis::analyze_full;
use polya_robust::oracle::{oracle_at, simplex_points};
use polya_robust::report::{emit_report, Artifacts, MarginRow};
use polya_robust::{
    analyze, find_margin, grid_oracle, AnalysisOptions, AnalysisReport, MarginObjective, MonomialSpec, SystemSpec,
    Verdict,
};

fn scalar(values: &[f64]) -> SystemSpec {
    let l = values.len();
    SystemSpec {
        n: 1,
        l,
        monomials: values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut e = vec![0; l];
                e[i] = 1;
                MonomialSpec {
                    exponent: e,
                    matrix: vec![vec![v]],
                }
            })
            .collect(),
        options: AnalysisOptions::default(),
        map: None,
    }
}

fn two_state(off: f64) -> SystemSpec {
    SystemSpec {
        n: 2,
        l: 2,
        monomials: vec![
            MonomialSpec {
                exponent: vec![1, 0],
                matrix: vec![vec![-1.0, off], vec![0.0, -1.0]],
            },
            MonomialSpec {
                exponent: vec![0, 1],
                matrix: vec![vec![-1.0, 0.0], vec![off, -1.0]],
            },
        ],
        options: AnalysisOptions::default(),
        map: None,
    }
}

#[test]
fn scalar_verdicts() {
    let stable = analyze(&scalar(&[-1.0, -1.0])).unwrap();
    assert_eq!(stable.verdict, Verdict::RobustlyStableCertified);
    let o = stable.oracle.as_ref().unwrap();
    assert!(o.min_lambda_p > 0.0 && o.max_lambda_residual < 0.0);
    assert!(!stable.lyapunov.is_empty());

    let unstable = analyze(&scalar(&[1.0, -1.0])).unwrap();
    assert_eq!(unstable.verdict, Verdict::NotCertified);
    assert!(unstable.reason.is_some());
}

#[test]
fn two_state_verdict_matches_eigenvalue_grid() {
    for off in [2.0, 1.5, 0.5] {
        let spec = two_state(off);
        let report = analyze(&spec).unwrap();
        let a = spec.polynomial().unwrap();
        let stable = (0..=1000).all(|i| {
            let t = i as f64 / 1000.0;
            a.evaluate(&[t, 1.0 - t])
                .unwrap()
                .complex_eigenvalues()
                .iter()
                .all(|z| z.re < 0.0)
        });
        assert_eq!(report.is_certified(), stable, "off-diagonal {off}");
    }
}

#[test]
fn oracle_agrees_with_fine_grid() {
    let spec = two_state(1.2);
    let full = analyze_full(&spec).unwrap();
    let p = full.p.expect("certificate");
    let coarse = grid_oracle(&full.a, &p, 1000, 3).unwrap();
    let fine_points: Vec<Vec<f64>> = (0..=100_000)
        .map(|i| {
            let t = i as f64 / 100_000.0;
            vec![t, 1.0 - t]
        })
        .collect();
    let fine = oracle_at(&full.a, &p, &fine_points).unwrap();
    let scale = fine.max_lambda_residual.abs().max(fine.min_lambda_p.abs());
    assert!(fine.min_lambda_p <= coarse.min_lambda_p + 1e-12);
    assert!((fine.min_lambda_p - coarse.min_lambda_p).abs() <= 1e-3 * scale.max(1.0));
    assert!((fine.max_lambda_residual - coarse.max_lambda_residual).abs() <= 1e-3 * scale.max(1.0));
}

#[test]
fn oracle_sample_count() {
    let pts = simplex_points(3, 1000, 0);
    assert_eq!(pts.len(), 1000 + 3 + 3);
    let a = MatrixPolynomial::from_coeffs(3, 1, 0, vec![DMatrix::from_element(1, 1, -1.0)]).unwrap();
    let p = MatrixPolynomial::from_coeffs(3, 1, 0, vec![DMatrix::identity(1, 1)]).unwrap();
    assert_eq!(grid_oracle(&a, &p, 1000, 0).unwrap().points, 1006);
}

#[test]
fn margin_bisection_contract() {
    // A(α) = α1·(−1) + α2·(−1) shifted by L: stable while (1 − L) + 2L > 0, i.e. L > −1
    let mut spec = scalar(&[-1.0, -1.0]);
    spec.options.bisect_lo = Some(-2.0);
    spec.options.bisect_hi = Some(0.5);
    spec.options.bisect_tol = 1e-3;
    let r = find_margin(&spec, MarginObjective::MinimizeL).unwrap();
    let m = r.margin.as_ref().unwrap();
    let value = m.value.unwrap();
    assert!(value > -1.0 && value < -1.0 + 2e-3, "{value}");
    assert!(m.bracket_width.unwrap() <= 1e-3);
    assert!(r.is_certified());
    // the certified end of the bracket never moves backwards
    let mut best = f64::INFINITY;
    for t in &m.trials {
        if t.certified {
            assert!(t.value <= best);
            best = t.value;
        }
    }
    assert_eq!(best, value);
    assert!(m.trials.len() <= spec.options.max_trials);
}

#[test]
fn margin_bracket_expands() {
    // scalar −1 on a box of half-width ρ: stable for ρ < 1/2 when the sum
    // of mapped coordinates is −(l−2)ρ... here l = 1, so g = 2ρα − ρ = ρ
    let mut spec = scalar(&[-1.0]);
    spec.monomials.push(MonomialSpec {
        exponent: vec![0],
        matrix: vec![vec![-0.5]],
    });
    spec.options.bisect_lo = Some(0.0);
    spec.options.bisect_hi = Some(0.1);
    spec.options.bisect_tol = 1e-3;
    let r = find_margin(&spec, MarginObjective::MaximizeRho).unwrap();
    let value = r.margin.as_ref().unwrap().value.unwrap();
    // A = −ρ − 0.5 < 0 always, so the bracket keeps growing until the budget ends
    assert!(value >= 0.1);
    assert!(r.reason.is_some());
}

#[test]
fn margin_without_certified_value() {
    let mut spec = scalar(&[1.0, 1.0]);
    spec.options.bisect_lo = Some(0.0);
    spec.options.bisect_hi = Some(0.5);
    spec.options.max_trials = 6;
    let r = find_margin(&spec, MarginObjective::MinimizeL).unwrap();
    assert!(!r.is_certified());
    let m = r.margin.unwrap();
    assert!(m.value.is_none());
    assert!(m.trials.len() <= 6);
}

#[test]
fn reports_round_trip_and_are_deterministic() {
    let mut spec = two_state(1.0);
    spec.options.workers = 2;
    spec.options.seed = 5;
    let a = analyze(&spec).unwrap();
    let b = analyze(&spec).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let back = AnalysisReport::from_json(&a.to_json().unwrap()).unwrap();
    let mut expect = a.clone();
    expect.timings = Default::default();
    assert_eq!(back, expect);

    let dir = tempfile::tempdir().unwrap();
    let rows = [MarginRow {
        d_p: 1,
        d1: 0,
        d2: 0,
        margin: Some(-0.2),
        trials: 9,
    }];
    let written = emit_report(
        &a,
        &Artifacts {
            margin_table: &rows,
            graphs: &[("g".into(), "digraph g {}\n".into())],
        },
        dir.path(),
    )
    .unwrap();
    assert_eq!(written.len(), 5);
    let table = std::fs::read_to_string(dir.path().join("margin_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    let log = std::fs::read_to_string(dir.path().join("solver_log.csv")).unwrap();
    assert_eq!(log.lines().count(), a.log.len() + 1);
}

#[test]
fn empty_log_report_is_valid_json() {
    let mut spec = scalar(&[-1.0, -1.0]);
    spec.options.max_iter = 0;
    let r = analyze(&spec).unwrap();
    assert!(r.log.is_empty());
    assert!(!r.is_certified());
    let json = r.to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["solver"]["iterations"], 0);
    assert_eq!(AnalysisReport::from_json(&json).unwrap().log.len(), 0);
}

#[test]
fn io_errors_surface() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let r = analyze(&scalar(&[-1.0, -1.0])).unwrap();
    let err = emit_report(&r, &Artifacts::default(), &file).unwrap_err();
    assert!(err.to_string().contains("occupied"));
}
