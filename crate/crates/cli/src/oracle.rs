//! Sampled check of a Lyapunov certificate on the simplex.

use nalgebra::SymmetricEigen;
use polya_core::{lyapunov_residual, MatrixPolynomial};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub points: usize,
    /// Smallest eigenvalue of `P(α)` over the points.
    pub min_lambda_p: f64,
    /// Largest eigenvalue of `A(α)ᵀP(α) + P(α)A(α)` over the points.
    pub max_lambda_residual: f64,
    pub worst_p_point: Vec<f64>,
    pub worst_residual_point: Vec<f64>,
}

impl OracleSummary {
    pub fn passes(&self) -> bool {
        self.min_lambda_p > 0.0 && self.max_lambda_residual < 0.0
    }
}

/// Vertices, edge midpoints, then `samples` uniform draws from the simplex.
pub fn simplex_points(l: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut pts = Vec::with_capacity(l + l * l.saturating_sub(1) / 2 + samples);
    for i in 0..l {
        let mut v = vec![0.0; l];
        v[i] = 1.0;
        pts.push(v);
    }
    for i in 0..l {
        for j in i + 1..l {
            let mut v = vec![0.0; l];
            v[i] = 0.5;
            v[j] = 0.5;
            pts.push(v);
        }
    }
    // normalized exponentials are Dirichlet(1, …, 1)
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let e: Vec<f64> = (0..l).map(|_| Exp1.sample(&mut rng)).collect();
        let s: f64 = e.iter().sum();
        pts.push(e.into_iter().map(|x: f64| x / s).collect());
    }
    pts
}

pub fn grid_oracle(a: &MatrixPolynomial, p: &MatrixPolynomial, samples: usize, seed: u64) -> Result<OracleSummary> {
    oracle_at(a, p, &simplex_points(a.num_vars(), samples, seed))
}

/// The same check on caller-supplied points.
pub fn oracle_at(a: &MatrixPolynomial, p: &MatrixPolynomial, points: &[Vec<f64>]) -> Result<OracleSummary> {
    if points.is_empty() {
        return Err(CliError::Spec("oracle needs at least one point".into()));
    }
    let mut summary = OracleSummary {
        points: points.len(),
        min_lambda_p: f64::INFINITY,
        max_lambda_residual: f64::NEG_INFINITY,
        worst_p_point: Vec::new(),
        worst_residual_point: Vec::new(),
    };
    for alpha in points {
        let pv = p.evaluate(alpha)?;
        let lp = SymmetricEigen::new(pv).eigenvalues.min();
        if lp < summary.min_lambda_p {
            summary.min_lambda_p = lp;
            summary.worst_p_point = alpha.clone();
        }
        let r = lyapunov_residual(a, p, alpha)?;
        let lr = SymmetricEigen::new(r).eigenvalues.max();
        if lr > summary.max_lambda_residual {
            summary.max_lambda_residual = lr;
            summary.worst_residual_point = alpha.clone();
        }
    }
    Ok(summary)
}
