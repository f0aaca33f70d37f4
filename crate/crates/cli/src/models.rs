//! Builders for the two bundled systems: a discretized flux-diffusion model
//! with uncertain resistivity, and a cubic 3-state system on the simplex.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::spec::{AnalysisOptions, MonomialSpec, SystemSpec};

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Minor radius of the last closed magnetic surface in metres.
pub const LCMS_RADIUS: f64 = 0.72;

/// Nominal resistivity samples at `x = 0.25Δx, 1Δx, 2Δx, …, (N−1)Δx,
/// (N − 0.25)Δx` for `N = 7`.
pub const NOMINAL_ETA: [f64; 8] = [
    1.775e-8, 2.703e-8, 5.676e-8, 1.182e-7, 2.058e-7, 3.655e-7, 1.076e-6, 8.419e-6,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokamakModel {
    pub spec: SystemSpec,
    /// Resistivity unit: one unit of `α_k` adds this much to `η_k`.
    pub eta_unit: f64,
    /// Positive factor every coefficient matrix was multiplied by.
    pub normalization: f64,
}

/// `A(η)` is linear in the resistivity samples: returns the matrix
/// multiplying each sample.
///
/// Sample `0` sits at `x_{3/4}`, sample `k` (`1 ≤ k < N`) at `x_{k+1/2}`,
/// sample `N` at `x_{N+1/4}`.
pub fn flux_matrices(nx: usize, radius: f64, mu0: f64) -> Result<Vec<DMatrix<f64>>> {
    if nx < 3 {
        return Err(CliError::Spec(format!("need at least 3 grid points, got {nx}")));
    }
    if !(radius > 0.0 && mu0 > 0.0) {
        return Err(CliError::Spec("radius and permeability must be positive".into()));
    }
    let dx = 1.0 / nx as f64;
    let c = 1.0 / (mu0 * radius * radius * dx * dx);
    // x at half-integer grid index s, i.e. x_s = (s − 1/2)Δx
    let x = |s: f64| (s - 0.5) * dx;
    let mut g = vec![DMatrix::zeros(nx, nx); nx + 1];
    let third = 4.0 / 3.0;

    // first row
    let (x34, x32) = (x(0.75), x(1.5));
    g[1][(0, 0)] -= third * c / x32;
    g[0][(0, 0)] -= third * c * 2.0 / x34;
    g[1][(0, 1)] += third * c * x(2.0) / x32;

    // interior rows j = 2 … N−1 (0-based r = j − 1)
    for j in 2..nx {
        let r = j - 1;
        let jf = j as f64;
        let (xm, xp) = (x(jf - 0.5), x(jf + 0.5));
        g[j - 1][(r, r - 1)] += c * x(jf - 1.0) / xm;
        g[j][(r, r)] -= c * x(jf) / xp;
        g[j - 1][(r, r)] -= c * x(jf) / xm;
        g[j][(r, r + 1)] += c * x(jf + 1.0) / xp;
    }

    // last row
    let r = nx - 1;
    let nf = nx as f64;
    let (xm, xe) = (x(nf - 0.5), x(nf + 0.25));
    g[nx - 1][(r, r - 1)] += third * c * x(nf - 1.0) / xm;
    g[nx][(r, r)] -= third * c * 2.0 * x(nf) / xe;
    g[nx - 1][(r, r)] -= third * c * x(nf) / xm;
    Ok(g)
}

/// Affine `A(α) = A0 + Σ_k A_k α_k` with `η_k = η̂_k + u·α_k`, where the unit
/// `u` is the largest nominal sample. All matrices are divided by the largest
/// entry of `A0`, which leaves stability unchanged.
pub fn build_tokamak_model(nx: usize, eta_hat: &[f64], radius: f64, mu0: f64) -> Result<TokamakModel> {
    if eta_hat.len() != nx + 1 {
        return Err(CliError::Spec(format!(
            "{} grid points need {} resistivity samples, got {}",
            nx,
            nx + 1,
            eta_hat.len()
        )));
    }
    if eta_hat.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(CliError::Spec("resistivity samples must be positive".into()));
    }
    let g = flux_matrices(nx, radius, mu0)?;
    let a0 = g
        .iter()
        .zip(eta_hat)
        .fold(DMatrix::zeros(nx, nx), |acc, (gk, &e)| acc + gk * e);
    let normalization = 1.0 / a0.amax();
    let eta_unit = eta_hat.iter().cloned().fold(0.0, f64::max);
    let l = nx + 1;
    let mut monomials = vec![MonomialSpec::from_matrix(vec![0; l], &(a0 * normalization))];
    for (k, gk) in g.iter().enumerate() {
        let mut e = vec![0; l];
        e[k] = 1;
        monomials.push(MonomialSpec::from_matrix(e, &(gk * (eta_unit * normalization))));
    }
    let spec = SystemSpec {
        n: nx,
        l,
        monomials,
        options: AnalysisOptions {
            dp: 1,
            d1: 1,
            d2: 1,
            bisect_lo: Some(0.0),
            bisect_hi: Some(0.01),
            bisect_tol: 1e-5,
            ..AnalysisOptions::default()
        },
        map: None,
    };
    spec.validate()?;
    Ok(TokamakModel {
        spec,
        eta_unit,
        normalization,
    })
}

/// The model on the default seven-point grid.
pub fn default_tokamak() -> TokamakModel {
    build_tokamak_model(7, &NOMINAL_ETA, LCMS_RADIUS, MU0).expect("bundled data is consistent")
}

/// Coefficients of the cubic 3-state system, row-major, in the order of
/// [`CUBIC_EXPONENTS`].
pub const CUBIC_MATRICES: [[f64; 9]; 6] = [
    [-0.61, -0.56, 0.402, -0.48, -0.550, 0.671, -1.01, -0.918, 0.029],
    [-0.484, -0.86, 1.5, -0.732, -0.841, -0.126, 0.685, 0.305, 0.106],
    [-0.357, 0.344, -0.661, -0.210, -0.505, 0.588, 0.268, 0.487, -0.846],
    [-0.881, -0.436, 0.228, 0.503, -0.812, 0.249, -0.012, 0.542, -0.536],
    [-0.703, -0.298, -0.178, 0.402, -0.761, -0.300, -0.010, 0.461, -0.588],
    [-0.201, -0.182, -0.557, 0.803, -0.412, -0.203, -0.440, 0.011, -0.881],
];

pub const CUBIC_EXPONENTS: [[u32; 3]; 6] = [[3, 0, 0], [2, 1, 0], [1, 1, 1], [1, 0, 2], [0, 3, 0], [0, 0, 3]];

/// The cubic 3-state system, to be analysed on shifted simplices.
pub fn cubic_system() -> SystemSpec {
    let monomials = CUBIC_EXPONENTS
        .iter()
        .zip(&CUBIC_MATRICES)
        .map(|(e, m)| MonomialSpec::from_matrix(e.to_vec(), &DMatrix::from_row_slice(3, 3, m)))
        .collect();
    SystemSpec {
        n: 3,
        l: 3,
        monomials,
        options: AnalysisOptions {
            dp: 2,
            d1: 4,
            d2: 4,
            bisect_lo: Some(-0.5),
            bisect_hi: Some(0.5),
            ..AnalysisOptions::default()
        },
        map: None,
    }
}
