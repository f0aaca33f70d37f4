#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use polya_core::{enumerate, Exponent, MatrixPolynomial};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Sparse polynomial with matrix coefficients, keyed by exponent.
pub type Poly = BTreeMap<Vec<u32>, DMatrix<f64>>;

/// Scalar polynomial, keyed by exponent.
pub type ScalarPoly = BTreeMap<Vec<u32>, f64>;

pub fn unit(l: usize, i: usize) -> Vec<u32> {
    let mut e = vec![0; l];
    e[i] = 1;
    e
}

fn add_exp(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `(Σα)^d` by repeated multiplication.
pub fn sum_power(l: usize, d: usize) -> ScalarPoly {
    let mut out = ScalarPoly::new();
    out.insert(vec![0; l], 1.0);
    for _ in 0..d {
        let mut next = ScalarPoly::new();
        for (e, v) in &out {
            for i in 0..l {
                *next.entry(add_exp(e, &unit(l, i))).or_insert(0.0) += v;
            }
        }
        out = next;
    }
    out
}

pub fn scale_poly(s: &ScalarPoly, p: &Poly) -> Poly {
    let mut out = Poly::new();
    for (es, vs) in s {
        for (ep, cp) in p {
            let e = add_exp(es, ep);
            let n = cp.nrows();
            *out.entry(e).or_insert_with(|| DMatrix::zeros(n, n)) += cp * *vs;
        }
    }
    out
}

pub fn mul_poly(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let n = ca.nrows();
            *out.entry(add_exp(ea, eb)).or_insert_with(|| DMatrix::zeros(n, n)) += ca * cb;
        }
    }
    out
}

pub fn transpose_poly(a: &Poly) -> Poly {
    a.iter().map(|(e, c)| (e.clone(), c.transpose())).collect()
}

pub fn add_poly(a: &Poly, b: &Poly) -> Poly {
    let mut out = a.clone();
    for (e, c) in b {
        let n = c.nrows();
        *out.entry(e.clone()).or_insert_with(|| DMatrix::zeros(n, n)) += c;
    }
    out
}

pub fn to_poly(p: &MatrixPolynomial) -> Poly {
    p.basis()
        .iter()
        .zip(p.coeffs())
        .map(|(e, c)| (e.entries().to_vec(), c.clone()))
        .collect()
}

pub fn eval_poly(p: &Poly, alpha: &[f64]) -> DMatrix<f64> {
    let n = p.values().next().map_or(0, |c| c.nrows());
    let mut out = DMatrix::zeros(n, n);
    for (e, c) in p {
        let w: f64 = e.iter().zip(alpha).map(|(&k, a)| a.powi(k as i32)).product();
        out += c * w;
    }
    out
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n);
    (&m + m.transpose()) * 0.5
}

pub fn random_homogeneous(rng: &mut ChaCha8Rng, l: usize, n: usize, d: usize, symmetric: bool) -> MatrixPolynomial {
    let count = enumerate(l, d).unwrap().len();
    let coeffs = (0..count)
        .map(|_| {
            if symmetric {
                random_symmetric(rng, n)
            } else {
                random_matrix(rng, n)
            }
        })
        .collect();
    MatrixPolynomial::from_coeffs(l, n, d, coeffs).unwrap()
}

pub fn random_simplex_point(rng: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..l).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn exponent(e: &[u32]) -> Exponent {
    Exponent::new(e.to_vec()).unwrap()
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / (1.0 + a.amax().max(b.amax()))
}
