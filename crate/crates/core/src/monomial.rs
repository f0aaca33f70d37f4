//! Exponents of homogeneous `l`-variate monomials and their lexicographic
//! enumeration.
//!
//! `W_d` is the set of multi-indices `γ ∈ N^l` with `Σγ_i = d`, ordered so that
//! `γ` precedes `η` when the leftmost non-zero entry of `γ − η` is positive.
//! Every public index in this crate is 1-based: the first exponent of `W_d`
//! (the pure power `α_1^d`) has index 1.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// A multi-index `γ ∈ N^l`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Exponent(Vec<u32>);

impl Exponent {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::MalformedExponent("exponent must have at least one entry".into()));
        }
        Ok(Exponent(entries))
    }

    /// The unit exponent `e_i` (0-based position) of length `l`.
    pub fn unit(l: usize, i: usize) -> Self {
        let mut v = vec![0; l];
        v[i] = 1;
        Exponent(v)
    }

    pub fn zero(l: usize) -> Self {
        Exponent(vec![0; l])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// Number of variables `l`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    pub fn add(&self, other: &Exponent) -> Exponent {
        debug_assert_eq!(self.len(), other.len());
        Exponent(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self − other`, or `None` when any entry would go negative.
    pub fn checked_sub(&self, other: &Exponent) -> Option<Exponent> {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(Exponent)
    }

    /// `self − e_i`, or `None` when entry `i` is zero.
    pub fn minus_unit(&self, i: usize) -> Option<Exponent> {
        if self.0[i] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[i] -= 1;
        Some(Exponent(v))
    }

    /// `α^γ`.
    pub fn monomial_value(&self, alpha: &[f64]) -> f64 {
        self.0.iter().zip(alpha).map(|(&e, &a)| a.powi(e as i32)).product()
    }

    /// Multinomial coefficient `d! / (γ_1! ⋯ γ_l!)`, exact.
    pub fn multinomial(&self) -> Result<u64> {
        let mut acc: u64 = 1;
        let mut running: u64 = 0;
        for &e in &self.0 {
            // Product of successive binomials C(running + e, e).
            for j in 1..=e as u64 {
                running += 1;
                acc = acc
                    .checked_mul(running)
                    .ok_or(Error::Overflow("multinomial coefficient"))?
                    / j;
            }
        }
        Ok(acc)
    }
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// `f(l, d)`: the number of `l`-variate monomials of degree `d`.
///
/// Returns 0 for `l = 0`, otherwise `binomial(l + d − 1, l − 1)` in checked
/// integer arithmetic.
pub fn cardinality(l: usize, d: usize) -> Result<usize> {
    if l == 0 {
        return Ok(0);
    }
    binomial(l - 1 + d, l - 1)
}

pub(crate) fn binomial(n: usize, k: usize) -> Result<usize> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays an integer at every step.
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow("binomial coefficient"))?
            / (i as u128 + 1);
    }
    usize::try_from(acc).map_err(|_| Error::Overflow("binomial coefficient"))
}

/// 1-based lexicographic index `⟨γ⟩` of `γ` within `W_{|γ|}`.
///
/// Counts the exponents that precede `γ`: at each position `j` those sharing
/// `γ`'s prefix but carrying a larger entry at `j`.
pub fn lex_index(gamma: &Exponent) -> Result<usize> {
    let l = gamma.len();
    if l == 0 {
        return Err(Error::MalformedExponent("empty exponent".into()));
    }
    let mut remaining = gamma.degree();
    let mut idx: usize = 1;
    for (j, &g) in gamma.entries()[..l - 1].iter().enumerate() {
        let g = g as usize;
        let tail = l - j - 1;
        for larger in g + 1..=remaining {
            idx = idx
                .checked_add(cardinality(tail, remaining - larger)?)
                .ok_or(Error::Overflow("lexicographic index"))?;
        }
        remaining -= g;
    }
    Ok(idx)
}

/// The totally ordered set `W_d` for `l` variables.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    l: usize,
    d: usize,
    exponents: Vec<Exponent>,
    positions: HashMap<Exponent, usize>,
}

impl MonomialBasis {
    pub fn num_vars(&self) -> usize {
        self.l
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[Exponent] {
        &self.exponents
    }

    /// Exponent at 1-based index `i`.
    pub fn get(&self, i: usize) -> Option<&Exponent> {
        i.checked_sub(1).and_then(|p| self.exponents.get(p))
    }

    /// 1-based index of `gamma`, `None` if it is not in this basis.
    pub fn index_of(&self, gamma: &Exponent) -> Option<usize> {
        self.positions.get(gamma).map(|p| p + 1)
    }

    /// 0-based storage position of `gamma`.
    pub(crate) fn position(&self, gamma: &Exponent) -> Option<usize> {
        self.positions.get(gamma).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Exponent> {
        self.exponents.iter()
    }
}

/// Enumerates `W_d` in lexicographic order.
pub fn enumerate(l: usize, d: usize) -> Result<MonomialBasis> {
    if l == 0 {
        return Err(Error::InvalidConfig(
            "cannot enumerate monomials in zero variables".into(),
        ));
    }
    let count = cardinality(l, d)?;
    let mut exponents = Vec::with_capacity(count);
    let mut current = vec![0u32; l];
    fill(&mut current, 0, d as u32, &mut exponents);
    debug_assert_eq!(exponents.len(), count);
    let positions = exponents.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
    Ok(MonomialBasis {
        l,
        d,
        exponents,
        positions,
    })
}

fn fill(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Exponent>) {
    let l = current.len();
    if pos == l - 1 {
        current[pos] = remaining;
        out.push(Exponent(current.clone()));
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        fill(current, pos + 1, remaining - e, out);
    }
    current[pos] = 0;
}
