//! Compensated summation. A running sum is carried as an unevaluated pair
//! `hi + lo`; the rounded total is then the same however the terms were
//! grouped, so a reduction over workers agrees with the serial one.

/// `a + b = s + e` exactly, with `s = fl(a + b)`.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let (s, e) = two_sum(self.hi, v);
        self.hi = s;
        self.lo += e;
    }

    #[inline]
    pub fn merge(&mut self, other: Compensated) {
        let (s, e) = two_sum(self.hi, other.hi);
        self.hi = s;
        self.lo += e + other.lo;
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

pub fn zeros(len: usize) -> Vec<Compensated> {
    vec![Compensated::default(); len]
}

/// Merges per-worker partial sums and rounds once.
pub fn reduce<'a>(len: usize, parts: impl Iterator<Item = &'a [Compensated]>) -> Vec<f64> {
    let mut acc = zeros(len);
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p) {
            a.merge(*v);
        }
    }
    acc.into_iter().map(Compensated::value).collect()
}

/// Rounds each entry of a single partial sum.
pub fn values(parts: &[Compensated]) -> Vec<f64> {
    parts.iter().map(|c| c.value()).collect()
}

pub fn reduce_scalar(parts: impl Iterator<Item = Compensated>) -> f64 {
    parts
        .fold(Compensated::default(), |mut acc, v| {
            acc.merge(v);
            acc
        })
        .value()
}
