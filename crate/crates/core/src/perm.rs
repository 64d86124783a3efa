//! Factorial-number-system codec between integers in `[0, n!)` and tours.
//!
//! Unranking consumes the index least-significant digit first: at step `k`
//! (radix `n - k`) the digit `P mod (n - k)` selects from the labels not yet
//! used, then `P` is divided by the radix.

use crate::error::{Error, Result};

/// Largest city count whose factorial fits in a `u64`.
pub const MAX_CITIES: usize = 20;

pub fn factorial(n: usize) -> u64 {
    assert!(n <= MAX_CITIES, "{n}! overflows u64");
    (1..=n as u64).product()
}

/// An integer in `[0, n!)` naming one permutation of `{1..n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PermIndex {
    value: u64,
    n: usize,
}

impl PermIndex {
    pub fn new(value: u64, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_CITIES {
            return Err(Error::InvalidSize(format!(
                "permutation length {n} outside 1..={MAX_CITIES}"
            )));
        }
        let limit = factorial(n);
        if value >= limit {
            return Err(Error::IndexOutOfRange { value, n, limit });
        }
        Ok(Self { value, n })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn n(self) -> usize {
        self.n
    }
}

/// Unrank `index` into a permutation of the labels `1..=n`.
pub fn decode(index: PermIndex) -> Vec<usize> {
    let n = index.n;
    let mut remaining: Vec<usize> = (1..=n).collect();
    let mut p = index.value;
    let mut out = Vec::with_capacity(n);
    for radix in (1..=n as u64).rev() {
        let j = (p % radix) as usize;
        out.push(remaining.remove(j));
        p /= radix;
    }
    out
}

/// Rank a permutation of `1..=n`; inverse of [`decode`].
pub fn encode(order: &[usize]) -> Result<PermIndex> {
    validate_permutation(order)?;
    let n = order.len();
    let mut remaining: Vec<usize> = (1..=n).collect();
    let mut digits = Vec::with_capacity(n);
    for &label in order {
        let j = remaining
            .iter()
            .position(|&r| r == label)
            .expect("validated permutation");
        digits.push(j as u64);
        remaining.remove(j);
    }
    let value = digits
        .iter()
        .enumerate()
        .rev()
        .fold(0u64, |acc, (k, &d)| acc * (n - k) as u64 + d);
    PermIndex::new(value, n)
}

/// Map a measured basis state to a tour. Qubit 0 is the least-significant bit
/// of `outcome`; values at or above `n!` wrap modulo `n!`.
pub fn outcome_to_tour(outcome: u64, n: usize) -> Vec<usize> {
    let limit = factorial(n);
    decode(PermIndex {
        value: outcome % limit,
        n,
    })
}

/// Same as [`outcome_to_tour`] but reading an explicit bit list, `bits[k]` = qubit `k`.
pub fn bits_to_tour(bits: &[bool], n: usize) -> Vec<usize> {
    let v = bits
        .iter()
        .enumerate()
        .fold(0u64, |acc, (k, &b)| acc | ((b as u64) << k));
    outcome_to_tour(v, n)
}

/// Number of `q`-bit outcomes that decode to the tour with rank `index`.
pub fn preimage_count(index: u64, n: usize, qubits: usize) -> u64 {
    let outcomes = 1u64 << qubits;
    let limit = factorial(n);
    outcomes / limit + u64::from(index < outcomes % limit)
}

pub(crate) fn validate_permutation(order: &[usize]) -> Result<()> {
    let n = order.len();
    if n == 0 || n > MAX_CITIES {
        return Err(Error::InvalidTour(format!("length {n} outside 1..={MAX_CITIES}")));
    }
    let mut seen = vec![false; n + 1];
    for &label in order {
        if label == 0 || label > n {
            return Err(Error::InvalidTour(format!("label {label} outside 1..={n}")));
        }
        if std::mem::replace(&mut seen[label], true) {
            return Err(Error::InvalidTour(format!("label {label} repeated")));
        }
    }
    Ok(())
}
