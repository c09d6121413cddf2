//! Exact binomial arithmetic over big rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Row `n` of Pascal's triangle.
pub fn binomial_row(n: u32) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for j in 0..n {
        let next = &row[j as usize] * BigInt::from(n - j) / BigInt::from(j + 1);
        row.push(next);
    }
    row
}

/// `P(Bin(n, p) = j)` for `j = 0..=n`.
pub fn binomial_pmf_exact(n: u32, p: &BigRational) -> Vec<BigRational> {
    let q = BigRational::one() - p;
    let coeffs = binomial_row(n);
    let mut p_pow = vec![BigRational::one(); n as usize + 1];
    let mut q_pow = vec![BigRational::one(); n as usize + 1];
    for j in 1..=n as usize {
        p_pow[j] = &p_pow[j - 1] * p;
        q_pow[j] = &q_pow[j - 1] * &q;
    }
    (0..=n as usize)
        .map(|j| BigRational::from_integer(coeffs[j].clone()) * &p_pow[j] * &q_pow[n as usize - j])
        .collect()
}

/// `P(Bin(n, p) >= k)`.
pub fn binomial_tail_exact(n: u32, p: &BigRational, k: u32) -> BigRational {
    if k == 0 {
        return BigRational::one();
    }
    if k > n {
        return BigRational::zero();
    }
    binomial_pmf_exact(n, p)
        .into_iter()
        .skip(k as usize)
        .fold(BigRational::zero(), |acc, x| acc + x)
}

/// Nearest `f64`.
pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
