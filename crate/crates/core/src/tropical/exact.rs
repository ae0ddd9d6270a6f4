//! Exact rational linear algebra on `f64` inputs. Every finite double is a
//! dyadic rational, so conversion is lossless and all predicates are exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

pub(crate) fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Input(format!("non-finite entry {x}")))
}

pub(crate) fn rational_matrix(rows: &[Vec<f64>]) -> Result<Vec<Vec<BigRational>>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| rational(x)).collect())
        .collect()
}

/// Determinant by fraction-preserving Gaussian elimination.
pub(crate) fn det(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut sign = BigRational::from_integer(BigInt::from(1));
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if p != col {
            m.swap(p, col);
            sign = -sign;
        }
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &m[col][col];
            for c in col..n {
                let sub = &f * &m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    (0..n).fold(sign, |acc, i| acc * &m[i][i])
}

pub(crate) fn rank(mut m: Vec<Vec<BigRational>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for col in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(p, r);
        for i in r + 1..rows {
            if m[i][col].is_zero() {
                continue;
            }
            let f = &m[i][col] / &m[r][col];
            for c in col..cols {
                let sub = &f * &m[r][c];
                m[i][c] -= sub;
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

pub(crate) fn abs(x: &BigRational) -> BigRational {
    x.abs()
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub(crate) fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}
