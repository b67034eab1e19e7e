use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::SpecialFnError;

/// Largest `k` accepted by [`poisson_moment`]. Row sums beyond this leave
/// the `f64` range for moderate `λ`.
pub const MAX_STIRLING_ORDER: usize = 150;

/// Row `k` of the Stirling numbers of the second kind, `S(k, 0..=k)`.
pub fn stirling_row(k: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for n in 1..=k {
        let mut next = vec![BigUint::zero(); n + 1];
        for l in 1..=n {
            let mut v = if l < n {
                &row[l] * BigUint::from(l)
            } else {
                BigUint::zero()
            };
            v += &row[l - 1];
            next[l] = v;
        }
        row = next;
    }
    row
}

/// `S(k, l)`, the number of partitions of a `k`-set into `l` blocks.
///
/// ```
/// use fracwalk::specialfn::stirling2;
/// assert_eq!(stirling2(3, 2), 3u32.into());
/// assert_eq!(stirling2(0, 0), 1u32.into());
/// ```
pub fn stirling2(k: usize, l: usize) -> BigUint {
    if l > k {
        return BigUint::zero();
    }
    stirling_row(k).swap_remove(l)
}

/// Bell number `B_k`.
pub fn bell(k: usize) -> BigUint {
    stirling_row(k).into_iter().sum()
}

/// The upper bound `(0.792 k / ln(k + 1))^k` on `B_k`, for `k ≥ 1`.
pub fn bell_bound(k: usize) -> f64 {
    let k = k as f64;
    (0.792 * k / (k + 1.0).ln()).powf(k)
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// `n (n-1) ... (n-k+1)`; zero when `k > n`.
pub fn falling_factorial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    ((n - k + 1)..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// `E[X^k]` for `X ~ Poisson(λ)`, as `Σ_l λ^l S(k, l)`.
pub fn poisson_moment(lambda: f64, k: usize) -> Result<f64, SpecialFnError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SpecialFnError::Domain {
            op: "poisson_moment",
            detail: format!("lambda must be positive and finite, got {lambda}"),
        });
    }
    if k > MAX_STIRLING_ORDER {
        return Err(SpecialFnError::Cap {
            op: "poisson_moment",
            order: k,
            cap: MAX_STIRLING_ORDER,
        });
    }
    let row = stirling_row(k);
    // Horner in λ.
    let mut acc = 0.0;
    for s in row.iter().rev() {
        acc = acc * lambda + s.to_f64().unwrap_or(f64::INFINITY);
    }
    Ok(acc)
}
