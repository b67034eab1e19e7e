//! Complex random walks built from the `N`-th roots of a complex constant.
//!
//! `ξ` is uniform on `β^{1/N}·{1, ω, …, ω^{N-1}}` with `ω = e^{2πi/N}`, and
//! `W_n(t) = n^{-1/N} Σ_{j ≤ ⌊nt⌋} ξ_j`.

mod moments;

pub use moments::{
    limit_expectation_series, limit_moment, limit_moment_coefficient, remainder_bound,
    balanced_path_probability, return_probability, walk_moment_coefficient, walk_moment_exact,
    MAX_MOMENT_BLOCKS, MAX_RETURN_COMPOSITIONS,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::specialfn::{principal_root, SpecialFnError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("walk order N must be at least 2, got {0}")]
    Order(u32),
    #[error("beta must be finite and non-zero, got {0}")]
    Beta(Complex64),
    #[error("{op}: (N, beta) = ({order}, {beta}) violates the stability condition")]
    Unstable {
        op: &'static str,
        order: u32,
        beta: Complex64,
    },
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("{op}: order {order} exceeds the cap {cap}")]
    Cap {
        op: &'static str,
        order: usize,
        cap: usize,
    },
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

/// Order `N` and constant `β` of the walk, with the principal root fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkSpec {
    order: u32,
    beta: Complex64,
    beta_root: Complex64,
    stable: bool,
}

impl WalkSpec {
    pub fn new(order: u32, beta: Complex64) -> Result<Self, WalkError> {
        if order < 2 {
            return Err(WalkError::Order(order));
        }
        if !(beta.re.is_finite() && beta.im.is_finite()) || beta.norm() == 0.0 {
            return Err(WalkError::Beta(beta));
        }
        Ok(Self {
            order,
            beta,
            beta_root: principal_root(beta, order),
            stable: is_stable(order, beta),
        })
    }

    pub fn real(order: u32, beta: f64) -> Result<Self, WalkError> {
        Self::new(order, Complex64::new(beta, 0.0))
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn beta_root(&self) -> Complex64 {
        self.beta_root
    }

    /// Whether `Re((-i)^N β y^N) ≤ 0` for every real `y`.
    pub fn is_stable(&self) -> bool {
        self.stable
    }

    pub fn require_stable(&self, op: &'static str) -> Result<(), WalkError> {
        if self.stable {
            Ok(())
        } else {
            Err(WalkError::Unstable {
                op,
                order: self.order,
                beta: self.beta,
            })
        }
    }

    /// The support of `ξ`: `β^{1/N} ω^k` for `k = 0..N`.
    pub fn support(&self) -> Vec<Complex64> {
        (0..self.order)
            .map(|k| self.beta_root * unit_root(self.order, k))
            .collect()
    }

    /// Same order, `β` replaced by `-β`.
    pub fn negated(&self) -> Self {
        Self::new(self.order, -self.beta).expect("negation keeps a valid spec")
    }
}

/// `e^{2πik/N}`, exact at the quarter turns.
pub fn unit_root(order: u32, k: u32) -> Complex64 {
    let k = k % order;
    if 4 * k % order == 0 {
        return match 4 * k / order {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 / order as f64)
}

/// `(-i)^N`, exact.
pub fn minus_i_pow(order: u32) -> Complex64 {
    match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// `i^N`, exact.
pub fn i_pow(order: u32) -> Complex64 {
    minus_i_pow(order).conj()
}

/// Stability of `(N, β)`: `Re((-1)^{N/2} β) ≤ 0` for even `N`, and
/// `(-i)^N β` purely imaginary for odd `N`.
pub fn is_stable(order: u32, beta: Complex64) -> bool {
    let rotated = minus_i_pow(order) * beta;
    if order % 2 == 0 {
        rotated.re <= 0.0
    } else {
        rotated.re.abs() <= 1e-12 * beta.norm()
    }
}

/// Number of steps `⌊nt⌋`, robust to `nt` landing a rounding error below an integer.
pub fn step_count(n: u64, t: f64) -> u64 {
    if t <= 0.0 {
        return 0;
    }
    (n as f64 * t * (1.0 + 4.0 * f64::EPSILON)).floor() as u64
}

/// `n^{1/N}`.
pub fn scale(order: u32, n: u64) -> f64 {
    (n as f64).powf(1.0 / order as f64)
}

/// One draw of `ξ`.
pub fn sample_xi<R: Rng + ?Sized>(spec: &WalkSpec, rng: &mut R) -> Complex64 {
    let k = rng.random_range(0..spec.order);
    spec.beta_root * unit_root(spec.order, k)
}

/// `E[ξ^k]`: `β^{k/N}` when `N | k`, else zero.
pub fn xi_moment(spec: &WalkSpec, k: u32) -> Complex64 {
    if k % spec.order != 0 {
        return Complex64::new(0.0, 0.0);
    }
    spec.beta.powu(k / spec.order)
}

/// `ψ_ξ(λ) = (1/N) Σ_k exp(i β^{1/N} λ ω^k)`.
pub fn xi_char_fn(spec: &WalkSpec, lambda: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let sum: Complex64 = (0..spec.order)
        .map(|k| (i * spec.beta_root * lambda * unit_root(spec.order, k)).exp())
        .sum();
    sum / spec.order as f64
}

/// `z^k` by repeated squaring.
pub fn powu64(mut z: Complex64, mut k: u64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    while k > 0 {
        if k & 1 == 1 {
            acc *= z;
        }
        z *= z;
        k >>= 1;
    }
    acc
}

/// `E[e^{iyW_n(t)}] = ψ_ξ(y n^{-1/N})^{⌊nt⌋}`.
pub fn walk_char_fn_exact(spec: &WalkSpec, n: u64, t: f64, y: Complex64) -> Complex64 {
    walk_char_fn_steps(spec, n, step_count(n, t), y)
}

/// As [`walk_char_fn_exact`] with the step count given directly.
pub fn walk_char_fn_steps(spec: &WalkSpec, n: u64, steps: u64, y: Complex64) -> Complex64 {
    let psi = xi_char_fn(spec, y / scale(spec.order, n));
    powu64(psi, steps)
}

/// `exp(i^N β t λ^N / N!)`.
pub fn limit_char_fn(spec: &WalkSpec, t: f64, lambda: f64) -> Complex64 {
    let nf = factorial_f64(spec.order);
    (i_pow(spec.order) * spec.beta * t * lambda.powi(spec.order as i32) / nf).exp()
}

pub(crate) fn factorial_f64(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Position of the walk together with how many times each root was used.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    pub n: u64,
    pub t: f64,
    pub steps: u64,
    pub counts: Vec<u64>,
    pub position: Complex64,
}

/// Root counts of `steps` i.i.d. draws of `ξ`, via sequential binomials.
pub fn sample_counts<R: Rng + ?Sized>(order: u32, steps: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; order as usize];
    if steps <= 4 * order as u64 {
        for _ in 0..steps {
            counts[rng.random_range(0..order) as usize] += 1;
        }
        return counts;
    }
    let mut remaining = steps;
    for k in 0..order as usize - 1 {
        if remaining == 0 {
            break;
        }
        let p = 1.0 / (order as usize - k) as f64;
        let c = Binomial::new(remaining, p)
            .expect("valid binomial parameters")
            .sample(rng);
        counts[k] = c;
        remaining -= c;
    }
    counts[order as usize - 1] += remaining;
    counts
}

/// `n^{-1/N} β^{1/N} Σ_k c_k ω^k` for root counts `c`.
pub fn position_from_counts(spec: &WalkSpec, n: u64, counts: &[u64]) -> Complex64 {
    let lattice: Complex64 = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| unit_root(spec.order, k as u32) * c as f64)
        .sum();
    spec.beta_root * lattice / scale(spec.order, n)
}

pub fn walk_state<R: Rng + ?Sized>(spec: &WalkSpec, n: u64, t: f64, rng: &mut R) -> WalkState {
    let steps = step_count(n, t);
    let counts = sample_counts(spec.order, steps, rng);
    let position = position_from_counts(spec, n, &counts);
    WalkState {
        n,
        t,
        steps,
        counts,
        position,
    }
}

/// One draw of `W_n(t)`.
pub fn walk_sample<R: Rng + ?Sized>(spec: &WalkSpec, n: u64, t: f64, rng: &mut R) -> Complex64 {
    walk_state(spec, n, t, rng).position
}

/// One draw of the walk after a given number of steps.
pub fn walk_sample_steps<R: Rng + ?Sized>(
    spec: &WalkSpec,
    n: u64,
    steps: u64,
    rng: &mut R,
) -> Complex64 {
    let counts = sample_counts(spec.order, steps, rng);
    position_from_counts(spec, n, &counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    struct Stats {
        n: f64,
        mean: Complex64,
        m2: (f64, f64),
    }

    impl Stats {
        fn new() -> Self {
            Self { n: 0.0, mean: c(0.0, 0.0), m2: (0.0, 0.0) }
        }
        fn push(&mut self, x: Complex64) {
            self.n += 1.0;
            let d = x - self.mean;
            self.mean += d / self.n;
            let d2 = x - self.mean;
            self.m2.0 += d.re * d2.re;
            self.m2.1 += d.im * d2.im;
        }
        fn stderr(&self) -> f64 {
            let v = self.m2.0.max(self.m2.1) / (self.n - 1.0);
            (v / self.n).sqrt()
        }
    }

    #[test]
    fn principal_root_is_a_root() {
        for (n, beta) in [(2, c(-1.0, 0.0)), (3, c(0.0, 6.0)), (4, c(-24.0, 0.0)), (5, c(2.0, -3.0))] {
            let spec = WalkSpec::new(n, beta).unwrap();
            let back = spec.beta_root().powu(n);
            assert!((back - beta).norm() <= 1e-12 * beta.norm());
            let arg = spec.beta_root().arg();
            assert!(arg > -PI / n as f64 && arg <= PI / n as f64 + 1e-15);
        }
    }

    #[test]
    fn stability_flags() {
        assert!(WalkSpec::real(2, 1.0).unwrap().is_stable());
        assert!(!WalkSpec::real(2, -1.0).unwrap().is_stable());
        assert!(WalkSpec::real(4, -1.0).unwrap().is_stable());
        assert!(!WalkSpec::real(4, 1.0).unwrap().is_stable());
        assert!(WalkSpec::real(3, 6.0).unwrap().is_stable());
        assert!(WalkSpec::real(3, -6.0).unwrap().is_stable());
        assert!(!WalkSpec::new(3, c(0.0, 1.0)).unwrap().is_stable());
        assert!(WalkSpec::real(5, 1.0).unwrap().is_stable());
        assert!(WalkSpec::new(2, c(0.5, 3.0)).unwrap().is_stable());
    }

    proptest! {
        #[test]
        fn stability_flag_matches_symbol_sign(order in 2u32..7, re in -5.0..5.0f64, im in -5.0..5.0f64, real_only in any::<bool>()) {
            let beta = if real_only { c(re, 0.0) } else { c(re, im) };
            prop_assume!(beta.norm() > 1e-3);
            let spec = WalkSpec::new(order, beta).unwrap();
            let mut all = true;
            for j in -20..=20 {
                let y = j as f64 / 7.0;
                let v = minus_i_pow(order) * beta * y.powi(order as i32);
                if v.re > 1e-12 * v.norm().max(1.0) { all = false; }
            }
            prop_assert_eq!(spec.is_stable(), all);
        }

        #[test]
        fn sign_flip_duality(half in 1u32..4, re in -5.0..5.0f64, im in -5.0..5.0f64, lr in -3.0..3.0f64, li in -1.0..1.0f64) {
            // -ξ_{N,β} has the law of ξ_{N,-β} for odd N; for even N the
            // support is symmetric and -ξ_{N,β} has the law of ξ_{N,β}.
            let beta = c(re, im);
            prop_assume!(beta.norm() > 1e-3);
            let lambda = c(lr, li);
            let odd = WalkSpec::new(2 * half + 1, beta).unwrap();
            let lhs = xi_char_fn(&odd, -lambda);
            let rhs = xi_char_fn(&odd.negated(), lambda);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
            let even = WalkSpec::new(2 * half, beta).unwrap();
            let lhs = xi_char_fn(&even, -lambda);
            let rhs = xi_char_fn(&even, lambda);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        }

        #[test]
        fn char_fn_factorizes(order in 2u32..6, n in 1u64..200, s_steps in 0u64..300, extra in 0u64..300, y in -3.0..3.0f64) {
            let spec = WalkSpec::real(order, if order % 4 == 0 { -1.0 } else { 1.0 }).unwrap();
            let y = c(y, 0.0);
            let whole = walk_char_fn_steps(&spec, n, s_steps + extra, y);
            let split = walk_char_fn_steps(&spec, n, s_steps, y) * walk_char_fn_steps(&spec, n, extra, y);
            prop_assert!((whole - split).norm() <= 1e-12 * whole.norm().max(1.0));
            // Same through the time parametrisation.
            let s = s_steps as f64 / n as f64;
            let t = (s_steps + extra) as f64 / n as f64;
            prop_assert_eq!(walk_char_fn_exact(&spec, n, t, y), whole);
            let split = walk_char_fn_exact(&spec, n, s, y) * walk_char_fn_exact(&spec, n, extra as f64 / n as f64, y);
            prop_assert!((whole - split).norm() <= 1e-12 * whole.norm().max(1.0));
        }
    }

    #[test]
    fn xi_moments() {
        let s = WalkSpec::real(3, 1.0).unwrap();
        assert_eq!(xi_moment(&s, 3), c(1.0, 0.0));
        assert_eq!(xi_moment(&s, 2), c(0.0, 0.0));
        let s = WalkSpec::real(2, -1.0).unwrap();
        assert_eq!(xi_moment(&s, 4), c(1.0, 0.0));
        // Direct average over the support.
        for (n, beta) in [(2, c(-1.0, 0.0)), (3, c(0.0, 6.0)), (5, c(2.0, -1.0))] {
            let s = WalkSpec::new(n, beta).unwrap();
            for k in 0..12 {
                let direct: Complex64 =
                    s.support().iter().map(|x| x.powu(k)).sum::<Complex64>() / n as f64;
                let size = s.beta().norm().powf(k as f64 / n as f64).max(1.0);
                assert!((direct - xi_moment(&s, k)).norm() < 1e-13 * size);
            }
        }
    }

    #[test]
    fn char_fn_values_and_derivative() {
        let s = WalkSpec::real(2, 1.0).unwrap();
        for l in [-2.0, 0.3, 1.7] {
            assert!((xi_char_fn(&s, c(l, 0.0)) - c(f64::cos(l), 0.0)).norm() < 1e-15);
        }
        for order in 2..6u32 {
            let s = WalkSpec::new(order, c(1.3, 0.4)).unwrap();
            assert!((xi_char_fn(&s, c(0.0, 0.0)) - 1.0).norm() < 1e-15);
            // N-th derivative at 0 by central differences of the symmetrised
            // Taylor coefficient: ψ(λ) = 1 + i^N β λ^N/N! + O(λ^{2N}).
            let h = 1e-2;
            let coeff = (xi_char_fn(&s, c(h, 0.0)) - 1.0) / h.powi(order as i32);
            let want = i_pow(order) * s.beta() / factorial_f64(order);
            assert!((coeff - want).norm() < 1e-3 * want.norm(), "N={order}");
        }
    }

    #[test]
    fn step_count_is_robust() {
        assert_eq!(step_count(10, 0.3), 3);
        assert_eq!(step_count(3, 1.0 / 3.0), 1);
        assert_eq!(step_count(100, 0.29), 29);
        assert_eq!(step_count(7, 0.0), 0);
        assert_eq!(step_count(2, 0.7), 1);
    }

    #[test]
    fn heat_walk_char_fn() {
        let s = WalkSpec::real(2, 1.0).unwrap();
        let v = walk_char_fn_exact(&s, 10_000, 1.0, c(1.0, 0.0));
        assert!((v - c((-0.5f64).exp(), 0.0)).norm() < 1e-3);
        assert_eq!(walk_char_fn_exact(&s, 10, 1.0, c(0.0, 0.0)), c(1.0, 0.0));
        assert!((limit_char_fn(&s, 2.0, 1.5) - c((-2.25f64).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn samples_live_on_the_lattice() {
        let spec = WalkSpec::new(3, c(0.0, 6.0)).unwrap();
        let mut rng = RandomStream::new(5, 0);
        for steps in [0u64, 1, 5, 12, 200] {
            let st = walk_state(&spec, 4, steps as f64 / 4.0, &mut rng);
            assert_eq!(st.steps, steps);
            assert_eq!(st.counts.iter().sum::<u64>(), steps);
            let direct: Complex64 = st
                .counts
                .iter()
                .zip(spec.support())
                .map(|(&k, x)| x * k as f64)
                .sum::<Complex64>()
                / scale(3, 4);
            assert!((direct - st.position).norm() < 1e-12 * (1.0 + direct.norm()));
        }
        assert_eq!(walk_sample(&spec, 10, 0.0, &mut rng), c(0.0, 0.0));
        let one = walk_sample(&spec, 1, 1.0, &mut rng);
        assert!((one.norm() - 6f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn xi_sampling_moments() {
        let spec = WalkSpec::new(3, c(1.0, 2.0)).unwrap();
        let mut rng = RandomStream::new(9, 1);
        let mut first = Stats::new();
        let mut nth = Stats::new();
        for _ in 0..1_000_000 {
            let x = sample_xi(&spec, &mut rng);
            first.push(x);
            nth.push(x.powu(3));
            let abs = x.norm().powi(2);
            assert!((abs - spec.beta().norm().powf(2.0 / 3.0)).abs() < 1e-13);
        }
        assert!(first.mean.norm() < 4.0 * first.stderr() * std::f64::consts::SQRT_2);
        assert!((nth.mean - spec.beta()).norm() < 1e-12);
    }

    #[test]
    fn walk_power_mean() {
        let spec = WalkSpec::real(2, 1.0).unwrap();
        let mut rng = RandomStream::new(3, 2);
        let (n, t) = (50u64, 0.6);
        let mut st = Stats::new();
        for _ in 0..200_000 {
            st.push(walk_sample(&spec, n, t, &mut rng).powu(2));
        }
        let want = 30.0 / 50.0;
        assert!((st.mean - c(want, 0.0)).norm() < 4.0 * st.stderr() * std::f64::consts::SQRT_2);
    }

    #[test]
    fn empirical_char_fn_matches_exact() {
        let mut rng = RandomStream::new(21, 0);
        for (order, beta, n, t) in [(2u32, c(1.0, 0.0), 20u64, 0.5), (3, c(0.0, 6.0), 10, 1.0), (4, c(-1.0, 0.0), 30, 0.4)] {
            let spec = WalkSpec::new(order, beta).unwrap();
            for y in [-1.5, 0.4, 1.0] {
                let y = c(y, 0.0);
                let mut st = Stats::new();
                for _ in 0..100_000 {
                    let w = walk_sample(&spec, n, t, &mut rng);
                    st.push((Complex64::i() * y * w).exp());
                }
                let exact = walk_char_fn_exact(&spec, n, t, y);
                let diff = st.mean - exact;
                assert!(diff.re.abs() < 4.0 * st.stderr() && diff.im.abs() < 4.0 * st.stderr(), "N={order} y={y}");
            }
        }
    }

    #[test]
    fn multinomial_counts_are_uniform() {
        let mut rng = RandomStream::new(2, 7);
        let mut tot = [0u64; 5];
        for _ in 0..2000 {
            let counts = sample_counts(5, 1000, &mut rng);
            for (a, b) in tot.iter_mut().zip(counts) {
                *a += b;
            }
        }
        for v in tot {
            let p = v as f64 / 2.0e6;
            assert!((p - 0.2).abs() < 4.0 * (0.2f64 * 0.8 / 2.0e6).sqrt());
        }
    }
}
