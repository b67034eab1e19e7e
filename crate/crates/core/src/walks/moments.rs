use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::{factorial_f64, step_count, WalkError, WalkSpec};
use crate::specialfn::{bell_bound, factorial, falling_factorial, log_gamma};

/// Largest `h = k/N` accepted by the exact moment evaluators.
pub const MAX_MOMENT_BLOCKS: usize = 30;

// Integer partitions of h as multiplicity vectors: m[l-1] = number of parts equal to l.
fn partitions(h: usize) -> Vec<Vec<u64>> {
    fn rec(rest: usize, max_part: usize, m: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if rest == 0 {
            out.push(m.clone());
            return;
        }
        for part in (1..=max_part.min(rest)).rev() {
            m[part - 1] += 1;
            rec(rest - part, part, m, out);
            m[part - 1] -= 1;
        }
    }
    let mut out = Vec::new();
    let mut m = vec![0u64; h.max(1)];
    rec(h, h, &mut m, &mut out);
    out
}

fn big(n: BigUint) -> BigInt {
    BigInt::from(n)
}

/// `E[W_n^{hN}] / β^h` after `steps` steps, exactly.
///
/// Sums over partitions of `h` with multiplicities `m_l`:
/// `(hN)! / Π_l (m_l! ((lN)!)^{m_l}) · steps!/(steps - Σm)! · n^{-h}`.
pub fn walk_moment_coefficient(
    order: u32,
    n: u64,
    steps: u64,
    h: usize,
) -> Result<BigRational, WalkError> {
    if h > MAX_MOMENT_BLOCKS {
        return Err(WalkError::Cap {
            op: "walk_moment_exact",
            order: h * order as usize,
            cap: MAX_MOMENT_BLOCKS * order as usize,
        });
    }
    if n == 0 {
        return Err(WalkError::Domain {
            op: "walk_moment_exact",
            detail: "n must be positive".into(),
        });
    }
    if h == 0 {
        return Ok(BigRational::one());
    }
    let nn = order as u64;
    let total = factorial(h as u64 * nn);
    let mut acc = BigRational::zero();
    for m in partitions(h) {
        let blocks: u64 = m.iter().sum();
        if blocks > steps {
            continue;
        }
        let mut q = BigUint::one();
        for (l, &ml) in m.iter().enumerate() {
            if ml == 0 {
                continue;
            }
            q *= factorial(ml);
            q *= factorial((l as u64 + 1) * nn).pow(ml as u32);
        }
        let p = &total * falling_factorial(steps, blocks);
        acc += BigRational::new(big(p), big(q));
    }
    let denom = BigUint::from(n).pow(h as u32);
    Ok(acc / BigRational::from_integer(big(denom)))
}

/// `E[W_n(t)^k]`; zero unless `N | k`.
pub fn walk_moment_exact(spec: &WalkSpec, n: u64, t: f64, k: usize) -> Result<Complex64, WalkError> {
    let order = spec.order() as usize;
    if k % order != 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let h = k / order;
    let coeff = walk_moment_coefficient(spec.order(), n, step_count(n, t), h)?;
    let c = coeff.to_f64().unwrap_or(f64::INFINITY);
    if !c.is_finite() {
        return Err(WalkError::Cap {
            op: "walk_moment_exact",
            order: k,
            cap: order * MAX_MOMENT_BLOCKS,
        });
    }
    Ok(spec.beta().powu(h as u32) * c)
}

/// `(hN)! / (h! (N!)^h)`, so that the limit moment is `coefficient·(βt)^h`.
pub fn limit_moment_coefficient(order: u32, h: usize) -> BigRational {
    let nn = order as u64;
    let p = factorial(h as u64 * nn);
    let q = factorial(h as u64) * factorial(nn).pow(h as u32);
    BigRational::new(big(p), big(q))
}

/// `(βt/N!)^{k/N} k!/(k/N)!` when `N | k`, else zero.
pub fn limit_moment(spec: &WalkSpec, t: f64, k: usize) -> Complex64 {
    let order = spec.order() as usize;
    if k % order != 0 {
        return Complex64::new(0.0, 0.0);
    }
    let h = k / order;
    let c = limit_moment_coefficient(spec.order(), h)
        .to_f64()
        .unwrap_or(f64::INFINITY);
    (spec.beta() * t).powu(h as u32) * c
}

/// Upper bound on `|E[W_n(t)^{hN}] - limit_moment|` for `h ≥ 2`.
pub fn remainder_bound(spec: &WalkSpec, n: u64, t: f64, h: usize) -> Result<f64, WalkError> {
    if h < 2 {
        return Err(WalkError::Domain {
            op: "remainder_bound",
            detail: format!("h must be at least 2, got {h}"),
        });
    }
    if n == 0 || t < 0.0 {
        return Err(WalkError::Domain {
            op: "remainder_bound",
            detail: format!("need n >= 1 and t >= 0, got n={n}, t={t}"),
        });
    }
    let hf = h as f64;
    let nf = n as f64;
    let scale = spec.beta().norm().powi(h as i32) * t.powi(h as i32 - 1);
    let lead = limit_moment_coefficient(spec.order(), h)
        .to_f64()
        .unwrap_or(f64::INFINITY);
    let first = scale * (hf * hf + hf) / (2.0 * nf) * lead;
    let second = scale / nf * bell_bound(h * spec.order() as usize);
    Ok(first + second)
}

/// `Σ_h a_{hN} (hN)!/h! (βt/N!)^h`, the limit of `E[f(W_n(t))]` for an
/// entire `f` with Taylor coefficients `a_k`.
///
/// Stops once two consecutive terms fall below `tol·max(1, |sum|)`, after
/// at least four blocks.
pub fn limit_expectation_series<F: Fn(usize) -> Complex64>(
    spec: &WalkSpec,
    t: f64,
    taylor: F,
    tol: f64,
    max_blocks: usize,
) -> Result<Complex64, WalkError> {
    let order = spec.order() as usize;
    let bt = spec.beta() * t / factorial_f64(spec.order());
    let (log_bt, arg_bt) = (bt.norm().ln(), bt.arg());
    let mut sum = taylor(0);
    let mut quiet = 0;
    let mut last = f64::INFINITY;
    for h in 1..=max_blocks {
        let a = taylor(h * order);
        let term = if a == Complex64::new(0.0, 0.0) || bt.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let hf = h as f64;
            let log_w = log_gamma((h * order) as f64 + 1.0)? - log_gamma(hf + 1.0)?;
            let log_mag = a.norm().ln() + log_w + hf * log_bt;
            Complex64::from_polar(log_mag.exp(), a.arg() + hf * arg_bt)
        };
        sum += term;
        last = term.norm();
        if last <= tol * sum.norm().max(1.0) {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= 2 && h >= 4 {
            return Ok(sum);
        }
    }
    Err(WalkError::Special(crate::specialfn::SpecialFnError::NonConvergence {
        op: "limit_expectation_series",
        terms: max_blocks,
        last,
    }))
}

/// `(Nm)! / ((m!)^N N^{Nm})`: the probability that `Nm` draws of `ξ` use
/// every root exactly `m` times.
pub fn balanced_path_probability(order: u32, m: u64) -> Result<BigRational, WalkError> {
    let total = check_return_args(order, m)?;
    let p = factorial(total);
    let q = factorial(m).pow(order) * BigUint::from(order).pow(total as u32);
    Ok(BigRational::new(big(p), big(q)))
}

/// Largest number of root-count vectors enumerated for composite `N`.
pub const MAX_RETURN_COMPOSITIONS: u64 = 5_000_000;

/// `P(S(N,1)_{Nm} = 0)`, exactly.
///
/// For prime `N` the only vanishing combinations of the roots use each root
/// equally often and this is [`balanced_path_probability`]. For composite
/// `N` every root-count vector with zero lattice sum is counted.
pub fn return_probability(order: u32, m: u64) -> Result<BigRational, WalkError> {
    let total = check_return_args(order, m)?;
    if is_prime(order) {
        return balanced_path_probability(order, m);
    }
    let compositions = binomial_f64(total + order as u64 - 1, order as u64 - 1);
    if compositions > MAX_RETURN_COMPOSITIONS as f64 {
        return Err(WalkError::Cap {
            op: "return_probability",
            order: compositions as usize,
            cap: MAX_RETURN_COMPOSITIONS as usize,
        });
    }
    let phi = cyclotomic(order);
    let facts: Vec<BigUint> = (0..=total).map(factorial).collect();
    let mut counts = vec![0u64; order as usize];
    let mut hits = BigUint::zero();
    enumerate_counts(&mut counts, 0, total, &mut |c| {
        let poly: Vec<i128> = c.iter().map(|&v| v as i128).collect();
        if divides(&phi, poly) {
            let denom = c.iter().fold(BigUint::one(), |acc, &v| acc * &facts[v as usize]);
            hits += &facts[total as usize] / denom;
        }
    });
    let q = BigUint::from(order).pow(total as u32);
    Ok(BigRational::new(big(hits), big(q)))
}

fn check_return_args(order: u32, m: u64) -> Result<u64, WalkError> {
    if order < 3 || m < 1 {
        return Err(WalkError::Domain {
            op: "return_probability",
            detail: format!("need N >= 3 and m >= 1, got N={order}, m={m}"),
        });
    }
    const CAP: u64 = 20_000;
    let total = order as u64 * m;
    if total > CAP {
        return Err(WalkError::Cap {
            op: "return_probability",
            order: total as usize,
            cap: CAP as usize,
        });
    }
    Ok(total)
}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn binomial_f64(n: u64, k: u64) -> f64 {
    (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

fn enumerate_counts(c: &mut Vec<u64>, k: usize, rest: u64, f: &mut impl FnMut(&[u64])) {
    if k + 1 == c.len() {
        c[k] = rest;
        f(c);
        return;
    }
    for v in 0..=rest {
        c[k] = v;
        enumerate_counts(c, k + 1, rest - v, f);
    }
}

/// Coefficients of the cyclotomic polynomial `Φ_N`, lowest degree first.
fn cyclotomic(n: u32) -> Vec<i128> {
    let mut p = vec![0i128; n as usize + 1];
    p[0] = -1;
    p[n as usize] = 1;
    for d in (1..n).filter(|d| n % d == 0) {
        p = divide_exact(&p, &cyclotomic(d));
    }
    p
}

/// Quotient of `a` by the monic `b`, assuming the division is exact.
fn divide_exact(a: &[i128], b: &[i128]) -> Vec<i128> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let mut q = vec![0i128; a.len() - db];
    for i in (0..q.len()).rev() {
        let c = r[i + db];
        q[i] = c;
        for (j, bj) in b.iter().enumerate() {
            r[i + j] -= c * bj;
        }
    }
    debug_assert!(r.iter().all(|v| *v == 0));
    q
}

/// Whether the monic `phi` divides `p`.
fn divides(phi: &[i128], mut p: Vec<i128>) -> bool {
    let d = phi.len() - 1;
    for i in (d..p.len()).rev() {
        let c = p[i];
        if c != 0 {
            for (j, pj) in phi.iter().enumerate() {
                p[i - d + j] -= c * pj;
            }
        }
    }
    p.iter().all(|v| *v == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::{unit_root, WalkSpec};

    fn ratio(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn partition_counts() {
        let counts: Vec<usize> = (1..=10).map(|h| partitions(h).len()).collect();
        assert_eq!(counts, vec![1, 2, 3, 5, 7, 11, 15, 22, 30, 42]);
        for h in 1..=8 {
            for m in partitions(h) {
                let s: u64 = m.iter().enumerate().map(|(l, &c)| (l as u64 + 1) * c).sum();
                assert_eq!(s, h as u64);
            }
        }
    }

    // E[(Σ_{j≤K} ξ_j)^k] by brute-force enumeration of all N^K paths, exactly
    // for β = 1 and N ∈ {2, 4} (roots ±1, ±i have integer coordinates).
    fn brute_force_gaussian(order: u32, steps: u32, k: u32) -> (i64, i64) {
        let paths = (order as u64).pow(steps);
        let (mut re, mut im) = (0i128, 0i128);
        for code in 0..paths {
            let (mut x, mut y, mut c) = (0i128, 0i128, code);
            for _ in 0..steps {
                let r = unit_root(order, (c % order as u64) as u32);
                x += r.re.round() as i128;
                y += r.im.round() as i128;
                c /= order as u64;
            }
            // (x + iy)^k
            let (mut pr, mut pi) = (1i128, 0i128);
            for _ in 0..k {
                let nr = pr * x - pi * y;
                let ni = pr * y + pi * x;
                pr = nr;
                pi = ni;
            }
            re += pr;
            im += pi;
        }
        assert_eq!(re % paths as i128, 0);
        ((re / paths as i128) as i64, (im / paths as i128) as i64)
    }

    #[test]
    fn coefficient_matches_path_enumeration() {
        for order in [2u32, 4] {
            for steps in 1..=5u32 {
                for h in 1..=3usize {
                    let (re, im) = brute_force_gaussian(order, steps, h as u32 * order);
                    assert_eq!(im, 0);
                    let c = walk_moment_coefficient(order, 1, steps as u64, h).unwrap();
                    assert_eq!(c, ratio(re, 1), "N={order} K={steps} h={h}");
                }
            }
        }
    }

    #[test]
    fn documented_values() {
        let s = WalkSpec::real(2, 1.0).unwrap();
        let v = walk_moment_exact(&s, 4, 1.0, 2).unwrap();
        assert_eq!(v, Complex64::new(1.0, 0.0));
        assert_eq!(limit_moment(&s, 1.0, 4), Complex64::new(3.0, 0.0));
        let s3 = WalkSpec::real(3, 1.0).unwrap();
        assert_eq!(limit_moment(&s3, 2.0, 3), Complex64::new(2.0, 0.0));
        assert_eq!(limit_moment(&s3, 2.0, 0), Complex64::new(1.0, 0.0));
        let b = remainder_bound(&s, 100, 1.0, 2).unwrap();
        let want = 6.0 / 200.0 * (24.0 / 8.0) + (3.168f64 / 5f64.ln()).powi(4) / 100.0;
        assert!((b - want).abs() < 1e-15 * want);
    }

    #[test]
    fn exact_for_h_zero_and_one() {
        for order in [2u32, 3, 4, 5] {
            for (n, steps) in [(1u64, 1u64), (7, 7), (10, 3), (100, 250)] {
                let t = BigRational::new(BigInt::from(steps), BigInt::from(n));
                assert_eq!(walk_moment_coefficient(order, n, steps, 0).unwrap(), BigRational::one());
                let h1 = walk_moment_coefficient(order, n, steps, 1).unwrap();
                assert_eq!(h1, t * limit_moment_coefficient(order, 1));
            }
        }
    }

    #[test]
    fn vanishes_off_multiples() {
        for (order, beta) in [(2, 1.0), (3, 6.0), (4, -1.0), (5, 1.0)] {
            let s = WalkSpec::real(order, beta).unwrap();
            for k in 1..=12 {
                if k % order as usize != 0 {
                    assert_eq!(walk_moment_exact(&s, 10, 1.0, k).unwrap(), Complex64::new(0.0, 0.0));
                    assert_eq!(limit_moment(&s, 1.0, k), Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn remainder_bound_scales_and_holds() {
        for (order, beta) in [(2u32, 1.0), (3, 6.0), (4, -1.0)] {
            let s = WalkSpec::real(order, beta).unwrap();
            for h in [2usize, 3] {
                let b1 = remainder_bound(&s, 100, 1.3, h).unwrap();
                let b2 = remainder_bound(&s, 200, 1.3, h).unwrap();
                assert!((2.0 * b2 - b1).abs() <= 1e-14 * b1);
                for n in [100u64, 1000, 10_000] {
                    let t = 1.0;
                    let gap = (walk_moment_exact(&s, n, t, h * order as usize).unwrap()
                        - limit_moment(&s, t, h * order as usize))
                    .norm();
                    assert!(gap <= remainder_bound(&s, n, t, h).unwrap(), "N={order} h={h} n={n}");
                }
            }
        }
        assert!(remainder_bound(&WalkSpec::real(2, 1.0).unwrap(), 10, 1.0, 1).is_err());
    }

    #[test]
    fn series_special_cases() {
        let s = WalkSpec::real(2, 1.0).unwrap();
        let one = limit_expectation_series(&s, 1.0, |k| if k == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }, 1e-14, 50).unwrap();
        assert_eq!(one, Complex64::new(1.0, 0.0));
        for (order, beta) in [(2u32, Complex64::new(1.0, 0.0)), (3, Complex64::new(0.0, 6.0)), (4, Complex64::new(-1.0, 0.0))] {
            let s = WalkSpec::new(order, beta).unwrap();
            let pow = limit_expectation_series(&s, 0.7, |k| if k == order as usize { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }, 1e-14, 50).unwrap();
            assert!((pow - beta * 0.7).norm() < 1e-13);
            for lambda in [-2.0, 0.5, 1.5] {
                let taylor = |k: usize| {
                    let lf = (1..=k).fold(1.0, |acc, j| acc * lambda / j as f64);
                    Complex64::i().powu(k as u32) * lf
                };
                let v = limit_expectation_series(&s, 0.7, taylor, 1e-15, 200).unwrap();
                let want = crate::walks::limit_char_fn(&s, 0.7, lambda);
                assert!((v - want).norm() < 1e-12, "N={order} λ={lambda}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn cyclotomic_polynomials() {
        assert_eq!(cyclotomic(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic(6), vec![1, -1, 1]);
        assert_eq!(cyclotomic(5), vec![1, 1, 1, 1, 1]);
        assert!(divides(&cyclotomic(6), vec![1, 0, 0, 1, 0, 0]));
        assert!(!divides(&cyclotomic(6), vec![1, 1, 0, 0, 0, 0]));
    }

    #[test]
    fn return_probabilities_match_lattice_enumeration() {
        // Every step sequence, with the position tracked in floating point.
        for (order, m) in [(3u32, 1u64), (3, 2), (4, 1), (4, 2), (5, 1), (6, 1)] {
            let steps = (order as u64 * m) as u32;
            let roots: Vec<Complex64> = (0..order).map(|k| unit_root(order, k)).collect();
            let mut hits = 0u64;
            for code in 0..(order as u64).pow(steps) {
                let mut c = code;
                let mut z = Complex64::new(0.0, 0.0);
                for _ in 0..steps {
                    z += roots[(c % order as u64) as usize];
                    c /= order as u64;
                }
                if z.norm() < 1e-9 {
                    hits += 1;
                }
            }
            let want = BigRational::new(BigInt::from(hits), BigInt::from((order as u64).pow(steps)));
            assert_eq!(return_probability(order, m).unwrap(), want, "N={order} m={m}");
        }
    }

    #[test]
    fn return_probabilities() {
        assert_eq!(return_probability(3, 1).unwrap(), ratio(2, 9));
        assert_eq!(return_probability(5, 1).unwrap(), ratio(24, 625));
        assert!(return_probability(2, 1).is_err());
        // N = 4 is the simple walk on Z²: C(4m, 2m)² / 4^{4m} after 4m
        // steps, which exceeds the balanced-path count.
        for m in 1..=4u64 {
            let c = factorial(4 * m) / (factorial(2 * m) * factorial(2 * m));
            let want = BigRational::new(big(&c * &c), big(BigUint::from(4u32).pow(4 * m as u32)));
            assert_eq!(return_probability(4, m).unwrap(), want);
        }
        assert_eq!(return_probability(4, 1).unwrap(), ratio(36, 256));
        assert_eq!(balanced_path_probability(4, 1).unwrap(), ratio(24, 256));
        assert_eq!(balanced_path_probability(3, 2).unwrap(), return_probability(3, 2).unwrap());
        // Stirling: the N = 3 probability behaves like √3/(2πm).
        let mut prev = f64::INFINITY;
        for m in [10u64, 100, 1000] {
            let p = return_probability(3, m).unwrap().to_f64().unwrap();
            let r = p / (3f64.sqrt() / (2.0 * std::f64::consts::PI * m as f64));
            let dev = (r - 1.0).abs();
            assert!(dev < prev);
            prev = dev;
        }
        assert!(prev < 1e-3);
    }
}
