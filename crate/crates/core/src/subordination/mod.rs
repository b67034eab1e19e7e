//! Random time changes: the power-law jumps `Y_[m]`, the compound Poisson
//! approximant `S_m`, the `α`-stable subordinator `H` and its inverse `L`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, Poisson};
use thiserror::Error;

use crate::quadrature::{integrate_adaptive, QuadratureError};
use crate::specialfn::{
    complex_pow_alpha, expm1_complex, gamma, log_gamma, mittag_leffler, SpecialFnError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubordinationError {
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    Alpha(f64),
    #[error("m must be at least 2, got {0}")]
    M(u64),
    #[error("{op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

/// Whether `S_m` sums `Y_0, …, Y_X` (`X + 1` jumps) or `Y_1, …, Y_X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumConvention {
    #[default]
    AsPrinted,
    EmptySum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubordinatorSpec {
    alpha: f64,
    m: u64,
    lambda_rate: f64,
    c_m: f64,
    convention: SumConvention,
}

impl SubordinatorSpec {
    pub fn new(alpha: f64, m: u64) -> Result<Self, SubordinationError> {
        check_alpha(alpha)?;
        if m < 2 {
            return Err(SubordinationError::M(m));
        }
        let mf = m as f64;
        Ok(Self {
            alpha,
            m,
            lambda_rate: 1.0 / gamma(1.0 - alpha)?,
            c_m: alpha / (mf.powf(alpha) * (1.0 - mf.powf(-3.0 * alpha))),
            convention: SumConvention::AsPrinted,
        })
    }

    pub fn with_convention(mut self, convention: SumConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// `1/Γ(1-α)`.
    pub fn lambda_rate(&self) -> f64 {
        self.lambda_rate
    }

    /// Normaliser of the `Y_[m]` density.
    pub fn c_m(&self) -> f64 {
        self.c_m
    }

    pub fn convention(&self) -> SumConvention {
        self.convention
    }

    /// Support `(1/m, m²)` of `Y_[m]`.
    pub fn support(&self) -> (f64, f64) {
        let mf = self.m as f64;
        (1.0 / mf, mf * mf)
    }

    /// `c_m y^{-α-1}` on the support, zero elsewhere.
    pub fn y_density(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y <= lo || y >= hi {
            return 0.0;
        }
        self.c_m * y.powf(-self.alpha - 1.0)
    }

    /// Mean number of jumps of `S_m` up to time `t`: `t m^{2α}/Γ(1-α)`.
    pub fn poisson_mean(&self, t: f64) -> f64 {
        t * (self.m as f64).powf(2.0 * self.alpha) * self.lambda_rate
    }
}

fn check_alpha(alpha: f64) -> Result<(), SubordinationError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(SubordinationError::Alpha(alpha))
    }
}

fn check_time(op: &'static str, t: f64) -> Result<(), SubordinationError> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(SubordinationError::Domain {
            op,
            detail: format!("t must be finite and non-negative, got {t}"),
        })
    }
}

/// One draw of `Y_[m]` by inversion of its distribution function.
pub fn sample_y<R: Rng + ?Sized>(spec: &SubordinatorSpec, rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    let a = spec.alpha;
    let mf = spec.m as f64;
    let lo = mf.powf(a);
    let hi = mf.powf(-2.0 * a);
    (lo - u * (lo - hi)).powf(-1.0 / a)
}

/// `E[Y_[m]^k] = α/(k-α) m^{2k-3α} (1 - m^{-3(k-α)}) / (1 - m^{-3α})`.
pub fn y_moment(spec: &SubordinatorSpec, k: u32) -> Result<f64, SubordinationError> {
    if k == 0 {
        return Err(SubordinationError::Domain {
            op: "y_moment",
            detail: "k must be at least 1".into(),
        });
    }
    let a = spec.alpha;
    let kf = k as f64;
    let mf = spec.m as f64;
    Ok(a / (kf - a) * mf.powf(2.0 * kf - 3.0 * a) * -(-3.0 * (kf - a) * mf.ln()).exp_m1()
        / -(-3.0 * a * mf.ln()).exp_m1())
}

/// One draw of `S_m(t) = (1/m) Σ_j Y_j` with `X ~ Poisson(t m^{2α}/Γ(1-α))`
/// jumps, plus `Y_0` under [`SumConvention::AsPrinted`].
pub fn sample_sm<R: Rng + ?Sized>(spec: &SubordinatorSpec, t: f64, rng: &mut R) -> f64 {
    let mean = spec.poisson_mean(t.max(0.0));
    let jumps = if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
    } else {
        0
    };
    let jumps = match spec.convention {
        SumConvention::AsPrinted => jumps + 1,
        SumConvention::EmptySum => jumps,
    };
    let total: f64 = (0..jumps).map(|_| sample_y(spec, rng)).sum();
    total / spec.m as f64
}

/// `E[e^{zY/m}]` and `1 - E[e^{zY/m}]`, the latter computed directly.
///
/// With `y = e^v` the integrand `c_m (1 - e^{z e^v/m}) e^{-αv}` is smooth
/// on `(-ln m, 2 ln m)`.
pub fn y_transform(
    spec: &SubordinatorSpec,
    z: Complex64,
) -> Result<(Complex64, Complex64), SubordinationError> {
    let mf = spec.m as f64;
    let a = spec.alpha;
    let (lo, hi) = (-mf.ln(), 2.0 * mf.ln());
    let integrand = |v: f64| -> Complex64 {
        let w = z * (v.exp() / mf);
        -expm1_complex(w) * (-a * v).exp()
    };
    // Bisect where |z| e^v / m crosses powers of two so each piece sees a
    // bounded number of oscillations.
    let mut breaks = vec![lo];
    let zn = z.norm();
    if zn > 0.0 {
        let mut level = 1.0;
        loop {
            let v = (level * mf / zn).ln();
            if v >= hi {
                break;
            }
            if v > lo {
                breaks.push(v);
            }
            level *= 2.0;
        }
    }
    breaks.push(hi);
    let mut one_minus = Complex64::new(0.0, 0.0);
    for w in breaks.windows(2) {
        one_minus += integrate_adaptive(integrand, w[0], w[1], 1e-15, 1e-13, 4000)?;
    }
    one_minus *= spec.c_m;
    Ok((Complex64::new(1.0, 0.0) - one_minus, one_minus))
}

/// `E[e^{z S_m(t)}]` for `Re z ≤ 0`:
/// `exp(-t m^{2α}/Γ(1-α) (1 - E[e^{zY/m}]))`, times `E[e^{zY/m}]` for the
/// extra jump of [`SumConvention::AsPrinted`].
pub fn sm_transform(
    spec: &SubordinatorSpec,
    t: f64,
    z: Complex64,
) -> Result<Complex64, SubordinationError> {
    check_time("sm_transform", t)?;
    if z.re > 0.0 {
        return Err(SubordinationError::Domain {
            op: "sm_transform",
            detail: format!("need Re z <= 0, got {z}"),
        });
    }
    let (phi, one_minus) = y_transform(spec, z)?;
    let base = (-spec.poisson_mean(t) * one_minus).exp();
    Ok(match spec.convention {
        SumConvention::AsPrinted => base * phi,
        SumConvention::EmptySum => base,
    })
}

/// `exp(-t(-z)^α)`, the transform `E[e^{zH(t)}]` that `S_m` approaches.
pub fn stable_transform(alpha: f64, t: f64, z: Complex64) -> Result<Complex64, SubordinationError> {
    check_alpha(alpha)?;
    Ok((-t * complex_pow_alpha(-z, alpha)?).exp())
}

/// `C^k t^k m^{k+2αk-3α} ((k+1)/ln(k+2))^{k+1}` with
/// `C = (1 ∨ α/(1-α))·0.792/Γ(1-α)`.
pub fn sm_moment_bound(spec: &SubordinatorSpec, t: f64, k: u32) -> Result<f64, SubordinationError> {
    if k == 0 || !(t > 0.0) {
        return Err(SubordinationError::Domain {
            op: "sm_moment_bound",
            detail: format!("need k >= 1 and t > 0, got k={k}, t={t}"),
        });
    }
    let a = spec.alpha;
    let mf = spec.m as f64;
    let m_min = (gamma(1.0 - a)? / t).powf(1.0 / (2.0 * a));
    if mf < m_min {
        return Err(SubordinationError::Domain {
            op: "sm_moment_bound",
            detail: format!("m = {} is below the admissible minimum {m_min}", spec.m),
        });
    }
    let kf = k as f64;
    let c = (a / (1.0 - a)).max(1.0) * 0.792 * spec.lambda_rate;
    Ok((c * t).powf(kf)
        * mf.powf(kf + 2.0 * a * kf - 3.0 * a)
        * ((kf + 1.0) / (kf + 2.0).ln()).powf(kf + 1.0))
}

/// One draw of `H(t)` with `E[e^{-λH(t)}] = e^{-tλ^α}`, by Kanter's
/// representation: `H(1) = sin(αU)/sin(U)^{1/α} (sin((1-α)U)/E)^{(1-α)/α}`
/// with `U` uniform on `(0, π)` and `E` standard exponential.
pub fn sample_h<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    let u0: f64 = Open01.sample(rng);
    let u = PI * u0;
    let e: f64 = Exp1.sample(rng);
    let h1 = (alpha * u).sin() / u.sin().powf(1.0 / alpha)
        * (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
    t.powf(1.0 / alpha) * h1
}

/// One draw of the inverse subordinator `L(t) = (t/H(1))^α`.
pub fn sample_l<R: Rng + ?Sized>(alpha: f64, t: f64, rng: &mut R) -> f64 {
    let h1 = sample_h(alpha, 1.0, rng);
    (t / h1).powf(alpha)
}

/// `E[L(t)^k] = k! t^{αk} / Γ(αk + 1)`.
pub fn l_moment(alpha: f64, t: f64, k: u32) -> Result<f64, SubordinationError> {
    check_alpha(alpha)?;
    if k == 0 {
        return Ok(1.0);
    }
    let kf = k as f64;
    let log = log_gamma(kf + 1.0)? + alpha * kf * t.ln() - log_gamma(alpha * kf + 1.0)?;
    Ok(log.exp())
}

/// `E[e^{-λL(t)}] = E_α(-λ t^α)`.
pub fn l_laplace(alpha: f64, t: f64, lambda: f64) -> Result<f64, SubordinationError> {
    check_alpha(alpha)?;
    Ok(mittag_leffler(alpha, Complex64::new(-lambda * t.powf(alpha), 0.0), 1e-14)?.re)
}

/// Which random clock drives a walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeChange {
    Deterministic,
    CompoundPoisson(SubordinatorSpec),
    StableExact { alpha: f64 },
    InverseStable { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeChangeKind {
    Deterministic,
    CompoundPoisson,
    StableExact,
    InverseStable,
}

/// A realised clock value at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeChangeSample {
    pub value: f64,
    pub kind: TimeChangeKind,
    pub t: f64,
}

impl TimeChange {
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> TimeChangeSample {
        let (value, kind) = match *self {
            TimeChange::Deterministic => (t, TimeChangeKind::Deterministic),
            TimeChange::CompoundPoisson(spec) => {
                (sample_sm(&spec, t, rng), TimeChangeKind::CompoundPoisson)
            }
            TimeChange::StableExact { alpha } => {
                let v = if t > 0.0 { sample_h(alpha, t, rng) } else { 0.0 };
                (v, TimeChangeKind::StableExact)
            }
            TimeChange::InverseStable { alpha } => {
                let v = if t > 0.0 { sample_l(alpha, t, rng) } else { 0.0 };
                (v, TimeChangeKind::InverseStable)
            }
        };
        TimeChangeSample { value, kind, t }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_adaptive;
    use crate::rng::RandomStream;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn density_normalisation() {
        for a in [0.2, 0.5, 0.8] {
            for m in [2u64, 10, 100] {
                let s = SubordinatorSpec::new(a, m).unwrap();
                let (lo, hi) = s.support();
                let closed = s.c_m() * (lo.powf(-a) - hi.powf(-a)) / a;
                assert!((closed - 1.0).abs() < 1e-12);
                let q = integrate_adaptive(
                    |v: f64| Complex64::new(s.y_density(v.exp()) * v.exp(), 0.0),
                    lo.ln() + 1e-15,
                    hi.ln() - 1e-15,
                    1e-15,
                    1e-14,
                    1000,
                )
                .unwrap();
                assert!((q.re - 1.0).abs() < 1e-12, "α={a} m={m}: {}", q.re);
            }
        }
    }

    #[test]
    fn y_moments_match_quadrature_and_bound() {
        for a in [0.2, 0.5, 0.8] {
            for m in [2u64, 10, 100] {
                let s = SubordinatorSpec::new(a, m).unwrap();
                let (lo, hi) = s.support();
                for k in 1..=3u32 {
                    let q = integrate_adaptive(
                        |v: f64| {
                            let y = v.exp();
                            Complex64::new(y.powi(k as i32) * s.c_m() * y.powf(-a), 0.0)
                        },
                        lo.ln(),
                        hi.ln(),
                        0.0,
                        1e-13,
                        1000,
                    )
                    .unwrap();
                    let exact = y_moment(&s, k).unwrap();
                    assert!((q.re - exact).abs() < 1e-10 * exact, "α={a} m={m} k={k}");
                }
            }
        }
        let s = SubordinatorSpec::new(0.5, 2).unwrap();
        let want = 0.5 / 0.5 * 2f64.powf(0.5) * (1.0 - 2f64.powf(-1.5)) / (1.0 - 2f64.powf(-1.5));
        assert!((y_moment(&s, 1).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn y_moment_bound() {
        for a in [0.2, 0.5, 0.8] {
            for m in [2u64, 3, 10, 100, 1000] {
                let s = SubordinatorSpec::new(a, m).unwrap();
                for k in 1..=3u32 {
                    let bound = (a / (1.0 - a)).max(1.0) * (m as f64).powf(2.0 * k as f64 - 3.0 * a);
                    assert!(y_moment(&s, k).unwrap() <= bound * (1.0 + 1e-12), "α={a} m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn y_sampling() {
        let s = SubordinatorSpec::new(0.5, 10).unwrap();
        let mut rng = RandomStream::new(4, 0);
        let draws: Vec<f64> = (0..400_000).map(|_| sample_y(&s, &mut rng)).collect();
        let (lo, hi) = s.support();
        assert!(draws.iter().all(|&y| y > lo && y < hi));
        let (mean, se) = mean_se(&draws);
        assert!((mean - y_moment(&s, 1).unwrap()).abs() < 4.0 * se);
    }

    #[test]
    fn transform_edge_cases() {
        let s = SubordinatorSpec::new(0.5, 10).unwrap();
        assert_eq!(sm_transform(&s.with_convention(SumConvention::EmptySum), 1.0, Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
        assert!((sm_transform(&s, 1.0, Complex64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        assert!(sm_transform(&s, 1.0, Complex64::new(0.1, 0.0)).is_err());
        let empty = s.with_convention(SumConvention::EmptySum);
        assert_eq!(sm_transform(&empty, 0.0, Complex64::new(-1.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn y_transform_matches_direct_quadrature() {
        let s = SubordinatorSpec::new(0.5, 30).unwrap();
        let (lo, hi) = s.support();
        for z in [Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.5), Complex64::new(-0.5, -2.0)] {
            let (phi, one_minus) = y_transform(&s, z).unwrap();
            assert!((phi + one_minus - 1.0).norm() < 1e-15);
            let direct = integrate_adaptive(
                |y: f64| (z * y / 30.0).exp() * s.y_density(y),
                lo,
                hi,
                1e-14,
                1e-12,
                20_000,
            )
            .unwrap();
            assert!((direct - phi).norm() < 1e-9, "z={z}: {direct} vs {phi}");
        }
    }

    #[test]
    fn transform_approaches_stable_limit() {
        let z = Complex64::new(-1.0, 0.0);
        let target = (-1.0f64).exp();
        for conv in [SumConvention::AsPrinted, SumConvention::EmptySum] {
            let mut prev = f64::INFINITY;
            for m in [10u64, 50, 200] {
                let s = SubordinatorSpec::new(0.5, m).unwrap().with_convention(conv);
                let err = (sm_transform(&s, 1.0, z).unwrap() - target).norm();
                assert!(err < prev, "{conv:?} m={m}");
                prev = err;
            }
        }
    }

    #[test]
    fn laplace_transform_matches_sampling() {
        let mut rng = RandomStream::new(8, 1);
        for conv in [SumConvention::AsPrinted, SumConvention::EmptySum] {
            let s = SubordinatorSpec::new(0.5, 10).unwrap().with_convention(conv);
            for t in [0.3, 1.0] {
                let xs: Vec<f64> = (0..100_000).map(|_| (-sample_sm(&s, t, &mut rng)).exp()).collect();
                let (mean, se) = mean_se(&xs);
                let exact = sm_transform(&s, t, Complex64::new(-1.0, 0.0)).unwrap();
                assert!(exact.im.abs() < 1e-15);
                assert!((mean - exact.re).abs() < 4.0 * se, "{conv:?} t={t}: {mean} vs {}", exact.re);
            }
        }
    }

    #[test]
    fn moment_bound_holds_empirically() {
        let mut rng = RandomStream::new(12, 0);
        let s = SubordinatorSpec::new(0.5, 10).unwrap();
        let draws: Vec<f64> = (0..100_000).map(|_| sample_sm(&s, 1.0, &mut rng)).collect();
        let mut prev = 0.0;
        for k in 1..=3u32 {
            let b = sm_moment_bound(&s, 1.0, k).unwrap();
            assert!(b > prev);
            prev = b;
            let emp = draws.iter().map(|x| x.powi(k as i32)).sum::<f64>() / draws.len() as f64;
            assert!(emp <= b, "k={k}: {emp} > {b}");
        }
        let small = SubordinatorSpec::new(0.5, 2).unwrap();
        assert!(sm_moment_bound(&small, 0.01, 1).is_err());
    }

    #[test]
    fn stable_laplace_and_scaling() {
        let mut rng = RandomStream::new(3, 3);
        for a in [0.3, 0.5, 0.8] {
            for t in [0.5, 1.0, 2.0] {
                let xs: Vec<f64> = (0..200_000).map(|_| (-sample_h(a, t, &mut rng)).exp()).collect();
                let (mean, se) = mean_se(&xs);
                assert!((mean - (-t).exp()).abs() < 4.0 * se, "α={a} t={t}");
            }
            let t = 1.7;
            let direct: Vec<f64> = (0..20_000).map(|_| sample_h(a, t, &mut rng)).collect();
            let scaled: Vec<f64> = (0..20_000).map(|_| t.powf(1.0 / a) * sample_h(a, 1.0, &mut rng)).collect();
            assert!(direct.iter().all(|&h| h > 0.0));
            // 1% critical value for two samples of 20000.
            assert!(ks_two_sample(direct, scaled) < 1.628 * (2.0f64 / 20_000.0).sqrt());
        }
    }

    #[test]
    fn inverse_stable_moments_and_laplace() {
        let mut rng = RandomStream::new(6, 0);
        assert_eq!(l_moment(0.5, 1.0, 0).unwrap(), 1.0);
        assert!((l_moment(0.5, 1.0, 1).unwrap() - 2.0 / PI.sqrt()).abs() < 1e-14);
        for a in [0.3, 0.5, 0.8] {
            let t = 1.3;
            let xs: Vec<f64> = (0..200_000).map(|_| sample_l(a, t, &mut rng)).collect();
            for k in 1..=3u32 {
                let (mean, se) = mean_se(&xs.iter().map(|x| x.powi(k as i32)).collect::<Vec<_>>());
                assert!((mean - l_moment(a, t, k).unwrap()).abs() < 4.0 * se, "α={a} k={k}");
            }
            let (mean, se) = mean_se(&xs.iter().map(|x| (-x).exp()).collect::<Vec<_>>());
            assert!((mean - l_laplace(a, t, 1.0).unwrap()).abs() < 4.0 * se);
        }
        let xs: Vec<f64> = (0..100_000).map(|_| sample_l(0.99, 2.0, &mut rng)).collect();
        let (mean, _) = mean_se(&xs);
        assert!((mean - 2.0).abs() < 0.02 * 2.0);
    }

    #[test]
    fn inverse_and_forward_clocks_agree() {
        // P(L(t) < x) = P(H(x) > t).
        let mut rng = RandomStream::new(10, 0);
        let (a, t) = (0.6, 1.0);
        let n = 100_000;
        let ls: Vec<f64> = (0..n).map(|_| sample_l(a, t, &mut rng)).collect();
        let mut max_gap = 0.0f64;
        for x in [0.2, 0.5, 0.8, 1.0, 1.5, 2.5] {
            let p_l = ls.iter().filter(|&&l| l < x).count() as f64 / n as f64;
            let p_h = (0..n).filter(|_| sample_h(a, x, &mut rng) > t).count() as f64 / n as f64;
            max_gap = max_gap.max((p_l - p_h).abs());
        }
        assert!(max_gap < 0.02);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SubordinatorSpec::new(1.0, 10).is_err());
        assert!(SubordinatorSpec::new(0.0, 10).is_err());
        assert!(SubordinatorSpec::new(0.5, 1).is_err());
        assert!(l_moment(1.5, 1.0, 1).is_err());
    }
}
