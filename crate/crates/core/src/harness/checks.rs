//! Identity batteries behind `fracwalk check`.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::beta_expr::{parse_rational, rational_to_f64};
use crate::initialdata::InitialDatum;
use crate::montecarlo::{estimate, two_copy_time, two_copy_walks, EstimatorConfig, Variant};
use crate::quadrature::integrate_adaptive;
use crate::specialfn::{bell, poisson_moment};
use crate::subordination::{
    sample_h, sample_l, sm_transform, stable_transform, y_moment, SubordinatorSpec,
};
use crate::symbols::{
    laplace_fourier_lhs_rhs, linspace, mittag_leffler_power_propagation, mittag_leffler_propagation,
    nonlocal_forcing_evolve, Equivalence, SymbolSpec,
};
use crate::walks::{limit_moment, remainder_bound, return_probability, unit_root, walk_moment_exact, WalkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Symbols,
    Moments,
    Subordinators,
    Equivalences,
    All,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Symbols => "symbols",
            Suite::Moments => "moments",
            Suite::Subordinators => "subordinators",
            Suite::Equivalences => "equivalences",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub suite: String,
    pub name: String,
    pub residual: f64,
    /// Passes when `residual <= tolerance`.
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

struct Battery {
    suite: &'static str,
    out: Vec<CheckResult>,
}

impl Battery {
    fn new(suite: &'static str) -> Self {
        Self { suite, out: Vec::new() }
    }

    fn record(&mut self, name: String, residual: Result<f64, String>, tolerance: f64) {
        let (residual, error) = match residual {
            Ok(r) => (r, None),
            Err(e) => (f64::NAN, Some(e)),
        };
        self.out.push(CheckResult {
            suite: self.suite.into(),
            passed: residual <= tolerance,
            name,
            residual,
            tolerance,
            error,
        });
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn run_suite(suite: Suite, seed: u64) -> CheckReport {
    let mut checks = Vec::new();
    let all = suite == Suite::All;
    if all || suite == Suite::Symbols {
        checks.extend(symbols_battery());
    }
    if all || suite == Suite::Moments {
        checks.extend(moments_battery(seed));
    }
    if all || suite == Suite::Subordinators {
        checks.extend(subordinators_battery(seed));
    }
    if all || suite == Suite::Equivalences {
        checks.extend(equivalences_battery());
    }
    CheckReport {
        suite: suite.name().into(),
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn y_grid() -> Vec<f64> {
    linspace(-3.0, 3.0, 121)
}

/// `(-1)^{M+1} (2M)!/2^M`, evaluated exactly.
pub fn heat_recovery_beta(m: u32) -> f64 {
    let expr = format!("(-1)^({m}+1) * (2*{m})! / 2^{m}");
    rational_to_f64(&parse_rational(&expr).expect("well-formed"))
}

fn max_over<F: Fn(f64) -> Result<f64, String>>(ys: &[f64], f: F) -> Result<f64, String> {
    ys.iter().try_fold(0.0f64, |acc, &y| Ok(acc.max(f(y)?)))
}

fn symbols_battery() -> Vec<CheckResult> {
    let mut b = Battery::new("symbols");
    let ys = y_grid();
    for a in [0.3, 0.5, 0.7] {
        let r = SymbolSpec::two_copy_riesz(3, a).map_err(err).and_then(|spec| {
            max_over(&ys, |y| {
                let v = spec.eval(y).map_err(err)?;
                let want = 2.0 * (PI * a / 2.0).cos() * y.abs().powf(3.0 * a);
                Ok((v - want).norm() / (1.0 + want))
            })
        });
        b.record(format!("two_copy_identity[N=3, alpha={a}]"), r, 1e-12);

        let r = (|| {
            let [w1, w2] = two_copy_walks(3).map_err(err)?;
            let s1 = SymbolSpec::frac_an_beta(3, w1.beta(), a).map_err(err)?;
            let s2 = SymbolSpec::frac_an_beta(3, w2.beta(), a).map_err(err)?;
            let riesz = SymbolSpec::riesz_frac(3, a).map_err(err)?;
            let (t, tt) = (1.0, two_copy_time(a, 1.0));
            max_over(&ys, |y| {
                let prod = s1.propagator(tt, y).map_err(err)? * s2.propagator(tt, y).map_err(err)?;
                Ok((prod - riesz.propagator(t, y).map_err(err)?).norm())
            })
        })();
        b.record(format!("two_copy_limit_product[N=3, alpha={a}]"), r, 1e-12);
    }
    for m in [2u32, 3] {
        let beta = heat_recovery_beta(m);
        let r = SymbolSpec::frac_an_beta(2 * m, Complex64::new(beta, 0.0), 1.0 / m as f64)
            .map_err(err)
            .and_then(|spec| {
                max_over(&ys, |y| {
                    let want = y * y / 2.0;
                    Ok((spec.eval(y).map_err(err)? - want).norm() / (1.0 + want))
                })
            });
        b.record(format!("heat_recovery[M={m}, beta={beta}]"), r, 1e-12);
    }
    for (n, beta, alpha) in [(2u32, 1.0, 0.5), (3, 6.0, 0.4), (4, -1.0, 0.7), (5, -2.0, 0.3)] {
        let r = SymbolSpec::frac_an_beta(n, Complex64::new(beta, 0.0), alpha)
            .map_err(err)
            .and_then(|spec| max_over(&ys, |y| Ok((-spec.decay_symbol(y).map_err(err)?.re).max(0.0))));
        b.record(format!("dissipative[N={n}, beta={beta}, alpha={alpha}]"), r, 0.0);
    }
    b.out
}

fn moments_battery(seed: u64) -> Vec<CheckResult> {
    let mut b = Battery::new("moments");
    for (order, beta) in [(2u32, 1.0), (3, 1.0), (4, -1.0), (5, 1.0)] {
        let walk = WalkSpec::real(order, beta).expect("valid walk");
        for (n, t) in [(10u64, 1.0), (4, 2.5)] {
            for h in 0..=3usize {
                let k = h * order as usize;
                let r = walk_moment_exact(&walk, n, t, k).map_err(err).and_then(|exact| {
                    let gap = (exact - limit_moment(&walk, t, k)).norm();
                    if h < 2 {
                        Ok(gap / limit_moment(&walk, t, k).norm().max(1.0))
                    } else {
                        remainder_bound(&walk, n, t, h).map(|bound| gap / bound).map_err(err)
                    }
                });
                let (label, tol) = if h < 2 { ("moment_exact", 1e-13) } else { ("moment_remainder_ratio", 1.0) };
                b.record(format!("{label}[N={order}, n={n}, t={t}, h={h}]"), r, tol);
            }
        }
    }
    for k in 0..=10usize {
        let count = set_partitions(k);
        let r = bell(k).to_u64().map(|v| (v as f64 - count as f64).abs()).ok_or_else(|| "overflow".to_string());
        b.record(format!("bell_enumeration[k={k}]"), r, 0.0);
    }
    for lambda in [0.5, 2.0, 5.0] {
        for k in 1..=25usize {
            let r = poisson_moment(lambda, k).map_err(err).map(|mk| {
                let bound = lambda.powi(k as i32).max(1.0) * bell(k).to_f64().unwrap_or(f64::INFINITY);
                mk / bound
            });
            b.record(format!("poisson_moment_bound[lambda={lambda}, k={k}]"), r, 1.0);
        }
    }
    for lambda in [0.7, 3.0] {
        let cfg = EstimatorConfig::new(200_000, seed, 10_000, Variant::PureMc).expect("valid config");
        for k in 1..=4usize {
            let r = (|| {
                let want = poisson_moment(lambda, k).map_err(err)?;
                let est = estimate(&cfg, 100 + k as u64, |rng| {
                    use rand_distr::{Distribution, Poisson};
                    let x: f64 = Poisson::new(lambda).expect("positive rate").sample(rng);
                    Ok(Complex64::new(x.powi(k as i32), 0.0))
                })
                .map_err(err)?;
                Ok((est.mean.re - want).abs() / est.stderr)
            })();
            b.record(format!("poisson_moment_mc_stderrs[lambda={lambda}, k={k}]"), r, 4.0);
        }
    }
    for (order, m) in [(3u32, 1u64), (3, 2), (4, 1), (5, 1)] {
        let r = return_probability(order, m).map_err(err).map(|p| {
            let want = enumerate_returns(order, m);
            if p == want {
                0.0
            } else {
                (p - want).to_f64().unwrap_or(f64::INFINITY).abs()
            }
        });
        b.record(format!("return_probability[N={order}, m={m}]"), r, 0.0);
    }
    b.out
}

/// Number of set partitions of `{1..k}`, by restricted growth strings.
pub fn set_partitions(k: usize) -> u64 {
    fn rec(i: usize, k: usize, max: usize) -> u64 {
        if i == k {
            return 1;
        }
        (0..=max + 1).map(|v| rec(i + 1, k, max.max(v))).sum()
    }
    if k == 0 {
        1
    } else {
        rec(1, k, 0)
    }
}

/// `P(S(N,1)_{Nm} = 0)` by running every step sequence.
pub fn enumerate_returns(order: u32, m: u64) -> BigRational {
    let steps = order as u64 * m;
    let roots: Vec<Complex64> = (0..order).map(|k| unit_root(order, k)).collect();
    let total = (order as u64).pow(steps as u32);
    let mut hits = 0u64;
    for code in 0..total {
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
    BigRational::new(BigInt::from(hits), BigInt::from(total))
}

fn subordinators_battery(seed: u64) -> Vec<CheckResult> {
    let mut b = Battery::new("subordinators");
    for (alpha, m) in [(0.3, 10u64), (0.5, 30), (0.8, 100)] {
        let spec = SubordinatorSpec::new(alpha, m).expect("valid spec");
        let (lo, hi) = spec.support();
        let mass = integrate_adaptive(
            |v| Complex64::new(spec.y_density(v.exp()) * v.exp(), 0.0),
            lo.ln(),
            hi.ln(),
            1e-14,
            1e-13,
            2000,
        );
        b.record(
            format!("y_density_mass[alpha={alpha}, m={m}]"),
            mass.map(|v| (v.re - 1.0).abs()).map_err(err),
            1e-10,
        );
        for k in 1..=2u32 {
            let r = (|| {
                let want = integrate_adaptive(
                    |v| Complex64::new(spec.y_density(v.exp()) * v.exp().powi(k as i32 + 1), 0.0),
                    lo.ln(),
                    hi.ln(),
                    1e-12,
                    1e-13,
                    2000,
                )
                .map_err(err)?
                .re;
                Ok((y_moment(&spec, k).map_err(err)? - want).abs() / want)
            })();
            b.record(format!("y_moment_quadrature[alpha={alpha}, m={m}, k={k}]"), r, 1e-9);
        }
    }
    let ys = linspace(-2.0, 2.0, 41);
    let errs: Result<Vec<f64>, String> = [10u64, 30, 100, 300]
        .iter()
        .map(|&m| {
            let spec = SubordinatorSpec::new(0.5, m).map_err(err)?;
            max_over(&ys, |y| {
                let z = Complex64::new(0.0, y);
                Ok((sm_transform(&spec, 1.0, z).map_err(err)? - stable_transform(0.5, 1.0, z).map_err(err)?).norm())
            })
        })
        .collect();
    let r = errs.map(|e| e.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max));
    b.record("compound_poisson_error_ratio[alpha=0.5, m=10..300]".into(), r, 0.999_999);

    let cfg = EstimatorConfig::new(100_000, seed, 10_000, Variant::PureMc).expect("valid config");
    for alpha in [0.3, 0.5, 0.8] {
        for k in 1..=3u32 {
            let r = (|| {
                let want = crate::subordination::l_moment(alpha, 1.0, k).map_err(err)?;
                let est = estimate(&cfg, 200 + k as u64, |rng| {
                    Ok(Complex64::new(sample_l(alpha, 1.0, rng).powi(k as i32), 0.0))
                })
                .map_err(err)?;
                Ok((est.mean.re - want).abs() / est.stderr)
            })();
            b.record(format!("l_moment_mc_stderrs[alpha={alpha}, k={k}]"), r, 4.0);
        }
        let r = estimate(&cfg, 300, |rng| Ok(Complex64::new((-sample_h(alpha, 1.0, rng)).exp(), 0.0)))
            .map_err(err)
            .map(|est| (est.mean.re - (-1.0f64).exp()).abs() / est.stderr);
        b.record(format!("h_laplace_mc_stderrs[alpha={alpha}]"), r, 4.0);
    }
    b.out
}

fn equivalences_battery() -> Vec<CheckResult> {
    let mut b = Battery::new("equivalences");
    let lambdas: Vec<f64> = (0..=24).map(|j| -3.0 + 0.25 * j as f64 + 0.01).collect();
    let ss = [Complex64::new(1.0, 0.0), Complex64::new(2.0, 1.0), Complex64::new(0.5, 3.0)];
    for which in [Equivalence::M1, Equivalence::M12] {
        for m in [2u32, 3] {
            let r = (|| {
                let mut worst = 0.0f64;
                for (n, beta) in [(2u32, 1.0), (2, -1.0), (3, 1.0), (4, -1.0)] {
                    let walk = WalkSpec::real(n, beta).map_err(err)?;
                    for s in ss {
                        for &l in &lambdas {
                            let (lhs, rhs) = laplace_fourier_lhs_rhs(s, l, &walk, 1.0 / m as f64, which).map_err(err)?;
                            worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
                        }
                    }
                }
                Ok(worst)
            })();
            b.record(format!("laplace_fourier_pair[{which:?}, M={m}]"), r, 1e-12);
        }
    }
    let datum = InitialDatum::cosine().plus(&InitialDatum::bump(0.0, 1.2, Complex64::new(0.5, 0.0)).expect("valid bump"));
    let xs = linspace(-6.0, 6.0, 31);
    let ts = linspace(0.1, 1.0, 4);
    let walk = WalkSpec::real(2, -1.0).expect("valid walk");
    for which in [Equivalence::M1, Equivalence::M12] {
        let r = (|| {
            let evolved = nonlocal_forcing_evolve(&datum, &walk, 2, &ts, &xs, which).map_err(err)?;
            let mut worst = 0.0f64;
            for (t, field) in ts.iter().zip(&evolved) {
                let reference = match which {
                    Equivalence::M1 => mittag_leffler_propagation(&datum, &walk, 0.5, *t, &xs),
                    Equivalence::M12 => mittag_leffler_power_propagation(&datum, &walk, 0.5, *t, &xs),
                }
                .map_err(err)?;
                worst = worst.max(field.max_abs_diff(&reference));
            }
            Ok(worst)
        })();
        b.record(format!("nonlocal_forcing_vs_mittag_leffler[{which:?}, N=2, beta=-1, M=2]"), r, 1e-3);
    }
    b.out
}
