//! Quadrature rules shared by the spectral solvers and the subordinator
//! transforms.
#![allow(clippy::excessive_precision)]


use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::specialfn::log_gamma;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("{op}: tolerance {tol:e} not met after {evaluations} evaluations (estimate {estimate:e})")]
    Tolerance {
        op: &'static str,
        tol: f64,
        evaluations: usize,
        estimate: f64,
    },
    #[error("{op}: invalid input: {detail}")]
    Invalid { op: &'static str, detail: String },
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `n`-point Gauss–Legendre rule by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// The 16-point rule used for spectral panels.
pub fn gauss_legendre_16() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// `n`-point Gauss–Jacobi rule for the weight `(1-x)^a (1+x)^b`, `a, b > -1`.
#[allow(clippy::approx_constant)]
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<Rule, QuadratureError> {
    if n == 0 || !(a > -1.0) || !(b > -1.0) {
        return Err(QuadratureError::Invalid {
            op: "gauss_jacobi",
            detail: format!("need n >= 1 and exponents > -1, got n={n}, a={a}, b={b}"),
        });
    }
    let nf = n as f64;
    let alfbet = a + b;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut z = 0.0f64;
    // Γ(a+n)Γ(b+n)/(Γ(n+1)Γ(n+a+b+1)), built up from n = 1.
    let mut ratio = (log_gamma(a + 1.0).unwrap() + log_gamma(b + 1.0).unwrap()
        - log_gamma(alfbet + 2.0).unwrap())
    .exp();
    for j in 2..=n {
        let jf = j as f64;
        ratio *= (a + jf - 1.0) * (b + jf - 1.0) / (jf * (jf + alfbet));
    }
    // Initial guesses and Newton iteration follow the classical recipe.
    for i in 0..n {
        if i == 0 {
            let an = a / nf;
            let bn = b / nf;
            let r1 = (1.0 + a) * (2.78 / (4.0 + nf * nf) + 0.768 * an / nf);
            let r2 = 1.0 + 1.48 * an + 0.96 * bn + 0.452 * an * an + 0.83 * an * bn;
            z = 1.0 - r1 / r2;
        } else if i == 1 {
            let r1 = (4.1 + a) / ((1.0 + a) * (1.0 + 0.156 * a));
            let r2 = 1.0 + 0.06 * (nf - 8.0) * (1.0 + 0.12 * a) / nf;
            let r3 = 1.0 + 0.012 * b * (1.0 + 0.25 * a.abs()) / nf;
            z -= (1.0 - z) * r1 * r2 * r3;
        } else if i == 2 {
            let r1 = (1.67 + 0.28 * a) / (1.0 + 0.37 * a);
            let r2 = 1.0 + 0.22 * (nf - 8.0) / nf;
            let r3 = 1.0 + 8.0 * b / ((6.28 + b) * nf * nf);
            z -= (nodes[0] - z) * r1 * r2 * r3;
        } else if i == n - 2 {
            let r1 = (1.0 + 0.235 * b) / (0.766 + 0.119 * b);
            let r2 = 1.0 / (1.0 + 0.639 * (nf - 4.0) / (1.0 + 0.71 * (nf - 4.0)));
            let r3 = 1.0 / (1.0 + 20.0 * a / ((7.5 + a) * nf * nf));
            z += (z - nodes[n - 4]) * r1 * r2 * r3;
        } else if i == n - 1 {
            let r1 = (1.0 + 0.37 * b) / (1.67 + 0.28 * b);
            let r2 = 1.0 / (1.0 + 0.22 * (nf - 8.0) / nf);
            let r3 = 1.0 / (1.0 + 8.0 * a / ((6.28 + a) * nf * nf));
            z += (z - nodes[n - 3]) * r1 * r2 * r3;
        } else {
            z = 3.0 * nodes[i - 1] - 3.0 * nodes[i - 2] + nodes[i - 3];
        }
        let mut converged = false;
        for _ in 0..100 {
            let (p1, _, pp, _) = jacobi_eval(n, a, b, z);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 3e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(QuadratureError::Tolerance {
                op: "gauss_jacobi",
                tol: 3e-15,
                evaluations: 100,
                estimate: f64::NAN,
            });
        }
        // One more step resolves nodes crowding an endpoint.
        let (p1, _, pp, _) = jacobi_eval(n, a, b, z);
        z -= p1 / pp;
        let (_, p2, _, temp) = jacobi_eval(n, a, b, z);
        nodes[i] = z;
        // P_n'(z) at a root, without the P_n(z) term that rounding in z inflates.
        let pp = 2.0 * (nf + a) * (nf + b) * p2 / (temp * ((1.0 - z) * (1.0 + z)));
        weights[i] = ratio * temp * 2f64.powf(alfbet) / (pp * p2);
    }
    // Ascending order.
    nodes.reverse();
    weights.reverse();
    Ok(Rule { nodes, weights })
}

// P_n(z), P_{n-1}(z), P_n'(z) and the last recurrence coefficient.
fn jacobi_eval(n: usize, a: f64, b: f64, z: f64) -> (f64, f64, f64, f64) {
    let alfbet = a + b;
    let nf = n as f64;
    let mut temp = 2.0 + alfbet;
    let mut p1 = (a - b + temp * z) / 2.0;
    let mut p2 = 1.0;
    for j in 2..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        temp = 2.0 * jf + alfbet;
        let aa = 2.0 * jf * (jf + alfbet) * (temp - 2.0);
        let bb = (temp - 1.0) * (a * a - b * b + temp * (temp - 2.0) * z);
        let cc = 2.0 * (jf - 1.0 + a) * (jf - 1.0 + b) * temp;
        p1 = (bb * p2 - cc * p3) / aa;
    }
    let pp = (nf * (a - b - temp * z) * p1 + 2.0 * (nf + a) * (nf + b) * p2)
        / (temp * ((1.0 - z) * (1.0 + z)));
    (p1, p2, pp, temp)
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).norm();
    (value, err)
}

/// Adaptive Gauss–Kronrod (7/15) integration of a complex integrand on
/// `[a, b]`; succeeds once the summed error estimate is below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_adaptive<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Complex64, QuadratureError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(QuadratureError::Invalid {
            op: "integrate_adaptive",
            detail: format!("non-finite limits [{a}, {b}]"),
        });
    }
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut intervals: Vec<(f64, f64, Complex64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    intervals.push((a, b, v, e));
    loop {
        let total: Complex64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        let target = abs_tol.max(rel_tol * total.norm());
        if err <= target {
            return Ok(total);
        }
        if intervals.len() >= max_intervals || !err.is_finite() {
            return Err(QuadratureError::Tolerance {
                op: "integrate_adaptive",
                tol: target,
                evaluations: 15 * (2 * intervals.len() - 1),
                estimate: err,
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}
