use std::f64::consts::PI;

use num_complex::Complex64;

use super::SpecialFnError;

/// Argument of `z` in `(-π, π]`.
///
/// `atan2` returns `-π` for points on the negative real axis carrying a
/// negative-zero imaginary part; those are mapped to `π`.
pub fn principal_arg(z: Complex64) -> f64 {
    let theta = z.im.atan2(z.re);
    if theta <= -PI {
        PI
    } else {
        theta
    }
}

/// `z^α = |z|^α e^{iαθ}` with `θ ∈ (-π, π]`, and `0^α = 0` for `α > 0`.
///
/// ```
/// use fracwalk::specialfn::complex_pow_alpha;
/// use num_complex::Complex64;
///
/// let r = complex_pow_alpha(Complex64::new(-1.0, 0.0), 0.5).unwrap();
/// assert!((r - Complex64::i()).norm() < 1e-15);
/// ```
pub fn complex_pow_alpha(z: Complex64, alpha: f64) -> Result<Complex64, SpecialFnError> {
    if !alpha.is_finite() {
        return Err(SpecialFnError::Domain {
            op: "complex_pow_alpha",
            detail: format!("alpha must be finite, got {alpha}"),
        });
    }
    let modulus = z.norm();
    if modulus == 0.0 {
        if alpha > 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(SpecialFnError::Domain {
            op: "complex_pow_alpha",
            detail: format!("0^{alpha} is undefined for alpha <= 0"),
        });
    }
    if alpha == 1.0 {
        return Ok(z);
    }
    Ok(Complex64::from_polar(
        modulus.powf(alpha),
        alpha * principal_arg(z),
    ))
}

/// Principal `n`-th root: argument in `(-π/n, π/n]`.
pub fn principal_root(z: Complex64, n: u32) -> Complex64 {
    debug_assert!(n >= 1);
    if n == 1 {
        return z;
    }
    let modulus = z.norm();
    if modulus == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    Complex64::from_polar(modulus.powf(1.0 / n as f64), principal_arg(z) / n as f64)
}

/// `e^z - 1` without cancellation for small `|z|`.
pub fn expm1_complex(z: Complex64) -> Complex64 {
    let half = (0.5 * z.im).sin();
    let e = z.re.exp();
    Complex64::new(z.re.exp_m1() - 2.0 * e * half * half, e * z.im.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn documented_values() {
        assert_eq!(complex_pow_alpha(c(1.0, 0.0), 0.5).unwrap(), c(1.0, 0.0));
        let i = complex_pow_alpha(c(-1.0, 0.0), 0.5).unwrap();
        assert!((i - c(0.0, 1.0)).norm() < 1e-15);
        let q = complex_pow_alpha(c(0.0, 1.0), 0.5).unwrap();
        let expected = Complex64::from_polar(1.0, PI / 4.0);
        assert!((q - expected).norm() < 1e-15);
    }

    #[test]
    fn negative_zero_imaginary_part_stays_on_upper_branch() {
        let z = c(-4.0, -0.0);
        let r = complex_pow_alpha(z, 0.5).unwrap();
        assert!((r - c(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_base() {
        assert_eq!(complex_pow_alpha(c(0.0, 0.0), 0.3).unwrap(), c(0.0, 0.0));
        assert!(complex_pow_alpha(c(0.0, 0.0), 0.0).is_err());
        assert!(complex_pow_alpha(c(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn principal_roots() {
        let r = principal_root(c(-1.0, 0.0), 2);
        assert!((r - c(0.0, 1.0)).norm() < 1e-15);
        let r = principal_root(c(-6.0, 0.0), 4);
        assert!((r.powu(4) - c(-6.0, 0.0)).norm() < 1e-13);
        assert!((principal_arg(r) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn expm1_small_and_large() {
        let z = c(1e-10, -2e-10);
        let v = expm1_complex(z);
        let want = z + z * z / 2.0;
        assert!((v - want).norm() < 1e-25);
        let z = c(0.7, 2.5);
        assert!((expm1_complex(z) - (z.exp() - 1.0)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn modulus_and_argument(re in -50.0..50.0f64, im in -50.0..50.0f64, alpha in 0.01..1.0f64) {
            let z = c(re, im);
            prop_assume!(z.norm() > 1e-8);
            let p = complex_pow_alpha(z, alpha).unwrap();
            prop_assert!((p.norm() - z.norm().powf(alpha)).abs() <= 1e-14 * z.norm().powf(alpha).max(1.0));
            let arg = principal_arg(p);
            prop_assert!((arg - alpha * principal_arg(z)).abs() < 1e-12);
        }

        #[test]
        fn unit_exponent_is_identity(re in -50.0..50.0f64, im in -50.0..50.0f64) {
            let z = c(re, im);
            prop_assert_eq!(complex_pow_alpha(z, 1.0).unwrap(), z);
        }

        #[test]
        fn root_power_recovers_base(re in -10.0..10.0f64, im in -10.0..10.0f64, n in 2u32..8) {
            let z = c(re, im);
            prop_assume!(z.norm() > 1e-6);
            let r = principal_root(z, n);
            prop_assert!((r.powu(n) - z).norm() <= 1e-12 * z.norm());
        }
    }
}
