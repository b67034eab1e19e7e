use std::f64::consts::PI;

use num_complex::Complex64;

use super::{complex_pow_alpha, log_gamma, principal_arg, SpecialFnError};

/// How a Mittag-Leffler value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlMethod {
    Exponential,
    Series,
    Contour,
}

/// `E_α(z) = Σ_k z^k / Γ(αk + 1)`.
///
/// The power series is used while it can be summed without catastrophic
/// cancellation. For `α < 1` and larger `|z|` the Hankel integral
/// `E_α(z) = (1/2πi) ∫ e^s s^{α-1} / (s^α - z) ds` is evaluated on a
/// parabolic contour, plus the residue `e^{z^{1/α}}/α` when the pole
/// `z^{1/α}` lies to the right of the contour.
#[derive(Debug, Clone, Copy)]
pub struct MittagLeffler {
    pub alpha: f64,
    pub tol: f64,
    pub max_terms: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOutcome {
    pub value: Complex64,
    pub terms: usize,
    pub last_increment: f64,
}

const SERIES_RADIUS: f64 = 30.0;
const CONTOUR_NODES: usize = 32;

impl MittagLeffler {
    pub fn new(alpha: f64, tol: f64) -> Result<Self, SpecialFnError> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(SpecialFnError::Domain {
                op: "mittag_leffler",
                detail: format!("alpha must lie in (0, 2], got {alpha}"),
            });
        }
        if !(tol > 0.0) {
            return Err(SpecialFnError::Domain {
                op: "mittag_leffler",
                detail: format!("tol must be positive, got {tol}"),
            });
        }
        Ok(Self {
            alpha,
            tol,
            max_terms: 10_000,
        })
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms;
        self
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, SpecialFnError> {
        self.eval_with_method(z).map(|(v, _)| v)
    }

    pub fn eval_with_method(&self, z: Complex64) -> Result<(Complex64, MlMethod), SpecialFnError> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(SpecialFnError::Domain {
                op: "mittag_leffler",
                detail: format!("non-finite argument {z}"),
            });
        }
        if z == Complex64::new(0.0, 0.0) {
            return Ok((Complex64::new(1.0, 0.0), MlMethod::Series));
        }
        if self.alpha == 1.0 {
            return Ok((z.exp(), MlMethod::Exponential));
        }
        let radius = z.norm().powf(1.0 / self.alpha);
        if radius <= SERIES_RADIUS || self.alpha > 1.0 {
            match self.series(z) {
                Ok(v) => return Ok((v, MlMethod::Series)),
                Err(e) if self.alpha > 1.0 => return Err(e),
                Err(_) => {}
            }
        }
        self.contour(z).map(|v| (v, MlMethod::Contour))
    }

    /// Partial sums until the increment drops below `tol·max(1, |sum|)`.
    ///
    /// Fails when the largest term is so big that rounding alone exceeds
    /// the tolerance.
    pub fn series(&self, z: Complex64) -> Result<Complex64, SpecialFnError> {
        self.series_outcome(z).map(|o| o.value)
    }

    /// The series value together with the number of terms and the size of
    /// the final increment.
    pub fn series_outcome(&self, z: Complex64) -> Result<SeriesOutcome, SpecialFnError> {
        let a = self.alpha;
        let mut sum = Complex64::new(1.0, 0.0);
        let mut max_term = 1.0f64;
        let mut last = 1.0;
        let modulus = z.norm();
        let (log_r, theta) = (modulus.ln(), principal_arg(z));
        for k in 1..self.max_terms {
            let kf = k as f64;
            let log_size = kf * log_r - log_gamma(a * kf + 1.0)?;
            if log_size > 700.0 {
                break;
            }
            let term = Complex64::from_polar(log_size.exp(), kf * theta);
            sum += term;
            let size = term.norm();
            max_term = max_term.max(size);
            last = size;
            // Past the peak the ratio |z| Γ(αk+1)/Γ(αk+α+1) is below one half.
            let past_peak = modulus < 0.5 * (a * (k as f64 + 1.0)).powf(a);
            if past_peak && size <= self.tol * sum.norm().max(1.0) {
                let rounding = f64::EPSILON * max_term;
                if rounding > self.tol.max(16.0 * f64::EPSILON) * sum.norm().max(1.0) {
                    return Err(SpecialFnError::NonConvergence {
                        op: "mittag_leffler series (cancellation)",
                        terms: k,
                        last: rounding,
                    });
                }
                return Ok(SeriesOutcome {
                    value: sum,
                    terms: k + 1,
                    last_increment: size,
                });
            }
        }
        Err(SpecialFnError::NonConvergence {
            op: "mittag_leffler series",
            terms: self.max_terms,
            last,
        })
    }

    fn contour(&self, z: Complex64) -> Result<Complex64, SpecialFnError> {
        let a = self.alpha;
        let h = 3.0 / CONTOUR_NODES as f64;
        let mu0 = PI * CONTOUR_NODES as f64 / 12.0;
        let mut mu = mu0;
        let mut residue = Complex64::new(0.0, 0.0);
        if principal_arg(z).abs() < a * PI {
            let pole = complex_pow_alpha(z, 1.0 / a)?;
            let rs = pole.sqrt().re;
            let a0 = rs / mu0.sqrt();
            if a0 > 0.25 && a0 <= 1.5 {
                // Pull the contour left so the pole sits well to its right.
                mu = (rs / 1.5).powi(2);
            }
            if (pole / mu).sqrt().re > 1.0 {
                if pole.re > 709.0 {
                    return Err(SpecialFnError::Domain {
                        op: "mittag_leffler",
                        detail: format!("E_{a}({z}) overflows"),
                    });
                }
                residue = pole.exp() / a;
            }
        }
        let u_max = (1.0 + 37.0 / mu).sqrt().max(3.0);
        let nodes = (u_max / h).ceil() as i64;
        let mut total = Complex64::new(0.0, 0.0);
        for k in -nodes..=nodes {
            let w = Complex64::new(1.0, k as f64 * h);
            let s = mu * w * w;
            let sa = s.powf(a);
            let f = sa / s / (sa - z);
            total += s.exp() * f * w;
        }
        Ok(total * (mu * h / PI) + residue)
    }
}

/// `E_α(z)` to tolerance `tol`; see [`MittagLeffler`].
///
/// ```
/// use fracwalk::specialfn::mittag_leffler;
/// use num_complex::Complex64;
///
/// let e = mittag_leffler(0.5, Complex64::new(-1.0, 0.0), 1e-12).unwrap();
/// assert!((e.re - 0.427_583_576_155_807).abs() < 1e-12);
/// ```
pub fn mittag_leffler(alpha: f64, z: Complex64, tol: f64) -> Result<Complex64, SpecialFnError> {
    MittagLeffler::new(alpha, tol)?.eval(z)
}
