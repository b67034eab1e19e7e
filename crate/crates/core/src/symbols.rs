//! Fourier symbols of the space operators and the reference solutions built
//! on them.
//!
//! A solution is always `u(t, x) = ∫ e^{-ixy} G(t, y) dμ(y)` with `μ` the
//! spectral measure of the datum, so only the multiplier `G` changes from
//! one problem to the next.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::initialdata::{DatumError, InitialDatum};
use crate::quadrature::{gauss_jacobi, QuadratureError, Rule};
use crate::specialfn::{complex_pow_alpha, gamma, MittagLeffler, SpecialFnError};
use crate::walks::{minus_i_pow, WalkError, WalkSpec};

/// Panel doubling stops once successive fields differ by less than this.
pub const FIELD_TOL: f64 = 1e-10;

const ML_TOL: f64 = 1e-14;
const JACOBI_NODES: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("{op}: {detail}")]
    Invalid { op: &'static str, detail: String },
    #[error("{op}: vanishing denominator at s = {s}, lambda = {lambda}")]
    Degenerate {
        op: &'static str,
        s: Complex64,
        lambda: f64,
    },
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Datum(#[from] DatumError),
}

fn invalid(op: &'static str, detail: impl Into<String>) -> SymbolError {
    SymbolError::Invalid {
        op,
        detail: detail.into(),
    }
}

fn check_alpha(op: &'static str, alpha: f64) -> Result<(), SymbolError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(op, format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Which space operator a problem uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolSpec {
    /// `A_{N,β}`, symbol `(-i)^N β y^N / N!`; `∂_t u = A u`.
    ANbeta(WalkSpec),
    /// `B^N`, symbol `|y|^N`; `∂_t u = -B^N u`.
    RieszPower { order: u32 },
    /// `(-A_{N,β})^α`; `∂_t u = -(-A)^α u`.
    FracANbeta { walk: WalkSpec, alpha: f64 },
    /// `B^{Nα}`, symbol `|y|^{Nα}`.
    RieszFrac { order: u32, alpha: f64 },
    /// Sum of the fractional symbols for `β = ±N!`, `N` odd.
    TwoCopyRiesz { order: u32, alpha: f64 },
}

impl SymbolSpec {
    pub fn an_beta(order: u32, beta: Complex64) -> Result<Self, SymbolError> {
        Ok(SymbolSpec::ANbeta(WalkSpec::new(order, beta)?))
    }

    pub fn riesz_power(order: u32) -> Result<Self, SymbolError> {
        if order == 0 {
            return Err(invalid("riesz_power", "order must be at least 1"));
        }
        Ok(SymbolSpec::RieszPower { order })
    }

    pub fn frac_an_beta(order: u32, beta: Complex64, alpha: f64) -> Result<Self, SymbolError> {
        check_alpha("frac_an_beta", alpha)?;
        let walk = WalkSpec::new(order, beta)?;
        walk.require_stable("frac_an_beta")?;
        Ok(SymbolSpec::FracANbeta { walk, alpha })
    }

    pub fn riesz_frac(order: u32, alpha: f64) -> Result<Self, SymbolError> {
        check_alpha("riesz_frac", alpha)?;
        if order == 0 {
            return Err(invalid("riesz_frac", "order must be at least 1"));
        }
        Ok(SymbolSpec::RieszFrac { order, alpha })
    }

    pub fn two_copy_riesz(order: u32, alpha: f64) -> Result<Self, SymbolError> {
        check_alpha("two_copy_riesz", alpha)?;
        if order % 2 == 0 {
            return Err(invalid("two_copy_riesz", format!("order must be odd, got {order}")));
        }
        Ok(SymbolSpec::TwoCopyRiesz { order, alpha })
    }

    pub fn is_dissipative(&self) -> bool {
        !matches!(self, SymbolSpec::ANbeta(_))
    }

    /// The symbol as listed for each operator.
    pub fn eval(&self, y: f64) -> Result<Complex64, SymbolError> {
        Ok(match *self {
            SymbolSpec::ANbeta(walk) => an_symbol(&walk, y),
            SymbolSpec::RieszPower { order } => Complex64::new(y.abs().powi(order as i32), 0.0),
            SymbolSpec::FracANbeta { walk, alpha } => complex_pow_alpha(-an_symbol(&walk, y), alpha)?,
            SymbolSpec::RieszFrac { order, alpha } => {
                Complex64::new(y.abs().powf(order as f64 * alpha), 0.0)
            }
            SymbolSpec::TwoCopyRiesz { order, alpha } => {
                let yn = y.powi(order as i32);
                complex_pow_alpha(Complex64::new(0.0, yn), alpha)?
                    + complex_pow_alpha(Complex64::new(0.0, -yn), alpha)?
            }
        })
    }

    /// `Ψ_eff` with propagator `e^{-tΨ_eff}`; `-Ψ` for `A_{N,β}`.
    pub fn decay_symbol(&self, y: f64) -> Result<Complex64, SymbolError> {
        let s = self.eval(y)?;
        Ok(if self.is_dissipative() { s } else { -s })
    }

    pub fn propagator(&self, t: f64, y: f64) -> Result<Complex64, SymbolError> {
        Ok((-t * self.decay_symbol(y)?).exp())
    }

    pub fn label(&self) -> String {
        match self {
            SymbolSpec::ANbeta(w) => format!("ANbeta(N={}, beta={})", w.order(), w.beta()),
            SymbolSpec::RieszPower { order } => format!("RieszPower(N={order})"),
            SymbolSpec::FracANbeta { walk, alpha } => {
                format!("FracANbeta(N={}, beta={}, alpha={alpha})", walk.order(), walk.beta())
            }
            SymbolSpec::RieszFrac { order, alpha } => format!("RieszFrac(N={order}, alpha={alpha})"),
            SymbolSpec::TwoCopyRiesz { order, alpha } => {
                format!("TwoCopyRiesz(N={order}, alpha={alpha})")
            }
        }
    }
}

/// `Ψ(y) = (-i)^N β y^N / N!`.
pub fn an_symbol(walk: &WalkSpec, y: f64) -> Complex64 {
    let nf: f64 = (1..=walk.order()).map(f64::from).product();
    minus_i_pow(walk.order()) * walk.beta() * (y.powi(walk.order() as i32) / nf)
}

/// Metadata carried with every field.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldMeta {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Per-point standard errors of the real and imaginary parts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl FieldMeta {
    pub fn method(method: impl Into<String>) -> Self {
        Self {
            method: method.into(),
            ..Self::default()
        }
    }
}

/// `u(t, ·)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionField {
    pub x_grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub t: f64,
    pub meta: FieldMeta,
}

impl SolutionField {
    pub fn new(
        x_grid: Vec<f64>,
        values: Vec<Complex64>,
        t: f64,
        meta: FieldMeta,
    ) -> Result<Self, SymbolError> {
        validate_grid(&x_grid)?;
        if values.len() != x_grid.len() {
            return Err(invalid(
                "SolutionField",
                format!("{} values for {} grid points", values.len(), x_grid.len()),
            ));
        }
        if let Some(se) = &meta.stderr {
            if se.len() != x_grid.len() {
                return Err(invalid("SolutionField", "stderr length differs from the grid"));
            }
        }
        Ok(Self {
            x_grid,
            values,
            t,
            meta,
        })
    }

    /// `max_x |u - v|`; grids must match.
    pub fn max_abs_diff(&self, other: &SolutionField) -> f64 {
        assert_eq!(self.x_grid, other.x_grid, "fields live on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub fn validate_grid(x_grid: &[f64]) -> Result<(), SymbolError> {
    if x_grid.is_empty() {
        return Err(invalid("x_grid", "grid is empty"));
    }
    if x_grid.iter().any(|x| !x.is_finite()) || x_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("x_grid", "grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// `points` equally spaced values from `min` to `max`.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![min],
        _ => {
            let h = (max - min) / (points - 1) as f64;
            (0..points).map(|j| if j + 1 == points { max } else { min + h * j as f64 }).collect()
        }
    }
}

/// `[-10, 10]` with 201 points.
pub fn default_x_grid() -> Vec<f64> {
    linspace(-10.0, 10.0, 201)
}

fn check_time(op: &'static str, t: f64) -> Result<(), SymbolError> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(invalid(op, format!("t must be finite, got {t}")))
    }
}

/// `u(t, x) = ∫ e^{-ixy} e^{-tΨ_eff(y)} dμ(y)`.
///
/// Negative times are accepted only for `A_{N,β}` with `N` odd, which
/// generates a unitary group.
pub fn spectral_solution(
    datum: &InitialDatum,
    spec: &SymbolSpec,
    t: f64,
    x_grid: &[f64],
) -> Result<SolutionField, SymbolError> {
    check_time("spectral_solution", t)?;
    validate_grid(x_grid)?;
    if let SymbolSpec::ANbeta(walk) = spec {
        walk.require_stable("spectral_solution")?;
        if t < 0.0 && walk.order() % 2 == 0 {
            return Err(invalid("spectral_solution", "negative time needs an odd order"));
        }
    } else if t < 0.0 {
        return Err(invalid("spectral_solution", format!("t must be non-negative, got {t}")));
    }
    let (values, rule) = datum.transform_field(x_grid, |y| spec.propagator(t, y), FIELD_TOL)?;
    let mut meta = FieldMeta::method("spectral");
    meta.variant = Some(spec.label());
    meta.extra.insert("nodes".into(), rule.len().to_string());
    SolutionField::new(x_grid.to_vec(), values, t, meta)
}

fn ml_field(
    op: &'static str,
    datum: &InitialDatum,
    alpha: f64,
    t: f64,
    x_grid: &[f64],
    coeff: impl Fn(f64) -> Result<Complex64, SymbolError> + Sync,
) -> Result<(Vec<Complex64>, usize), SymbolError> {
    check_alpha(op, alpha)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(op, format!("t must be finite and non-negative, got {t}")));
    }
    validate_grid(x_grid)?;
    let ml = MittagLeffler::new(alpha, ML_TOL)?;
    let ta = t.powf(alpha);
    let (values, rule) = datum.transform_field(
        x_grid,
        |y| Ok::<_, SymbolError>(ml.eval(coeff(y)? * ta)?),
        FIELD_TOL,
    )?;
    Ok((values, rule.len()))
}

/// `u(t, x) = ∫ e^{-iλx} E_α(β/N!·(-iλ)^N t^α) dμ(λ)`.
pub fn time_fractional_solution(
    datum: &InitialDatum,
    walk: &WalkSpec,
    alpha: f64,
    t: f64,
    x_grid: &[f64],
) -> Result<SolutionField, SymbolError> {
    walk.require_stable("time_fractional_solution")?;
    mittag_leffler_propagation(datum, walk, alpha, t, x_grid)
}

/// [`time_fractional_solution`] without the stability check. For an
/// unstable `(N, β)` the multiplier grows with `|λ|`, which compact spectral
/// support keeps finite.
pub fn mittag_leffler_propagation(
    datum: &InitialDatum,
    walk: &WalkSpec,
    alpha: f64,
    t: f64,
    x_grid: &[f64],
) -> Result<SolutionField, SymbolError> {
    let (values, nodes) = ml_field("time_fractional_solution", datum, alpha, t, x_grid, |y| {
        Ok(an_symbol(walk, y))
    })?;
    let mut meta = FieldMeta::method("mittag_leffler");
    meta.variant = Some(format!("N={}, beta={}, alpha={alpha}", walk.order(), walk.beta()));
    meta.extra.insert("nodes".into(), nodes.to_string());
    SolutionField::new(x_grid.to_vec(), values, t, meta)
}

/// `u(t, x) = ∫ e^{-iλx} E_α(Ψ(λ)^α t^α) dμ(λ)` with the principal power:
/// the problem with fractional order `α` in both time and space.
pub fn mittag_leffler_power_propagation(
    datum: &InitialDatum,
    walk: &WalkSpec,
    alpha: f64,
    t: f64,
    x_grid: &[f64],
) -> Result<SolutionField, SymbolError> {
    let (values, nodes) = ml_field("mittag_leffler_power_propagation", datum, alpha, t, x_grid, |y| {
        Ok(complex_pow_alpha(an_symbol(walk, y), alpha)?)
    })?;
    let mut meta = FieldMeta::method("mittag_leffler_power");
    meta.variant = Some(format!("N={}, beta={}, alpha={alpha}", walk.order(), walk.beta()));
    meta.extra.insert("nodes".into(), nodes.to_string());
    SolutionField::new(x_grid.to_vec(), values, t, meta)
}

/// Which pair of equivalent problems to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    /// Caputo order `α` with `A`, against `A^M` plus forcing by `A^k f`.
    M1,
    /// Caputo order `α` with `A^α`, against `A` plus forcing by `A^{αk} f`.
    M12,
}

fn order_from_alpha(op: &'static str, alpha: f64) -> Result<u32, SymbolError> {
    check_alpha(op, alpha)?;
    let m = (1.0 / alpha).round();
    if (1.0 / alpha - m).abs() > 1e-12 || m < 2.0 {
        return Err(invalid(op, format!("alpha must be 1/M for an integer M >= 2, got {alpha}")));
    }
    Ok(m as u32)
}

/// Laplace–Fourier transforms (per unit `f̂(λ)`) of the time-fractional
/// solution and of the nonlocal-forcing solution, computed from their own
/// formulas:
///
/// * `M1`: `s^{α-1}/(s^α - Ψ)` and `(1 + Σ_{k<M} (s^{-α}Ψ)^k)/(s - Ψ^M)`;
/// * `M12`: the same with `Ψ^α` in place of `Ψ` in the first and in the
///   forcing sum, and `s - Ψ` as the second denominator.
pub fn laplace_fourier_lhs_rhs(
    s: Complex64,
    lambda: f64,
    walk: &WalkSpec,
    alpha: f64,
    which: Equivalence,
) -> Result<(Complex64, Complex64), SymbolError> {
    const OP: &str = "laplace_fourier_lhs_rhs";
    if !(s.re > 0.0) {
        return Err(invalid(OP, format!("need Re s > 0, got {s}")));
    }
    let m = order_from_alpha(OP, alpha)?;
    let psi = an_symbol(walk, lambda);
    let s_alpha = complex_pow_alpha(s, alpha)?;
    let (q_base, tail_den) = match which {
        Equivalence::M1 => (psi, s - psi.powu(m)),
        Equivalence::M12 => (complex_pow_alpha(psi, alpha)?, s - psi),
    };
    let lhs_den = s_alpha - q_base;
    if lhs_den.norm() == 0.0 || tail_den.norm() == 0.0 {
        return Err(SymbolError::Degenerate { op: OP, s, lambda });
    }
    let lhs = s_alpha / s / lhs_den;
    let q = q_base / s_alpha;
    let mut forcing = Complex64::new(1.0, 0.0);
    let mut qk = Complex64::new(1.0, 0.0);
    for _ in 1..m {
        qk *= q;
        forcing += qk;
    }
    Ok((lhs, forcing / tail_den))
}

/// Time profile of the forcing terms of the nonlocal problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingProfile {
    /// `t^{αk-1}/Γ(αk)`, whose Laplace transform is `s^{-αk}`.
    #[default]
    TransformConsistent,
    /// `t^{-αk}/Γ(αk)`, as written for the second problem.
    AsPrinted,
}

/// Per-frequency solver for
/// `û' = P û + Σ_{k=1}^{M-1} g_k(t) Q_k f̂`, `û(0) = f̂`, written as
/// `û(t) = e^{Pt} f̂ + Σ_k Q_k/Γ(αk) ∫_0^t e^{P(t-s)} s^{e_k} ds · f̂`
/// with the weakly singular integrals done by Gauss–Jacobi quadrature.
#[derive(Debug, Clone)]
pub struct NonlocalForcing {
    walk: WalkSpec,
    m: u32,
    alpha: f64,
    which: Equivalence,
    profile: ForcingProfile,
    rules: Vec<(f64, Rule)>,
}

impl NonlocalForcing {
    pub fn new(
        walk: WalkSpec,
        m: u32,
        which: Equivalence,
        profile: ForcingProfile,
    ) -> Result<Self, SymbolError> {
        if m < 2 {
            return Err(invalid("nonlocal_forcing_evolve", format!("M must be at least 2, got {m}")));
        }
        let alpha = 1.0 / m as f64;
        let mut rules = Vec::new();
        for k in 1..m {
            let ak = alpha * k as f64;
            // Exponent of s in the forcing profile.
            let e = match (which, profile) {
                (_, ForcingProfile::TransformConsistent) | (Equivalence::M1, _) => ak - 1.0,
                (Equivalence::M12, ForcingProfile::AsPrinted) => -ak,
            };
            rules.push((e, gauss_jacobi(JACOBI_NODES, 0.0, e)?));
        }
        Ok(Self {
            walk,
            m,
            alpha,
            which,
            profile,
            rules,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `û(t, λ)/f̂(λ)`.
    pub fn multiplier(&self, lambda: f64, t: f64) -> Result<Complex64, SymbolError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid("nonlocal_forcing_evolve", format!("t must be non-negative, got {t}")));
        }
        let psi = an_symbol(&self.walk, lambda);
        let (p, q_base) = match self.which {
            Equivalence::M1 => (psi.powu(self.m), psi),
            Equivalence::M12 => (psi, complex_pow_alpha(psi, self.alpha)?),
        };
        let mut out = (p * t).exp();
        if t == 0.0 {
            return Ok(out);
        }
        let mut qk = Complex64::new(1.0, 0.0);
        for (k, (e, rule)) in (1..self.m).zip(&self.rules) {
            qk *= q_base;
            // s = t(1+x)/2: ∫_0^t e^{P(t-s)} s^e ds = (t/2)^{e+1} Σ w_j e^{Pt(1-x_j)/2}.
            let integral: Complex64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| (p * (t * (1.0 - x) / 2.0)).exp() * w)
                .sum::<Complex64>()
                * (t / 2.0).powf(e + 1.0);
            out += qk * integral / gamma(self.alpha * k as f64)?;
        }
        Ok(out)
    }

    pub fn profile(&self) -> ForcingProfile {
        self.profile
    }
}

/// Solves the nonlocal-forcing problem frequency by frequency and returns
/// one field per requested time.
pub fn nonlocal_forcing_evolve(
    datum: &InitialDatum,
    walk: &WalkSpec,
    m: u32,
    t_grid: &[f64],
    x_grid: &[f64],
    which: Equivalence,
) -> Result<Vec<SolutionField>, SymbolError> {
    nonlocal_forcing_evolve_with(datum, walk, m, t_grid, x_grid, which, ForcingProfile::default())
}

pub fn nonlocal_forcing_evolve_with(
    datum: &InitialDatum,
    walk: &WalkSpec,
    m: u32,
    t_grid: &[f64],
    x_grid: &[f64],
    which: Equivalence,
    profile: ForcingProfile,
) -> Result<Vec<SolutionField>, SymbolError> {
    validate_grid(x_grid)?;
    let solver = NonlocalForcing::new(*walk, m, which, profile)?;
    t_grid
        .iter()
        .map(|&t| {
            let (values, rule) =
                datum.transform_field(x_grid, |y| solver.multiplier(y, t), FIELD_TOL)?;
            let mut meta = FieldMeta::method("nonlocal_forcing");
            meta.variant = Some(format!("{which:?}, M={m}, profile={profile:?}"));
            meta.extra.insert("nodes".into(), rule.len().to_string());
            SolutionField::new(x_grid.to_vec(), values, t, meta)
        })
        .collect()
}
