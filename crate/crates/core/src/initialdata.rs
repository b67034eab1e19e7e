//! Initial data with compactly supported spectral measure:
//! `f(z) = ∫ e^{-iyz} dμ(y)`, an entire function of exponential type.
//!
//! A datum is a finite sum of point masses and densities. Densities are
//! either closed-form (bump, truncated Gaussian) or node samples integrated
//! with the trapezoid rule.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{gauss_legendre_16, integrate_adaptive, QuadratureError};

/// Largest `Y·|Im z|` accepted by [`InitialDatum::evaluate`].
pub const GROWTH_EXPONENT_CAP: f64 = 600.0;

/// Largest Taylor index served by [`InitialDatum::taylor_coeff`].
pub const MAX_TAYLOR_INDEX: usize = 170;

const MAX_PANELS: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatumError {
    #[error("invalid datum: {0}")]
    Invalid(String),
    #[error("evaluate_f: Y·|Im z| = {exponent} exceeds the growth cap {cap}")]
    Growth { exponent: f64, cap: f64 },
    #[error("taylor_coeff: index {0} exceeds the cap {MAX_TAYLOR_INDEX}")]
    Cap(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// One density component of the spectral measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    /// `mass·(1 + cos(π(y-c)/w))/(2w)` on `[c-w, c+w]`; total mass `mass`.
    Bump {
        center: f64,
        half_width: f64,
        mass: Complex64,
    },
    /// `weight·φ_σ(y-c)` on `[c-r, c+r]`, `φ_σ` the centred normal density.
    TruncatedGaussian {
        center: f64,
        sigma: f64,
        radius: f64,
        weight: Complex64,
    },
    /// Samples on strictly increasing nodes, trapezoid rule, zero outside.
    Sampled {
        nodes: Vec<f64>,
        values: Vec<Complex64>,
    },
}

impl Density {
    fn validate(&self) -> Result<(), DatumError> {
        let bad = |s: String| Err(DatumError::Invalid(s));
        match self {
            Density::Bump {
                center, half_width, ..
            } => {
                if !(center.is_finite() && *half_width > 0.0 && half_width.is_finite()) {
                    return bad(format!("bump needs finite center and half_width > 0, got ({center}, {half_width})"));
                }
            }
            Density::TruncatedGaussian {
                center,
                sigma,
                radius,
                ..
            } => {
                if !(center.is_finite() && *sigma > 0.0 && *radius > 0.0 && radius.is_finite()) {
                    return bad(format!("truncated gaussian needs sigma > 0 and radius > 0, got ({sigma}, {radius})"));
                }
            }
            Density::Sampled { nodes, values } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return bad("sampled density needs at least two nodes and one value per node".into());
                }
                if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|y| !y.is_finite()) {
                    return bad("sampled density nodes must be finite and strictly increasing".into());
                }
            }
        }
        Ok(())
    }

    pub fn interval(&self) -> (f64, f64) {
        match self {
            Density::Bump {
                center, half_width, ..
            } => (center - half_width, center + half_width),
            Density::TruncatedGaussian { center, radius, .. } => (center - radius, center + radius),
            Density::Sampled { nodes, .. } => (nodes[0], nodes[nodes.len() - 1]),
        }
    }

    /// Density value at `y` for the closed-form kinds.
    pub fn value(&self, y: f64) -> Complex64 {
        let (a, b) = self.interval();
        if y < a || y > b {
            return Complex64::new(0.0, 0.0);
        }
        match self {
            Density::Bump {
                center,
                half_width,
                mass,
            } => {
                let phase = std::f64::consts::PI * (y - center) / half_width;
                mass * ((1.0 + phase.cos()) / (2.0 * half_width))
            }
            Density::TruncatedGaussian {
                center,
                sigma,
                weight,
                ..
            } => {
                let u = (y - center) / sigma;
                weight * ((-0.5 * u * u).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()))
            }
            Density::Sampled { nodes, values } => {
                let j = nodes.partition_point(|&n| n <= y).clamp(1, nodes.len() - 1);
                let w = (y - nodes[j - 1]) / (nodes[j] - nodes[j - 1]);
                values[j - 1] * (1.0 - w) + values[j] * w
            }
        }
    }

    fn append_rule(&self, panels: usize, out: &mut SpectralRule) {
        match self {
            Density::Sampled { nodes, values } => {
                for j in 0..nodes.len() {
                    let left = if j > 0 { nodes[j] - nodes[j - 1] } else { 0.0 };
                    let right = if j + 1 < nodes.len() { nodes[j + 1] - nodes[j] } else { 0.0 };
                    out.push(nodes[j], values[j] * (0.5 * (left + right)));
                }
            }
            _ => {
                let (a, b) = self.interval();
                for (lo, hi) in split_at_zero(a, b) {
                    let pieces = ((panels as f64) * (hi - lo) / (b - a)).ceil().max(1.0) as usize;
                    gauss_panels(lo, hi, pieces, |y, w| out.push(y, self.value(y) * w));
                }
            }
        }
    }
}

fn split_at_zero(a: f64, b: f64) -> Vec<(f64, f64)> {
    if a < 0.0 && b > 0.0 {
        vec![(a, 0.0), (0.0, b)]
    } else {
        vec![(a, b)]
    }
}

fn gauss_panels(a: f64, b: f64, panels: usize, mut visit: impl FnMut(f64, f64)) {
    let rule = gauss_legendre_16();
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            visit(mid + 0.5 * h * x, 0.5 * h * w);
        }
    }
}

/// A discrete measure `Σ_j w_j δ_{y_j}` standing in for `μ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpectralRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<Complex64>,
}

impl SpectralRule {
    fn push(&mut self, y: f64, w: Complex64) {
        self.nodes.push(y);
        self.weights.push(w);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ_j w_j g(y_j)`.
    pub fn integrate(&self, g: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * g(y))
            .sum()
    }

    /// `x ↦ Σ_j w_j K_j e^{-i y_j x}` on a grid, for kernel values `K_j`.
    pub fn field(&self, kernel: &[Complex64], x_grid: &[f64]) -> Vec<Complex64> {
        x_grid
            .par_iter()
            .map(|&x| {
                self.nodes
                    .iter()
                    .zip(&self.weights)
                    .zip(kernel)
                    .map(|((&y, &w), &k)| w * k * Complex64::from_polar(1.0, -y * x))
                    .sum()
            })
            .collect()
    }
}

/// Precomputed `w_j e^{-i y_j x}` for a fixed rule and grid, so repeated
/// fields cost one matrix-vector product each.
#[derive(Debug, Clone)]
pub struct FieldOperator {
    rows: Vec<Vec<Complex64>>,
}

impl FieldOperator {
    pub fn new(rule: &SpectralRule, x_grid: &[f64]) -> Self {
        let rows = x_grid
            .iter()
            .map(|&x| {
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&y, &w)| w * Complex64::from_polar(1.0, -y * x))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn apply_into(&self, kernel: &[Complex64], out: &mut [Complex64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().zip(kernel).map(|(a, b)| a * b).sum();
        }
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }
}

/// Witnesses `(C1, C2) = (TV(μ), Y)` for `|a_k| ≤ C1·C2^k/k!`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub holds: bool,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub location: f64,
    pub weight: Complex64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialDatum {
    #[serde(default)]
    point_masses: Vec<PointMass>,
    #[serde(default)]
    densities: Vec<Density>,
}

impl InitialDatum {
    pub fn new(point_masses: Vec<PointMass>, densities: Vec<Density>) -> Result<Self, DatumError> {
        for p in &point_masses {
            if !p.location.is_finite() || !(p.weight.re.is_finite() && p.weight.im.is_finite()) {
                return Err(DatumError::Invalid(format!(
                    "point mass ({}, {}) is not finite",
                    p.location, p.weight
                )));
            }
        }
        for d in &densities {
            d.validate()?;
        }
        if point_masses.is_empty() && densities.is_empty() {
            return Err(DatumError::Invalid("datum has no spectral mass".into()));
        }
        Ok(Self {
            point_masses,
            densities,
        })
    }

    pub fn point_mass(location: f64, weight: Complex64) -> Result<Self, DatumError> {
        Self::new(vec![PointMass { location, weight }], vec![])
    }

    /// Masses `½` at `±1`: `f = cos`.
    pub fn cosine() -> Self {
        Self::cosine_with(1.0)
    }

    /// Masses `½` at `±k`: `f(z) = cos(kz)`.
    pub fn cosine_with(k: f64) -> Self {
        let half = Complex64::new(0.5, 0.0);
        Self {
            point_masses: vec![
                PointMass {
                    location: -k,
                    weight: half,
                },
                PointMass {
                    location: k,
                    weight: half,
                },
            ],
            densities: vec![],
        }
    }

    pub fn bump(center: f64, half_width: f64, mass: Complex64) -> Result<Self, DatumError> {
        Self::new(
            vec![],
            vec![Density::Bump {
                center,
                half_width,
                mass,
            }],
        )
    }

    pub fn truncated_gaussian(sigma: f64, radius: f64, weight: Complex64) -> Result<Self, DatumError> {
        Self::new(
            vec![],
            vec![Density::TruncatedGaussian {
                center: 0.0,
                sigma,
                radius,
                weight,
            }],
        )
    }

    pub fn sampled(nodes: Vec<f64>, values: Vec<Complex64>) -> Result<Self, DatumError> {
        Self::new(vec![], vec![Density::Sampled { nodes, values }])
    }

    pub fn point_masses(&self) -> &[PointMass] {
        &self.point_masses
    }

    pub fn densities(&self) -> &[Density] {
        &self.densities
    }

    /// Spectral measure of `self + other`.
    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.point_masses.extend(other.point_masses.iter().cloned());
        out.densities.extend(other.densities.iter().cloned());
        out
    }

    /// Spectral measure of `c·self`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let point_masses = self
            .point_masses
            .iter()
            .map(|p| PointMass {
                location: p.location,
                weight: p.weight * c,
            })
            .collect();
        let densities = self
            .densities
            .iter()
            .map(|d| match d {
                Density::Bump {
                    center,
                    half_width,
                    mass,
                } => Density::Bump {
                    center: *center,
                    half_width: *half_width,
                    mass: mass * c,
                },
                Density::TruncatedGaussian {
                    center,
                    sigma,
                    radius,
                    weight,
                } => Density::TruncatedGaussian {
                    center: *center,
                    sigma: *sigma,
                    radius: *radius,
                    weight: weight * c,
                },
                Density::Sampled { nodes, values } => Density::Sampled {
                    nodes: nodes.clone(),
                    values: values.iter().map(|v| v * c).collect(),
                },
            })
            .collect();
        Self {
            point_masses,
            densities,
        }
    }

    /// Smallest `Y` with all mass in `[-Y, Y]`.
    pub fn support_radius(&self) -> f64 {
        let pm = self.point_masses.iter().map(|p| p.location.abs());
        let dens = self.densities.iter().map(|d| {
            let (a, b) = d.interval();
            a.abs().max(b.abs())
        });
        pm.chain(dens).fold(0.0, f64::max)
    }

    /// Total variation `Σ|w| + ∫|ρ|`.
    pub fn total_variation(&self) -> f64 {
        let pm: f64 = self.point_masses.iter().map(|p| p.weight.norm()).sum();
        let dens: f64 = self
            .densities
            .iter()
            .map(|d| match d {
                Density::Bump { mass, .. } => mass.norm(),
                Density::Sampled { nodes, values } => nodes
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(y, v)| 0.5 * (y[1] - y[0]) * (v[0].norm() + v[1].norm()))
                    .sum(),
                _ => {
                    let mut rule = SpectralRule::default();
                    d.append_rule(256, &mut rule);
                    rule.weights.iter().map(|w| w.norm()).sum()
                }
            })
            .sum();
        pm + dens
    }

    /// Discretisation with `panels` Gauss–Legendre panels per density
    /// (split at `y = 0`), point masses kept exact.
    pub fn rule(&self, panels: usize) -> SpectralRule {
        let mut out = SpectralRule::default();
        for p in &self.point_masses {
            out.push(p.location, p.weight);
        }
        for d in &self.densities {
            d.append_rule(panels.max(1), &mut out);
        }
        out
    }

    fn has_refinable_density(&self) -> bool {
        self.densities
            .iter()
            .any(|d| !matches!(d, Density::Sampled { .. }))
    }

    /// `x ↦ ∫ e^{-iyx} K(y) dμ(y)` on a grid, doubling the panel count until
    /// successive fields differ by less than `tol` in max norm. Returns the
    /// field and the rule that produced it.
    pub fn transform_field<K, E>(
        &self,
        x_grid: &[f64],
        kernel: K,
        tol: f64,
    ) -> Result<(Vec<Complex64>, SpectralRule), E>
    where
        K: Fn(f64) -> Result<Complex64, E> + Sync,
        E: From<QuadratureError> + Send,
    {
        let eval = |rule: &SpectralRule| -> Result<Vec<Complex64>, E> {
            let k: Vec<Complex64> = rule.nodes.par_iter().map(|&y| kernel(y)).collect::<Result<_, E>>()?;
            Ok(rule.field(&k, x_grid))
        };
        let mut panels = 4;
        let mut rule = self.rule(panels);
        let mut field = eval(&rule)?;
        if !self.has_refinable_density() {
            return Ok((field, rule));
        }
        loop {
            panels *= 2;
            let next_rule = self.rule(panels);
            let next = eval(&next_rule)?;
            let diff = field
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            rule = next_rule;
            field = next;
            if diff < tol {
                return Ok((field, rule));
            }
            if panels >= MAX_PANELS {
                return Err(QuadratureError::Tolerance {
                    op: "transform_field",
                    tol,
                    evaluations: rule.len(),
                    estimate: diff,
                }
                .into());
            }
        }
    }

    /// `f(z) = ∫ e^{-iyz} dμ(y)`.
    pub fn evaluate(&self, z: Complex64) -> Result<Complex64, DatumError> {
        let exponent = self.support_radius() * z.im.abs();
        if exponent > GROWTH_EXPONENT_CAP {
            return Err(DatumError::Growth {
                exponent,
                cap: GROWTH_EXPONENT_CAP,
            });
        }
        let i = Complex64::new(0.0, 1.0);
        let mut total: Complex64 = self
            .point_masses
            .iter()
            .map(|p| p.weight * (-i * p.location * z).exp())
            .sum();
        for d in &self.densities {
            total += match d {
                Density::Sampled { .. } => {
                    let mut rule = SpectralRule::default();
                    d.append_rule(1, &mut rule);
                    rule.integrate(|y| (-i * y * z).exp())
                }
                _ => {
                    let (a, b) = d.interval();
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (lo, hi) in split_at_zero(a, b) {
                        acc += integrate_adaptive(|y| d.value(y) * (-i * y * z).exp(), lo, hi, 1e-15, 1e-14, 20_000)?;
                    }
                    acc
                }
            };
        }
        Ok(total)
    }

    /// `a_k = (1/k!) ∫ (-iy)^k dμ(y)`.
    pub fn taylor_coeff(&self, k: usize) -> Result<Complex64, DatumError> {
        if k > MAX_TAYLOR_INDEX {
            return Err(DatumError::Cap(k));
        }
        let term = |y: f64| {
            let mut acc = Complex64::new(1.0, 0.0);
            for j in 1..=k {
                acc *= Complex64::new(0.0, -y / j as f64);
            }
            acc
        };
        let mut total: Complex64 = self.point_masses.iter().map(|p| p.weight * term(p.location)).sum();
        for d in &self.densities {
            let mut rule = SpectralRule::default();
            d.append_rule(64 + k, &mut rule);
            total += rule.integrate(term);
        }
        Ok(total)
    }

    /// Compact support gives `|a_k| ≤ TV(μ) Y^k / k!`.
    pub fn check_growth_condition(&self, _order: u32) -> GrowthCertificate {
        GrowthCertificate {
            holds: true,
            c1: self.total_variation(),
            c2: self.support_radius(),
        }
    }

    /// `ln |a_k|`, computed as `k ln Y - ln k! + ln|∫ (-iy/Y)^k dμ|` so it
    /// stays finite far beyond [`MAX_TAYLOR_INDEX`]. `-∞` when `a_k = 0`.
    pub fn log_abs_taylor_coeff(&self, k: usize) -> Result<f64, DatumError> {
        if k > MAX_LOG_TAYLOR_INDEX {
            return Err(DatumError::Cap(k));
        }
        let big_y = self.support_radius();
        if big_y == 0.0 {
            let a0: Complex64 = self.point_masses.iter().map(|p| p.weight).sum();
            return Ok(if k == 0 { a0.norm().ln() } else { f64::NEG_INFINITY });
        }
        let term = |y: f64| minus_i_s_pow(y / big_y, k);
        let mut total: Complex64 = self.point_masses.iter().map(|p| p.weight * term(p.location)).sum();
        for d in &self.densities {
            let mut rule = SpectralRule::default();
            d.append_rule(64 + k / 2, &mut rule);
            total += rule.integrate(term);
        }
        let log_fact = crate::specialfn::log_gamma(k as f64 + 1.0).expect("positive argument");
        Ok(k as f64 * big_y.ln() - log_fact + total.norm().ln())
    }

    /// Logarithms of the partial sums of `Σ_{h ≥ 0} |a_{hN}| c^h (hN/ln(hN+1))^{hN}`
    /// for `h = 0..=terms` (the `h = 0` term is `|a_0|`).
    pub fn growth_series_log_partial_sums(
        &self,
        order: u32,
        c: f64,
        terms: usize,
    ) -> Result<Vec<f64>, DatumError> {
        let mut acc = f64::NEG_INFINITY;
        let mut out = Vec::with_capacity(terms + 1);
        for h in 0..=terms {
            let k = h * order as usize;
            let mut log_term = self.log_abs_taylor_coeff(k)?;
            if k > 0 {
                let kf = k as f64;
                log_term += h as f64 * c.ln() + kf * (kf / (kf + 1.0).ln()).ln();
            }
            acc = log_add(acc, log_term);
            out.push(acc);
        }
        Ok(out)
    }
}

/// Largest index served by [`InitialDatum::log_abs_taylor_coeff`].
pub const MAX_LOG_TAYLOR_INDEX: usize = 100_000;

/// `(-is)^k` with the phase taken exactly from `k mod 4`.
fn minus_i_s_pow(s: f64, k: usize) -> Complex64 {
    let turns = if s >= 0.0 { (4 - k % 4) % 4 } else { k % 4 };
    let phase = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][turns];
    phase * s.abs().powi(k as i32)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
