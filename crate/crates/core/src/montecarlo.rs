//! Estimators of `E[f(x + X)]` for the walk, the subordinated walk, the
//! two-copy Riesz construction and the inverse-subordinator time change.
//!
//! `PureMc` samples the walk itself. `SemiAnalytic` samples only the clock
//! and replaces the walk by its exact characteristic function, so for a
//! deterministic clock it has no noise at all.
//!
//! Work is split into chunks of `chunk_size` samples. Chunk `c` draws from
//! the stream keyed by `(seed, c)` and chunk statistics are merged in chunk
//! order, so results do not depend on the number of worker threads.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::initialdata::{DatumError, FieldOperator, InitialDatum, SpectralRule, GROWTH_EXPONENT_CAP};
use crate::rng::RandomStream;
use crate::subordination::{sample_l, sample_sm, SubordinationError, SubordinatorSpec, SumConvention};
use crate::symbols::{
    linspace, spectral_solution, time_fractional_solution, validate_grid, FieldMeta, SolutionField,
    SymbolError, SymbolSpec, FIELD_TOL,
};
use crate::walks::{
    limit_char_fn, powu64, scale, step_count, walk_char_fn_exact, walk_sample_steps, xi_char_fn,
    WalkError, WalkSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("estimator config: {0}")]
    Config(String),
    #[error("pure Monte Carlo: walk position with Y·|Im W| = {exponent} exceeds the growth cap {cap}")]
    Growth { exponent: f64, cap: f64 },
    #[error("{op}: {detail}")]
    Invalid { op: &'static str, detail: String },
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Datum(#[from] DatumError),
    #[error(transparent)]
    Subordination(#[from] SubordinationError),
}

impl From<crate::quadrature::QuadratureError> for McError {
    fn from(e: crate::quadrature::QuadratureError) -> Self {
        McError::Symbol(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    PureMc,
    #[default]
    SemiAnalytic,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::PureMc => "pure_mc",
            Variant::SemiAnalytic => "semi_analytic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    samples: u64,
    pub seed: u64,
    chunk_size: u64,
    pub variant: Variant,
}

impl EstimatorConfig {
    /// `samples` is rounded up to a whole number of chunks.
    pub fn new(samples: u64, seed: u64, chunk_size: u64, variant: Variant) -> Result<Self, McError> {
        if samples == 0 || chunk_size == 0 {
            return Err(McError::Config(format!(
                "samples and chunk_size must be positive, got {samples} and {chunk_size}"
            )));
        }
        let chunks = samples.div_ceil(chunk_size);
        Ok(Self {
            samples: chunks * chunk_size,
            seed,
            chunk_size,
            variant,
        })
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn chunk_size(&self) -> u64 {
        self.chunk_size
    }

    pub fn chunks(&self) -> u64 {
        self.samples / self.chunk_size
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub mean: Complex64,
    /// Larger of the real and imaginary standard errors.
    pub stderr: f64,
    pub samples_used: u64,
    pub config: EstimatorConfig,
}

/// Running mean and sum of squared deviations, per component.
#[derive(Debug, Clone)]
struct Moments {
    count: u64,
    mean: Vec<Complex64>,
    m2: Vec<[f64; 2]>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![Complex64::new(0.0, 0.0); len],
            m2: vec![[0.0; 2]; len],
        }
    }

    fn push(&mut self, xs: &[Complex64]) {
        self.count += 1;
        let k = self.count as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(&mut self.m2).zip(xs) {
            let d = x - *m;
            *m += d / k;
            let d2 = x - *m;
            s[0] += d.re * d2.re;
            s[1] += d.im * d2.im;
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for j in 0..self.mean.len() {
            let d = other.mean[j] - self.mean[j];
            self.mean[j] += d * (nb / n);
            self.m2[j][0] += other.m2[j][0] + d.re * d.re * na * nb / n;
            self.m2[j][1] += other.m2[j][1] + d.im * d.im * na * nb / n;
        }
        self.count += other.count;
    }

    fn stderr(&self) -> Vec<[f64; 2]> {
        let n = self.count as f64;
        self.m2
            .iter()
            .map(|s| {
                if self.count < 2 {
                    [0.0, 0.0]
                } else {
                    [(s[0] / (n - 1.0) / n).sqrt(), (s[1] / (n - 1.0) / n).sqrt()]
                }
            })
            .collect()
    }
}

/// Runs `draw` once per sample, filling a vector of `len` values, and
/// returns per-entry means and standard errors.
pub fn estimate_vector<F>(
    cfg: &EstimatorConfig,
    salt: u64,
    len: usize,
    draw: F,
) -> Result<(Vec<Complex64>, Vec<[f64; 2]>), McError>
where
    F: Fn(&mut RandomStream, &mut [Complex64]) -> Result<(), McError> + Sync,
{
    let chunks: Vec<Moments> = (0..cfg.chunks())
        .into_par_iter()
        .map(|c| {
            let mut rng = RandomStream::derived(cfg.seed, salt, c);
            let mut acc = Moments::new(len);
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for _ in 0..cfg.chunk_size {
                draw(&mut rng, &mut buf)?;
                acc.push(&buf);
            }
            Ok(acc)
        })
        .collect::<Result<_, McError>>()?;
    let mut total = Moments::new(len);
    for c in &chunks {
        total.merge(c);
    }
    let se = total.stderr();
    Ok((total.mean, se))
}

/// Scalar version of [`estimate_vector`].
pub fn estimate<F>(cfg: &EstimatorConfig, salt: u64, draw: F) -> Result<EstimateResult, McError>
where
    F: Fn(&mut RandomStream) -> Result<Complex64, McError> + Sync,
{
    let (mean, se) = estimate_vector(cfg, salt, 1, |rng, out| {
        out[0] = draw(rng)?;
        Ok(())
    })?;
    Ok(EstimateResult {
        mean: mean[0],
        stderr: se[0][0].max(se[0][1]),
        samples_used: cfg.samples,
        config: *cfg,
    })
}

/// Refinement tolerance of the node sets used by the sampling estimators.
pub const MC_RULE_TOL: f64 = 1e-8;

const SALT_WALK: u64 = 1;
const SALT_SUBORDINATED: u64 = 2;
const SALT_TWO_COPY: u64 = 3;
const SALT_TIME_FRACTIONAL: u64 = 4;

fn require_class_d(datum: &InitialDatum, order: u32) -> Result<(), McError> {
    let cert = datum.check_growth_condition(order);
    if cert.holds {
        Ok(())
    } else {
        Err(McError::Invalid {
            op: "representation",
            detail: "datum fails the growth condition".into(),
        })
    }
}

/// Discretisation of `μ` resolved for the reference multiplier. Pure Monte
/// Carlo shifts `x` by the walk position, so its rule is resolved on a
/// widened grid.
fn spectral_rule<K>(
    datum: &InitialDatum,
    x_grid: &[f64],
    reference: K,
    variant: Variant,
) -> Result<SpectralRule, McError>
where
    K: Fn(f64) -> Result<Complex64, SymbolError> + Sync,
{
    let (lo, hi) = (x_grid[0], x_grid[x_grid.len() - 1]);
    let pad = match variant {
        Variant::SemiAnalytic => 0.0,
        Variant::PureMc => (hi - lo).max(10.0),
    };
    let probe = if pad == 0.0 {
        x_grid.to_vec()
    } else {
        linspace(lo - pad, hi + pad, 2 * x_grid.len() + 1)
    };
    let (_, rule) = datum.transform_field(&probe, reference, MC_RULE_TOL)?;
    Ok(rule)
}

/// `e^{-iyW}` at every node, with the growth guard on `Im W`.
fn plane_waves(rule: &SpectralRule, radius: f64, w: Complex64, out: &mut [Complex64]) -> Result<(), McError> {
    let exponent = radius * w.im.abs();
    if exponent > GROWTH_EXPONENT_CAP {
        return Err(McError::Growth {
            exponent,
            cap: GROWTH_EXPONENT_CAP,
        });
    }
    let i = Complex64::new(0.0, 1.0);
    for (o, &y) in out.iter_mut().zip(&rule.nodes) {
        *o = (-i * y * w).exp();
    }
    Ok(())
}

fn field_from_estimate(
    x_grid: &[f64],
    t: f64,
    mean: Vec<Complex64>,
    stderr: Vec<[f64; 2]>,
    mut meta: FieldMeta,
    cfg: &EstimatorConfig,
) -> Result<SolutionField, McError> {
    meta.samples = Some(cfg.samples);
    meta.seed = Some(cfg.seed);
    meta.variant = Some(cfg.variant.as_str().into());
    meta.stderr = Some(stderr);
    Ok(SolutionField::new(x_grid.to_vec(), mean, t, meta)?)
}

/// Draws a clock value and returns the walk step counts it induces.
type Clock<'a> = dyn Fn(&mut RandomStream) -> Vec<u64> + Sync + 'a;

/// Shared body of the time-changed estimators: `walks[i]` runs for
/// `clock(rng)[i]` steps of size `n^{-1/N}`, independently.
fn time_changed_field(
    datum: &InitialDatum,
    walks: &[WalkSpec],
    n: u64,
    rule: &SpectralRule,
    x_grid: &[f64],
    cfg: &EstimatorConfig,
    salt: u64,
    clock: &Clock<'_>,
) -> Result<(Vec<Complex64>, Vec<[f64; 2]>), McError> {
    let op = FieldOperator::new(rule, x_grid);
    let radius = datum.support_radius();
    let psi: Vec<Vec<Complex64>> = walks
        .iter()
        .map(|w| {
            let s = scale(w.order(), n);
            rule.nodes
                .iter()
                .map(|&y| xi_char_fn(w, Complex64::new(-y / s, 0.0)))
                .collect()
        })
        .collect();
    estimate_vector(cfg, salt, x_grid.len(), |rng, out| {
        let steps = clock(rng);
        let mut kernel = vec![Complex64::new(1.0, 0.0); rule.len()];
        match cfg.variant {
            Variant::SemiAnalytic => {
                for (p, &k) in psi.iter().zip(&steps) {
                    for (kj, pj) in kernel.iter_mut().zip(p) {
                        *kj *= powu64(*pj, k);
                    }
                }
            }
            Variant::PureMc => {
                let position: Complex64 = walks
                    .iter()
                    .zip(&steps)
                    .map(|(w, &k)| walk_sample_steps(w, n, k, rng))
                    .sum();
                plane_waves(rule, radius, position, &mut kernel)?;
            }
        }
        op.apply_into(&kernel, out);
        Ok(())
    })
}

/// `E[f(x + W_n(t))]`.
pub fn represent_walk(
    datum: &InitialDatum,
    walk: &WalkSpec,
    n: u64,
    t: f64,
    x_grid: &[f64],
    cfg: &EstimatorConfig,
) -> Result<SolutionField, McError> {
    check_inputs("represent_walk", n, t, x_grid)?;
    require_class_d(datum, walk.order())?;
    let steps = step_count(n, t);
    let mut meta = FieldMeta::method("walk");
    meta.n = Some(n);
    match cfg.variant {
        Variant::SemiAnalytic => {
            let (values, rule) = datum.transform_field(
                x_grid,
                |y| Ok::<_, SymbolError>(walk_char_fn_exact(walk, n, t, Complex64::new(-y, 0.0))),
                FIELD_TOL,
            )?;
            meta.variant = Some(cfg.variant.as_str().into());
            meta.extra.insert("nodes".into(), rule.len().to_string());
            meta.stderr = Some(vec![[0.0; 2]; x_grid.len()]);
            Ok(SolutionField::new(x_grid.to_vec(), values, t, meta)?)
        }
        Variant::PureMc => {
            let rule = spectral_rule(datum, x_grid, |_| Ok(Complex64::new(1.0, 0.0)), cfg.variant)?;
            let (mean, se) = time_changed_field(datum, &[*walk], n, &rule, x_grid, cfg, SALT_WALK, &|_| vec![steps])?;
            field_from_estimate(x_grid, t, mean, se, meta, cfg)
        }
    }
}

fn check_inputs(op: &'static str, n: u64, t: f64, x_grid: &[f64]) -> Result<(), McError> {
    if n == 0 {
        return Err(McError::Invalid {
            op,
            detail: "n must be at least 1".into(),
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(McError::Invalid {
            op,
            detail: format!("t must be finite and non-negative, got {t}"),
        });
    }
    validate_grid(x_grid)?;
    Ok(())
}

/// `E[f(x + W_n(S_m(t)))]`, converging to the `(-A_{N,β})^α` semigroup.
pub fn represent_subordinated(
    datum: &InitialDatum,
    walk: &WalkSpec,
    n: u64,
    sub: &SubordinatorSpec,
    t: f64,
    x_grid: &[f64],
    cfg: &EstimatorConfig,
) -> Result<SolutionField, McError> {
    check_inputs("represent_subordinated", n, t, x_grid)?;
    walk.require_stable("represent_subordinated")?;
    require_class_d(datum, walk.order())?;
    let limit = SymbolSpec::frac_an_beta(walk.order(), walk.beta(), sub.alpha())?;
    let rule = spectral_rule(datum, x_grid, |y| limit.propagator(t, y), cfg.variant)?;
    let sub = *sub;
    let (mean, se) = time_changed_field(datum, &[*walk], n, &rule, x_grid, cfg, SALT_SUBORDINATED, &|rng| {
        vec![step_count(n, sample_sm(&sub, t, rng))]
    })?;
    let mut meta = FieldMeta::method("subordinated");
    meta.n = Some(n);
    meta.m = Some(sub.m());
    meta.extra.insert("alpha".into(), sub.alpha().to_string());
    meta.extra.insert("convention".into(), format!("{:?}", sub.convention()));
    field_from_estimate(x_grid, t, mean, se, meta, cfg)
}

/// `t / (2 cos(απ/2))`, the clock for each of the two copies.
pub fn two_copy_time(alpha: f64, t: f64) -> f64 {
    t / (2.0 * (alpha * PI / 2.0).cos())
}

/// The two subordinated walks with `β = ±N!` of the two-copy construction.
pub fn two_copy_walks(order: u32) -> Result<[WalkSpec; 2], McError> {
    if order % 2 == 0 {
        return Err(McError::Invalid {
            op: "represent_riesz_two_copy",
            detail: format!("order must be odd, got {order}"),
        });
    }
    let fact: f64 = (1..=order).map(f64::from).product();
    Ok([WalkSpec::real(order, fact)?, WalkSpec::real(order, -fact)?])
}

/// `E[f(x + X(t̃) + X̃(t̃))]` for independent subordinated walks with
/// `β = N!` and `β = -N!`, converging to the `B^{Nα}` semigroup.
#[allow(clippy::too_many_arguments)]
pub fn represent_riesz_two_copy(
    datum: &InitialDatum,
    order: u32,
    alpha: f64,
    t: f64,
    x_grid: &[f64],
    n: u64,
    m: u64,
    cfg: &EstimatorConfig,
) -> Result<SolutionField, McError> {
    represent_riesz_two_copy_with(datum, order, alpha, t, x_grid, n, m, SumConvention::default(), cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn represent_riesz_two_copy_with(
    datum: &InitialDatum,
    order: u32,
    alpha: f64,
    t: f64,
    x_grid: &[f64],
    n: u64,
    m: u64,
    convention: SumConvention,
    cfg: &EstimatorConfig,
) -> Result<SolutionField, McError> {
    check_inputs("represent_riesz_two_copy", n, t, x_grid)?;
    let walks = two_copy_walks(order)?;
    require_class_d(datum, order)?;
    let sub = SubordinatorSpec::new(alpha, m)?.with_convention(convention);
    let limit = SymbolSpec::riesz_frac(order, alpha)?;
    let rule = spectral_rule(datum, x_grid, |y| limit.propagator(t, y), cfg.variant)?;
    let tt = two_copy_time(alpha, t);
    let (mean, se) = time_changed_field(datum, &walks, n, &rule, x_grid, cfg, SALT_TWO_COPY, &|rng| {
        let a = step_count(n, sample_sm(&sub, tt, rng));
        let b = step_count(n, sample_sm(&sub, tt, rng));
        vec![a, b]
    })?;
    let mut meta = FieldMeta::method("riesz_two_copy");
    meta.n = Some(n);
    meta.m = Some(m);
    meta.extra.insert("alpha".into(), alpha.to_string());
    meta.extra.insert("rescaled_time".into(), tt.to_string());
    field_from_estimate(x_grid, t, mean, se, meta, cfg)
}

/// `E[f(x + W_n(L(t)))]`, converging to the Caputo problem solution.
pub fn represent_time_fractional(
    datum: &InitialDatum,
    walk: &WalkSpec,
    n: u64,
    alpha: f64,
    t: f64,
    x_grid: &[f64],
    cfg: &EstimatorConfig,
) -> Result<SolutionField, McError> {
    check_inputs("represent_time_fractional", n, t, x_grid)?;
    walk.require_stable("represent_time_fractional")?;
    require_class_d(datum, walk.order())?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SubordinationError::Alpha(alpha).into());
    }
    let reference = |y: f64| -> Result<Complex64, SymbolError> {
        let z = crate::symbols::an_symbol(walk, y) * t.powf(alpha);
        Ok(crate::specialfn::mittag_leffler(alpha, z, 1e-14)?)
    };
    let rule = spectral_rule(datum, x_grid, reference, cfg.variant)?;
    let (mean, se) = time_changed_field(datum, &[*walk], n, &rule, x_grid, cfg, SALT_TIME_FRACTIONAL, &|rng| {
        let l = if t > 0.0 { sample_l(alpha, t, rng) } else { 0.0 };
        vec![step_count(n, l)]
    })?;
    let mut meta = FieldMeta::method("time_fractional");
    meta.n = Some(n);
    meta.extra.insert("alpha".into(), alpha.to_string());
    field_from_estimate(x_grid, t, mean, se, meta, cfg)
}

/// A representation problem together with its reference solution.
#[derive(Debug, Clone)]
pub enum Problem {
    Walk {
        datum: InitialDatum,
        walk: WalkSpec,
        t: f64,
        x_grid: Vec<f64>,
    },
    Subordinated {
        datum: InitialDatum,
        walk: WalkSpec,
        alpha: f64,
        convention: SumConvention,
        t: f64,
        x_grid: Vec<f64>,
    },
    RieszTwoCopy {
        datum: InitialDatum,
        order: u32,
        alpha: f64,
        convention: SumConvention,
        t: f64,
        x_grid: Vec<f64>,
    },
    TimeFractional {
        datum: InitialDatum,
        walk: WalkSpec,
        alpha: f64,
        t: f64,
        x_grid: Vec<f64>,
    },
}

impl Problem {
    /// Whether the estimate depends on the subordinator index `m`.
    pub fn uses_m(&self) -> bool {
        matches!(self, Problem::Subordinated { .. } | Problem::RieszTwoCopy { .. })
    }

    pub fn x_grid(&self) -> &[f64] {
        match self {
            Problem::Walk { x_grid, .. }
            | Problem::Subordinated { x_grid, .. }
            | Problem::RieszTwoCopy { x_grid, .. }
            | Problem::TimeFractional { x_grid, .. } => x_grid,
        }
    }

    pub fn reference(&self) -> Result<SolutionField, McError> {
        Ok(match self {
            Problem::Walk { datum, walk, t, x_grid } => {
                spectral_solution(datum, &SymbolSpec::ANbeta(*walk), *t, x_grid)?
            }
            Problem::Subordinated {
                datum,
                walk,
                alpha,
                t,
                x_grid,
                ..
            } => spectral_solution(
                datum,
                &SymbolSpec::frac_an_beta(walk.order(), walk.beta(), *alpha)?,
                *t,
                x_grid,
            )?,
            Problem::RieszTwoCopy {
                datum,
                order,
                alpha,
                t,
                x_grid,
                ..
            } => spectral_solution(datum, &SymbolSpec::riesz_frac(*order, *alpha)?, *t, x_grid)?,
            Problem::TimeFractional {
                datum,
                walk,
                alpha,
                t,
                x_grid,
            } => time_fractional_solution(datum, walk, *alpha, *t, x_grid)?,
        })
    }

    pub fn estimate(&self, n: u64, m: Option<u64>, cfg: &EstimatorConfig) -> Result<SolutionField, McError> {
        let need_m = || {
            m.ok_or(McError::Invalid {
                op: "Problem::estimate",
                detail: "this problem needs the subordinator index m".into(),
            })
        };
        match self {
            Problem::Walk { datum, walk, t, x_grid } => represent_walk(datum, walk, n, *t, x_grid, cfg),
            Problem::Subordinated {
                datum,
                walk,
                alpha,
                convention,
                t,
                x_grid,
            } => {
                let sub = SubordinatorSpec::new(*alpha, need_m()?)?.with_convention(*convention);
                represent_subordinated(datum, walk, n, &sub, *t, x_grid, cfg)
            }
            Problem::RieszTwoCopy {
                datum,
                order,
                alpha,
                convention,
                t,
                x_grid,
            } => represent_riesz_two_copy_with(datum, *order, *alpha, *t, x_grid, n, need_m()?, *convention, cfg),
            Problem::TimeFractional {
                datum,
                walk,
                alpha,
                t,
                x_grid,
            } => represent_time_fractional(datum, walk, n, *alpha, *t, x_grid, cfg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub m: Option<u64>,
    pub max_err: f64,
    /// Largest per-point standard error of the estimate.
    pub max_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln max_err` against `ln n` at the largest `m`;
    /// absent with fewer than two usable points.
    pub slope: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x` over points with `y > 0`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Max-norm error against the reference for every `(n, m)`; `n` is refined
/// first at each fixed `m`.
pub fn convergence_sweep(
    problem: &Problem,
    n_list: &[u64],
    m_list: &[u64],
    cfg: &EstimatorConfig,
) -> Result<SweepTable, McError> {
    if n_list.is_empty() {
        return Err(McError::Invalid {
            op: "convergence_sweep",
            detail: "n_list is empty".into(),
        });
    }
    let ms: Vec<Option<u64>> = if problem.uses_m() {
        if m_list.is_empty() {
            return Err(McError::Invalid {
                op: "convergence_sweep",
                detail: "m_list is empty for a subordinated problem".into(),
            });
        }
        m_list.iter().map(|&m| Some(m)).collect()
    } else {
        vec![None]
    };
    let reference = problem.reference()?;
    let mut rows = Vec::new();
    for &m in &ms {
        for &n in n_list {
            let est = problem.estimate(n, m, cfg)?;
            let max_stderr = est
                .meta
                .stderr
                .as_ref()
                .map(|s| s.iter().map(|p| p[0].max(p[1])).fold(0.0, f64::max))
                .unwrap_or(0.0);
            rows.push(SweepRow {
                n,
                m,
                max_err: est.max_abs_diff(&reference),
                max_stderr,
            });
        }
    }
    let last_m = *ms.iter().max().expect("non-empty");
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.m == last_m)
        .map(|r| (r.n as f64, r.max_err))
        .collect();
    Ok(SweepTable {
        slope: loglog_slope(&pts),
        rows,
    })
}

/// `max_λ |E e^{iλW_n(t)} - exp(i^N β t λ^N/N!)|` for each `n`, and the
/// fitted log-log slope.
pub fn char_fn_convergence(
    walk: &WalkSpec,
    t: f64,
    lambdas: &[f64],
    n_list: &[u64],
) -> (Vec<f64>, Option<f64>) {
    let errs: Vec<f64> = n_list
        .iter()
        .map(|&n| {
            lambdas
                .iter()
                .map(|&l| (walk_char_fn_exact(walk, n, t, Complex64::new(l, 0.0)) - limit_char_fn(walk, t, l)).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let pts: Vec<(f64, f64)> = n_list.iter().zip(&errs).map(|(&n, &e)| (n as f64, e)).collect();
    (errs, loglog_slope(&pts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::linspace;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn within(a: &SolutionField, b: &SolutionField, k: f64, slack: f64) -> bool {
        let se = a.meta.stderr.as_ref().unwrap();
        a.values.iter().zip(&b.values).zip(se).all(|((u, v), s)| {
            (u.re - v.re).abs() <= k * s[0] + slack && (u.im - v.im).abs() <= k * s[1] + slack
        })
    }

    #[test]
    fn config_rounds_up_to_whole_chunks() {
        let cfg = EstimatorConfig::new(1001, 1, 100, Variant::PureMc).unwrap();
        assert_eq!((cfg.samples(), cfg.chunks()), (1100, 11));
        assert!(EstimatorConfig::new(0, 1, 100, Variant::PureMc).is_err());
    }

    #[test]
    fn merged_moments_match_direct_formulae() {
        let cfg = EstimatorConfig::new(5000, 3, 128, Variant::PureMc).unwrap();
        let est = estimate(&cfg, 0, |rng| {
            use rand::Rng;
            let u: f64 = rng.random();
            Ok(c(u, u * u))
        })
        .unwrap();
        let mut all = Vec::new();
        for ch in 0..cfg.chunks() {
            use rand::Rng;
            let mut rng = RandomStream::derived(3, 0, ch);
            for _ in 0..cfg.chunk_size() {
                let u: f64 = rng.random();
                all.push(u);
            }
        }
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((est.mean.re - mean).abs() < 1e-14);
        let se_im = {
            let m2 = all.iter().map(|u| u * u).sum::<f64>() / n;
            (all.iter().map(|u| (u * u - m2).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        };
        assert!((est.stderr - (var / n).sqrt().max(se_im)).abs() < 1e-12);
        assert_eq!(est.samples_used, cfg.samples());
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let datum = InitialDatum::bump(0.0, 1.0, c(1.0, 0.0)).unwrap();
        let walk = WalkSpec::real(2, 1.0).unwrap();
        let sub = SubordinatorSpec::new(0.5, 10).unwrap();
        let xs = linspace(-3.0, 3.0, 7);
        let run = |threads: usize, variant| {
            let cfg = EstimatorConfig::new(2000, 9, 64, variant).unwrap();
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| represent_subordinated(&datum, &walk, 50, &sub, 1.0, &xs, &cfg).unwrap())
        };
        for variant in [Variant::PureMc, Variant::SemiAnalytic] {
            let a = run(1, variant);
            let b = run(4, variant);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn semi_analytic_walk_at_zero_time_is_the_datum() {
        let datum = InitialDatum::bump(0.2, 1.0, c(1.0, 0.3)).unwrap().plus(&InitialDatum::cosine());
        let xs = linspace(-4.0, 4.0, 9);
        let cfg = EstimatorConfig::new(1, 0, 1, Variant::SemiAnalytic).unwrap();
        let u = represent_walk(&datum, &WalkSpec::real(3, 1.0).unwrap(), 100, 0.0, &xs, &cfg).unwrap();
        for (x, v) in xs.iter().zip(&u.values) {
            assert!((datum.evaluate(c(*x, 0.0)).unwrap() - v).norm() < 1e-10);
        }
    }

    #[test]
    fn semi_analytic_walk_approaches_heat_solution() {
        let datum = InitialDatum::bump(0.0, 2.0, c(1.0, 0.0)).unwrap();
        let walk = WalkSpec::real(2, 1.0).unwrap();
        let xs = crate::symbols::default_x_grid();
        let cfg = EstimatorConfig::new(1, 0, 1, Variant::SemiAnalytic).unwrap();
        let u = represent_walk(&datum, &walk, 10_000, 1.0, &xs, &cfg).unwrap();
        let heat = spectral_solution(&datum, &SymbolSpec::ANbeta(walk), 1.0, &xs).unwrap();
        assert!(u.max_abs_diff(&heat) < 1e-3);
    }

    #[test]
    fn pure_and_semi_analytic_walk_agree() {
        let datum = InitialDatum::bump(0.0, 1.5, c(1.0, 0.0)).unwrap();
        let xs = linspace(-3.0, 3.0, 7);
        for walk in [WalkSpec::real(2, 1.0).unwrap(), WalkSpec::real(3, 1.0).unwrap()] {
            let semi = represent_walk(&datum, &walk, 100, 1.0, &xs, &EstimatorConfig::new(1, 0, 1, Variant::SemiAnalytic).unwrap()).unwrap();
            let cfg = EstimatorConfig::new(100_000, 5, 1000, Variant::PureMc).unwrap();
            let pure = represent_walk(&datum, &walk, 100, 1.0, &xs, &cfg).unwrap();
            assert!(within(&pure, &semi, 4.0, 1e-12), "N={}", walk.order());
        }
    }

    #[test]
    fn pure_and_semi_analytic_subordinated_agree() {
        let datum = InitialDatum::cosine();
        let walk = WalkSpec::real(2, 1.0).unwrap();
        let sub = SubordinatorSpec::new(0.5, 10).unwrap();
        let xs = linspace(-3.0, 3.0, 7);
        let semi = represent_subordinated(&datum, &walk, 50, &sub, 1.0, &xs, &EstimatorConfig::new(100_000, 1, 1000, Variant::SemiAnalytic).unwrap()).unwrap();
        let pure = represent_subordinated(&datum, &walk, 50, &sub, 1.0, &xs, &EstimatorConfig::new(100_000, 2, 1000, Variant::PureMc).unwrap()).unwrap();
        let se_semi = semi.meta.stderr.as_ref().unwrap();
        let se_pure = pure.meta.stderr.as_ref().unwrap();
        for j in 0..xs.len() {
            let s = (se_semi[j][0].powi(2) + se_pure[j][0].powi(2)).sqrt();
            assert!((semi.values[j].re - pure.values[j].re).abs() < 4.0 * s + 1e-12);
        }
    }

    #[test]
    fn empty_sum_convention_at_zero_time_is_the_datum() {
        let datum = InitialDatum::cosine().plus(&InitialDatum::bump(0.0, 1.0, c(0.5, 0.0)).unwrap());
        let walk = WalkSpec::real(2, 1.0).unwrap();
        let sub = SubordinatorSpec::new(0.5, 10).unwrap().with_convention(SumConvention::EmptySum);
        let xs = linspace(-2.0, 2.0, 5);
        let cfg = EstimatorConfig::new(100, 1, 10, Variant::SemiAnalytic).unwrap();
        let u = represent_subordinated(&datum, &walk, 50, &sub, 0.0, &xs, &cfg).unwrap();
        for (x, v) in xs.iter().zip(&u.values) {
            assert!((datum.evaluate(c(*x, 0.0)).unwrap() - v).norm() < 1e-10);
        }
        let u = represent_riesz_two_copy_with(&datum, 3, 0.5, 0.0, &xs, 50, 10, SumConvention::EmptySum, &cfg).unwrap();
        for (x, v) in xs.iter().zip(&u.values) {
            assert!((datum.evaluate(c(*x, 0.0)).unwrap() - v).norm() < 1e-10);
        }
        let tf = represent_time_fractional(&datum, &walk, 50, 0.5, 0.0, &xs, &cfg).unwrap();
        for (x, v) in xs.iter().zip(&tf.values) {
            assert!((datum.evaluate(c(*x, 0.0)).unwrap() - v).norm() < 1e-10);
        }
    }

    #[test]
    fn two_copy_limit_symbols_multiply_to_riesz_semigroup() {
        for a in [0.3, 0.5, 0.7] {
            let [w1, w2] = two_copy_walks(3).unwrap();
            let tt = two_copy_time(a, 1.3);
            let s1 = SymbolSpec::frac_an_beta(3, w1.beta(), a).unwrap();
            let s2 = SymbolSpec::frac_an_beta(3, w2.beta(), a).unwrap();
            let riesz = SymbolSpec::riesz_frac(3, a).unwrap();
            for j in 0..=30 {
                let y = -3.0 + 0.2 * j as f64;
                let prod = s1.propagator(tt, y).unwrap() * s2.propagator(tt, y).unwrap();
                assert!((prod - riesz.propagator(1.3, y).unwrap()).norm() < 1e-12);
            }
        }
        assert!(two_copy_walks(2).is_err());
    }

    #[test]
    fn linearity_in_the_datum() {
        let a = InitialDatum::bump(0.0, 1.0, c(1.0, 0.0)).unwrap().plus(&InitialDatum::cosine());
        let b = InitialDatum::cosine_with(2.0).scaled(c(0.5, -1.0));
        let walk = WalkSpec::real(4, -1.0).unwrap();
        let xs = linspace(-5.0, 5.0, 11);
        let cfg = EstimatorConfig::new(1, 0, 1, Variant::SemiAnalytic).unwrap();
        let ua = represent_walk(&a, &walk, 300, 0.7, &xs, &cfg).unwrap();
        let ub = represent_walk(&b, &walk, 300, 0.7, &xs, &cfg).unwrap();
        let uab = represent_walk(&a.plus(&b), &walk, 300, 0.7, &xs, &cfg).unwrap();
        for j in 0..xs.len() {
            assert!((ua.values[j] + ub.values[j] - uab.values[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetric_data_give_real_fields() {
        let datum = InitialDatum::bump(0.0, 1.5, c(1.0, 0.0)).unwrap();
        let xs = linspace(-5.0, 5.0, 11);
        let cfg = EstimatorConfig::new(1, 0, 1, Variant::SemiAnalytic).unwrap();
        for walk in [WalkSpec::real(2, 1.0).unwrap(), WalkSpec::real(4, -1.0).unwrap()] {
            let u = represent_walk(&datum, &walk, 200, 1.0, &xs, &cfg).unwrap();
            assert!(u.values.iter().all(|v| v.im.abs() < 1e-12));
        }
    }

    #[test]
    fn time_fractional_tends_to_walk_as_alpha_tends_to_one() {
        let datum = InitialDatum::cosine();
        let walk = WalkSpec::real(2, 1.0).unwrap();
        let xs = linspace(-3.0, 3.0, 7);
        let cfg = EstimatorConfig::new(20_000, 4, 1000, Variant::SemiAnalytic).unwrap();
        let tf = represent_time_fractional(&datum, &walk, 200, 0.99, 1.0, &xs, &cfg).unwrap();
        let w = represent_walk(&datum, &walk, 200, 1.0, &xs, &cfg).unwrap();
        assert!(tf.max_abs_diff(&w) < 2e-2);
    }

    #[test]
    fn walk_sweep_has_unit_slope() {
        let problem = Problem::Walk {
            datum: InitialDatum::bump(0.0, 2.0, c(1.0, 0.0)).unwrap(),
            walk: WalkSpec::real(2, 1.0).unwrap(),
            t: 1.0,
            x_grid: linspace(-8.0, 8.0, 33),
        };
        let cfg = EstimatorConfig::new(1, 0, 1, Variant::SemiAnalytic).unwrap();
        let table = convergence_sweep(&problem, &[1, 10, 100, 1000], &[], &cfg).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert!(table.rows[0].max_err.is_finite());
        for w in table.rows[1..].windows(2) {
            assert!(w[1].max_err <= w[0].max_err);
        }
        let tail: Vec<(f64, f64)> = table.rows[1..].iter().map(|r| (r.n as f64, r.max_err)).collect();
        let slope = loglog_slope(&tail).unwrap();
        assert!((slope + 1.0).abs() < 0.15, "{slope}");
        let single = convergence_sweep(&problem, &[100], &[], &cfg).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!(single.slope.is_none());
    }

    #[test]
    fn char_fn_rate_is_one_over_n() {
        let lambdas = linspace(-3.0, 3.0, 61);
        for walk in [WalkSpec::real(2, 1.0).unwrap(), WalkSpec::real(3, 1.0).unwrap(), WalkSpec::real(4, -1.0).unwrap()] {
            let (errs, slope) = char_fn_convergence(&walk, 1.0, &lambdas, &[100, 1000, 10_000]);
            assert!(errs.iter().all(|e| e.is_finite()));
            assert!((slope.unwrap() + 1.0).abs() < 0.15, "N={}: {slope:?}", walk.order());
        }
    }

    #[test]
    fn growth_guard_is_reported() {
        let datum = InitialDatum::cosine_with(200.0);
        let walk = WalkSpec::real(3, 1.0).unwrap();
        let cfg = EstimatorConfig::new(100, 0, 100, Variant::PureMc).unwrap();
        let r = represent_walk(&datum, &walk, 1, 50.0, &[0.0], &cfg);
        assert!(matches!(r, Err(McError::Growth { .. })));
    }
}
