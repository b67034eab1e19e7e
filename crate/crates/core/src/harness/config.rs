//! Run configuration files.
//!
//! ```toml
//! [problem]
//! kind = "subordinated"        # walk | subordinated | riesz_two_copy | time_fractional
//! method = "monte_carlo"       # reference | monte_carlo
//! order = 4
//! beta = "-(4!)/2^2"           # exact rational expression, or a number
//! alpha = 0.5
//! t = 1.0
//! n = 2000
//! m = 100
//! datum = "cosine"             # preset name, or an inline table
//! x_grid = { min = -10.0, max = 10.0, points = 201 }
//!
//! [estimator]
//! samples = 10000
//! seed = 7
//! chunk_size = 1000
//! variant = "semi_analytic"    # semi_analytic | pure_mc
//!
//! [sweep]
//! n_list = [10, 100, 1000]
//! m_list = [10, 100]
//! reference = "spectral"       # spectral | mittag_leffler
//!
//! [output]
//! directory = "out"
//! formats = ["csv", "json", "svg"]
//! ```

use std::ops::Range;

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

use super::beta_expr::{parse_rational, rational_to_f64};
use crate::initialdata::InitialDatum;
use crate::montecarlo::{EstimatorConfig, Problem, Variant};
use crate::subordination::SumConvention;
use crate::symbols::linspace;
use crate::walks::WalkSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("line {line}: {field}: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("{field}: {message}")]
    Unanchored { field: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Walk,
    Subordinated,
    RieszTwoCopy,
    TimeFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Reference,
    MonteCarlo,
}

/// A number written as an integer, a float, or an exact expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExactNumber {
    Int(i64),
    Float(f64),
    Expr(String),
}

impl ExactNumber {
    pub fn to_rational(&self) -> Result<BigRational, String> {
        match self {
            ExactNumber::Int(v) => Ok(BigRational::from_integer((*v).into())),
            ExactNumber::Float(v) => BigRational::from_float(*v).ok_or_else(|| format!("{v} is not finite")),
            ExactNumber::Expr(s) => parse_rational(s).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumPreset {
    /// `cos x`.
    Cosine,
    /// Raised-cosine spectral bump of half-width 1 and unit mass.
    Bump,
    /// Gaussian spectral density with `σ = 0.5`, truncated at radius 2.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatumConfig {
    Preset(DatumPreset),
    Inline(InitialDatum),
}

impl DatumConfig {
    pub fn build(&self) -> Result<InitialDatum, String> {
        let one = Complex64::new(1.0, 0.0);
        match self {
            DatumConfig::Preset(DatumPreset::Cosine) => Ok(InitialDatum::cosine()),
            DatumConfig::Preset(DatumPreset::Bump) => InitialDatum::bump(0.0, 1.0, one).map_err(|e| e.to_string()),
            DatumConfig::Preset(DatumPreset::Gaussian) => {
                InitialDatum::truncated_gaussian(0.5, 2.0, one).map_err(|e| e.to_string())
            }
            DatumConfig::Inline(d) => InitialDatum::new(d.point_masses().to_vec(), d.densities().to_vec())
                .map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            min: -10.0,
            max: 10.0,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: Spanned<ProblemKind>,
    #[serde(default)]
    pub method: Method,
    pub order: Spanned<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Spanned<ExactNumber>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_im: Option<Spanned<ExactNumber>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Spanned<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<SumConvention>,
    pub t: Spanned<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Spanned<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Spanned<u64>>,
    pub datum: DatumConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Spanned<GridConfig>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Spanned<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<Spanned<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceVariant {
    Spectral,
    MittagLeffler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n_list: Spanned<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Spanned<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Spanned<ReferenceVariant>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Spanned<Vec<Format>>>,
    /// File name stem; defaults to the config file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

pub const DEFAULT_SAMPLES: u64 = 10_000;
pub const DEFAULT_CHUNK_SIZE: u64 = 1_000;
pub const DEFAULT_OUT_DIR: &str = "out";

/// A configuration that passed validation.
#[derive(Debug, Clone)]
pub struct ValidatedRun {
    pub kind: ProblemKind,
    pub method: Method,
    pub problem: Problem,
    pub n: Option<u64>,
    pub m: Option<u64>,
    pub estimator: EstimatorConfig,
    pub sweep: Option<(Vec<u64>, Vec<u64>)>,
    pub formats: Vec<Format>,
    pub directory: String,
    pub stem: Option<String>,
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))
}

pub fn to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("configs serialize")
}

pub fn load(text: &str) -> Result<(RunConfig, ValidatedRun), ConfigError> {
    let cfg = parse(text)?;
    let run = validate(&cfg, text)?;
    Ok((cfg, run))
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn at<T>(&self, s: &Spanned<T>, field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Field {
            line: line_of(self.text, s.span()),
            field: field.into(),
            message: message.into(),
        }
    }
}

fn unanchored(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Unanchored {
        field: field.into(),
        message: message.into(),
    }
}

pub fn validate(cfg: &RunConfig, text: &str) -> Result<ValidatedRun, ConfigError> {
    let cx = Ctx { text };
    let p = &cfg.problem;
    let kind = *p.kind.get_ref();
    let order = *p.order.get_ref();
    if order < 2 {
        return Err(cx.at(&p.order, "problem.order", format!("N must be at least 2, got {order}")));
    }
    let t = *p.t.get_ref();
    if !(t.is_finite() && t >= 0.0) {
        return Err(cx.at(&p.t, "problem.t", format!("t must be finite and non-negative, got {t}")));
    }

    let alpha = match (kind, &p.alpha) {
        (ProblemKind::Walk, None) => None,
        (ProblemKind::Walk, Some(a)) => {
            return Err(cx.at(a, "problem.alpha", "not used by kind = \"walk\""));
        }
        (_, None) => return Err(unanchored("problem.alpha", "required for this kind")),
        (_, Some(a)) => {
            let v = *a.get_ref();
            if !(v > 0.0 && v < 1.0) {
                return Err(cx.at(a, "problem.alpha", format!("alpha must lie in (0, 1), got {v}")));
            }
            Some(v)
        }
    };

    let walk = if kind == ProblemKind::RieszTwoCopy {
        if order % 2 == 0 {
            return Err(cx.at(&p.order, "problem.order", format!("riesz_two_copy needs odd N, got {order}")));
        }
        for (b, name) in [(&p.beta, "problem.beta"), (&p.beta_im, "problem.beta_im")] {
            if let Some(b) = b {
                return Err(cx.at(b, name, "riesz_two_copy fixes beta = ±N!"));
            }
        }
        None
    } else {
        let beta = p.beta.as_ref().ok_or_else(|| unanchored("problem.beta", "required for this kind"))?;
        let re = beta
            .get_ref()
            .to_rational()
            .map_err(|e| cx.at(beta, "problem.beta", e))?;
        let im = match &p.beta_im {
            Some(b) => rational_to_f64(&b.get_ref().to_rational().map_err(|e| cx.at(b, "problem.beta_im", e))?),
            None => 0.0,
        };
        let value = Complex64::new(rational_to_f64(&re), im);
        let walk = WalkSpec::new(order, value).map_err(|e| cx.at(beta, "problem.beta", e.to_string()))?;
        if !walk.is_stable() {
            return Err(cx.at(
                beta,
                "problem.beta",
                format!("(N, beta) = ({order}, {value}) violates the stability condition"),
            ));
        }
        Some(walk)
    };

    if kind != ProblemKind::Subordinated && kind != ProblemKind::RieszTwoCopy && p.convention.is_some() {
        return Err(unanchored("problem.convention", "only used by subordinated and riesz_two_copy"));
    }
    let convention = p.convention.unwrap_or_default();

    let datum = p.datum.build().map_err(|e| unanchored("problem.datum", e))?;
    if !datum.check_growth_condition(order).holds {
        return Err(unanchored("problem.datum", "datum fails the growth condition"));
    }

    let grid = p.x_grid.as_ref().map(|g| *g.get_ref()).unwrap_or_default();
    if !(grid.min.is_finite() && grid.max.is_finite() && grid.min < grid.max && grid.points >= 2)
        && !(grid.points == 1 && grid.min == grid.max && grid.min.is_finite())
    {
        let msg = format!(
            "need finite min < max and points >= 2 (or min = max with points = 1), got {grid:?}"
        );
        return Err(match &p.x_grid {
            Some(g) => cx.at(g, "problem.x_grid", msg),
            None => unanchored("problem.x_grid", msg),
        });
    }
    let x_grid = if grid.points == 1 {
        vec![grid.min]
    } else {
        linspace(grid.min, grid.max, grid.points)
    };

    let n = match &p.n {
        Some(v) if *v.get_ref() == 0 => return Err(cx.at(v, "problem.n", "n must be at least 1")),
        v => v.as_ref().map(|v| *v.get_ref()),
    };
    let m = match &p.m {
        Some(v) if *v.get_ref() == 0 => return Err(cx.at(v, "problem.m", "m must be at least 1")),
        v => v.as_ref().map(|v| *v.get_ref()),
    };
    if p.method == Method::MonteCarlo {
        if n.is_none() {
            return Err(unanchored("problem.n", "required when method = \"monte_carlo\""));
        }
        if matches!(kind, ProblemKind::Subordinated | ProblemKind::RieszTwoCopy) && m.is_none() {
            return Err(unanchored("problem.m", "required when method = \"monte_carlo\" for this kind"));
        }
    }

    let problem = match kind {
        ProblemKind::Walk => Problem::Walk {
            datum,
            walk: walk.expect("walk kind"),
            t,
            x_grid,
        },
        ProblemKind::Subordinated => Problem::Subordinated {
            datum,
            walk: walk.expect("walk kind"),
            alpha: alpha.expect("checked"),
            convention,
            t,
            x_grid,
        },
        ProblemKind::RieszTwoCopy => Problem::RieszTwoCopy {
            datum,
            order,
            alpha: alpha.expect("checked"),
            convention,
            t,
            x_grid,
        },
        ProblemKind::TimeFractional => Problem::TimeFractional {
            datum,
            walk: walk.expect("walk kind"),
            alpha: alpha.expect("checked"),
            t,
            x_grid,
        },
    };

    let est = cfg.estimator.as_ref();
    let samples = est.and_then(|e| e.samples.as_ref());
    let chunk = est.and_then(|e| e.chunk_size.as_ref());
    for (v, name) in [(samples, "estimator.samples"), (chunk, "estimator.chunk_size")] {
        if let Some(v) = v {
            if *v.get_ref() == 0 {
                return Err(cx.at(v, name, "must be positive"));
            }
        }
    }
    let estimator = EstimatorConfig::new(
        samples.map(|s| *s.get_ref()).unwrap_or(DEFAULT_SAMPLES),
        est.and_then(|e| e.seed).unwrap_or(0),
        chunk.map(|s| *s.get_ref()).unwrap_or(DEFAULT_CHUNK_SIZE),
        est.and_then(|e| e.variant).unwrap_or_default(),
    )
    .map_err(|e| unanchored("estimator", e.to_string()))?;

    let sweep = match &cfg.sweep {
        None => None,
        Some(s) => {
            let reference = s
                .reference
                .as_ref()
                .ok_or_else(|| unanchored("sweep.reference", "required: spectral or mittag_leffler"))?;
            let want = if kind == ProblemKind::TimeFractional {
                ReferenceVariant::MittagLeffler
            } else {
                ReferenceVariant::Spectral
            };
            if *reference.get_ref() != want {
                return Err(cx.at(
                    reference,
                    "sweep.reference",
                    format!("kind {kind:?} is checked against the {want:?} reference"),
                ));
            }
            let ns = s.n_list.get_ref().clone();
            if ns.is_empty() || ns.contains(&0) {
                return Err(cx.at(&s.n_list, "sweep.n_list", "need a non-empty list of positive n"));
            }
            let ms = s.m_list.as_ref().map(|v| v.get_ref().clone()).unwrap_or_default();
            let uses_m = matches!(kind, ProblemKind::Subordinated | ProblemKind::RieszTwoCopy);
            match &s.m_list {
                Some(v) if !uses_m => return Err(cx.at(v, "sweep.m_list", "not used by this kind")),
                Some(v) if ms.is_empty() || ms.contains(&0) => {
                    return Err(cx.at(v, "sweep.m_list", "need a non-empty list of positive m"))
                }
                None if uses_m => return Err(unanchored("sweep.m_list", "required for this kind")),
                _ => {}
            }
            Some((ns, ms))
        }
    };

    let out = cfg.output.as_ref();
    let formats = match out.and_then(|o| o.formats.as_ref()) {
        None => vec![Format::Csv, Format::Json, Format::Svg],
        Some(f) => {
            let list = f.get_ref().clone();
            if !list.is_empty() && !list.contains(&Format::Json) {
                return Err(cx.at(f, "output.formats", "json must be listed: every artifact gets a metadata sidecar"));
            }
            list
        }
    };
    Ok(ValidatedRun {
        kind,
        method: p.method,
        problem,
        n,
        m,
        estimator,
        sweep,
        formats,
        directory: out
            .and_then(|o| o.directory.clone())
            .unwrap_or_else(|| DEFAULT_OUT_DIR.into()),
        stem: out.and_then(|o| o.stem.clone()),
    })
}
