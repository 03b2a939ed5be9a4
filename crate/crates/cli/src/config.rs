//! Run configuration read from TOML.
//!
//! Complex numbers are written `[re, im]`. Generator indices and word
//! symbols are one-based. Unknown keys are rejected everywhere.

use std::path::Path;

use serde::Deserialize;

use semilab::families::{
    find_t1_with, make_d1d2, make_named, make_quadratic_pair, D1D2Params, NamedFamily, QuadraticKind,
};
use semilab::thermo::Estimator;
use semilab::transversality::PerturbationKind;
use semilab::{Complex, EPWord, Error, Metric, MultiMap, Polynomial, Result, Word};

#[derive(Clone, Copy, Debug, Default, PartialEq, Deserialize)]
#[serde(from = "[f64; 2]")]
pub struct C(pub Complex);

impl From<[f64; 2]> for C {
    fn from(v: [f64; 2]) -> Self {
        C(Complex::new(v[0], v[1]))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub metric: MetricName,
    #[serde(default)]
    pub cloud: CloudConfig,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub bowen: BowenConfig,
    #[serde(default)]
    pub dim: DimConfig,
    #[serde(default)]
    pub t1: T1Section,
    #[serde(default)]
    pub atc: AtcConfig,
    pub tcprobe: Option<TcProbeConfig>,
    #[serde(default)]
    pub tinfty: TInftyConfig,
    #[serde(default)]
    pub pressure: PressureConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    #[default]
    Euclidean,
    Spherical,
}

impl From<MetricName> for Metric {
    fn from(m: MetricName) -> Self {
        match m {
            MetricName::Euclidean => Metric::Euclidean,
            MetricName::Spherical => Metric::Spherical,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    Named(NamedConfig),
    D1d2(D1D2Config),
    QuadraticPair(QuadraticConfig),
    /// Coefficient lists in ascending order of degree.
    Generators(Vec<Vec<C>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedKind {
    Interval,
    Sierpinski,
    Snowflake,
    Pentakun,
    Nkun,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedConfig {
    pub kind: NamedKind,
    pub k: Option<usize>,
    pub vertices: Option<[C; 3]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct D1D2Config {
    pub d1: usize,
    pub d2: usize,
    pub b: C,
    pub t: Option<f64>,
    /// `t` as a fraction of the computed `t1`.
    pub t1_fraction: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticKindName {
    Translation,
    Additive,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticConfig {
    pub a: C,
    pub kind: QuadraticKindName,
    #[serde(default)]
    pub lambda: C,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    pub points: usize,
    pub burn_in: usize,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self { points: semilab::julia::DEFAULT_POINTS, burn_in: semilab::julia::DEFAULT_BURN_IN }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Bounding box; the cloud's own box when omitted.
    pub min: Option<C>,
    pub max: Option<C>,
    pub nx: usize,
    pub ny: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { min: None, max: None, nx: 512, ny: 512 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BowenConfig {
    pub level: usize,
    pub tol: f64,
    pub estimator: EstimatorName,
}

impl Default for BowenConfig {
    fn default() -> Self {
        Self { level: 8, tol: semilab::thermo::DEFAULT_BOWEN_TOL, estimator: EstimatorName::default() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    Average,
    #[default]
    Extrapolated,
}

impl From<EstimatorName> for Estimator {
    fn from(e: EstimatorName) -> Self {
        match e {
            EstimatorName::Average => Estimator::Average,
            EstimatorName::Extrapolated => Estimator::Extrapolated,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimConfig {
    pub scales: usize,
    pub fit_scales: usize,
    pub min_density: f64,
    pub plateau_tolerance: f64,
}

impl Default for DimConfig {
    fn default() -> Self {
        let d = semilab::geometry::DimensionConfig::default();
        let a = semilab::geometry::AreaConfig::default();
        Self {
            scales: semilab::geometry::DEFAULT_SCALE_COUNT,
            fit_scales: d.fit_scales,
            min_density: d.min_density,
            plateau_tolerance: a.plateau_tolerance,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T1Section {
    pub tol: f64,
    pub samples: usize,
    pub margin: f64,
    pub scan: usize,
}

impl Default for T1Section {
    fn default() -> Self {
        let c = semilab::families::T1Config::default();
        Self { tol: 1e-6, samples: c.samples, margin: c.margin, scan: c.scan }
    }
}

impl T1Section {
    pub fn t1_config(&self) -> semilab::families::T1Config {
        semilab::families::T1Config { samples: self.samples, margin: self.margin, scan: self.scan }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DirectionConfig {
    Conjugation { index: usize, a1: C, b1: C },
    Monomial { index: usize, exponent: usize, #[serde(default)] center: C },
    Derivative { index: usize },
    Translation { index: usize },
}

impl DirectionConfig {
    pub fn kind(&self) -> Result<PerturbationKind> {
        let zero_based = |i: usize| {
            i.checked_sub(1).ok_or_else(|| Error::InvalidInput("direction index: generators are numbered from 1".into()))
        };
        Ok(match *self {
            DirectionConfig::Conjugation { index, a1, b1 } => {
                PerturbationKind::Conjugation { index: zero_based(index)?, a1: a1.0, b1: b1.0 }
            }
            DirectionConfig::Monomial { index, exponent, center } => {
                PerturbationKind::Monomial { index: zero_based(index)?, exponent, center: center.0 }
            }
            DirectionConfig::Derivative { index } => PerturbationKind::DerivativePerturb { index: zero_based(index)? },
            DirectionConfig::Translation { index } => PerturbationKind::Translation { index: zero_based(index)? },
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtcConfig {
    pub tol: f64,
    pub terms: usize,
    /// One translation per generator when empty.
    pub directions: Vec<DirectionConfig>,
}

impl Default for AtcConfig {
    fn default() -> Self {
        Self { tol: 1e-2, terms: semilab::transversality::DEFAULT_SERIES_TERMS, directions: Vec::new() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordConfig {
    #[serde(default)]
    pub preperiod: Vec<usize>,
    pub period: Vec<usize>,
    /// Picks the fibre point nearest this value instead of the canonical one.
    pub hint: Option<C>,
}

impl WordConfig {
    pub fn word(&self) -> Result<EPWord> {
        EPWord::new(Word::from_one_based(&self.preperiod)?, Word::from_one_based(&self.period)?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TcProbeConfig {
    pub direction: DirectionConfig,
    pub p: WordConfig,
    pub q: WordConfig,
    #[serde(default)]
    pub center: C,
    pub radius: f64,
    pub n: usize,
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TInftyConfig {
    /// Uniform when omitted.
    pub probabilities: Option<Vec<f64>>,
    /// Coefficient bound when omitted.
    pub escape_radius: Option<f64>,
    pub max_iter: usize,
    pub trials: usize,
    pub min: C,
    pub max: C,
    pub nx: usize,
    pub ny: usize,
}

impl Default for TInftyConfig {
    fn default() -> Self {
        Self {
            probabilities: None,
            escape_radius: None,
            max_iter: semilab::randomdyn::DEFAULT_MAX_ITER,
            trials: semilab::randomdyn::DEFAULT_TRIALS,
            min: C(Complex::new(-1.5, -1.5)),
            max: C(Complex::new(1.5, 1.5)),
            nx: 256,
            ny: 256,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PressureConfig {
    pub ts: Vec<f64>,
    pub levels: Vec<usize>,
}

impl Default for PressureConfig {
    fn default() -> Self {
        Self { ts: (0..=20).map(|k| k as f64 * 0.1).collect(), levels: vec![4, 6, 8] }
    }
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {}", e.message())))
}

impl FamilyConfig {
    pub fn build(&self, t1: &T1Section) -> Result<MultiMap> {
        match self {
            FamilyConfig::Named(n) => {
                let family = match n.kind {
                    NamedKind::Interval => NamedFamily::Interval,
                    NamedKind::Sierpinski => match n.vertices {
                        Some(v) => NamedFamily::Sierpinski([v[0].0, v[1].0, v[2].0]),
                        None => NamedFamily::default_sierpinski(),
                    },
                    NamedKind::Snowflake => NamedFamily::Snowflake,
                    NamedKind::Pentakun => NamedFamily::Pentakun,
                    NamedKind::Nkun => NamedFamily::NKun(
                        n.k.ok_or_else(|| Error::InvalidInput("family.named.k is required for nkun".into()))?,
                    ),
                };
                make_named(&family)
            }
            FamilyConfig::D1d2(_) => make_d1d2(&self.d1d2_params(t1)?.expect("d1d2 family")),
            FamilyConfig::QuadraticPair(q) => {
                let kind = match q.kind {
                    QuadraticKindName::Translation => QuadraticKind::Translation,
                    QuadraticKindName::Additive => QuadraticKind::Additive,
                };
                make_quadratic_pair(q.a.0, kind, q.lambda.0)
            }
            FamilyConfig::Generators(gens) => {
                let polys = gens
                    .iter()
                    .map(|c| Polynomial::new(c.iter().map(|x| x.0).collect()))
                    .collect::<Result<Vec<_>>>()?;
                MultiMap::new(polys)
            }
        }
    }

    /// Parameters of a d1d2 family, resolving `t1_fraction` through the `t1` search.
    pub fn d1d2_params(&self, t1: &T1Section) -> Result<Option<D1D2Params>> {
        let FamilyConfig::D1d2(d) = self else { return Ok(None) };
        let t = match (d.t, d.t1_fraction) {
            (Some(t), None) => t,
            (None, Some(frac)) => {
                if !(frac > 0.0 && frac <= 1.0) {
                    return Err(Error::InvalidInput(format!("family.d1d2.t1_fraction must lie in (0, 1], got {frac}")));
                }
                frac * find_t1_with(d.d1, d.d2, d.b.0, t1.tol, &t1.t1_config())?.t1
            }
            _ => return Err(Error::InvalidInput("family.d1d2: give exactly one of t and t1_fraction".into())),
        };
        D1D2Params::new(d.d1, d.d2, d.b.0, t).map(Some)
    }
}
