//! Scenario configuration files (TOML). Unknown keys are rejected.

use std::path::Path;

use pmcf::{Integrator, Orientation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Flow,
    StationarySolve,
    Foliation,
    SchwarzschildExpansion,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChartConfig {
    /// Minkowski in polar form; `sinh_scale` selects `r = L sinh(ξ/L)`.
    Minkowski { n: usize, sinh_scale: Option<f64> },
    MinkowskiBox { n: usize },
    DeSitter { n: usize, hubble: f64 },
    /// Gaussian normal coordinates around `S_τ₀`.
    Hyperboloidal { n: usize, tau0: f64 },
    Schwarzschild { m: f64 },
}

impl ChartConfig {
    pub fn n(&self) -> usize {
        match *self {
            ChartConfig::Minkowski { n, .. }
            | ChartConfig::MinkowskiBox { n }
            | ChartConfig::DeSitter { n, .. }
            | ChartConfig::Hyperboloidal { n, .. } => n,
            ChartConfig::Schwarzschild { .. } => 3,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, ChartConfig::Minkowski { .. } | ChartConfig::Hyperboloidal { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nodes: usize,
    /// Outer Minkowski radius of radial grids.
    pub r_max: Option<f64>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub center: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    Hyperboloid { tau0: f64, bump: Option<BumpConfig> },
    Flat { height: f64, bump: Option<BumpConfig> },
    /// Height against the Minkowski radius, cubic interpolation.
    Table { r: Vec<f64>, w: Vec<f64>, bump: Option<BumpConfig> },
}

impl InitialConfig {
    pub fn bump(&self) -> Option<&BumpConfig> {
        match self {
            InitialConfig::Hyperboloid { bump, .. }
            | InitialConfig::Flat { bump, .. }
            | InitialConfig::Table { bump, .. } => bump.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldConfig {
    Constant { value: f64 },
    /// `n/τ₀` of the initial hyperboloid, times `sign`.
    Cmc {
        #[serde(default = "one")]
        sign: f64,
    },
    Example,
    /// `ℋ` against the Minkowski radius, cubic interpolation.
    Table { r: Vec<f64>, h: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    #[default]
    PinInitial,
    /// Exact `ℋ = 0` solution `sqrt(τ₀² + 2ns + r²)`.
    PinSelfSimilar,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub cfl: f64,
    pub integrator: Integrator,
    pub s_end: f64,
    pub record_every: usize,
    pub delta_floor: f64,
    pub delta_warn: f64,
    pub boundary: BoundaryKind,
    pub orientation: Orientation,
    pub max_steps: Option<usize>,
}

impl Default for FlowSection {
    fn default() -> Self {
        let d = pmcf::FlowConfig::<f64>::default();
        Self {
            cfl: d.cfl,
            integrator: d.integrator,
            s_end: d.s_end,
            record_every: d.record_every,
            delta_floor: d.delta_floor,
            delta_warn: d.delta_warn,
            boundary: BoundaryKind::PinInitial,
            orientation: Orientation::Future,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    /// `u = t`, `T = ∂_t`.
    #[default]
    Time,
    /// `u = τ = sqrt(t² − r²)`.
    Hyperboloid,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub fatal: bool,
    #[serde(default)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub lambda: f64,
    pub mu: f64,
    pub frame: FrameKind,
    pub residuals: bool,
    pub barrier: Option<BarrierConfig>,
    pub height_window: Option<[f64; 2]>,
    pub snapshot_every: usize,
    /// Required lower bound on the initial `H` (the `ε₀` hypothesis).
    pub min_initial_h: Option<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            frame: FrameKind::Time,
            residuals: false,
            barrier: None,
            height_window: None,
            snapshot_every: 0,
            min_initial_h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationarySection {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for StationarySection {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: pmcf::engine::NEWTON_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoliationCase {
    /// `S_τ₀` in Minkowski: `A₀ = g₀/τ₀`, `R̄ = 0`.
    Hyperboloid,
    /// `A₀ = 0`, `R̄_0i0j = g_ij`.
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationSection {
    pub case: FoliationCase,
    pub n: usize,
    #[serde(default = "one")]
    pub tau0: f64,
    /// Radii of the sampled nodes on `S_τ₀`.
    pub radii: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "sample_every")]
    pub sample_every: usize,
    #[serde(default)]
    pub override_window: bool,
}

fn sample_every() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereFunctionKind {
    #[default]
    Zero,
    CosTheta,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchwarzschildSection {
    pub tau: f64,
    #[serde(default)]
    pub f: SphereFunctionKind,
    pub xs: Vec<f64>,
    #[serde(default = "theta")]
    pub theta: f64,
    /// Parameter spacing relative to `x`.
    #[serde(default = "rel_step")]
    pub rel_step: f64,
}

fn theta() -> f64 {
    std::f64::consts::FRAC_PI_2
}

fn rel_step() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayCheck {
    pub window: [f64; 2],
    pub max_fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SInverseCheck {
    pub s_min: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantCheck {
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolCheck {
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonCheck {
    pub tol: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RichardsonCheck {
    pub ratio: [f64; 2],
    pub h0_tol: f64,
}

/// Acceptance checks evaluated on the run; exit code 0 iff all pass.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSection {
    pub completed: Option<bool>,
    pub decay: Option<DecayCheck>,
    pub s_inverse: Option<SInverseCheck>,
    pub barrier: Option<bool>,
    pub height_range: Option<[f64; 2]>,
    /// Gradient identity residual `≤ constant·h²` on every record.
    pub gradient_identity: Option<ConstantCheck>,
    /// `max|w(s_end) − w(0)| ≤ tol`.
    pub stationarity: Option<TolCheck>,
    /// `max|w − sqrt(τ₀² + 2ns + r²)| ≤ constant·(h² + dt²)`.
    pub self_similar: Option<ConstantCheck>,
    /// `min(H − ℋ) ≥ −tol` on every record.
    pub sign_preservation: Option<TolCheck>,
    pub newton: Option<NewtonCheck>,
    pub closed_form: Option<TolCheck>,
    pub envelope: Option<bool>,
    pub richardson: Option<RichardsonCheck>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub filter: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    pub chart: Option<ChartConfig>,
    pub grid: Option<GridConfig>,
    pub initial: Option<InitialConfig>,
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub stationary: StationarySection,
    pub foliation: Option<FoliationSection>,
    pub schwarzschild: Option<SchwarzschildSection>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub checks: ChecksSection,
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses and validates a config from TOML text.
pub fn parse_str(src: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(src).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(src, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&src)
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Validation(msg.into()))
}

fn positive(v: f64, name: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive"))
    }
}

fn table(x: &[f64], y: &[f64], name: &str) -> Result<(), ConfigError> {
    if x.len() < 2 || x.len() != y.len() {
        return invalid(format!("{name} table needs at least two samples of equal length"));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(format!("{name} table radii must increase strictly"));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return invalid("name must be a non-empty file stem");
        }
        match self.kind {
            ScenarioKind::Flow | ScenarioKind::StationarySolve => self.validate_flow(),
            ScenarioKind::Foliation => {
                let Some(f) = &self.foliation else {
                    return invalid("foliation scenarios need a [foliation] section");
                };
                positive(f.tau0, "tau0")?;
                positive(f.dt, "dt")?;
                if f.n == 0 || f.radii.is_empty() || f.sample_every == 0 {
                    return invalid("foliation needs n ≥ 1, radii and sample_every ≥ 1");
                }
                Ok(())
            }
            ScenarioKind::SchwarzschildExpansion => {
                let Some(ChartConfig::Schwarzschild { m }) = self.chart else {
                    return invalid("schwarzschild_expansion needs chart kind schwarzschild");
                };
                if !(m >= 0.0) {
                    return invalid("m must be non-negative");
                }
                let Some(s) = &self.schwarzschild else {
                    return invalid("schwarzschild_expansion needs a [schwarzschild] section");
                };
                positive(s.tau, "tau")?;
                positive(s.rel_step, "rel_step")?;
                if s.xs.len() < 2 || s.xs.iter().any(|&x| !(x > 0.0 && 2.0 * m * x < 1.0)) {
                    return invalid("xs needs at least two samples in (0, 1/(2m))");
                }
                Ok(())
            }
            ScenarioKind::Verify => Ok(()),
        }
    }

    fn validate_flow(&self) -> Result<(), ConfigError> {
        let Some(chart) = &self.chart else {
            return invalid("flow scenarios need a [chart] section");
        };
        if chart.n() == 0 {
            return invalid("n must be at least 1");
        }
        match *chart {
            ChartConfig::Minkowski { sinh_scale: Some(l), .. } => positive(l, "sinh_scale")?,
            ChartConfig::DeSitter { hubble, .. } => positive(hubble, "hubble")?,
            ChartConfig::Hyperboloidal { tau0, .. } => positive(tau0, "tau0")?,
            ChartConfig::Schwarzschild { .. } => return invalid("the Schwarzschild chart is not synchronous; flows need another chart"),
            _ => {}
        }
        let Some(grid) = &self.grid else {
            return invalid("flow scenarios need a [grid] section");
        };
        if grid.nodes < 9 {
            return invalid("grid.nodes must be at least 9");
        }
        if chart.is_radial() {
            let Some(r) = grid.r_max else {
                return invalid("radial grids need r_max");
            };
            positive(r, "r_max")?;
        } else {
            match (&grid.lo, &grid.hi) {
                (Some(lo), Some(hi)) if lo.len() == chart.n() && hi.len() == chart.n() => {
                    if lo.iter().zip(hi).any(|(a, b)| b <= a) {
                        return invalid("grid.hi must exceed grid.lo on every axis");
                    }
                }
                _ => return invalid("box grids need lo and hi with n entries"),
            }
        }
        let Some(init) = &self.initial else {
            return invalid("flow scenarios need an [initial] section");
        };
        match init {
            InitialConfig::Hyperboloid { tau0, .. } => positive(*tau0, "tau0")?,
            InitialConfig::Flat { height, .. } => {
                if !height.is_finite() {
                    return invalid("height must be finite");
                }
            }
            InitialConfig::Table { r, w, .. } => table(r, w, "initial")?,
        }
        if let Some(b) = init.bump() {
            positive(b.width, "bump width")?;
            if !b.amplitude.is_finite() {
                return invalid("bump amplitude must be finite");
            }
            if let (true, Some(r)) = (chart.is_radial(), grid.r_max) {
                if r <= 3.0 * b.width + b.center.abs() {
                    return invalid("r_max must exceed 3·(bump width) beyond the bump center");
                }
            }
        }
        match &self.field {
            None => return invalid("flow scenarios need a [field] section"),
            Some(FieldConfig::Cmc { .. }) if !matches!(init, InitialConfig::Hyperboloid { .. }) => {
                return invalid("field kind cmc needs a hyperboloid initial surface")
            }
            Some(FieldConfig::Table { r, h }) => table(r, h, "field")?,
            Some(FieldConfig::Constant { value }) if !value.is_finite() => return invalid("field value must be finite"),
            _ => {}
        }
        if matches!(self.field, Some(FieldConfig::Example) | Some(FieldConfig::Table { .. }))
            && matches!(chart, ChartConfig::DeSitter { .. })
        {
            return invalid("example and table fields need a Minkowski chart");
        }
        let f = &self.flow;
        if !(f.cfl > 0.0 && f.cfl <= 1.0) {
            return invalid("cfl must lie in (0, 1]");
        }
        if !(f.delta_floor > 0.0 && f.delta_floor < f.delta_warn && f.delta_warn < 1.0) {
            return invalid("need 0 < delta_floor < delta_warn < 1");
        }
        if !(f.s_end >= 0.0) {
            return invalid("s_end must be non-negative");
        }
        if f.record_every == 0 {
            return invalid("record_every must be at least 1");
        }
        if f.boundary == BoundaryKind::PinSelfSimilar
            && !(matches!(chart, ChartConfig::Minkowski { .. }) && matches!(init, InitialConfig::Hyperboloid { .. }))
        {
            return invalid("pin-self-similar needs the Minkowski chart and a hyperboloid initial surface");
        }
        if self.diagnostics.frame == FrameKind::Hyperboloid && !matches!(chart, ChartConfig::Minkowski { .. } | ChartConfig::MinkowskiBox { .. } | ChartConfig::Hyperboloidal { .. }) {
            return invalid("the hyperboloid frame needs a Minkowski chart");
        }
        if let Some(b) = &self.diagnostics.barrier {
            if let (Some(l), Some(u)) = (b.lower, b.upper) {
                if l >= u {
                    return invalid("barrier lower must lie below upper");
                }
            }
        }
        if let Some([a, b]) = self.diagnostics.height_window {
            if a >= b {
                return invalid("height_window must be increasing");
            }
        }
        Ok(())
    }
}
