//! Wiring configs to the engine and writing artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use pmcf::diagnostics::{self, Level, Residuals, CSV_HEADER};
use pmcf::engine::{self, Profile};
use pmcf::field::{CubicTable, OnChart, RadialTable};
use pmcf::foliation::{Flat, FoliationCurvature, Isotropic};
use pmcf::nalgebra::{DMatrix, DVector};
use pmcf::spacetimes::{
    lst_embedding, make_hyperboloid_frame, make_minkowski_chart, make_schwarzschild_chart,
    ConstantOnSphere, CosTheta, DeSitterFlat, Hyperboloidal, LstSurface, Minkowski, MinkowskiRadial, RadialMap,
    SphereFunction,
};
use pmcf::{
    decay_fit, embedding_geometry, foliation_bounds_check, graph_geometry, integrate_foliation, run_flow,
    stationary_solve, Background, BarrierSpec, ConstantField, DiagnosticsConfig, DiagnosticsRecord, Flow,
    FlowConfig, FoliationConstants, FoliationOptions, FoliationSeries, FoliationState, GeomError, Graph, Grid,
    PrescribedCurvatureField, TimeFunction,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{
    BoundaryKind, ChartConfig, ChecksSection, ConfigError, FieldConfig, FoliationCase, FrameKind, InitialConfig,
    ScenarioConfig, ScenarioKind, SphereFunctionKind,
};
use crate::verify::{verify_suite, VerifyOptions};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("setup: {0}")]
    Setup(#[from] GeomError),
    #[error("writing artifacts: {0}")]
    Io(#[from] io::Error),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckResult {
    pub pass: bool,
    /// Distance from failing; negative when the check fails.
    pub margin: f64,
}

impl CheckResult {
    fn from_margin(margin: f64) -> Self {
        Self {
            pass: margin >= 0.0,
            margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub kind: ScenarioKind,
    pub termination: String,
    /// Engine error message when the run stopped early.
    pub error: Option<String>,
    pub s_final: Option<f64>,
    pub sup_h_minus_h_final: Option<f64>,
    pub decay_rate: Option<f64>,
    pub checks: BTreeMap<String, CheckResult>,
    pub steps: usize,
    pub wall_time: f64,
}

impl RunSummary {
    /// Exit-code verdict: no engine error and every configured check passes.
    pub fn success(&self) -> bool {
        self.error.is_none() && self.checks.values().all(|c| c.pass)
    }
}

/// Everything a scenario produced, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: RunSummary,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub records: Vec<DiagnosticsRecord<f64>>,
    pub snapshots: Vec<serde_json::Value>,
    pub final_state: Option<Graph>,
    pub details: serde_json::Value,
}

/// Runs `cfg` and, when `out` is given, writes its artifacts there.
pub fn run_scenario(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<Outcome, RunError> {
    let outcome = execute(cfg)?;
    if let Some(dir) = out {
        write_artifacts(&outcome, dir)?;
    }
    Ok(outcome)
}

pub fn execute(cfg: &ScenarioConfig) -> Result<Outcome, RunError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut outcome = match cfg.kind {
        ScenarioKind::Flow => flow_scenario(cfg)?,
        ScenarioKind::StationarySolve => stationary_scenario(cfg)?,
        ScenarioKind::Foliation => foliation_scenario(cfg)?,
        ScenarioKind::SchwarzschildExpansion => schwarzschild_scenario(cfg)?,
        ScenarioKind::Verify => verify_scenario(cfg),
    };
    outcome.summary.wall_time = start.elapsed().as_secs_f64();
    Ok(outcome)
}

pub fn write_artifacts(outcome: &Outcome, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    let name = &outcome.summary.name;
    if !outcome.header.is_empty() {
        let mut w = csv::Writer::from_path(dir.join(format!("{name}.series.csv")))?;
        w.write_record(&outcome.header)?;
        for row in &outcome.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    let mut summary = serde_json::to_value(&outcome.summary)?;
    if !outcome.details.is_null() {
        summary["details"] = outcome.details.clone();
    }
    fs::write(dir.join(format!("{name}.summary.json")), serde_json::to_string_pretty(&summary)?)?;
    for (k, snap) in outcome.snapshots.iter().enumerate() {
        fs::write(dir.join(format!("{name}.state.{k}.json")), serde_json::to_string(snap)?)?;
    }
    Ok(())
}

fn summary(cfg: &ScenarioConfig) -> RunSummary {
    RunSummary {
        name: cfg.name.clone(),
        kind: cfg.kind,
        termination: "completed".into(),
        error: None,
        s_final: None,
        sup_h_minus_h_final: None,
        decay_rate: None,
        checks: BTreeMap::new(),
        steps: 0,
        wall_time: 0.0,
    }
}

fn fail_with(s: &mut RunSummary, e: &GeomError) {
    s.termination = e.reason().into();
    s.error = Some(e.to_string());
}

/// Charts a flow can run over.
#[derive(Debug, Clone, Copy)]
pub enum ChartInstance {
    Radial(MinkowskiRadial),
    Hyperboloidal(Hyperboloidal),
    MinkowskiBox(Minkowski),
    DeSitter(DeSitterFlat),
}

impl ChartInstance {
    pub fn from_config(c: &ChartConfig) -> Result<Self, ConfigError> {
        Ok(match *c {
            ChartConfig::Minkowski { n, sinh_scale } => ChartInstance::Radial(MinkowskiRadial::new(
                n,
                sinh_scale.map_or(RadialMap::Identity, |scale| RadialMap::Sinh { scale }),
            )),
            ChartConfig::Hyperboloidal { n, tau0 } => ChartInstance::Hyperboloidal(Hyperboloidal::new(n, tau0)),
            ChartConfig::MinkowskiBox { n } => ChartInstance::MinkowskiBox(make_minkowski_chart(n)),
            ChartConfig::DeSitter { n, hubble } => ChartInstance::DeSitter(DeSitterFlat { n, hubble }),
            ChartConfig::Schwarzschild { .. } => {
                return Err(ConfigError::Validation("the Schwarzschild chart cannot carry a graph flow".into()))
            }
        })
    }

    pub fn background(&self) -> Background<'_, f64> {
        match self {
            ChartInstance::Radial(c) => Background::Radial(c),
            ChartInstance::Hyperboloidal(c) => Background::Radial(c),
            ChartInstance::MinkowskiBox(c) => Background::Box(c),
            ChartInstance::DeSitter(c) => Background::Box(c),
        }
    }

    /// Radial coordinate on the slice: Minkowski radius, or the geodesic
    /// radius `ρ` for the hyperboloidal chart.
    pub fn slice_radius(&self, x: &[f64]) -> f64 {
        match self {
            ChartInstance::Radial(c) => c.map.eval(x[0]).0,
            ChartInstance::Hyperboloidal(_) => x[0],
            _ => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    pub fn grid(&self, cfg: &crate::config::GridConfig) -> Result<Grid, GeomError> {
        match self {
            ChartInstance::Radial(c) => {
                let r = cfg.r_max.unwrap_or(1.0);
                Grid::radial(c.n, c.map.inverse(r), cfg.nodes)
            }
            ChartInstance::Hyperboloidal(c) => Grid::radial(c.n, cfg.r_max.unwrap_or(1.0), cfg.nodes),
            _ => Grid::boxed(
                cfg.lo.as_deref().unwrap_or(&[]),
                cfg.hi.as_deref().unwrap_or(&[]),
                cfg.nodes,
                cfg.periodic,
            ),
        }
    }

    fn on_chart<F>(&self, field: F) -> Option<Box<dyn PrescribedCurvatureField<f64>>>
    where
        F: pmcf::field::RadialField<f64> + 'static,
    {
        Some(match *self {
            ChartInstance::Radial(c) => Box::new(OnChart::new(field, c)),
            ChartInstance::Hyperboloidal(c) => Box::new(OnChart::new(field, c)),
            ChartInstance::MinkowskiBox(c) => Box::new(OnChart::new(field, c)),
            ChartInstance::DeSitter(_) => return None,
        })
    }

    fn hyperboloid_time(&self) -> Option<Box<dyn TimeFunction<f64>>> {
        let f = make_hyperboloid_frame();
        Some(match *self {
            ChartInstance::Radial(c) => Box::new(f.on(c)),
            ChartInstance::Hyperboloidal(c) => Box::new(f.on(c)),
            ChartInstance::MinkowskiBox(c) => Box::new(f.on(c)),
            ChartInstance::DeSitter(_) => return None,
        })
    }
}

/// Owned pieces of a graph flow scenario.
pub struct FlowSetup {
    pub chart: ChartInstance,
    pub initial: Graph,
    pub field: Box<dyn PrescribedCurvatureField<f64>>,
    pub frame: Option<Box<dyn TimeFunction<f64>>>,
    pub flow_config: FlowConfig<f64>,
    pub barrier: Option<BarrierSpec<f64>>,
}

fn bump_value(b: &crate::config::BumpConfig, r: f64) -> f64 {
    let z = (r - b.center) / b.width;
    if z.abs() >= 6.0 {
        0.0
    } else {
        b.amplitude * (-z * z).exp()
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

impl FlowSetup {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self, RunError> {
        let chart = ChartInstance::from_config(cfg.chart.as_ref().ok_or_else(|| invalid("missing [chart]"))?)?;
        let grid = chart.grid(cfg.grid.as_ref().ok_or_else(|| invalid("missing [grid]"))?)?;
        let init = cfg.initial.as_ref().ok_or_else(|| invalid("missing [initial]"))?;
        let n = grid.n as f64;

        let base: Box<dyn Fn(f64) -> f64> = match (init, chart) {
            (InitialConfig::Hyperboloid { tau0, .. }, ChartInstance::Hyperboloidal(h)) => {
                let w = tau0 - h.tau0;
                Box::new(move |_| w)
            }
            (InitialConfig::Hyperboloid { .. }, ChartInstance::DeSitter(_)) => {
                return Err(invalid("hyperboloid initial data needs a Minkowski chart").into());
            }
            (InitialConfig::Hyperboloid { tau0, .. }, _) => {
                let t = *tau0;
                Box::new(move |r| (t * t + r * r).sqrt())
            }
            (InitialConfig::Flat { height, .. }, _) => {
                let h = *height;
                Box::new(move |_| h)
            }
            (InitialConfig::Table { .. }, ChartInstance::Hyperboloidal(_)) => {
                return Err(invalid("table initial data needs a Minkowski or de Sitter chart").into());
            }
            (InitialConfig::Table { r, w, .. }, _) => {
                let t = CubicTable::new(r.clone(), w.clone())?;
                Box::new(move |x| t.eval(x).0)
            }
        };
        let bump = init.bump().cloned();
        let initial = Graph::from_fn(grid.clone(), |x| {
            let r = chart.slice_radius(x);
            base(r) + bump.as_ref().map_or(0.0, |b| bump_value(b, r))
        });

        let field: Box<dyn PrescribedCurvatureField<f64>> =
            match cfg.field.as_ref().ok_or_else(|| invalid("missing [field]"))? {
                FieldConfig::Constant { value } => Box::new(ConstantField(*value)),
                FieldConfig::Cmc { sign } => {
                    let InitialConfig::Hyperboloid { tau0, .. } = init else {
                        return Err(invalid("field kind cmc needs a hyperboloid initial surface").into());
                    };
                    Box::new(ConstantField(sign * n / tau0))
                }
                FieldConfig::Example => chart
                    .on_chart(pmcf::spacetimes::ExampleCurvature)
                    .ok_or_else(|| invalid("example field needs a Minkowski chart"))?,
                FieldConfig::Table { r, h } => chart
                    .on_chart(RadialTable(CubicTable::new(r.clone(), h.clone())?))
                    .ok_or_else(|| invalid("table field needs a Minkowski chart"))?,
            };

        let frame = match cfg.diagnostics.frame {
            FrameKind::Time => None,
            FrameKind::Hyperboloid => Some(
                chart
                    .hyperboloid_time()
                    .ok_or_else(|| invalid("the hyperboloid frame needs a Minkowski chart"))?,
            ),
        };

        let f = &cfg.flow;
        let boundary = match f.boundary {
            BoundaryKind::PinInitial => engine::Boundary::PinInitial,
            BoundaryKind::PinSelfSimilar => {
                let (ChartInstance::Radial(c), InitialConfig::Hyperboloid { tau0, .. }) = (chart, init) else {
                    return Err(invalid("pin-self-similar needs the Minkowski chart and a hyperboloid").into());
                };
                let t2 = tau0 * tau0;
                let map = c.map;
                let p: Profile<f64> = Arc::new(move |s: f64, x: &[f64]| {
                    let r = map.eval(x[0]).0;
                    (t2 + 2.0 * n * s + r * r).sqrt()
                });
                engine::Boundary::PinProfile(p)
            }
        };
        let flow_config = FlowConfig {
            cfl: f.cfl,
            integrator: f.integrator,
            s_end: f.s_end,
            record_every: f.record_every,
            delta_floor: f.delta_floor,
            delta_warn: f.delta_warn,
            boundary,
            orientation: f.orientation,
            max_steps: f.max_steps.unwrap_or(usize::MAX),
        };
        let barrier = cfg.diagnostics.barrier.as_ref().map(|b| BarrierSpec {
            lower: b.lower.map(Level::Constant),
            upper: b.upper.map(Level::Constant),
            fatal: b.fatal,
            tolerance: b.tolerance,
        });
        let setup = Self {
            chart,
            initial,
            field,
            frame,
            flow_config,
            barrier,
        };
        setup.check_initial(cfg)?;
        Ok(setup)
    }

    pub fn flow(&self) -> Flow<'_, f64> {
        Flow::new(self.chart.background(), self.field.as_ref()).with_orientation(self.flow_config.orientation)
    }

    pub fn diagnostics(&self, cfg: &ScenarioConfig) -> DiagnosticsConfig<'_, f64> {
        let d = &cfg.diagnostics;
        DiagnosticsConfig {
            lambda: d.lambda,
            mu: d.mu,
            frame: self.frame.as_deref(),
            residuals: d.residuals,
            barrier: self.barrier.clone(),
            height_window: d.height_window.map(|[a, b]| (a, b)),
            snapshot_every: d.snapshot_every,
        }
    }

    /// Spacelike margin above the floor and, when configured, `σH ≥ ε₀`.
    fn check_initial(&self, cfg: &ScenarioConfig) -> Result<(), RunError> {
        let geom = graph_geometry(self.chart.background(), &self.initial, None, self.flow_config.delta_floor)
            .map_err(|e| invalid(format!("initial surface rejected: {e}")))?;
        if let Some(eps) = cfg.diagnostics.min_initial_h {
            let sigma: f64 = self.flow_config.orientation.sign();
            let worst = engine::evolved_nodes(&self.initial.grid)
                .into_iter()
                .map(|k| sigma * geom.nodes[k].h)
                .fold(f64::INFINITY, f64::min);
            if worst < eps {
                return Err(invalid(format!("initial H = {worst:.6e} below min_initial_h = {eps}")).into());
            }
        }
        Ok(())
    }
}

fn record_rows(records: &[DiagnosticsRecord<f64>]) -> (Vec<String>, Vec<Vec<String>>) {
    (
        CSV_HEADER.iter().map(|s| s.to_string()).collect(),
        records.iter().map(|r| r.csv_row().to_vec()).collect(),
    )
}

fn flow_scenario(cfg: &ScenarioConfig) -> Result<Outcome, RunError> {
    let setup = FlowSetup::build(cfg)?;
    let flow = setup.flow();
    let diag = setup.diagnostics(cfg);
    let mut sum = summary(cfg);
    let run = match run_flow(&flow, &setup.initial, &setup.flow_config, &diag) {
        Ok(r) => r,
        Err(e) => {
            fail_with(&mut sum, &e);
            return Ok(Outcome {
                summary: sum,
                header: Vec::new(),
                rows: Vec::new(),
                records: Vec::new(),
                snapshots: Vec::new(),
                final_state: None,
                details: serde_json::Value::Null,
            });
        }
    };
    sum.termination = run.termination.reason().into();
    if let pmcf::engine::Termination::Error(e) = &run.termination {
        sum.error = Some(e.to_string());
    }
    sum.steps = run.steps;
    sum.s_final = Some(run.final_state.s);
    sum.sup_h_minus_h_final = run.records.last().map(|r| r.sup_h_minus_h);
    let series = run.excess_series();
    let window = cfg
        .checks
        .decay
        .as_ref()
        .map_or((0.2 * cfg.flow.s_end, cfg.flow.s_end), |d| (d.window[0], d.window[1]));
    let fit = decay_fit(&series, window).ok();
    sum.decay_rate = fit.map(|f| f.rate);

    let ctx = FlowContext {
        cfg,
        setup: &setup,
        records: &run.records,
        final_state: &run.final_state,
        steps: run.steps,
        completed: run.termination.is_completed(),
        fit,
    };
    sum.checks = flow_checks(&ctx);

    let (header, rows) = record_rows(&run.records);
    Ok(Outcome {
        summary: sum,
        header,
        rows,
        records: run.records.clone(),
        snapshots: run.snapshots.iter().map(|s| s.to_json()).collect(),
        final_state: Some(run.final_state.clone()),
        details: serde_json::json!({ "warnings": run.warnings }),
    })
}

struct FlowContext<'a> {
    cfg: &'a ScenarioConfig,
    setup: &'a FlowSetup,
    records: &'a [DiagnosticsRecord<f64>],
    final_state: &'a Graph,
    steps: usize,
    completed: bool,
    fit: Option<diagnostics::DecayFit>,
}

fn min_over<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(f64::INFINITY, f64::min)
}

fn flow_checks(x: &FlowContext<'_>) -> BTreeMap<String, CheckResult> {
    let c: &ChecksSection = &x.cfg.checks;
    let mut out = BTreeMap::new();
    let h = x.setup.initial.grid.h_min();
    if c.completed == Some(true) {
        out.insert("completed".into(), CheckResult::from_margin(if x.completed { 0.0 } else { -1.0 }));
    }
    if let Some(d) = &c.decay {
        let r = match x.fit {
            Some(f) => CheckResult::from_margin(f.rate.min(d.max_fit_residual - f.fit_residual)),
            None => CheckResult::from_margin(f64::NEG_INFINITY),
        };
        out.insert("decay".into(), r);
    }
    if let Some(si) = &c.s_inverse {
        let m = min_over(
            x.records
                .iter()
                .filter(|r| r.s >= si.s_min)
                .map(|r| si.factor / r.s - r.sup_h_minus_h * r.sup_h_minus_h),
        );
        out.insert("s_inverse".into(), CheckResult::from_margin(m));
    }
    if c.barrier == Some(true) {
        let violations: usize = x.records.iter().map(|r| r.barrier_violations).sum();
        let worst = min_over(x.records.iter().map(|r| r.barrier_worst));
        let m = if violations > 0 { worst.min(-(violations as f64)) } else { worst.max(0.0) };
        out.insert("barrier".into(), CheckResult::from_margin(m));
    }
    if let Some([lo, hi]) = c.height_range {
        let m = min_over(x.records.iter().map(|r| (r.u_min - lo).min(hi - r.u_max)));
        out.insert("height_range".into(), CheckResult::from_margin(m));
    }
    if let Some(g) = &c.gradient_identity {
        let worst = x.records.iter().map(|r| r.gradient_identity).fold(0.0, f64::max);
        out.insert("gradient_identity".into(), CheckResult::from_margin(g.constant * h * h - worst));
    }
    if let Some(t) = &c.stationarity {
        let drift = x
            .final_state
            .w
            .iter()
            .zip(&x.setup.initial.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        out.insert("stationarity".into(), CheckResult::from_margin(t.tol - drift));
    }
    if let Some(ss) = &c.self_similar {
        let m = match (x.setup.chart, &x.cfg.initial) {
            (ChartInstance::Radial(ch), Some(InitialConfig::Hyperboloid { tau0, .. })) => {
                let st = x.final_state;
                let n = st.grid.n as f64;
                let err = (0..st.w.len())
                    .map(|k| {
                        let r = ch.map.eval(st.grid.coords(k)[0]).0;
                        (st.w[k] - (tau0 * tau0 + 2.0 * n * st.s + r * r).sqrt()).abs()
                    })
                    .fold(0.0, f64::max);
                let dt = if x.steps > 0 { st.s / x.steps as f64 } else { 0.0 };
                ss.constant * (h * h + dt * dt) - err
            }
            _ => f64::NEG_INFINITY,
        };
        out.insert("self_similar".into(), CheckResult::from_margin(m));
    }
    if let Some(t) = &c.sign_preservation {
        let m = min_over(x.records.iter().map(|r| r.min_h_minus_h + t.tol));
        out.insert("sign_preservation".into(), CheckResult::from_margin(m));
    }
    out
}

fn stationary_scenario(cfg: &ScenarioConfig) -> Result<Outcome, RunError> {
    let setup = FlowSetup::build(cfg)?;
    let flow = setup.flow();
    let diag = setup.diagnostics(cfg);
    let floor = setup.flow_config.delta_floor;
    let mut sum = summary(cfg);
    let mut records = Vec::new();
    let mut details = serde_json::Value::Null;
    let mut final_state = None;
    let tol = cfg.checks.newton.as_ref().map_or(cfg.stationary.tol, |c| c.tol);
    match stationary_solve(&flow, &setup.initial, tol, cfg.stationary.max_iterations, floor) {
        Ok(rep) => {
            for st in [&setup.initial, &rep.state] {
                records.push(diagnostics::record(&flow, st, &diag, floor, Residuals::nan())?);
            }
            let last = *rep.residuals.last().unwrap_or(&f64::INFINITY);
            sum.steps = rep.iterations;
            sum.s_final = Some(0.0);
            sum.sup_h_minus_h_final = Some(last);
            if let Some(c) = &cfg.checks.newton {
                let m = if rep.iterations <= c.max_iterations {
                    (c.tol - last) / c.tol
                } else {
                    -((rep.iterations - c.max_iterations) as f64)
                };
                sum.checks.insert("newton".into(), CheckResult::from_margin(m));
            }
            if let Some(g) = &cfg.checks.gradient_identity {
                let h = setup.initial.grid.h_min();
                let worst = records.iter().map(|r| r.gradient_identity).fold(0.0, f64::max);
                sum.checks
                    .insert("gradient_identity".into(), CheckResult::from_margin(g.constant * h * h - worst));
            }
            details = serde_json::json!({ "iterations": rep.iterations, "residuals": rep.residuals });
            final_state = Some(rep.state);
        }
        Err(e) => {
            fail_with(&mut sum, &e);
            if cfg.checks.newton.is_some() {
                sum.checks.insert("newton".into(), CheckResult::from_margin(f64::NEG_INFINITY));
            }
        }
    }
    let (header, rows) = record_rows(&records);
    Ok(Outcome {
        summary: sum,
        header,
        rows,
        records,
        snapshots: final_state.iter().map(|s: &Graph| s.to_json()).collect(),
        final_state,
        details,
    })
}

/// Initial data and closed form `(g(t), A(t))` of a foliation case.
pub struct FoliationCaseData {
    pub init: FoliationState<f64>,
    pub curvature: Box<dyn FoliationCurvature<f64>>,
    pub constants: FoliationConstants<f64>,
    pub exact: Box<dyn Fn(f64, &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync>,
}

/// Metric of the hyperboloid `S_τ₀` in geodesic polar coordinates at `ρ`.
pub fn hyperboloid_slice_metric(n: usize, tau0: f64, rho: f64) -> DMatrix<f64> {
    let s = tau0 * (rho / tau0).sinh();
    let mut d = vec![s * s; n];
    d[0] = 1.0;
    DMatrix::from_diagonal(&DVector::from_vec(d))
}

/// `sff_sign` multiplies the initial second fundamental form; `1` is the
/// convention of this crate.
pub fn foliation_case(
    case: FoliationCase,
    n: usize,
    tau0: f64,
    radii: &[f64],
    sff_sign: f64,
) -> Result<FoliationCaseData, GeomError> {
    let g: Vec<DMatrix<f64>> = radii.iter().map(|&r| hyperboloid_slice_metric(n, tau0, r)).collect();
    Ok(match case {
        FoliationCase::Hyperboloid => {
            let a = g.iter().map(|g| g * (sff_sign / tau0)).collect();
            let init = FoliationState::new(g, a)?;
            let constants = FoliationConstants::new(init.sup_a()?, 0.0, 1.0);
            FoliationCaseData {
                init,
                curvature: Box::new(Flat),
                constants,
                exact: Box::new(move |t, g0| {
                    let l = (tau0 + t) / tau0;
                    (g0 * (l * l), g0 * ((tau0 + t) / (tau0 * tau0)))
                }),
            }
        }
        FoliationCase::Isotropic => {
            let a = g.iter().map(|g| DMatrix::zeros(g.nrows(), g.ncols())).collect();
            let init = FoliationState::new(g, a)?;
            let constants = FoliationConstants::new(0.0, (n as f64).sqrt(), 1.0);
            FoliationCaseData {
                init,
                curvature: Box::new(Isotropic(1.0)),
                constants,
                exact: Box::new(|t, g0| (g0 * (t.cosh() * t.cosh()), g0 * (t.cosh() * t.sinh()))),
            }
        }
    })
}

/// Largest relative deviation of `(g, A)` from the closed form over the series.
pub fn closed_form_error(series: &FoliationSeries<f64>, init: &FoliationState<f64>, exact: &dyn Fn(f64, &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>)) -> Vec<(f64, f64)> {
    series
        .states
        .iter()
        .map(|st| {
            let mut e: f64 = 0.0;
            for (node, g0) in init.g.iter().enumerate() {
                let (eg, ea) = exact(st.t, g0);
                e = e.max((&st.g[node] - &eg).amax() / eg.amax());
                let da = (&st.a[node] - &ea).amax();
                e = e.max(if ea.amax() > 0.0 { da / ea.amax() } else { da });
            }
            (st.t, e)
        })
        .collect()
}

fn foliation_scenario(cfg: &ScenarioConfig) -> Result<Outcome, RunError> {
    let f = cfg.foliation.as_ref().ok_or_else(|| invalid("missing [foliation]"))?;
    let mut sum = summary(cfg);
    let data = foliation_case(f.case, f.n, f.tau0, &f.radii, 1.0)?;
    let mut opts = FoliationOptions::new(f.t_end, f.dt);
    opts.sample_every = f.sample_every;
    opts.override_window = f.override_window;
    let series = match integrate_foliation(&data.init, data.curvature.as_ref(), data.constants, opts) {
        Ok(s) => s,
        Err(e) => {
            fail_with(&mut sum, &e);
            for (k, on) in [("closed_form", cfg.checks.closed_form.is_some()), ("envelope", cfg.checks.envelope == Some(true))] {
                if on {
                    sum.checks.insert(k.into(), CheckResult::from_margin(f64::NEG_INFINITY));
                }
            }
            return Ok(Outcome {
                summary: sum,
                header: Vec::new(),
                rows: Vec::new(),
                records: Vec::new(),
                snapshots: Vec::new(),
                final_state: None,
                details: serde_json::Value::Null,
            });
        }
    };
    let errors = closed_form_error(&series, &data.init, data.exact.as_ref());
    let bounds = foliation_bounds_check(&series)?;
    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    if let Some(t) = &cfg.checks.closed_form {
        sum.checks.insert("closed_form".into(), CheckResult::from_margin(t.tol - worst));
    }
    if cfg.checks.envelope == Some(true) {
        let m = bounds.worst_envelope_margin.min(bounds.worst_curvature_margin);
        sum.checks.insert(
            "envelope".into(),
            CheckResult {
                pass: bounds.pass,
                margin: m,
            },
        );
    }
    sum.s_final = series.states.last().map(|s| s.t);
    sum.steps = (f.t_end / f.dt).round() as usize;
    let header = ["t", "sup_A", "closed_form_error", "envelope_margin", "curvature_margin"];
    let rows = series
        .states
        .iter()
        .zip(&errors)
        .zip(&bounds.samples)
        .map(|((st, e), b)| {
            vec![
                st.t.to_string(),
                st.sup_a().map_or(f64::NAN, |v| v).to_string(),
                e.1.to_string(),
                b.envelope_margin.to_string(),
                b.curvature_margin.to_string(),
            ]
        })
        .collect();
    Ok(Outcome {
        summary: sum,
        header: header.iter().map(|s| s.to_string()).collect(),
        rows,
        records: Vec::new(),
        snapshots: Vec::new(),
        final_state: None,
        details: serde_json::json!({
            "b0": data.constants.b0,
            "window": data.constants.window(None),
            "final": series.states.last().map(|s| s.to_json()),
        }),
    })
}

/// Mean curvature of the level-set surface at `(x, θ, φ = 0)`, from a
/// `3×3×3` parameter stencil with spacing `rel·x` in `x` and `0.01` in angles.
pub fn lst_mean_curvature(m: f64, tau: f64, f: SphereFunctionKind, x: f64, theta: f64, rel: f64) -> Result<f64, GeomError> {
    fn eval<F: SphereFunction<f64>>(s: &LstSurface<F>, m: f64, x: f64, theta: f64, rel: f64) -> Result<f64, GeomError> {
        let hx = rel * x;
        let ha = 1e-2;
        let (pg, samples) = lst_embedding(
            s,
            &[x - hx, x, x + hx],
            &[theta - ha, theta, theta + ha],
            &[-ha, 0.0, ha],
        )?;
        let chart = make_schwarzschild_chart(m);
        let g = embedding_geometry(&chart, &pg, &samples, None)?;
        Ok(g.geometry.nodes[0].h)
    }
    match f {
        SphereFunctionKind::Zero => eval(&LstSurface::new(ConstantOnSphere(0.0), tau), m, x, theta, rel),
        SphereFunctionKind::CosTheta => eval(&LstSurface::new(CosTheta, tau), m, x, theta, rel),
    }
}

/// Least-squares `H(x) ≈ H₀ + a x²`; returns `(H₀, a)`.
pub fn fit_expansion(xs: &[f64], hs: &[f64]) -> (f64, f64) {
    let z: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let k = z.len() as f64;
    let mz = z.iter().sum::<f64>() / k;
    let mh = hs.iter().sum::<f64>() / k;
    let szz: f64 = z.iter().map(|v| (v - mz) * (v - mz)).sum();
    let szh: f64 = z.iter().zip(hs).map(|(v, h)| (v - mz) * (h - mh)).sum();
    let a = szh / szz;
    (mh - a * mz, a)
}

fn schwarzschild_scenario(cfg: &ScenarioConfig) -> Result<Outcome, RunError> {
    let Some(ChartConfig::Schwarzschild { m }) = cfg.chart else {
        return Err(invalid("missing schwarzschild chart").into());
    };
    let s = cfg.schwarzschild.as_ref().ok_or_else(|| invalid("missing [schwarzschild]"))?;
    let mut sum = summary(cfg);
    let mut hs = Vec::with_capacity(s.xs.len());
    for &x in &s.xs {
        match lst_mean_curvature(m, s.tau, s.f, x, s.theta, s.rel_step) {
            Ok(h) => hs.push(h),
            Err(e) => {
                fail_with(&mut sum, &e);
                break;
            }
        }
    }
    let (h0, a) = if hs.len() == s.xs.len() { fit_expansion(&s.xs, &hs) } else { (f64::NAN, f64::NAN) };
    let oracle = 3.0 / s.tau;
    let ratios: Vec<f64> = hs.windows(2).map(|w| (w[0] - h0).abs() / (w[1] - h0).abs()).collect();
    if let Some(r) = &cfg.checks.richardson {
        let m = if ratios.is_empty() || sum.error.is_some() {
            f64::NEG_INFINITY
        } else {
            min_over(ratios.iter().map(|q| (q - r.ratio[0]).min(r.ratio[1] - q)))
        };
        sum.checks.insert("richardson".into(), CheckResult::from_margin(m));
        let d = if h0.is_finite() { r.h0_tol - (h0 - oracle).abs() } else { f64::NEG_INFINITY };
        sum.checks.insert("h0".into(), CheckResult::from_margin(d));
    }
    sum.sup_h_minus_h_final = hs.last().map(|h| (h - h0).abs());
    let rows = s
        .xs
        .iter()
        .zip(&hs)
        .map(|(x, h)| vec![x.to_string(), h.to_string(), (h - h0).to_string()])
        .collect();
    Ok(Outcome {
        summary: sum,
        header: vec!["x".into(), "H".into(), "H_minus_H0".into()],
        rows,
        records: Vec::new(),
        snapshots: Vec::new(),
        final_state: None,
        details: serde_json::json!({
            "h0_fit": h0,
            "x2_coefficient": a,
            "h0_oracle_m0": oracle,
            "ratios": ratios,
        }),
    })
}

fn verify_scenario(cfg: &ScenarioConfig) -> Outcome {
    let opts = VerifyOptions {
        filter: cfg.verify.filter.clone(),
        seed: cfg.seed,
        ..VerifyOptions::default()
    };
    let report = verify_suite(&opts);
    let mut sum = summary(cfg);
    for e in &report.entries {
        sum.checks.insert(
            e.name.clone(),
            CheckResult {
                pass: e.pass,
                margin: e.margin,
            },
        );
    }
    Outcome {
        summary: sum,
        header: Vec::new(),
        rows: Vec::new(),
        records: Vec::new(),
        snapshots: Vec::new(),
        final_state: None,
        details: serde_json::to_value(&report).unwrap_or(serde_json::Value::Null),
    }
}
