//! Named invariant checks with measured margins.

use std::f64::consts::FRAC_PI_2;

use pmcf::chart::FdOnly;
use pmcf::engine::{apply_linearized, evolved_nodes};
use pmcf::field::RadialField;
use pmcf::nalgebra::{DMatrix, DVector};
use pmcf::spacetimes::{
    lst_embedding, make_example_prescribed_h, make_hyperboloid_frame, make_schwarzschild_chart, ConstantOnSphere,
    DeSitterFlat, ExampleCurvature, Hyperboloidal, LstSurface, Minkowski, MinkowskiRadial, RadialMap,
};
use pmcf::surface::ParamGrid;
use pmcf::sync::WarpedChart;
use pmcf::{
    christoffel_at, embedding_geometry, flow_velocity, foliation_bounds_check, graph_geometry, integrate_foliation,
    linearized_coefficients, metric_at, reference_norm, riemann_at, tilt_factor, Background, ChartSpec,
    ConstantField, Flow, FoliationOptions, Frame, GeomError, Graph, Grid, PrescribedCurvatureField, Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::FoliationCase;
use crate::presets;
use crate::scenario::{closed_form_error, execute, foliation_case, CheckResult};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "PMCFLOW_THREADS";

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Substring a check name must contain to run.
    pub filter: Option<String>,
    pub seed: u64,
    /// Multiplier applied to second fundamental forms before they are
    /// compared with the expanding convention; `-1` is a broken fixture.
    pub sff_sign: f64,
    /// Worker count; `None` reads `PMCFLOW_THREADS`.
    pub threads: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            filter: None,
            seed: 0,
            sff_sign: 1.0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyEntry {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub entries: Vec<VerifyEntry>,
    pub pass: bool,
}

type Outcome = Result<(f64, String), GeomError>;
type CheckFn = fn(&VerifyOptions) -> Outcome;

const CHECKS: &[(&str, CheckFn)] = &[
    ("signature", signature),
    ("tilt-equivalence", tilt_equivalence),
    ("fd-consistency", fd_consistency),
    ("metric-compatibility", metric_compatibility),
    ("gradient-identity", gradient_identity),
    ("oracle-agreement", oracle_agreement),
    ("umbilicity", umbilicity),
    ("sign-convention", sign_convention),
    ("exact-solution-tracking", exact_solution_tracking),
    ("barrier", barrier),
    ("s-inverse-decay", s_inverse_decay),
    ("sign-preservation", sign_preservation),
    ("kappa-boundedness", kappa_boundedness),
    ("linearization-consistency", linearization_consistency),
    ("spacelike-preserved", spacelike_preserved),
    ("foliation-closed-form", foliation_closed_form),
    ("foliation-envelope", foliation_envelope),
    ("foliation-symmetry", foliation_symmetry),
    ("foliation-chart", foliation_chart),
    ("frame-identity", frame_identity),
    ("example-h-bound", example_h_bound),
    ("schwarzschild-curvature-decay", schwarzschild_curvature_decay),
    ("lst-spacelike", lst_spacelike),
    ("lst-hyperboloid", lst_hyperboloid),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Worker count from `PMCFLOW_THREADS`, if set to a positive integer.
pub fn env_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

pub fn verify_suite(opts: &VerifyOptions) -> VerifyReport {
    let selected: Vec<&(&str, CheckFn)> = CHECKS
        .iter()
        .filter(|(name, _)| opts.filter.as_deref().is_none_or(|f| name.contains(f)))
        .collect();
    let run = || -> Vec<VerifyEntry> {
        selected
            .par_iter()
            .map(|(name, f)| {
                let (margin, detail) = match f(opts) {
                    Ok(v) => v,
                    Err(e) => (f64::NEG_INFINITY, format!("{}: {e}", e.reason())),
                };
                let r = CheckResult {
                    pass: margin >= 0.0,
                    margin,
                };
                VerifyEntry {
                    name: name.to_string(),
                    pass: r.pass,
                    margin: r.margin,
                    detail,
                }
            })
            .collect()
    };
    let threads = opts.threads.or_else(env_threads);
    let entries = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let pass = entries.iter().all(|e| e.pass);
    VerifyReport { entries, pass }
}

fn rng(opts: &VerifyOptions, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn ratio_margin(ratio: f64, lo: f64, hi: f64) -> f64 {
    (ratio - lo).min(hi - ratio)
}

fn signature(opts: &VerifyOptions) -> Outcome {
    let mut r = rng(opts, 1);
    let mink = Minkowski { n: 3 };
    let ds = DeSitterFlat { n: 3, hubble: 0.7 };
    let schw = make_schwarzschild_chart(1.0);
    let hyp = Hyperboloidal::new(3, 1.0);
    let warped = WarpedChart::new(&hyp);
    let radial = MinkowskiRadial::new(3, RadialMap::Sinh { scale: 1.0 });
    let warped_r = WarpedChart::new(&radial);
    let charts: [&dyn ChartSpec<f64>; 5] = [&mink, &ds, &schw, &warped, &warped_r];
    let mut bad = 0usize;
    let mut total = 0usize;
    for chart in charts {
        for _ in 0..400 {
            let mut p: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
            p[1] = r.gen_range(0.01..0.45);
            p[2] = r.gen_range(0.2..2.9);
            if chart.name().starts_with("warped(hyp") {
                p[0] = r.gen_range(-0.9..2.0);
            }
            total += 1;
            match metric_at(chart, &p) {
                Ok(g) => {
                    let neg = g.symmetric_eigen().eigenvalues.iter().filter(|v| **v < 0.0).count();
                    if neg != 1 {
                        bad += 1;
                    }
                }
                Err(_) => bad += 1,
            }
        }
    }
    Ok((0.0 - bad as f64, format!("{bad} of {total} samples without Lorentz signature")))
}

/// Future unit timelike vector with rapidity `eta` along `dir`.
fn boosted(eta: f64, dir: &[f64; 3]) -> DVector<f64> {
    DVector::from_vec(vec![eta.cosh(), eta.sinh() * dir[0], eta.sinh() * dir[1], eta.sinh() * dir[2]])
}

fn unit3(r: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Worst relative slack of `|||w|||²_{G_E′} ≤ 4v²|||w|||²_{G_E}` over `samples`.
pub fn tilt_equivalence_margin(seed: u64, samples: usize) -> Result<(f64, usize), GeomError> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0, 1.0]));
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..samples {
        let d1 = unit3(&mut r);
        let d2 = unit3(&mut r);
        let t = boosted(r.gen_range(0.0..2.0), &d1);
        let tp = boosted(r.gen_range(0.0..2.0), &d2);
        let v = tilt_factor(&g, &t, &tp)?;
        let w = DVector::from_fn(4, |_, _| r.gen_range(-1.0..1.0));
        let fe = Frame::new(g.clone(), vec![0.0; 4], t)?;
        let fp = Frame::new(g.clone(), vec![0.0; 4], tp)?;
        let ne = reference_norm(&fe, &Tensor::vector(&w))?.powi(2);
        let np = reference_norm(&fp, &Tensor::vector(&w))?.powi(2);
        let bound = 4.0 * v * v * ne;
        let slack = (bound - np) / bound;
        if slack < 0.0 {
            violations += 1;
        }
        worst = worst.min(slack);
    }
    Ok((worst, violations))
}

fn tilt_equivalence(opts: &VerifyOptions) -> Outcome {
    let (worst, violations) = tilt_equivalence_margin(opts.seed ^ 2, 10_000)?;
    Ok((worst, format!("{violations} violations in 10000 samples, worst relative slack {worst:.3e}")))
}

/// `R_abcd = K(g_bc g_ad − g_ac g_bd)` for constant curvature `K`.
fn constant_curvature_riemann(g: &DMatrix<f64>, k: f64, a: usize, b: usize, c: usize, d: usize) -> f64 {
    k * (g[(b, c)] * g[(a, d)] - g[(a, c)] * g[(b, d)])
}

fn fd_consistency(_opts: &VerifyOptions) -> Outcome {
    let schw = make_schwarzschild_chart(1.0);
    let p = [0.2, 0.1, 1.1, 0.4];
    let exact = christoffel_at(&schw, &p)?;
    let cerr = |step: f64| -> Result<f64, GeomError> { Ok(christoffel_at(&FdOnly::with_step(schw, step), &p)?.sub(&exact).max_abs()) };
    let rc = cerr(4e-3)? / cerr(2e-3)?;

    let ds = DeSitterFlat { n: 3, hubble: 0.7 };
    let q = [0.3, 0.1, -0.2, 0.4];
    let g = metric_at(&ds, &q)?;
    let rerr = |step: f64| -> Result<f64, GeomError> {
        let r = riemann_at(&FdOnly::with_step(ds, step), &q)?;
        let mut e: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        e = e.max((r.get(a, b, c, d) - constant_curvature_riemann(&g, 0.49, a, b, c, d)).abs());
                    }
                }
            }
        }
        Ok(e)
    };
    let rr = rerr(2e-2)? / rerr(1e-2)?;
    let m = ratio_margin(rc, 3.5, 4.5).min(ratio_margin(rr, 3.5, 4.5));
    Ok((m, format!("christoffel ratio {rc:.3}, riemann ratio {rr:.3}")))
}

/// `max |∇_c G_ab|` from central-difference metric partials at `step`
/// against the analytic connection.
fn covariant_metric_defect<C: ChartSpec<f64>>(chart: &C, p: &[f64], step: f64) -> Result<f64, GeomError> {
    let n = chart.dim();
    let gam = christoffel_at(chart, p)?;
    let g = chart.metric(p)?;
    let mut worst: f64 = 0.0;
    for cidx in 0..n {
        let mut pp = p.to_vec();
        let mut pm = p.to_vec();
        pp[cidx] += step;
        pm[cidx] -= step;
        let dg = (chart.metric(&pp)? - chart.metric(&pm)?) / (2.0 * step);
        for a in 0..n {
            for b in 0..n {
                let mut v = dg[(a, b)];
                for d in 0..n {
                    v -= gam.get(d, cidx, a) * g[(d, b)] + gam.get(d, cidx, b) * g[(a, d)];
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

fn metric_compatibility(_opts: &VerifyOptions) -> Outcome {
    let schw = make_schwarzschild_chart(1.0);
    let p = [0.2, 0.15, 1.0, 0.3];
    let e1 = covariant_metric_defect(&schw, &p, 2e-3)?;
    let e2 = covariant_metric_defect(&schw, &p, 1e-3)?;
    let ratio = e1 / e2;
    Ok((ratio_margin(ratio, 3.5, 4.5), format!("defect {e1:.3e} → {e2:.3e}, ratio {ratio:.3}")))
}

fn bump_radial(grid: &Grid, map: RadialMap, w: &mut [f64], amp: f64) {
    for k in evolved_nodes(grid) {
        let r = map.eval(grid.coords(k)[0]).0;
        w[k] += amp * (-r * r).exp();
    }
}

fn gradient_identity(_opts: &VerifyOptions) -> Outcome {
    let chart = MinkowskiRadial::new(2, RadialMap::Identity);
    let frame = make_hyperboloid_frame().on(chart);
    let mut res = Vec::new();
    for nodes in [65, 129] {
        let grid = Grid::radial(2, 4.0, nodes)?;
        let mut st = chart.hyperboloid(1.0, grid.clone());
        bump_radial(&grid, RadialMap::Identity, &mut st.w, 0.1);
        let geom = graph_geometry(Background::Radial(&chart), &st, Some(&frame), 1e-3)?;
        let r = pmcf::diagnostics::gradient_identity_residual(&geom)?;
        res.push(evolved_nodes(&grid).into_iter().map(|k| r[k].abs()).fold(0.0, f64::max));
    }
    let ratio = res[0] / res[1];
    Ok((ratio - 3.0, format!("residual {:.3e} → {:.3e}, ratio {ratio:.3}", res[0], res[1])))
}

/// A graph surface together with its height in Cartesian Minkowski or de
/// Sitter coordinates, for comparison with the embedding oracle.
enum OracleSurface {
    MinkBox,
    DeSitterBox,
    RadialIdentity,
    RadialSinh,
    Hyperboloidal,
}

fn rotated_stencil(center: [f64; 2], h: f64) -> Vec<[f64; 2]> {
    let (s, c) = 0.5f64.sin_cos();
    let mut out = Vec::with_capacity(9);
    for i in -1..=1 {
        for j in -1..=1 {
            let (u, v) = (i as f64 * h, j as f64 * h);
            out.push([center[0] + c * u - s * v, center[1] + s * u + c * v]);
        }
    }
    out
}

fn embedded_h<C: ChartSpec<f64>>(chart: &C, h: f64, samples: Vec<Vec<f64>>) -> Result<f64, GeomError> {
    let pg = ParamGrid {
        shape: vec![3, 3],
        h: vec![h, h],
    };
    Ok(embedding_geometry(chart, &pg, &samples, None)?.geometry.nodes[0].h)
}

/// `max |H_graph − H_embedding|` over two comparison nodes at refinement
/// `level`; the embedding uses a rotated parameter stencil of the same spacing.
fn oracle_discrepancy(surface: &OracleSurface, level: u32) -> Result<f64, GeomError> {
    let nodes = 32 * 2usize.pow(level) + 1;
    let mut worst: f64 = 0.0;
    match surface {
        OracleSurface::MinkBox | OracleSurface::DeSitterBox => {
            let mink = Minkowski { n: 2 };
            let ds = DeSitterFlat { n: 2, hubble: 0.5 };
            let is_ds = matches!(surface, OracleSurface::DeSitterBox);
            let wf = move |x: f64, y: f64| {
                if is_ds {
                    0.2 + 0.1 * (x + 2.0 * y).sin()
                } else {
                    0.3 * x.sin() * y.cos() + 0.1 * x * y
                }
            };
            let grid = Grid::boxed(&[-1.0, -1.0], &[1.0, 1.0], nodes, false)?;
            let st = Graph::from_fn(grid.clone(), |x| wf(x[0], x[1]));
            let bg = if is_ds { Background::Box(&ds) } else { Background::Box(&mink) };
            let geom = graph_geometry(bg, &st, None, 1e-3)?;
            let h = grid.h[0];
            for p in [[0.25, -0.25], [0.5, 0.375]] {
                let idx: Vec<usize> = p.iter().map(|v| ((v + 1.0) / h).round() as usize).collect();
                let k = grid.flat_index(&idx);
                let samples = rotated_stencil(p, h).into_iter().map(|q| vec![wf(q[0], q[1]), q[0], q[1]]).collect();
                let he = if is_ds { embedded_h(&ds, h, samples)? } else { embedded_h(&mink, h, samples)? };
                worst = worst.max((geom.nodes[k].h - he).abs());
            }
        }
        OracleSurface::RadialIdentity | OracleSurface::RadialSinh => {
            let sinh = matches!(surface, OracleSurface::RadialSinh);
            let map = if sinh { RadialMap::Sinh { scale: 1.0 } } else { RadialMap::Identity };
            let amp = if sinh { 0.05 } else { 0.1 };
            let wf = move |r: f64| (1.0 + r * r).sqrt() + amp * (-r * r).exp();
            let chart = MinkowskiRadial::new(2, map);
            let grid = Grid::radial(2, map.inverse(2.0), nodes)?;
            let st = Graph::from_fn(grid.clone(), |x| wf(map.eval(x[0]).0));
            let geom = graph_geometry(Background::Radial(&chart), &st, None, 1e-3)?;
            let mink = Minkowski { n: 2 };
            let h = grid.h[0];
            for frac in [0.25, 0.5] {
                let k = ((nodes - 1) as f64 * frac).round() as usize;
                let r = map.eval(grid.coords(k)[0]).0;
                let samples = rotated_stencil([r, 0.0], h)
                    .into_iter()
                    .map(|q| vec![wf(q[0].hypot(q[1])), q[0], q[1]])
                    .collect();
                worst = worst.max((geom.nodes[k].h - embedded_h(&mink, h, samples)?).abs());
            }
        }
        OracleSurface::Hyperboloidal => {
            let wf = |rho: f64| 0.1 * (-rho * rho).exp();
            let chart = Hyperboloidal::new(2, 1.0);
            let grid = Grid::radial(2, 2.0, nodes)?;
            let st = Graph::from_fn(grid.clone(), |x| wf(x[0]));
            let geom = graph_geometry(Background::Radial(&chart), &st, None, 1e-3)?;
            let mink = Minkowski { n: 2 };
            let h = grid.h[0];
            for frac in [0.25, 0.5] {
                let k = ((nodes - 1) as f64 * frac).round() as usize;
                let rho = grid.coords(k)[0];
                let samples = rotated_stencil([rho, 0.0], h)
                    .into_iter()
                    .map(|q| {
                        let rho = q[0].hypot(q[1]);
                        let lam = 1.0 + wf(rho);
                        let (s, c) = (rho.sinh(), rho.cosh());
                        let (ux, uy) = if rho > 0.0 { (q[0] / rho, q[1] / rho) } else { (1.0, 0.0) };
                        vec![lam * c, lam * s * ux, lam * s * uy]
                    })
                    .collect();
                worst = worst.max((geom.nodes[k].h - embedded_h(&mink, h, samples)?).abs());
            }
        }
    }
    Ok(worst)
}

/// Discrepancy ratios under `h`-halving for the five oracle surfaces.
pub fn oracle_agreement_ratios() -> Result<Vec<(f64, f64, f64)>, GeomError> {
    [
        OracleSurface::MinkBox,
        OracleSurface::DeSitterBox,
        OracleSurface::RadialIdentity,
        OracleSurface::RadialSinh,
        OracleSurface::Hyperboloidal,
    ]
    .iter()
    .map(|s| {
        let e0 = oracle_discrepancy(s, 0)?;
        let e1 = oracle_discrepancy(s, 1)?;
        Ok((e0, e1, e0 / e1))
    })
    .collect()
}

fn oracle_agreement(_opts: &VerifyOptions) -> Outcome {
    let r = oracle_agreement_ratios()?;
    let m = r.iter().map(|x| ratio_margin(x.2, 3.5, 4.5)).fold(f64::INFINITY, f64::min);
    let d: Vec<String> = r.iter().map(|x| format!("{:.3}", x.2)).collect();
    Ok((m, format!("ratios [{}]", d.join(", "))))
}

fn umbilicity(opts: &VerifyOptions) -> Outcome {
    let tau0 = 2.0;
    let map = RadialMap::Sinh { scale: tau0 };
    let chart = MinkowskiRadial::new(3, map);
    let mut errs = Vec::new();
    for nodes in [65, 129] {
        let grid = Grid::radial(3, map.inverse(6.0), nodes)?;
        let st = chart.hyperboloid(tau0, grid.clone());
        let geom = graph_geometry(Background::Radial(&chart), &st, None, 1e-3)?;
        let mut e: f64 = 0.0;
        for k in evolved_nodes(&grid) {
            let nd = &geom.nodes[k];
            let expect = &nd.gamma / tau0;
            e = e.max((&nd.second_ff * opts.sff_sign - &expect).amax() / expect.amax());
        }
        errs.push(e);
    }
    let ratio = errs[0] / errs[1];
    let m = (1e-3 - errs[1]).min(if errs[1] < 1e-12 { 1.0 } else { ratio - 3.0 });
    Ok((m, format!("max relative |A − γ/τ₀| {:.3e} → {:.3e}", errs[0], errs[1])))
}

fn sign_convention(opts: &VerifyOptions) -> Outcome {
    let chart = MinkowskiRadial::new(2, RadialMap::Identity);
    let mut worst = f64::INFINITY;
    for tau in [0.5, 1.0, 2.0] {
        let grid = Grid::radial(2, 3.0, 61)?;
        let geom = graph_geometry(Background::Radial(&chart), &chart.hyperboloid(tau, grid), None, 1e-3)?;
        for nd in &geom.nodes {
            let a = &nd.second_ff * opts.sff_sign;
            let h = (&nd.gamma_inv * a).trace();
            worst = worst.min(h * tau);
        }
    }
    Ok((worst, format!("min τH on S_τ = {worst:.6}")))
}

fn preset_outcome(name: &str, edit: impl FnOnce(&mut crate::config::ScenarioConfig)) -> Result<crate::scenario::Outcome, GeomError> {
    let mut cfg = presets::load(name).map_err(|e| GeomError::Domain(e.to_string()))?;
    edit(&mut cfg);
    execute(&cfg).map_err(|e| GeomError::Domain(e.to_string()))
}

fn exact_solution_tracking(_opts: &VerifyOptions) -> Outcome {
    let mut errs = Vec::new();
    for nodes in [61, 121] {
        let out = preset_outcome("mink-self-similar", |c| {
            if let Some(g) = c.grid.as_mut() {
                g.nodes = nodes;
            }
            c.flow.s_end = 0.5;
            c.diagnostics.residuals = false;
        })?;
        let st = out.final_state.ok_or_else(|| GeomError::Domain("no final state".into()))?;
        let n = st.grid.n as f64;
        let e = (0..st.w.len())
            .map(|k| {
                let r = st.grid.coords(k)[0];
                (st.w[k] - (1.0 + 2.0 * n * st.s + r * r).sqrt()).abs()
            })
            .fold(0.0, f64::max);
        errs.push(e);
    }
    let ratio = errs[0] / errs[1];
    Ok((ratio - 3.0, format!("error {:.3e} → {:.3e}, ratio {ratio:.3}", errs[0], errs[1])))
}

fn barrier(_opts: &VerifyOptions) -> Outcome {
    let out = preset_outcome("mink-pinched", |c| {
        c.flow.s_end = 0.5;
    })?;
    let v: usize = out.records.iter().map(|r| r.barrier_violations).sum();
    let worst = out.records.iter().map(|r| r.barrier_worst).fold(f64::INFINITY, f64::min);
    Ok((if v == 0 { worst.max(0.0) } else { -(v as f64) }, format!("{v} violations, worst margin {worst:.3e}")))
}

fn s_inverse_decay(_opts: &VerifyOptions) -> Outcome {
    let out = preset_outcome("mink-s-inverse", |c| c.flow.s_end = 0.5)?;
    let m = out
        .records
        .iter()
        .filter(|r| r.s >= 0.05)
        .map(|r| (1.0 + 0.05) / r.s - r.sup_h_minus_h.powi(2))
        .fold(f64::INFINITY, f64::min);
    Ok((m, format!("min s⁻¹(1.05) − sup(H−ℋ)² = {m:.4e}")))
}

fn sign_preservation(_opts: &VerifyOptions) -> Outcome {
    let out = preset_outcome("mink-s-inverse", |c| c.flow.s_end = 0.5)?;
    let m = out.records.iter().map(|r| r.min_h_minus_h).fold(f64::INFINITY, f64::min);
    Ok((m + 1e-6, format!("min(H − ℋ) = {m:.4e}")))
}

fn kappa_boundedness(_opts: &VerifyOptions) -> Outcome {
    let out = preset_outcome("mink-perturbed-cmc", |c| c.flow.s_end = 0.5)?;
    let k0 = out.records.first().map_or(f64::NAN, |r| r.sup_kappa);
    let kmax = out.records.iter().map(|r| r.sup_kappa).fold(0.0, f64::max);
    Ok((1.5 * k0 - kmax, format!("sup κ(0) = {k0:.6}, sup_s sup κ = {kmax:.6}")))
}

/// Ratios `e(ε)/e(ε/2)` of the directional-derivative mismatch for `count`
/// random perturbations of a bumped hyperboloid under the example field.
pub fn linearization_ratios(seed: u64, count: usize) -> Result<Vec<f64>, GeomError> {
    let chart = MinkowskiRadial::new(2, RadialMap::Identity);
    let field = make_example_prescribed_h(chart);
    let flow = Flow::new(Background::Radial(&chart), &field);
    let grid = Grid::radial(2, 3.0, 41)?;
    let mut st = chart.hyperboloid(0.5, grid.clone());
    bump_radial(&grid, RadialMap::Identity, &mut st.w, 0.05);
    let floor = 1e-3;
    let coef = linearized_coefficients(&flow, &st, floor)?;
    let v0 = flow_velocity(&flow, &st, floor)?;
    let evolved = evolved_nodes(&grid);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (a, b, c) = (r.gen_range(-1.0..1.0), r.gen_range(0.5..3.0), r.gen_range(0.0..6.0));
        let phi: Vec<f64> = (0..grid.len())
            .map(|k| {
                if grid.is_boundary(k) {
                    0.0
                } else {
                    let x = grid.coords(k)[0];
                    a * (b * x + c).cos() * (-x * x).exp()
                }
            })
            .collect();
        let lin = apply_linearized(&coef, &grid, &phi)?;
        let mut e = [0.0f64; 2];
        for (ei, eps) in e.iter_mut().zip([1e-3, 5e-4]) {
            let mut p = st.clone();
            for k in 0..grid.len() {
                p.w[k] += eps * phi[k];
            }
            let v1 = flow_velocity(&flow, &p, floor)?;
            for &k in &evolved {
                *ei = ei.max((-(v1[k] - v0[k]) / eps - lin[k]).abs());
            }
        }
        out.push(e[0] / e[1]);
    }
    Ok(out)
}

fn linearization_consistency(opts: &VerifyOptions) -> Outcome {
    let r = linearization_ratios(opts.seed ^ 14, 100)?;
    let m = r.iter().map(|x| ratio_margin(*x, 1.6, 2.4)).fold(f64::INFINITY, f64::min);
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r.iter().copied().fold(0.0, f64::max);
    Ok((m, format!("O(ε) ratios in [{lo:.3}, {hi:.3}] over {} perturbations", r.len())))
}

fn spacelike_preserved(_opts: &VerifyOptions) -> Outcome {
    let chart = MinkowskiRadial::new(1, RadialMap::Identity);
    let field = ConstantField(40.0);
    let flow = Flow::new(Background::Radial(&chart), &field);
    let grid = Grid::radial(1, 2.0, 41)?;
    let st = Graph::from_fn(grid, |x| 0.3 * (-x[0] * x[0]).exp());
    let cfg = pmcf::FlowConfig {
        s_end: 2.0,
        record_every: 1,
        delta_floor: 0.05,
        ..pmcf::FlowConfig::default()
    };
    let run = pmcf::run_flow(&flow, &st, &cfg, &pmcf::DiagnosticsConfig::default())?;
    let qmin = run.records.iter().map(|r| r.q_min).fold(f64::INFINITY, f64::min);
    let aborted = matches!(run.termination, pmcf::Termination::Error(GeomError::SpacelikeViolation { .. }));
    let ok = qmin >= cfg.delta_floor && (aborted || run.termination.is_completed());
    Ok((
        if ok { qmin - cfg.delta_floor } else { -1.0 },
        format!("termination {}, min recorded q {qmin:.3e}", run.termination.reason()),
    ))
}

struct FoliationRun {
    series: pmcf::FoliationSeries<f64>,
    error: f64,
}

fn foliation_runs(opts: &VerifyOptions, within_window: bool) -> Result<Vec<FoliationRun>, GeomError> {
    let cases = [
        (FoliationCase::Hyperboloid, 3, 2.0, vec![0.1, 1.0, 3.0]),
        (FoliationCase::Isotropic, 2, 1.0, vec![0.5, 1.5]),
    ];
    cases
        .into_iter()
        .map(|(case, n, tau0, radii)| {
            let data = foliation_case(case, n, tau0, &radii, opts.sff_sign)?;
            let t_end = if within_window {
                data.constants.window(None)
            } else {
                match case {
                    FoliationCase::Hyperboloid => tau0 / 2.0,
                    FoliationCase::Isotropic => 1.0,
                }
            };
            let mut o = FoliationOptions::new(t_end, 1e-3);
            o.sample_every = 10;
            o.override_window = !within_window;
            let series = integrate_foliation(&data.init, data.curvature.as_ref(), data.constants, o)?;
            let error = closed_form_error(&series, &data.init, data.exact.as_ref())
                .into_iter()
                .map(|e| e.1)
                .fold(0.0, f64::max);
            Ok(FoliationRun { series, error })
        })
        .collect()
}

fn foliation_closed_form(opts: &VerifyOptions) -> Outcome {
    let runs = foliation_runs(opts, false)?;
    let worst = runs.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok((1e-8 - worst, format!("hyperboloid {:.3e}, tanh {:.3e}", runs[0].error, runs[1].error)))
}

fn foliation_envelope(opts: &VerifyOptions) -> Outcome {
    let mut m = f64::INFINITY;
    for r in foliation_runs(opts, true)? {
        let b = foliation_bounds_check(&r.series)?;
        let mm = b.worst_envelope_margin.min(b.worst_curvature_margin);
        m = m.min(if b.pass { mm.max(0.0) } else { mm.min(-1e-300) });
    }
    Ok((m, format!("worst margin {m:.3e}")))
}

fn foliation_symmetry(opts: &VerifyOptions) -> Outcome {
    let mut worst: f64 = 0.0;
    for r in foliation_runs(opts, false)? {
        for st in &r.series.states {
            for a in &st.a {
                worst = worst.max((a - a.transpose()).amax());
            }
        }
    }
    Ok((1e-12 - worst, format!("max |A − Aᵀ| = {worst:.3e}")))
}

fn foliation_chart(opts: &VerifyOptions) -> Outcome {
    let tau0 = 1.5;
    let radii = [0.5, 1.0, 2.0];
    let data = foliation_case(FoliationCase::Hyperboloid, 2, tau0, &radii, opts.sff_sign)?;
    let mut o = FoliationOptions::new(0.5, 1e-3);
    o.sample_every = 50;
    o.override_window = true;
    let s = integrate_foliation(&data.init, data.curvature.as_ref(), data.constants, o)?;
    let hyp = Hyperboloidal::new(2, tau0);
    let chart = WarpedChart::new(&hyp);
    let mut worst: f64 = 0.0;
    for (node, &r) in radii.iter().enumerate() {
        for t in [0.0, 0.123, 0.37, 0.5] {
            let m = s.metric_at_node(node, t)?;
            let e = chart.metric(&chart.equator_point(t, r))?;
            worst = worst.max((m - &e).amax() / e.amax());
        }
    }
    Ok((1e-8 - worst, format!("max relative deviation {worst:.3e}")))
}

fn frame_identity(_opts: &VerifyOptions) -> Outcome {
    let hyp = Hyperboloidal::new(2, 1.0);
    let frame = make_hyperboloid_frame().on(hyp);
    let grid = Grid::radial(2, 3.0, 61)?;
    let mut worst: f64 = 0.0;
    for w in [0.0, 0.5, -0.3] {
        let st = Graph::from_fn(grid.clone(), |_| w);
        let geom = graph_geometry(Background::Radial(&hyp), &st, Some(&frame), 1e-3)?;
        worst = geom.nodes.iter().map(|n| (n.kappa - 1.0).abs()).fold(worst, f64::max);
    }
    let hf = make_hyperboloid_frame();
    let g = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
    let mut tilt_err: f64 = 0.0;
    for (t, r) in [(1.0f64, 0.3f64), (2.5, 2.0), (5.0, 0.0)] {
        let tau = hf.tau(t, r)?;
        let fv = hf.frame(t, r)?;
        let v = tilt_factor(&g, &DVector::from_vec(vec![1.0, 0.0]), &DVector::from_vec(fv.to_vec()))?;
        tilt_err = tilt_err.max((v - t / tau).abs());
    }
    let m = (1e-10 - worst).min(1e-12 - tilt_err);
    Ok((m, format!("max |κ − 1| on S_τ {worst:.3e}, tilt vs t/τ {tilt_err:.3e}")))
}

/// `(min ⟨∇ℋ, w⟩, sup_{S_{1/2}} |ℋ − 2|)` for the example field over
/// `samples` random future timelike `w` at random points of the future cone.
pub fn example_h_stats(seed: u64, samples: usize) -> Result<(f64, f64), GeomError> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut min_dot = f64::INFINITY;
    for _ in 0..samples {
        let rad = r.gen_range(0.0..6.0);
        let t = rad + r.gen_range(0.01..3.0);
        let (_, ft, fr) = ExampleCurvature.eval(t, rad)?;
        let wr: f64 = r.gen_range(-1.0..1.0);
        let wt = wr.abs() * r.gen_range(1.0..4.0) + 1e-9;
        min_dot = min_dot.min(ft * wt + fr * wr);
    }
    let chart = MinkowskiRadial::new(1, RadialMap::Identity);
    let field = make_example_prescribed_h(chart);
    let grid = Grid::radial(1, 10.0, 2001)?;
    let mut sup: f64 = 0.0;
    for k in 0..grid.len() {
        let rad = grid.coords(k)[0];
        let t = (0.25 + rad * rad).sqrt();
        sup = sup.max((field.value(&[t, rad])? - 2.0).abs());
    }
    Ok((min_dot, sup))
}

fn example_h_bound(opts: &VerifyOptions) -> Outcome {
    let (min_dot, sup) = example_h_stats(opts.seed ^ 21, 100_000)?;
    let bound = (-0.5f64).exp();
    Ok((min_dot.min(bound - sup), format!("min ⟨∇ℋ,w⟩ {min_dot:.3e}, sup |ℋ−2| {sup:.6} ≤ {bound:.6}")))
}

/// Largest static-frame component of the Schwarzschild curvature at `x`.
pub fn static_frame_curvature(m: f64, x: f64) -> Result<f64, GeomError> {
    let chart = make_schwarzschild_chart(m);
    let p = [0.0, x, FRAC_PI_2, 0.0];
    let r = riemann_at(&chart, &p)?;
    let e = chart.static_frame(&p)?;
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut v = 0.0;
                    for i in 0..4 {
                        for j in 0..4 {
                            for k in 0..4 {
                                for l in 0..4 {
                                    v += r.get(i, j, k, l) * e[a][i] * e[b][j] * e[c][k] * e[d][l];
                                }
                            }
                        }
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    Ok(worst)
}

fn schwarzschild_curvature_decay(_opts: &VerifyOptions) -> Outcome {
    let mut m = f64::INFINITY;
    let mut d = Vec::new();
    for x in [0.1, 0.05] {
        let ratio = static_frame_curvature(1.0, x)? / static_frame_curvature(1.0, x / 2.0)?;
        m = m.min(ratio_margin(ratio, 8.0 * 0.8, 8.0 * 1.2));
        d.push(format!("{ratio:.3}"));
    }
    Ok((m, format!("x³ ratios [{}]", d.join(", "))))
}

fn lst_spacelike(_opts: &VerifyOptions) -> Outcome {
    let s = LstSurface::new(ConstantOnSphere(0.0), 1.0);
    let chart = make_schwarzschild_chart(1.0);
    let mut worst = f64::INFINITY;
    for x in [0.05, 0.03, 0.01, 0.002] {
        let hx = 0.05 * x;
        let (pg, samples) = lst_embedding(&s, &[x - hx, x, x + hx], &[1.0, 1.2, 1.4], &[-0.2, 0.0, 0.2])?;
        let g = embedding_geometry(&chart, &pg, &samples, None)?;
        for nd in &g.geometry.nodes {
            let ev = nd.gamma.clone().symmetric_eigen().eigenvalues;
            let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
            worst = worst.min(lo);
        }
    }
    Ok((worst, format!("min eigenvalue of the induced metric {worst:.3e}")))
}

/// `max |(−P) − (sqrt(τ² + r²) − r)|` for `m = 0`, `f ≡ 0` at `x`.
pub fn lst_hyperboloid_defect(tau: f64, x: f64) -> f64 {
    let s = LstSurface::new(ConstantOnSphere(0.0), tau);
    let r = 1.0 / x;
    (-s.p(1.0, 0.0, x) - ((tau * tau + r * r).sqrt() - r)).abs()
}

fn lst_hyperboloid(_opts: &VerifyOptions) -> Outcome {
    let ratio = lst_hyperboloid_defect(1.0, 0.02) / lst_hyperboloid_defect(1.0, 0.01);
    Ok((ratio_margin(ratio, 6.4, 9.6), format!("O(x³) ratio {ratio:.3}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_by_substring() {
        let opts = VerifyOptions {
            filter: Some("tilt".into()),
            ..VerifyOptions::default()
        };
        let r = verify_suite(&opts);
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].name, "tilt-equivalence");
        assert!(r.pass, "{:?}", r.entries);
    }

    #[test]
    fn names_are_unique() {
        let mut n = check_names();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), CHECKS.len());
    }
}
