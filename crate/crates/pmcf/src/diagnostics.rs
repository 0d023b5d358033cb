//! Monitored quantities along a flow: sup-norms, the Ecker quantity, residuals
//! of the evolution identities, decay fits and barrier checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chart::TimeFunction;
use crate::engine::{evolved_nodes, Flow};
use crate::error::{GeomError, Result};
use crate::field::PrescribedCurvatureField;
use crate::grid::GraphState;
use crate::real::{c, Real};
use crate::surface::{
    box_d1, graph_geometry, radial_derivs, surface_gradient_sq, surface_laplacian, Background, Orientation,
    SurfaceGeometry,
};

/// Column order of the CSV series.
pub const CSV_HEADER: [&str; 12] = [
    "s",
    "sup_H_minus_h",
    "sup_kappa",
    "sup_A",
    "sup_phi",
    "u_min",
    "u_max",
    "q_min",
    "r1",
    "r6",
    "r7",
    "barrier_violations",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord<T> {
    pub s: T,
    pub sup_h_minus_h: T,
    /// Signed extremes of `σH − ℋ`.
    pub min_h_minus_h: T,
    pub max_h_minus_h: T,
    pub sup_kappa: T,
    pub sup_a: T,
    pub sup_phi: T,
    pub u_min: T,
    pub u_max: T,
    pub q_min: T,
    pub r1: T,
    pub r6: T,
    pub r7: T,
    pub barrier_violations: usize,
    pub barrier_worst: T,
    /// `max |(|∇u|²) − α^{−2}(κ² − 1)|` over evolved nodes.
    pub gradient_identity: T,
}

impl<T: Real> DiagnosticsRecord<T> {
    pub fn csv_row(&self) -> [String; 12] {
        let f = |v: T| format!("{}", v.f64());
        [
            f(self.s),
            f(self.sup_h_minus_h),
            f(self.sup_kappa),
            f(self.sup_a),
            f(self.sup_phi),
            f(self.u_min),
            f(self.u_max),
            f(self.q_min),
            f(self.r1),
            f(self.r6),
            f(self.r7),
            self.barrier_violations.to_string(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        [
            self.s,
            self.sup_h_minus_h,
            self.sup_kappa,
            self.sup_a,
            self.sup_phi,
            self.u_min,
            self.u_max,
            self.q_min,
        ]
        .iter()
        .all(|v| v.is_finite_real())
    }
}

/// One barrier profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Level<T> {
    Constant(T),
    Nodes(Vec<T>),
}

impl<T: Real> Level<T> {
    fn at(&self, k: usize) -> T {
        match self {
            Level::Constant(v) => *v,
            Level::Nodes(v) => v[k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec<T> {
    pub lower: Option<Level<T>>,
    pub upper: Option<Level<T>>,
    pub fatal: bool,
    /// Slack allowed beyond each profile.
    pub tolerance: T,
}

impl<T: Real> BarrierSpec<T> {
    pub fn levels(lower: T, upper: T) -> Result<Self> {
        let spec = Self {
            lower: Some(Level::Constant(lower)),
            upper: Some(Level::Constant(upper)),
            fatal: false,
            tolerance: T::zero(),
        };
        spec.validate(1)?;
        Ok(spec)
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        for l in [&self.lower, &self.upper].into_iter().flatten() {
            if let Level::Nodes(v) = l {
                if v.len() != nodes {
                    return Err(GeomError::Shape(format!(
                        "barrier profile has {} samples, surface has {nodes}",
                        v.len()
                    )));
                }
            }
        }
        if let (Some(lo), Some(up)) = (&self.lower, &self.upper) {
            if (0..nodes).any(|k| !(lo.at(k) < up.at(k))) {
                return Err(GeomError::Domain("lower barrier must lie below the upper barrier".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierFlags<T> {
    pub violations: usize,
    /// Most negative signed distance to the barriers (positive when inside).
    pub worst_margin: T,
}

pub fn barrier_check<T: Real>(u: &[T], spec: &BarrierSpec<T>) -> Result<BarrierFlags<T>> {
    spec.validate(u.len())?;
    let mut violations = 0;
    let mut worst: Option<T> = None;
    for (k, &v) in u.iter().enumerate() {
        let mut margin: Option<T> = None;
        if let Some(lo) = &spec.lower {
            margin = Some(v - lo.at(k));
        }
        if let Some(up) = &spec.upper {
            let m = up.at(k) - v;
            margin = Some(margin.map_or(m, |x| x.min(m)));
        }
        if let Some(m) = margin {
            if m < -spec.tolerance || !m.is_finite_real() {
                violations += 1;
            }
            worst = Some(worst.map_or(m, |x| x.min(m)));
        }
    }
    Ok(BarrierFlags {
        violations,
        worst_margin: worst.unwrap_or_else(T::zero),
    })
}

/// Options for diagnostics along a run.
#[derive(Clone)]
pub struct DiagnosticsConfig<'a, T: Real> {
    pub lambda: T,
    pub mu: T,
    /// Time function defining `u`, `κ`, `α`; `None` uses `t` and `∂_t`.
    pub frame: Option<&'a dyn TimeFunction<T>>,
    pub residuals: bool,
    pub barrier: Option<BarrierSpec<T>>,
    /// Run stops with a height escape when `u` leaves this interval.
    pub height_window: Option<(T, T)>,
    /// Keep a state snapshot every this many records (0: none).
    pub snapshot_every: usize,
}

impl<'a, T: Real> Default for DiagnosticsConfig<'a, T> {
    fn default() -> Self {
        Self {
            lambda: T::one(),
            mu: T::one(),
            frame: None,
            residuals: false,
            barrier: None,
            height_window: None,
            snapshot_every: 0,
        }
    }
}

/// `σH − ℋ` at every node.
pub fn curvature_excess<T: Real>(
    geom: &SurfaceGeometry<T>,
    field: &dyn PrescribedCurvatureField<T>,
    orientation: Orientation,
) -> Result<Vec<T>> {
    let sigma: T = orientation.sign();
    geom.nodes
        .iter()
        .zip(&geom.points)
        .map(|(g, p)| Ok(sigma * g.h - field.value(p)?))
        .collect()
}

/// `Φ = e^{λu}κ² + μ(σH − ℋ)²` per node.
pub fn ecker_quantity<T: Real>(
    geom: &SurfaceGeometry<T>,
    field: &dyn PrescribedCurvatureField<T>,
    orientation: Orientation,
    lambda: T,
    mu: T,
) -> Result<Vec<T>> {
    let f = curvature_excess(geom, field, orientation)?;
    Ok(geom
        .nodes
        .iter()
        .zip(f)
        .map(|(g, f)| (lambda * g.u).exp() * g.kappa * g.kappa + mu * f * f)
        .collect())
}

/// `|∇u|²_γ − α^{−2}(κ² − 1)` per node.
pub fn gradient_identity_residual<T: Real>(geom: &SurfaceGeometry<T>) -> Result<Vec<T>> {
    let u = geom.u();
    let g2 = surface_gradient_sq(geom, &u)?;
    Ok(geom
        .nodes
        .iter()
        .zip(g2)
        .map(|(n, g)| g - (n.kappa * n.kappa - T::one()) / (n.alpha * n.alpha))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals<T> {
    pub r1: T,
    pub r6: T,
    pub r7: T,
}

impl<T: Real> Residuals<T> {
    pub fn nan() -> Self {
        let v = T::from_f64(f64::NAN).unwrap_or_else(T::zero);
        Self { r1: v, r6: v, r7: v }
    }
}

/// Where the window's evaluation point sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowPosition {
    /// States at `s − ds, s, s + ds`; evaluated at the middle one.
    Center,
    /// States at `s, s + ds, s + 2ds`; evaluated at the first one.
    Start,
}

fn ricci_nu<T: Real>(bg: Background<'_, T>, p: &[T], nu: &DVector<T>) -> Result<T> {
    match bg {
        Background::Radial(chart) => {
            let r = chart.ricci_tr(p[0], p[1])?;
            let v = [nu[0], nu[1]];
            let mut s = T::zero();
            for a in 0..2 {
                for b in 0..2 {
                    s += r[a][b] * v[a] * v[b];
                }
            }
            Ok(s)
        }
        Background::Box(chart) => {
            let r = chart.ricci(p[0], &p[1..])?;
            Ok(nu.dot(&(&r * nu)))
        }
    }
}

/// Residuals of `∂ₛγ = 2fA`, `(∂ₛ − Δ)f = −(|A|² + Ric(ν,ν) + dℋ(ν))f` and
/// `∂ₛu = α^{−1}κf` for the graph flow, where `f = σH − ℋ` and the normal and
/// `A` are oriented by `σ`. Time derivatives at fixed `x` are corrected by the
/// tangential velocity `V_i = −(∂ₛw) w_i` of the graph parametrization.
/// Each residual is a max over evolved nodes.
/// Distance from Dirichlet edges below which residuals are not evaluated.
pub const RESIDUAL_DEPTH: usize = 3;

pub fn evolution_residuals<T: Real>(
    flow: &Flow<'_, T>,
    window: [&GraphState<T>; 3],
    position: WindowPosition,
    frame: Option<&dyn TimeFunction<T>>,
    delta_floor: T,
) -> Result<Residuals<T>> {
    for st in window {
        st.check_shape()?;
        if st.grid != window[0].grid {
            return Err(GeomError::Window("window states live on different grids".into()));
        }
    }
    let ds = window[1].s - window[0].s;
    let ds2 = window[2].s - window[1].s;
    // Spacing is compared up to rounding of the `s` values themselves.
    let tol = c::<T>(1e-9) * ds.abs() + c::<T>(16.0) * T::default_epsilon() * (window[0].s.abs() + window[2].s.abs());
    if !(ds > T::zero()) || (ds2 - ds).abs() > tol {
        return Err(GeomError::Window(format!(
            "states not equally spaced in s (steps {:.6e}, {:.6e})",
            ds.f64(),
            ds2.f64()
        )));
    }
    let geoms = window
        .iter()
        .map(|st| graph_geometry(flow.background, st, frame, delta_floor))
        .collect::<Result<Vec<_>>>()?;
    let m = match position {
        WindowPosition::Center => 1,
        WindowPosition::Start => 0,
    };
    let two = c::<T>(2.0);
    let d_s = |x0: T, x1: T, x2: T| match position {
        WindowPosition::Center => (x2 - x0) / (two * ds),
        WindowPosition::Start => (-c::<T>(3.0) * x0 + c::<T>(4.0) * x1 - x2) / (two * ds),
    };
    let sigma: T = flow.sigma();
    let grid = window[m].grid.clone();
    let len = grid.len();
    let geo = &geoms[m];
    let fs = geoms
        .iter()
        .map(|g| curvature_excess(g, flow.field, flow.orientation))
        .collect::<Result<Vec<_>>>()?;
    let f = &fs[m];
    let w = &window[m].w;
    let w_s: Vec<T> = (0..len).map(|k| d_s(window[0].w[k], window[1].w[k], window[2].w[k])).collect();
    let lap = surface_laplacian(geo, f)?;
    let u = geo.u();
    let n = grid.n;
    // Identities involve up to four derivatives of `w`; skip nodes whose
    // stencils reach the one-sided data at Dirichlet edges.
    let evolved = grid.deep_nodes(RESIDUAL_DEPTH);
    let mut res = Residuals {
        r1: T::zero(),
        r6: T::zero(),
        r7: T::zero(),
    };
    // Tangential velocity `V^k` in grid components.
    let v_up: Vec<DVector<T>> = (0..len)
        .map(|k| {
            if grid.is_radial() {
                let (w_r, _) = radial_derivs(w, k, grid.h[0]);
                DVector::from_element(1, -w_s[k] * w_r * geo.nodes[k].gamma_inv[(0, 0)])
            } else {
                let g = DVector::from_fn(n, |a, _| box_d1(&grid, w, k, a));
                &geo.nodes[k].gamma_inv * g * (-w_s[k])
            }
        })
        .collect();
    let deriv = |arr: &[T], k: usize, axis: usize| -> T {
        if grid.is_radial() {
            radial_derivs(arr, k, grid.h[0]).0
        } else {
            box_d1(&grid, arr, k, axis)
        }
    };
    let axes = grid.axes();
    let v_comp: Vec<Vec<T>> = (0..axes).map(|a| v_up.iter().map(|v| v[a]).collect()).collect();
    let v_of = |arr: &[T], k: usize| -> T {
        let mut s = T::zero();
        for a in 0..axes {
            s += v_up[k][a] * deriv(arr, k, a);
        }
        s
    };
    if grid.is_radial() {
        let h = grid.h[0];
        let g_rr: Vec<Vec<T>> = geoms.iter().map(|g| g.nodes.iter().map(|x| x.gamma[(0, 0)]).collect()).collect();
        // Angular coefficient `B`, which vanishes at the origin.
        let g_aa: Vec<Vec<T>> = geoms
            .iter()
            .map(|g| {
                g.nodes
                    .iter()
                    .enumerate()
                    .map(|(k, x)| if n > 1 && k > 0 { x.gamma[(1, 1)] } else { T::zero() })
                    .collect()
            })
            .collect();
        for &k in &evolved {
            let nd = &geo.nodes[k];
            let a_rr = sigma * nd.second_ff[(0, 0)];
            let e_rr;
            let mut norm2;
            if k == 0 {
                let dv = v_comp[0][1] / h;
                e_rr = d_s(g_rr[0][0], g_rr[1][0], g_rr[2][0]) - two * f[0] * a_rr - two * nd.gamma[(0, 0)] * dv;
                norm2 = T::from_usize_lossy(n) * (e_rr / nd.gamma[(0, 0)]).powi(2);
            } else {
                let (dg, _) = radial_derivs(&g_rr[m], k, h);
                let (dv, _) = radial_derivs(&v_comp[0], k, h);
                let vr = v_comp[0][k];
                e_rr = d_s(g_rr[0][k], g_rr[1][k], g_rr[2][k])
                    - two * f[k] * a_rr
                    - (vr * dg + two * nd.gamma[(0, 0)] * dv);
                norm2 = (e_rr / nd.gamma[(0, 0)]).powi(2);
                if n > 1 {
                    let (db, _) = radial_derivs(&g_aa[m], k, h);
                    let e_aa = d_s(g_aa[0][k], g_aa[1][k], g_aa[2][k])
                        - two * f[k] * sigma * nd.second_ff[(1, 1)]
                        - vr * db;
                    norm2 += T::from_usize_lossy(n - 1) * (e_aa / nd.gamma[(1, 1)]).powi(2);
                }
            }
            res.r1 = res.r1.max(norm2.sqrt());
        }
    } else {
        let comps: Vec<Vec<Vec<T>>> = (0..geoms.len())
            .map(|j| {
                (0..n * n)
                    .map(|ab| geoms[j].nodes.iter().map(|x| x.gamma[(ab / n, ab % n)]).collect())
                    .collect()
            })
            .collect();
        for &k in &evolved {
            let nd = &geo.nodes[k];
            let mut e = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let ab = i * n + j;
                    let mut lie = T::zero();
                    for kk in 0..n {
                        lie += v_up[k][kk] * box_d1(&grid, &comps[m][ab], k, kk);
                        lie += nd.gamma[(kk, j)] * box_d1(&grid, &v_comp[kk], k, i);
                        lie += nd.gamma[(i, kk)] * box_d1(&grid, &v_comp[kk], k, j);
                    }
                    e[(i, j)] = d_s(comps[0][ab][k], comps[1][ab][k], comps[2][ab][k])
                        - two * f[k] * sigma * nd.second_ff[(i, j)]
                        - lie;
                }
            }
            let gi = nd.gamma.clone().try_inverse().unwrap_or(nd.gamma_inv.clone());
            let me = &gi * &e;
            res.r1 = res.r1.max((&me * &me).trace().abs().sqrt());
        }
    }
    let us: Vec<Vec<T>> = geoms.iter().map(|g| g.u()).collect();
    for &k in &evolved {
        let nd = &geo.nodes[k];
        let p = &geo.points[k];
        let u_s = d_s(us[0][k], us[1][k], us[2][k]);
        let r7 = u_s - f[k] * sigma * nd.kappa / nd.alpha - v_of(&u, k);
        res.r7 = res.r7.max(r7.abs());
        let f_s = d_s(fs[0][k], fs[1][k], fs[2][k]);
        let grad = flow.field.gradient(p)?;
        let mut dh = T::zero();
        for (a, g) in grad.iter().enumerate() {
            dh += *g * nd.normal[a];
        }
        let coef = nd.a_norm_sq() + ricci_nu(flow.background, p, &nd.normal)? + sigma * dh;
        let r6 = f_s - v_of(f, k) - lap[k] + coef * f[k];
        res.r6 = res.r6.max(r6.abs());
    }
    Ok(res)
}

/// Geometry and diagnostics of one state.
pub fn record<T: Real>(
    flow: &Flow<'_, T>,
    state: &GraphState<T>,
    diag: &DiagnosticsConfig<'_, T>,
    delta_floor: T,
    residuals: Residuals<T>,
) -> Result<DiagnosticsRecord<T>> {
    let geom = graph_geometry(flow.background, state, diag.frame, delta_floor)?;
    let f = curvature_excess(&geom, flow.field, flow.orientation)?;
    let phi = ecker_quantity(&geom, flow.field, flow.orientation, diag.lambda, diag.mu)?;
    let gid = gradient_identity_residual(&geom)?;
    let evolved = evolved_nodes(&state.grid);
    let first = evolved.first().copied().unwrap_or(0);
    let mut rec = DiagnosticsRecord {
        s: state.s,
        sup_h_minus_h: T::zero(),
        min_h_minus_h: f[first],
        max_h_minus_h: f[first],
        sup_kappa: T::zero(),
        sup_a: T::zero(),
        sup_phi: T::zero(),
        u_min: geom.nodes[0].u,
        u_max: geom.nodes[0].u,
        q_min: T::one(),
        r1: residuals.r1,
        r6: residuals.r6,
        r7: residuals.r7,
        barrier_violations: 0,
        barrier_worst: T::zero(),
        gradient_identity: T::zero(),
    };
    for &k in &evolved {
        let nd = &geom.nodes[k];
        rec.sup_h_minus_h = rec.sup_h_minus_h.max(f[k].abs());
        rec.min_h_minus_h = rec.min_h_minus_h.min(f[k]);
        rec.max_h_minus_h = rec.max_h_minus_h.max(f[k]);
        rec.sup_kappa = rec.sup_kappa.max(nd.kappa);
        rec.sup_a = rec.sup_a.max(nd.a_norm_sq().max(T::zero()).sqrt());
        rec.sup_phi = rec.sup_phi.max(phi[k]);
        rec.gradient_identity = rec.gradient_identity.max(gid[k].abs());
    }
    let u = geom.u();
    for nd in &geom.nodes {
        rec.u_min = rec.u_min.min(nd.u);
        rec.u_max = rec.u_max.max(nd.u);
        rec.q_min = rec.q_min.min(nd.q);
    }
    if let Some(spec) = &diag.barrier {
        let b = barrier_check(&u, spec)?;
        rec.barrier_violations = b.violations;
        rec.barrier_worst = b.worst_margin;
    }
    Ok(rec)
}

/// Early-termination reason implied by a record, if any.
pub fn stop_reason<T: Real>(rec: &DiagnosticsRecord<T>, diag: &DiagnosticsConfig<'_, T>) -> Option<GeomError> {
    if let Some(spec) = &diag.barrier {
        if spec.fatal && rec.barrier_violations > 0 {
            return Some(GeomError::BarrierViolation {
                count: rec.barrier_violations,
                worst: rec.barrier_worst.f64(),
            });
        }
    }
    if let Some((lo, hi)) = diag.height_window {
        for u in [rec.u_min, rec.u_max] {
            if !(u >= lo && u <= hi) {
                return Some(GeomError::HeightEscape {
                    u: u.f64(),
                    lower: lo.f64(),
                    upper: hi.f64(),
                });
            }
        }
    }
    None
}

/// Least-squares fit `log v ≈ log C − rate·s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS of the log residuals.
    pub fit_residual: f64,
    pub samples: usize,
}

pub fn decay_fit<T: Real>(series: &[(T, T)], window: (T, T)) -> Result<DecayFit> {
    let pts: Vec<(f64, T)> = series
        .iter()
        .filter(|(s, _)| *s >= window.0 && *s <= window.1)
        .map(|(s, v)| (s.f64(), *v))
        .collect();
    if pts.len() < 8 {
        return Err(GeomError::InsufficientData(format!(
            "{} samples in [{}, {}], need at least 8",
            pts.len(),
            window.0.f64(),
            window.1.f64()
        )));
    }
    if let Some((s, v)) = pts.iter().find(|(_, v)| !(*v > T::zero())) {
        return Err(GeomError::NonPositiveValue { s: *s, value: v.f64() });
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.f64().ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(GeomError::InsufficientData("all samples share one s".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum::<f64>() / k).sqrt();
    Ok(DecayFit {
        rate: -slope,
        amplitude: icpt.exp(),
        fit_residual: rms,
        samples: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecker_arithmetic() {
        // e^{λu}κ² + μ f² with λ = 1, u = ln 2, κ = 2, μ = 3, f = 1
        let v = (1.0f64 * 2f64.ln()).exp() * 4.0 + 3.0;
        assert!((v - 11.0).abs() < 1e-12);
    }

    #[test]
    fn decay_exact_and_constant() {
        let s: Vec<(f64, f64)> = (0..20).map(|k| (k as f64 * 0.1, 2.5 * (-3.0 * k as f64 * 0.1).exp())).collect();
        let fit = decay_fit(&s, (0.0, 2.0)).unwrap();
        assert!((fit.rate - 3.0).abs() < 1e-10);
        assert!((fit.amplitude - 2.5).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, 0.7)).collect();
        assert!(decay_fit(&flat, (0.0, 30.0)).unwrap().rate.abs() < 1e-14);
    }

    #[test]
    fn decay_errors() {
        let s: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 1.0)).collect();
        assert!(matches!(decay_fit(&s, (0.0, 10.0)), Err(GeomError::InsufficientData(_))));
        let mut s: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 1.0)).collect();
        s[3].1 = 0.0;
        assert!(matches!(decay_fit(&s, (0.0, 10.0)), Err(GeomError::NonPositiveValue { .. })));
    }

    #[test]
    fn barrier_flags() {
        let spec = BarrierSpec::levels(0.8, 1.25).unwrap();
        let u = vec![0.9, 1.0, 1.2];
        assert_eq!(barrier_check(&u, &spec).unwrap().violations, 0);
        let u = vec![0.9, 1.3, 1.2];
        let b = barrier_check(&u, &spec).unwrap();
        assert_eq!(b.violations, 1);
        assert!((b.worst_margin + 0.05f64).abs() < 1e-12);
        assert!(BarrierSpec::levels(1.0, 0.5).is_err());
    }
}
