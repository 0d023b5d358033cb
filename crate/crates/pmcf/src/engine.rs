//! Graphical prescribed mean curvature flow over synchronous charts:
//! velocity, the linearized operator, explicit stepping and Newton solves for
//! stationary surfaces.
//!
//! With orientation sign `σ` the flow moves `F` by `(σH − ℋ)σν`, so the height
//! obeys `∂ₛw = V(w) = √q (H − σℋ)` and `ℱ(w) = ∂ₛw − V(w)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsConfig, DiagnosticsRecord, Residuals, WindowPosition};
use crate::error::{GeomError, Result};
use crate::field::PrescribedCurvatureField;
use crate::grid::{GraphState, SpatialGrid, Topology};
use crate::linalg::{dense_solve, thomas};
use crate::real::{c, Real};
use crate::surface::{
    box_derivs, box_point, graph_geometry, radial_derivs, radial_point, static_warps, Background, Orientation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk2,
    Rk4,
}

impl Integrator {
    pub fn order(self) -> usize {
        match self {
            Integrator::Euler => 1,
            Integrator::Rk2 => 2,
            Integrator::Rk4 => 4,
        }
    }
}

/// Boundary height as a function of `(s, node coordinates)`.
pub type Profile<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;

#[derive(Clone, Default)]
pub enum Boundary<T> {
    /// Boundary nodes keep their initial heights.
    #[default]
    PinInitial,
    PinProfile(Profile<T>),
}

impl<T> fmt::Debug for Boundary<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::PinInitial => write!(f, "PinInitial"),
            Boundary::PinProfile(_) => write!(f, "PinProfile(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowConfig<T> {
    pub cfl: T,
    pub integrator: Integrator,
    pub s_end: T,
    /// Steps between diagnostics records.
    pub record_every: usize,
    pub delta_floor: T,
    pub delta_warn: T,
    pub boundary: Boundary<T>,
    pub orientation: Orientation,
    pub max_steps: usize,
}

impl<T: Real> Default for FlowConfig<T> {
    fn default() -> Self {
        Self {
            cfl: c(0.2),
            integrator: Integrator::Euler,
            s_end: T::one(),
            record_every: 100,
            delta_floor: c(0.05),
            delta_warn: c(0.5),
            boundary: Boundary::PinInitial,
            orientation: Orientation::Future,
            max_steps: usize::MAX,
        }
    }
}

impl<T: Real> FlowConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GeomError::Domain(format!("flow config: {m}")));
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return bad("cfl must lie in (0, 1]");
        }
        if !(self.delta_floor > T::zero() && self.delta_floor < self.delta_warn && self.delta_warn < T::one()) {
            return bad("need 0 < delta_floor < delta_warn < 1");
        }
        if !(self.s_end >= T::zero()) {
            return bad("s_end must be non-negative");
        }
        if self.record_every == 0 {
            return bad("record_every must be positive");
        }
        Ok(())
    }
}

/// Background, prescribed field and orientation of a flow.
#[derive(Clone, Copy)]
pub struct Flow<'a, T: Real> {
    pub background: Background<'a, T>,
    pub field: &'a dyn PrescribedCurvatureField<T>,
    pub orientation: Orientation,
}

impl<'a, T: Real> Flow<'a, T> {
    pub fn new(background: Background<'a, T>, field: &'a dyn PrescribedCurvatureField<T>) -> Self {
        Self {
            background,
            field,
            orientation: Orientation::Future,
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub(crate) fn sigma(&self) -> T {
        self.orientation.sign()
    }
}

/// Nodes that evolve (everything except Dirichlet data).
pub fn evolved_nodes<T: Real>(grid: &SpatialGrid<T>) -> Vec<usize> {
    (0..grid.len()).filter(|&k| !grid.is_boundary(k)).collect()
}

/// Origin weight of the radial stability estimate: the spectral radius of the
/// discrete radial Laplacian times `h²`, divided by 4.
fn origin_weight<T: Real>(n: usize) -> T {
    match n {
        1 => T::one(),
        2 => c(1.25),
        _ => T::from_usize_lossy(n) / c::<T>(2.0),
    }
}

/// `V = √q (H − σℋ)` at every node (boundary nodes use one-sided stencils).
pub fn flow_velocity<T: Real>(flow: &Flow<'_, T>, state: &GraphState<T>, delta_floor: T) -> Result<Vec<T>> {
    let geom = graph_geometry(flow.background, state, None, delta_floor)?;
    let sigma = flow.sigma();
    geom.nodes
        .iter()
        .zip(&geom.points)
        .map(|(g, p)| Ok(g.q.sqrt() * (g.h - sigma * flow.field.value(p)?)))
        .collect()
}

struct StaticRadial<T> {
    inv_a: Vec<T>,
    a: Vec<T>,
    /// `A_r / 2A`.
    ar: Vec<T>,
    /// `(n − 1) B_r / 2AB`.
    ang: Vec<T>,
}

/// Step-rate estimate and spacelike margin of one velocity evaluation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rate<T> {
    /// `dt = cfl / rate` is the stable step.
    pub rate: T,
    pub q_min: T,
}

/// Velocity evaluator with per-run caches.
pub(crate) struct Kernel<'a, T: Real> {
    flow: Flow<'a, T>,
    grid: SpatialGrid<T>,
    coords: Vec<Vec<T>>,
    evolved: Vec<usize>,
    boundary: Vec<usize>,
    floor: T,
    stat: Option<StaticRadial<T>>,
    hconst: Option<T>,
}

impl<'a, T: Real> Kernel<'a, T> {
    pub fn new(flow: Flow<'a, T>, grid: &SpatialGrid<T>, floor: T) -> Result<Self> {
        flow.background.check_grid(grid)?;
        let stat = match flow.background {
            Background::Radial(chart) => static_warps(chart, grid)?.map(|ws| {
                let n = grid.n;
                let half = c::<T>(0.5);
                let mut st = StaticRadial {
                    inv_a: Vec::with_capacity(ws.len()),
                    a: Vec::with_capacity(ws.len()),
                    ar: Vec::with_capacity(ws.len()),
                    ang: Vec::with_capacity(ws.len()),
                };
                for (i, wp) in ws.iter().enumerate() {
                    st.a.push(wp.a);
                    st.inv_a.push(T::one() / wp.a);
                    st.ar.push(half * wp.a_r / wp.a);
                    st.ang.push(if n > 1 && i > 0 {
                        T::from_usize_lossy(n - 1) * half * wp.b_r / (wp.a * wp.b)
                    } else {
                        T::zero()
                    });
                }
                st
            }),
            Background::Box(_) => None,
        };
        Ok(Self {
            flow,
            coords: (0..grid.len()).map(|k| grid.coords(k)).collect(),
            evolved: evolved_nodes(grid),
            boundary: (0..grid.len()).filter(|&k| grid.is_boundary(k)).collect(),
            grid: grid.clone(),
            floor,
            stat,
            hconst: flow.field.constant(),
        })
    }

    fn field_at(&self, w: T, node: usize) -> Result<T> {
        match self.hconst {
            Some(v) => Ok(v),
            None => {
                let mut p = Vec::with_capacity(self.coords[node].len() + 1);
                p.push(w);
                p.extend_from_slice(&self.coords[node]);
                self.flow.field.value(&p)
            }
        }
    }

    fn violation(&self, node: usize, q: T) -> GeomError {
        GeomError::SpacelikeViolation {
            node,
            q: q.f64(),
            floor: self.floor.f64(),
        }
    }

    /// Velocity at evolved nodes; boundary entries are set to zero.
    pub fn velocity(&self, w: &[T], out: &mut [T]) -> Result<Rate<T>> {
        for &k in &self.boundary {
            out[k] = T::zero();
        }
        match (&self.stat, self.flow.background) {
            (Some(st), _) => self.velocity_static(st, w, out),
            (None, Background::Radial(chart)) => self.velocity_radial(chart, w, out),
            (None, Background::Box(chart)) => self.velocity_box(chart, w, out),
        }
    }

    fn velocity_static(&self, st: &StaticRadial<T>, w: &[T], out: &mut [T]) -> Result<Rate<T>> {
        let len = w.len();
        let h = self.grid.h[0];
        let two = c::<T>(2.0);
        let inv2h = T::one() / (two * h);
        let invh2 = T::one() / (h * h);
        let sigma = self.flow.sigma();
        let mut lam = T::zero();
        let mut qmin = T::one();
        let mut acc = T::zero();
        if let Some(hv) = self.hconst {
            let shv = sigma * hv;
            let (wl, wc, wr) = (&w[..len - 2], &w[1..len - 1], &w[2..]);
            let (a, ia, ar, ang) = (&st.a[1..len - 1], &st.inv_a[1..len - 1], &st.ar[1..len - 1], &st.ang[1..len - 1]);
            let o = &mut out[1..len - 1];
            // Independent lanes so the reductions vectorize.
            const L: usize = 4;
            let mut lam4 = [T::zero(); L];
            let mut q4 = [T::one(); L];
            let mut acc4 = [T::zero(); L];
            let m = len - 2;
            let node = |j: usize| {
                let p = (wr[j] - wl[j]) * inv2h;
                let s = (wr[j] + wl[j] - two * wc[j]) * invh2;
                let d = a[j] - p * p;
                let inv_d = T::one() / d;
                let q = d * ia[j];
                ((s - ar[j] * p) * inv_d + ang[j] * p - shv * q.sqrt(), inv_d, q)
            };
            let full = m - m % L;
            for j0 in (0..full).step_by(L) {
                for l in 0..L {
                    let (v, inv_d, q) = node(j0 + l);
                    o[j0 + l] = v;
                    acc4[l] += v;
                    lam4[l] = if lam4[l] > inv_d { lam4[l] } else { inv_d };
                    q4[l] = if q4[l] < q { q4[l] } else { q };
                }
            }
            for j in full..m {
                let (v, inv_d, q) = node(j);
                o[j] = v;
                acc4[0] += v;
                lam4[0] = if lam4[0] > inv_d { lam4[0] } else { inv_d };
                q4[0] = if q4[0] < q { q4[0] } else { q };
            }
            for l in 0..L {
                acc += acc4[l];
                lam = lam.max(lam4[l]);
                qmin = qmin.min(q4[l]);
            }
        } else {
            for i in 1..len - 1 {
                let p = (w[i + 1] - w[i - 1]) * inv2h;
                let s = (w[i + 1] + w[i - 1] - two * w[i]) * invh2;
                let d = st.a[i] - p * p;
                let inv_d = T::one() / d;
                let q = d * st.inv_a[i];
                let hv = self.field_at(w[i], i)?;
                let v = (s - st.ar[i] * p) * inv_d + st.ang[i] * p - sigma * hv * q.sqrt();
                out[i] = v;
                acc += v;
                lam = lam.max(inv_d);
                qmin = qmin.min(q);
            }
        }
        let n = T::from_usize_lossy(self.grid.n);
        out[0] = n * two * (w[1] - w[0]) * invh2 * st.inv_a[0] - sigma * self.field_at(w[0], 0)?;
        acc += out[0];
        if !(qmin >= self.floor) || !acc.is_finite_real() {
            for i in 1..len - 1 {
                let p = (w[i + 1] - w[i - 1]) * inv2h;
                let q = T::one() - p * p * st.inv_a[i];
                if !(q >= self.floor) || !out[i].is_finite_real() {
                    return Err(self.violation(i, q));
                }
            }
            return Err(self.violation(0, qmin));
        }
        let lam = lam.max(origin_weight::<T>(self.grid.n) * st.inv_a[0]);
        Ok(Rate {
            rate: lam * invh2,
            q_min: qmin,
        })
    }

    fn velocity_radial(&self, chart: &dyn crate::sync::RadialChart<T>, w: &[T], out: &mut [T]) -> Result<Rate<T>> {
        let n = self.grid.n;
        let h = self.grid.h[0];
        let sigma = self.flow.sigma();
        let mut lam = T::zero();
        let mut qmin = T::one();
        for &i in &self.evolved {
            let wp = chart.warp(w[i], self.coords[i][0])?;
            let (w_r, w_rr) = radial_derivs(w, i, h);
            let pt = radial_point(n, &wp, i == 0, w_r, w_rr);
            if !(pt.q >= self.floor) {
                return Err(self.violation(i, pt.q));
            }
            let hv = self.field_at(w[i], i)?;
            out[i] = pt.sqrt_q * (pt.h - sigma * hv);
            if !out[i].is_finite_real() {
                return Err(self.violation(i, pt.q));
            }
            let a = if i == 0 {
                origin_weight::<T>(n) / wp.a
            } else {
                T::one() / (wp.a * pt.q)
            };
            lam = lam.max(a);
            qmin = qmin.min(pt.q);
        }
        Ok(Rate {
            rate: lam / (h * h),
            q_min: qmin,
        })
    }

    fn velocity_box(&self, chart: &dyn crate::sync::BoxChart<T>, w: &[T], out: &mut [T]) -> Result<Rate<T>> {
        let n = self.grid.n;
        let sigma = self.flow.sigma();
        let mut rate = T::zero();
        let mut qmin = T::one();
        for &i in &self.evolved {
            let f = chart.fields(w[i], &self.coords[i])?;
            let (g, hh) = box_derivs(&self.grid, w, i);
            let pt = box_point(&f, &g, &hh)?;
            if !(pt.q >= self.floor) {
                return Err(self.violation(i, pt.q));
            }
            let hv = self.field_at(w[i], i)?;
            out[i] = pt.sqrt_q * (pt.h - sigma * hv);
            if !out[i].is_finite_real() {
                return Err(self.violation(i, pt.q));
            }
            let mut r = T::zero();
            for k in 0..n {
                for l in 0..n {
                    let v = pt.a_inv[(k, l)];
                    let hk = self.grid.h[k] * self.grid.h[l];
                    r += if k == l { v / hk } else { v.abs() / hk };
                }
            }
            rate = rate.max(r);
            qmin = qmin.min(pt.q);
        }
        Ok(Rate { rate, q_min: qmin })
    }
}

/// Stage buffers and pinned boundary data for one run.
struct Stepper<'a, T: Real> {
    kernel: Kernel<'a, T>,
    integrator: Integrator,
    pins: Vec<(usize, T)>,
    profile: Option<Profile<T>>,
    k: [Vec<T>; 4],
    y: Vec<T>,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(flow: Flow<'a, T>, initial: &GraphState<T>, config: &FlowConfig<T>) -> Result<Self> {
        let kernel = Kernel::new(flow, &initial.grid, config.delta_floor)?;
        let len = initial.w.len();
        let pins = kernel.boundary.iter().map(|&k| (k, initial.w[k])).collect();
        let profile = match &config.boundary {
            Boundary::PinInitial => None,
            Boundary::PinProfile(p) => Some(p.clone()),
        };
        Ok(Self {
            kernel,
            integrator: config.integrator,
            pins,
            profile,
            k: [vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len]],
            y: vec![T::zero(); len],
        })
    }

    fn pin(&self, w: &mut [T], s: T) {
        match &self.profile {
            None => {
                for &(k, v) in &self.pins {
                    w[k] = v;
                }
            }
            Some(p) => {
                for &(k, _) in &self.pins {
                    w[k] = p(s, &self.kernel.coords[k]);
                }
            }
        }
    }

    /// Evaluates the first stage at `w` and returns the stable step rate.
    fn rate(&mut self, w: &[T]) -> Result<Rate<T>> {
        let mut k0 = std::mem::take(&mut self.k[0]);
        let r = self.kernel.velocity(w, &mut k0);
        self.k[0] = k0;
        r
    }

    /// Completes a step of size `dt` from `w` (first stage already in `k[0]`).
    fn finish(&mut self, w: &[T], s: T, dt: T, out: &mut [T]) -> Result<()> {
        let half = c::<T>(0.5);
        let len = w.len();
        match self.integrator {
            Integrator::Euler => {
                let k0 = &self.k[0];
                for i in 0..len {
                    out[i] = w[i] + dt * k0[i];
                }
            }
            Integrator::Rk2 => {
                for i in 0..len {
                    self.y[i] = w[i] + dt * self.k[0][i];
                }
                let mut y = std::mem::take(&mut self.y);
                self.pin(&mut y, s + dt);
                let mut k1 = std::mem::take(&mut self.k[1]);
                let r = self.kernel.velocity(&y, &mut k1);
                self.y = y;
                self.k[1] = k1;
                r?;
                for i in 0..len {
                    out[i] = w[i] + half * dt * (self.k[0][i] + self.k[1][i]);
                }
            }
            Integrator::Rk4 => {
                let offsets = [half, half, T::one()];
                for stage in 0..3 {
                    let f = offsets[stage] * dt;
                    for i in 0..len {
                        self.y[i] = w[i] + f * self.k[stage][i];
                    }
                    let mut y = std::mem::take(&mut self.y);
                    self.pin(&mut y, s + f);
                    let mut kn = std::mem::take(&mut self.k[stage + 1]);
                    let r = self.kernel.velocity(&y, &mut kn);
                    self.y = y;
                    self.k[stage + 1] = kn;
                    r?;
                }
                let sixth = dt / c::<T>(6.0);
                let two = c::<T>(2.0);
                for i in 0..len {
                    out[i] = w[i] + sixth * (self.k[0][i] + two * (self.k[1][i] + self.k[2][i]) + self.k[3][i]);
                }
            }
        }
        self.pin(out, s + dt);
        Ok(())
    }

    /// One full step with an explicit `dt`.
    fn step_with(&mut self, w: &[T], s: T, dt: T, out: &mut [T]) -> Result<Rate<T>> {
        let r = self.rate(w)?;
        self.finish(w, s, dt, out)?;
        Ok(r)
    }
}

fn stable_dt<T: Real>(cfl: T, rate: Rate<T>) -> Result<T> {
    let dt = if rate.rate > T::zero() {
        cfl / rate.rate
    } else {
        T::zero()
    };
    if !(dt >= c::<T>(1e-14)) {
        return Err(GeomError::StepTooSmall(dt.f64()));
    }
    Ok(dt)
}

/// Stable step `dt = cfl / rate` at `state`.
pub fn stable_step<T: Real>(flow: &Flow<'_, T>, state: &GraphState<T>, config: &FlowConfig<T>) -> Result<T> {
    let kernel = Kernel::new(flow.with_orientation(config.orientation), &state.grid, config.delta_floor)?;
    let mut out = vec![T::zero(); state.w.len()];
    stable_dt(config.cfl, kernel.velocity(&state.w, &mut out)?)
}

/// One explicit step with the CFL-limited `dt`, clipped so that `s` does not
/// pass `config.s_end`.
pub fn step<T: Real>(flow: &Flow<'_, T>, state: &GraphState<T>, config: &FlowConfig<T>) -> Result<GraphState<T>> {
    config.validate()?;
    state.check_shape()?;
    let flow = flow.with_orientation(config.orientation);
    let mut st = Stepper::new(flow, state, config)?;
    let r = st.rate(&state.w)?;
    let mut dt = stable_dt(config.cfl, r)?;
    if state.s + dt > config.s_end && config.s_end > state.s {
        dt = config.s_end - state.s;
    }
    let mut out = vec![T::zero(); state.w.len()];
    st.finish(&state.w, state.s, dt, &mut out)?;
    let next = GraphState {
        grid: state.grid.clone(),
        w: out,
        s: state.s + dt,
    };
    let mut scratch = vec![T::zero(); next.w.len()];
    st.kernel.velocity(&next.w, &mut scratch)?;
    Ok(next)
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    MaxSteps,
    Error(GeomError),
}

impl Termination {
    pub fn reason(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::MaxSteps => "max_steps",
            Termination::Error(e) => e.reason(),
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

/// Result of [`run_flow`].
#[derive(Debug, Clone)]
pub struct FlowRun<T: Real> {
    pub records: Vec<DiagnosticsRecord<T>>,
    /// Last spacelike state reached.
    pub final_state: GraphState<T>,
    pub termination: Termination,
    pub steps: usize,
    /// Steps whose margin fell below `delta_warn`.
    pub warnings: usize,
    pub snapshots: Vec<GraphState<T>>,
}

impl<T: Real> FlowRun<T> {
    /// `(s, sup|H − ℋ|)` pairs of the records.
    pub fn excess_series(&self) -> Vec<(T, T)> {
        self.records.iter().map(|r| (r.s, r.sup_h_minus_h)).collect()
    }
}

/// Time-steps the flow from `initial` to `config.s_end`, recording
/// diagnostics every `config.record_every` steps and at the end.
pub fn run_flow<T: Real>(
    flow: &Flow<'_, T>,
    initial: &GraphState<T>,
    config: &FlowConfig<T>,
    diag: &DiagnosticsConfig<'_, T>,
) -> Result<FlowRun<T>> {
    config.validate()?;
    initial.check_shape()?;
    let flow = flow.with_orientation(config.orientation);
    let mut st = Stepper::new(flow, initial, config)?;
    let grid = initial.grid.clone();
    let len = initial.w.len();
    let mut w = initial.w.clone();
    st.pin(&mut w, initial.s);
    let mut prev = w.clone();
    let mut s = initial.s;
    let mut last_dt = T::zero();
    let mut run = FlowRun {
        records: Vec::new(),
        final_state: GraphState {
            grid: grid.clone(),
            w: w.clone(),
            s,
        },
        termination: Termination::Completed,
        steps: 0,
        warnings: 0,
        snapshots: Vec::new(),
    };
    // Validates the initial state.
    let r0 = st.rate(&w)?;
    if r0.q_min < config.delta_warn {
        run.warnings += 1;
    }
    // Rate of `w` whose first stage is still in the stepper.
    let mut cached = Some(r0);
    let mut next = vec![T::zero(); len];
    let mut steps = 0usize;
    loop {
        let at_record = steps.is_multiple_of(config.record_every);
        let done = s >= config.s_end;
        if at_record || done {
            let state = GraphState {
                grid: grid.clone(),
                w: w.clone(),
                s,
            };
            let window = if diag.residuals {
                cached = None;
                match residual_window(&mut st, &grid, &prev, &w, s, last_dt, steps == 0, config) {
                    Ok(win) => Some(win),
                    Err(e) => {
                        run.termination = Termination::Error(e);
                        break;
                    }
                }
            } else {
                None
            };
            let res = match &window {
                Some((states, pos)) => match diagnostics::evolution_residuals(
                    &flow,
                    [&states[0], &states[1], &states[2]],
                    *pos,
                    diag.frame,
                    config.delta_floor,
                ) {
                    Ok(r) => Some(r),
                    Err(e) => {
                        run.termination = Termination::Error(e);
                        break;
                    }
                },
                None => None,
            };
            match diagnostics::record(&flow, &state, diag, config.delta_floor, res.unwrap_or_else(Residuals::nan)) {
                Ok(rec) => {
                    let stop = diagnostics::stop_reason(&rec, diag);
                    if diag.snapshot_every > 0 && run.records.len() % diag.snapshot_every == 0 {
                        run.snapshots.push(state.clone());
                    }
                    run.records.push(rec);
                    if let Some(e) = stop {
                        run.termination = Termination::Error(e);
                        break;
                    }
                }
                Err(e) => {
                    run.termination = Termination::Error(e);
                    break;
                }
            }
            if done {
                break;
            }
        }
        if steps >= config.max_steps {
            run.termination = Termination::MaxSteps;
            break;
        }
        let r = match cached.take().map_or_else(|| st.rate(&w), Ok) {
            Ok(r) => r,
            Err(e) => {
                run.termination = Termination::Error(e);
                break;
            }
        };
        if r.q_min < config.delta_warn {
            run.warnings += 1;
        }
        let mut dt = match stable_dt(config.cfl, r) {
            Ok(dt) => dt,
            Err(e) => {
                run.termination = Termination::Error(e);
                break;
            }
        };
        let rest = config.s_end - s;
        let last = dt >= rest;
        if last {
            dt = rest;
        } else if dt + dt > rest {
            // two equal steps rather than a full one and a sliver
            dt = rest / c::<T>(2.0);
        }
        if let Err(e) = st.finish(&w, s, dt, &mut next) {
            run.termination = Termination::Error(e);
            break;
        }
        std::mem::swap(&mut prev, &mut w);
        std::mem::swap(&mut w, &mut next);
        s = if last { config.s_end } else { s + dt };
        last_dt = dt;
        steps += 1;
        // The state just produced must be spacelike before it is accepted.
        match st.rate(&w) {
            Ok(r) => cached = Some(r),
            Err(e) => {
                std::mem::swap(&mut prev, &mut w);
                s -= dt;
                run.termination = Termination::Error(e);
                break;
            }
        }
    }
    run.steps = steps;
    run.final_state = GraphState { grid, w, s };
    Ok(run)
}

/// Three equally spaced states around the current one: the previous state
/// and a probe step of the same size, or two probe steps at the start.
#[allow(clippy::too_many_arguments)]
fn residual_window<T: Real>(
    st: &mut Stepper<'_, T>,
    grid: &SpatialGrid<T>,
    prev: &[T],
    w: &[T],
    s: T,
    last_dt: T,
    first: bool,
    config: &FlowConfig<T>,
) -> Result<([GraphState<T>; 3], WindowPosition)> {
    let mk = |w: Vec<T>, s: T| GraphState {
        grid: grid.clone(),
        w,
        s,
    };
    let len = w.len();
    if first || last_dt <= T::zero() {
        let dt = stable_dt(config.cfl, st.rate(w)?)?;
        let mut w1 = vec![T::zero(); len];
        st.step_with(w, s, dt, &mut w1)?;
        let mut w2 = vec![T::zero(); len];
        st.step_with(&w1, s + dt, dt, &mut w2)?;
        Ok(([mk(w.to_vec(), s), mk(w1, s + dt), mk(w2, s + dt + dt)], WindowPosition::Start))
    } else {
        let mut w1 = vec![T::zero(); len];
        st.step_with(w, s, last_dt, &mut w1)?;
        Ok((
            [mk(prev.to_vec(), s - last_dt), mk(w.to_vec(), s), mk(w1, s + last_dt)],
            WindowPosition::Center,
        ))
    }
}

/// Coefficients of `Dℱ_v φ = φₛ − a^{ij}φ_ij + b^kφ_k + cφ`, with coordinate
/// partials of `φ`. Radial grids use the polar frame (`1×1` blocks); at the
/// origin `a^{ij}φ_ij = n a φ_rr(0)` by symmetry.
#[derive(Debug, Clone)]
pub struct LinearizedCoefficients<T: Real> {
    pub a: Vec<DMatrix<T>>,
    pub b: Vec<DVector<T>>,
    pub c: Vec<T>,
}

pub fn linearized_coefficients<T: Real>(
    flow: &Flow<'_, T>,
    state: &GraphState<T>,
    delta_floor: T,
) -> Result<LinearizedCoefficients<T>> {
    state.check_shape()?;
    let grid = &state.grid;
    flow.background.check_grid(grid)?;
    let sigma = flow.sigma();
    let len = grid.len();
    let mut out = LinearizedCoefficients {
        a: Vec::with_capacity(len),
        b: Vec::with_capacity(len),
        c: Vec::with_capacity(len),
    };
    let w = &state.w;
    let half = c::<T>(0.5);
    let two = c::<T>(2.0);
    match flow.background {
        Background::Radial(chart) => {
            let n = grid.n;
            let nm1 = T::from_usize_lossy(n - 1);
            let h = grid.h[0];
            for i in 0..len {
                let r = grid.coords(i)[0];
                let wp = chart.warp(w[i], r)?;
                let p_pt = [w[i], r];
                let hv = flow.field.value(&p_pt)?;
                let ht = flow.field.gradient(&p_pt)?[0];
                let (p, s) = radial_derivs(w, i, h);
                let a = wp.a;
                if i == 0 {
                    let nn = T::from_usize_lossy(n);
                    let dv_dt = nn * half * wp.a_tt / a - nn * (s + half * wp.a_t) * wp.a_t / (a * a) - sigma * ht;
                    out.a.push(DMatrix::from_element(1, 1, T::one() / a));
                    out.b.push(DVector::zeros(1));
                    out.c.push(-dv_dt);
                    continue;
                }
                let d = a - p * p;
                let q = d / a;
                if !(q >= delta_floor) {
                    return Err(GeomError::SpacelikeViolation {
                        node: i,
                        q: q.f64(),
                        floor: delta_floor.f64(),
                    });
                }
                let sq = q.sqrt();
                let n1 = s - wp.a_r * p / (two * a) + half * wp.a_t - wp.a_t * p * p / a;
                let mut dv_dp = (-wp.a_r / (two * a) - two * wp.a_t * p / a) / d
                    + two * p * n1 / (d * d)
                    + sigma * hv * p / (a * sq);
                let n1_t = -wp.a_rt * p / (two * a) + wp.a_r * wp.a_t * p / (two * a * a) + half * wp.a_tt
                    - wp.a_tt * p * p / a
                    + wp.a_t * wp.a_t * p * p / (a * a);
                let sq_t = p * p * wp.a_t / (two * a * a * sq);
                let mut dv_dt = n1_t / d - n1 * wp.a_t / (d * d) - sigma * (hv * sq_t + sq * ht);
                if n > 1 {
                    let b = wp.b;
                    dv_dp += nm1 * wp.b_r / (two * a * b);
                    let t2 = wp.b_r * p / (two * a) + half * wp.b_t;
                    let t2_t = wp.b_rt * p / (two * a) - wp.b_r * p * wp.a_t / (two * a * a) + half * wp.b_tt;
                    dv_dt += nm1 * (t2_t / b - t2 * wp.b_t / (b * b));
                }
                out.a.push(DMatrix::from_element(1, 1, T::one() / d));
                out.b.push(DVector::from_element(1, -dv_dp));
                out.c.push(-dv_dt);
            }
        }
        Background::Box(chart) => {
            let n = grid.n;
            for i in 0..len {
                let x = grid.coords(i);
                let f = chart.fields(w[i], &x)?;
                let (wg, wh) = box_derivs(grid, w, i);
                let pt = box_point(&f, &wg, &wh)?;
                if !(pt.q >= delta_floor) {
                    return Err(GeomError::SpacelikeViolation {
                        node: i,
                        q: pt.q.f64(),
                        floor: delta_floor.f64(),
                    });
                }
                let mut p = vec![w[i]];
                p.extend_from_slice(&x);
                let hv = flow.field.value(&p)?;
                let ht = flow.field.gradient(&p)?[0];
                let (q, sq) = (pt.q, pt.sqrt_q);
                let ginv = &pt.ginv;
                let wu = &pt.w_up;
                let sm = &pt.hess;
                let am = &pt.a_inv;
                let gdot_up = -(ginv * &f.g_t * ginv);
                let gdd_up = (ginv * &f.g_t * ginv * &f.g_t * ginv) * two - ginv * &f.g_tt * ginv;
                let dd = wg.dot(&(&gdot_up * &wg));
                let d2 = wg.dot(&(&gdd_up * &wg));
                let gw = &gdot_up * &wg;
                let wsw = wu.dot(&(sm * wu));
                let gsw = ginv * (sm * wu);
                let mut b = DVector::zeros(n);
                for k in 0..n {
                    let mut ag = T::zero();
                    for a_ in 0..n {
                        for b_ in 0..n {
                            ag += am[(a_, b_)] * f.gamma.get(k, a_, b_);
                        }
                    }
                    let dq = two * gsw[k] / q + two * wu[k] * wsw / (q * q) - ag + wu[k] * dd / (q * q) + gw[k] / q;
                    b[k] = -dq - sigma * wu[k] * hv / sq;
                }
                let a_t = &gdot_up + (&gw * wu.transpose() + wu * gw.transpose()) / q + (wu * wu.transpose()) * (dd / (q * q));
                let s_t = DMatrix::from_fn(n, n, |a_, b_| {
                    let mut v = T::zero();
                    for k in 0..n {
                        v -= f.gamma_t.get(k, a_, b_) * wg[k];
                    }
                    v
                });
                let dq_dt = a_t.component_mul(sm).sum()
                    + am.component_mul(&s_t).sum()
                    + half * d2 / q
                    + half * dd * dd / (q * q)
                    + half * (&gdot_up * &f.g_t).trace()
                    + half * (ginv * &f.g_tt).trace();
                let cc = -dq_dt + sigma * (-dd * hv / (two * sq) + sq * ht);
                out.a.push(am.clone());
                out.b.push(b);
                out.c.push(cc);
            }
        }
    }
    Ok(out)
}

/// `−a^{ij}φ_ij + b^kφ_k + cφ` at evolved nodes; Dirichlet rows return `φ`.
pub fn apply_linearized<T: Real>(coef: &LinearizedCoefficients<T>, grid: &SpatialGrid<T>, phi: &[T]) -> Result<Vec<T>> {
    if phi.len() != grid.len() || coef.c.len() != grid.len() {
        return Err(GeomError::Shape("perturbation does not match the grid".into()));
    }
    let mut out = vec![T::zero(); grid.len()];
    for k in 0..grid.len() {
        if grid.is_boundary(k) {
            out[k] = phi[k];
            continue;
        }
        out[k] = if grid.is_radial() {
            let (pr, prr) = radial_derivs(phi, k, grid.h[0]);
            let a = coef.a[k][(0, 0)];
            let a = if k == 0 { a * T::from_usize_lossy(grid.n) } else { a };
            -a * prr + coef.b[k][0] * pr + coef.c[k] * phi[k]
        } else {
            let (g, hh) = box_derivs(grid, phi, k);
            -coef.a[k].component_mul(&hh).sum() + coef.b[k].dot(&g) + coef.c[k] * phi[k]
        };
    }
    Ok(out)
}

/// Nodes whose derivative stencils can involve `node`.
fn stencil_support<T: Real>(grid: &SpatialGrid<T>, node: usize) -> Vec<usize> {
    let k = grid.axes();
    let m = grid.nodes_per_axis as isize;
    let base = grid.multi_index(node);
    let mut out = Vec::new();
    let span = 7usize.pow(k as u32);
    'outer: for code in 0..span {
        let mut idx = base.clone();
        let mut cc = code;
        for a in 0..k {
            let d = (cc % 7) as isize - 3;
            cc /= 7;
            let j = base[a] as isize + d;
            let j = if grid.topology == Topology::BoxPeriodic {
                j.rem_euclid(m)
            } else if j < 0 || j >= m {
                continue 'outer;
            } else {
                j
            };
            idx[a] = j as usize;
        }
        out.push(grid.flat_index(&idx));
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Solves `Dℱ_v φ = rhs` (without `φₛ`), with `φ = rhs` on Dirichlet nodes.
pub fn solve_linearized<T: Real>(coef: &LinearizedCoefficients<T>, grid: &SpatialGrid<T>, rhs: &[T]) -> Result<Vec<T>> {
    let len = grid.len();
    if rhs.len() != len {
        return Err(GeomError::Shape("right-hand side does not match the grid".into()));
    }
    if grid.is_radial() {
        let h = grid.h[0];
        let two = c::<T>(2.0);
        let (mut lo, mut di, mut up) = (vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len]);
        for i in 0..len {
            if grid.is_boundary(i) {
                di[i] = T::one();
                continue;
            }
            let a = coef.a[i][(0, 0)];
            if i == 0 {
                let an = a * T::from_usize_lossy(grid.n) * two / (h * h);
                di[0] = an + coef.c[0];
                up[0] = -an;
                continue;
            }
            let b = coef.b[i][0];
            lo[i] = -a / (h * h) - b / (two * h);
            di[i] = two * a / (h * h) + coef.c[i];
            up[i] = -a / (h * h) + b / (two * h);
        }
        return thomas(&lo, &di, &up, rhs);
    }
    let mut m = DMatrix::zeros(len, len);
    let mut e = vec![T::zero(); len];
    for j in 0..len {
        e[j] = T::one();
        for i in stencil_support(grid, j) {
            if grid.is_boundary(i) {
                continue;
            }
            let (g, hh) = box_derivs(grid, &e, i);
            let v = -coef.a[i].component_mul(&hh).sum() + coef.b[i].dot(&g) + if i == j { coef.c[i] } else { T::zero() };
            m[(i, j)] = v;
        }
        e[j] = T::zero();
        if grid.is_boundary(j) {
            m[(j, j)] = T::one();
        }
    }
    dense_solve(m, rhs)
}

/// Newton iteration history.
#[derive(Debug, Clone)]
pub struct NewtonReport<T: Real> {
    pub state: GraphState<T>,
    pub iterations: usize,
    /// `sup|σH − ℋ|` over evolved nodes, before each iteration and at the end.
    pub residuals: Vec<T>,
}

pub const NEWTON_MAX_ITERATIONS: usize = 50;

/// `sup|σH − ℋ|` over evolved nodes of `state`.
pub fn curvature_residual<T: Real>(flow: &Flow<'_, T>, state: &GraphState<T>, delta_floor: T) -> Result<T> {
    let geom = graph_geometry(flow.background, state, None, delta_floor)?;
    let sigma = flow.sigma();
    let mut m = T::zero();
    for k in evolved_nodes(&state.grid) {
        let f = sigma * geom.nodes[k].h - flow.field.value(&geom.points[k])?;
        m = m.max(f.abs());
    }
    Ok(m)
}

/// Newton's method on `ℱ(w) = 0` with `∂ₛ ≡ 0`, keeping Dirichlet data.
pub fn stationary_solve<T: Real>(
    flow: &Flow<'_, T>,
    initial: &GraphState<T>,
    tol: T,
    max_iterations: usize,
    delta_floor: T,
) -> Result<NewtonReport<T>> {
    let mut state = initial.clone();
    let mut residuals = Vec::new();
    let evolved = evolved_nodes(&state.grid);
    for it in 0..=max_iterations {
        let res = curvature_residual(flow, &state, delta_floor)?;
        residuals.push(res);
        if res <= tol {
            return Ok(NewtonReport {
                state,
                iterations: it,
                residuals,
            });
        }
        if it == max_iterations {
            break;
        }
        let v = flow_velocity(flow, &state, delta_floor)?;
        let mut rhs = vec![T::zero(); v.len()];
        for &k in &evolved {
            rhs[k] = v[k];
        }
        let coef = linearized_coefficients(flow, &state, delta_floor)?;
        let phi = solve_linearized(&coef, &state.grid, &rhs)?;
        for &k in &evolved {
            state.w[k] += phi[k];
        }
        graph_geometry(flow.background, &state, None, delta_floor)?;
    }
    Err(GeomError::NoConvergence {
        iterations: max_iterations,
        residual: residuals.last().map(|v| v.f64()).unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ConstantField;
    use crate::spacetimes::{make_example_prescribed_h, DeSitterFlat, Hyperboloidal, Minkowski, MinkowskiRadial, RadialMap};

    fn bump(grid: &SpatialGrid<f64>, w: &mut [f64], amp: f64) {
        for k in evolved_nodes(grid) {
            let x = grid.coords(k);
            let r2: f64 = x.iter().map(|v| v * v).sum();
            w[k] += amp * (-r2).exp();
        }
    }

    #[test]
    fn fast_kernel_matches_reference_velocity() {
        for n in [1usize, 2, 3] {
            let chart = MinkowskiRadial::new(n, RadialMap::Sinh { scale: 0.7 });
            let grid = SpatialGrid::radial(n, 2.0, 41).unwrap();
            let mut st = chart.hyperboloid(0.7, grid.clone());
            bump(&grid, &mut st.w, 0.05);
            for field in [&ConstantField(1.3) as &dyn PrescribedCurvatureField<f64>, &make_example_prescribed_h(chart)] {
                let flow = Flow::new(Background::Radial(&chart), field).with_orientation(Orientation::Past);
                let reference = flow_velocity(&flow, &st, 1e-3).unwrap();
                let k = Kernel::new(flow, &grid, 1e-3).unwrap();
                assert!(k.stat.is_some());
                let mut out = vec![0.0; grid.len()];
                k.velocity(&st.w, &mut out).unwrap();
                for i in evolved_nodes(&grid) {
                    assert!((out[i] - reference[i]).abs() < 1e-11 * (1.0 + reference[i].abs()), "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn flat_slice_velocity_and_first_euler_step() {
        let chart = MinkowskiRadial::new(2, RadialMap::Identity);
        let grid = SpatialGrid::radial(2, 1.0, 11).unwrap();
        let st = GraphState::from_fn(grid, |_| 0.0f64);
        let field = ConstantField(0.4);
        let flow = Flow::new(Background::Radial(&chart), &field);
        assert!(flow_velocity(&flow, &st, 0.05).unwrap().iter().all(|v: &f64| (v + 0.4).abs() < 1e-15));
        let cfg: FlowConfig<f64> = FlowConfig { s_end: 10.0, ..FlowConfig::default() };
        let dt = stable_step(&flow, &st, &cfg).unwrap();
        let next = step(&flow, &st, &cfg).unwrap();
        assert!((next.s - dt as f64).abs() < 1e-15);
        for k in evolved_nodes(&next.grid) {
            assert!((next.w[k] + 0.4 * dt as f64).abs() < 1e-15f64);
        }
        assert_eq!(next.w[10], 0.0);
    }

    #[test]
    fn tilted_plane_coefficients() {
        let chart = Minkowski { n: 2 };
        let grid = SpatialGrid::boxed(&[0.0, 0.0], &[1.0, 1.0], 9, false).unwrap();
        let a = [0.36f64, 0.48];
        let st = GraphState::from_fn(grid, |x| a[0] * x[0] + a[1] * x[1]);
        let field = ConstantField(0.0);
        let flow = Flow::new(Background::Box(&chart), &field);
        let co = linearized_coefficients(&flow, &st, 0.05).unwrap();
        for k in 0..st.grid.len() {
            for i in 0..2 {
                for j in 0..2 {
                    let e = if i == j { 1.0 } else { 0.0 } + a[i] * a[j] / 0.64;
                    assert!((co.a[k][(i, j)] - e).abs() < 1e-13);
                }
                assert!(co.b[k][i].abs() < 1e-12);
            }
            assert!(co.c[k].abs() < 1e-12);
        }
    }

    fn consistency<F: Fn(&[f64]) -> f64>(flow: &Flow<'_, f64>, st: &GraphState<f64>, phi_fn: F) -> (f64, f64) {
        let grid = &st.grid;
        let phi: Vec<f64> = (0..grid.len())
            .map(|k| if grid.is_boundary(k) { 0.0 } else { phi_fn(&grid.coords(k)) })
            .collect();
        let co = linearized_coefficients(flow, st, 0.01).unwrap();
        let lin = apply_linearized(&co, grid, &phi).unwrap();
        let v0 = flow_velocity(flow, st, 0.01).unwrap();
        let mut errs = [0.0f64; 2];
        for (e, eps) in errs.iter_mut().zip([1e-3, 5e-4]) {
            let mut p = st.clone();
            for k in 0..grid.len() {
                p.w[k] += eps * phi[k];
            }
            let v1 = flow_velocity(flow, &p, 0.01).unwrap();
            for k in evolved_nodes(grid) {
                // ℱ = −V with ∂ₛ = 0
                let fd = -(v1[k] - v0[k]) / eps;
                *e = e.max((fd - lin[k]).abs());
            }
        }
        (errs[0], errs[1])
    }

    #[test]
    fn linearization_radial_charts() {
        let mink = MinkowskiRadial::new(3, RadialMap::Sinh { scale: 1.0 });
        let hyp = Hyperboloidal::new(2, 1.0);
        let ex = make_example_prescribed_h(mink);
        let exh = make_example_prescribed_h(hyp);
        let cases: Vec<(Background<'_, f64>, &dyn PrescribedCurvatureField<f64>, GraphState<f64>)> = vec![
            (Background::Radial(&mink), &ex, {
                let g = SpatialGrid::radial(3, 2.0, 33).unwrap();
                let mut s = mink.hyperboloid(1.0, g.clone());
                bump(&g, &mut s.w, 0.1);
                s
            }),
            (Background::Radial(&hyp), &exh, {
                let g = SpatialGrid::radial(2, 2.0, 33).unwrap();
                let mut s = GraphState::from_fn(g.clone(), |_| 0.0);
                bump(&g, &mut s.w, 0.1);
                s
            }),
        ];
        for (bg, field, st) in cases {
            for o in [Orientation::Future, Orientation::Past] {
                let flow = Flow::new(bg, field).with_orientation(o);
                let (e1, e2) = consistency(&flow, &st, |x| (x[0] * 1.7).cos() * (-x[0] * x[0]).exp());
                assert!(e1 < 1.0 && (e1 / e2 - 2.0).abs() < 0.2, "{} {e1} {e2}", bg.name());
            }
        }
    }

    #[test]
    fn linearization_box_charts() {
        let mink = Minkowski { n: 2 };
        let ds = DeSitterFlat { n: 2, hubble: 0.6 };
        let field = ConstantField(0.3);
        for bg in [Background::Box(&mink), Background::Box(&ds)] {
            for periodic in [false, true] {
                let hi = if periodic { std::f64::consts::TAU } else { 1.0 };
                let grid = SpatialGrid::boxed(&[0.0, 0.0], &[hi, hi], 12, periodic).unwrap();
                let st = GraphState::from_fn(grid, |x| 0.2 + 0.1 * x[0].sin() * x[1].cos() + 0.05 * (x[0] + 2.0 * x[1]).sin());
                let flow = Flow::new(bg, &field);
                let (e1, e2) = consistency(&flow, &st, |x| (x[0] - 0.3 * x[1]).sin() + 0.5);
                assert!(e1 < 1.0 && (e1 / e2 - 2.0).abs() < 0.2, "{} {e1} {e2}", bg.name());
            }
        }
    }

    #[test]
    fn newton_converges_quadratically() {
        let chart = MinkowskiRadial::new(2, RadialMap::Identity);
        let grid = SpatialGrid::radial(2, 6.0, 121).unwrap();
        let exact = chart.hyperboloid(1.0, grid.clone());
        let field = ConstantField(2.0);
        let flow = Flow::new(Background::Radial(&chart), &field);
        let mut st = exact.clone();
        bump(&grid, &mut st.w, 0.05);
        let rep = stationary_solve(&flow, &st, 1e-10, 50, 1e-3).unwrap();
        assert!(rep.iterations <= 8, "{:?}", rep.residuals);
        let r = &rep.residuals;
        let k = r.len();
        assert!(r[k - 2] < 1e-3 * r[k - 3].max(1e-12) || r[k - 2] < 1e-9, "{r:?}");
        let drift = (0..grid.len()).map(|i| (rep.state.w[i] - exact.w[i]).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-3);
    }

    #[test]
    fn newton_box() {
        let chart = Minkowski { n: 2 };
        let grid = SpatialGrid::boxed(&[-2.0, -2.0], &[2.0, 2.0], 17, false).unwrap();
        let exact = GraphState::from_fn(grid.clone(), |x: &[f64]| (1.0 + x[0] * x[0] + x[1] * x[1]).sqrt());
        let field = ConstantField(2.0);
        let flow = Flow::new(Background::Box(&chart), &field);
        let mut st = exact.clone();
        bump(&grid, &mut st.w, 0.05);
        let rep = stationary_solve(&flow, &st, 1e-10, 50, 1e-3).unwrap();
        assert!(rep.iterations <= 8, "{:?}", rep.residuals);
    }

    #[test]
    fn large_field_breaks_spacelikeness() {
        let chart = MinkowskiRadial::new(1, RadialMap::Identity);
        let grid = SpatialGrid::radial(1, 4.0, 41).unwrap();
        let st = chart.hyperboloid(1.0, grid);
        let field = ConstantField(40.0);
        let flow = Flow::new(Background::Radial(&chart), &field);
        let e = stationary_solve(&flow, &st, 1e-10, 50, 0.05).unwrap_err();
        assert_eq!(e.reason(), "SpacelikeViolation", "{e}");
    }
}
