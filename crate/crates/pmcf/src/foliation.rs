//! Gaussian normal foliation of an initial surface: per-node integration of
//!
//! ```text
//! ∂ₜ g_ij = 2 A_ij,    ∂ₜ A_ij = R̄_0i0j + g^kl A_ik A_jl
//! ```
//!
//! with the envelope `e^{−2b₀t} g₀ ≤ g ≤ e^{2b₀t} g₀`, `|A| ≤ b₀`,
//! `b₀ = 2(a₀² + c₀v₀²)^{1/2}`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::real::{c, Real};

/// Ambient curvature `R̄_0i0j` along the normal geodesic of `node` at
/// parameter `t`, given the current metric `g`.
pub trait FoliationCurvature<T: Real>: Send + Sync {
    fn r0i0j(&self, t: T, node: usize, g: &DMatrix<T>) -> DMatrix<T>;
}

impl<T: Real, F: Fn(T, usize, &DMatrix<T>) -> DMatrix<T> + Send + Sync> FoliationCurvature<T> for F {
    fn r0i0j(&self, t: T, node: usize, g: &DMatrix<T>) -> DMatrix<T> {
        self(t, node, g)
    }
}

/// `R̄ = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flat;

impl<T: Real> FoliationCurvature<T> for Flat {
    fn r0i0j(&self, _t: T, _node: usize, g: &DMatrix<T>) -> DMatrix<T> {
        DMatrix::zeros(g.nrows(), g.ncols())
    }
}

/// `R̄_0i0j = k g_ij`, the constant-curvature form.
#[derive(Debug, Clone, Copy)]
pub struct Isotropic<T>(pub T);

impl<T: Real> FoliationCurvature<T> for Isotropic<T> {
    fn r0i0j(&self, _t: T, _node: usize, g: &DMatrix<T>) -> DMatrix<T> {
        g * self.0
    }
}

/// Constants of the foliation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoliationConstants<T> {
    /// `sup |A|` on the initial surface.
    pub a0: T,
    /// `sup |||R̄|||`.
    pub c0: T,
    /// Initial tilt bound.
    pub v0: T,
    pub b0: T,
}

impl<T: Real> FoliationConstants<T> {
    pub fn new(a0: T, c0: T, v0: T) -> Self {
        let b0 = c::<T>(2.0) * (a0 * a0 + c0 * v0 * v0).sqrt();
        Self { a0, c0, v0, b0 }
    }

    /// `min{extent, ½C(n)(a₀² + c₀v₀²)^{−1/2}}` with `C(n) = 1`.
    pub fn window(&self, extent: Option<T>) -> T {
        let s = self.a0 * self.a0 + self.c0 * self.v0 * self.v0;
        let w = if s > T::zero() {
            c::<T>(0.5) / s.sqrt()
        } else {
            T::max_value().unwrap_or_else(|| c(1e300))
        };
        match extent {
            Some(a) if a < w => a,
            _ => w,
        }
    }
}

/// `(g, A)` at every node at parameter `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoliationState<T: Real> {
    pub t: T,
    pub g: Vec<DMatrix<T>>,
    pub a: Vec<DMatrix<T>>,
}

impl<T: Real> FoliationState<T> {
    pub fn new(g: Vec<DMatrix<T>>, a: Vec<DMatrix<T>>) -> Result<Self> {
        if g.len() != a.len() || g.iter().zip(&a).any(|(g, a)| !g.is_square() || g.shape() != a.shape()) {
            return Err(GeomError::Shape("g and A must be square and of matching shape at every node".into()));
        }
        Ok(Self { t: T::zero(), g, a })
    }

    /// `|A|` in the metric `g` at `node`.
    pub fn a_norm(&self, node: usize) -> Result<T> {
        g_norm(&self.g[node], &self.a[node])
    }

    /// `sup_nodes |A|`, the constant `a₀` when taken at `t = 0`.
    pub fn sup_a(&self) -> Result<T> {
        (0..self.g.len()).try_fold(T::zero(), |m, k| Ok(m.max(self.a_norm(k)?)))
    }

    /// Flattened `g` and `A` per node.
    pub fn to_json(&self) -> serde_json::Value {
        let flat = |m: &DMatrix<T>| m.iter().map(|v| v.f64()).collect::<Vec<_>>();
        serde_json::json!({
            "t": self.t.f64(),
            "nodes": self.g.iter().zip(&self.a).map(|(g, a)| serde_json::json!({"g": flat(g), "A": flat(a)})).collect::<Vec<_>>(),
        })
    }
}

fn g_norm<T: Real>(g: &DMatrix<T>, a: &DMatrix<T>) -> Result<T> {
    let ginv = crate::chart::inverse(g)?;
    let m = &ginv * a;
    Ok((&m * &m).trace().max(T::zero()).sqrt())
}

fn symmetrize<T: Real>(m: &mut DMatrix<T>) {
    let half = c::<T>(0.5);
    let s = (&*m + m.transpose()) * half;
    *m = s;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoliationOptions<T> {
    pub t_end: T,
    pub dt: T,
    /// Steps between emitted states; the final state is always emitted.
    pub sample_every: usize,
    /// Chart extent `a` entering the guaranteed window.
    pub extent: Option<T>,
    /// Integrate past the guaranteed window.
    pub override_window: bool,
}

impl<T: Real> FoliationOptions<T> {
    pub fn new(t_end: T, dt: T) -> Self {
        Self {
            t_end,
            dt,
            sample_every: 1,
            extent: None,
            override_window: false,
        }
    }
}

/// A series of foliation states starting at `t = 0`.
#[derive(Debug, Clone)]
pub struct FoliationSeries<T: Real> {
    pub constants: FoliationConstants<T>,
    pub states: Vec<FoliationState<T>>,
}

impl<T: Real> FoliationSeries<T> {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "a0": self.constants.a0.f64(),
            "c0": self.constants.c0.f64(),
            "v0": self.constants.v0.f64(),
            "b0": self.constants.b0.f64(),
            "states": self.states.iter().map(|s| s.to_json()).collect::<Vec<_>>(),
        })
    }

    /// Spacetime metric `−dt² + g(t)` at `node`, cubic Hermite in `t`
    /// between emitted samples (using `∂ₜg = 2A`).
    pub fn metric_at_node(&self, node: usize, t: T) -> Result<DMatrix<T>> {
        let st = &self.states;
        let (lo, hi) = (st[0].t.min(st[st.len() - 1].t), st[0].t.max(st[st.len() - 1].t));
        if t < lo || t > hi || node >= st[0].g.len() {
            return Err(GeomError::Domain(format!("t = {:.6} or node {node} outside the foliation series", t.f64())));
        }
        let k = st
            .windows(2)
            .position(|w| (w[0].t - t) * (w[1].t - t) <= T::zero())
            .unwrap_or(0);
        let g = if st.len() == 1 {
            st[0].g[node].clone()
        } else {
            let (s0, s1) = (&st[k], &st[k + 1]);
            let h = s1.t - s0.t;
            let x = (t - s0.t) / h;
            let two = c::<T>(2.0);
            let three = c::<T>(3.0);
            let h00 = two * x * x * x - three * x * x + T::one();
            let h10 = x * x * x - two * x * x + x;
            let h01 = -two * x * x * x + three * x * x;
            let h11 = x * x * x - x * x;
            &s0.g[node] * h00 + &s0.a[node] * (two * h * h10) + &s1.g[node] * h01 + &s1.a[node] * (two * h * h11)
        };
        let n = g.nrows();
        let mut out = DMatrix::zeros(n + 1, n + 1);
        out[(0, 0)] = -T::one();
        out.view_mut((1, 1), (n, n)).copy_from(&g);
        Ok(out)
    }
}

fn rhs<T: Real, R: FoliationCurvature<T> + ?Sized>(
    curv: &R,
    t: T,
    node: usize,
    g: &DMatrix<T>,
    a: &DMatrix<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let ginv = crate::chart::inverse(g)?;
    let mut da = curv.r0i0j(t, node, g) + a * &ginv * a;
    symmetrize(&mut da);
    Ok((a * c::<T>(2.0), da))
}

/// Classic RK4 per node from `init` to `t_end`. Stops with
/// `DegenerateMetric` when `det g` drops below `10⁻¹²` of its initial value.
pub fn integrate_foliation<T: Real, R: FoliationCurvature<T> + ?Sized>(
    init: &FoliationState<T>,
    curvature: &R,
    constants: FoliationConstants<T>,
    opts: FoliationOptions<T>,
) -> Result<FoliationSeries<T>> {
    if opts.dt <= T::zero() || !opts.dt.is_finite_real() || opts.sample_every == 0 {
        return Err(GeomError::Domain("dt must be positive and sample_every at least 1".into()));
    }
    let window = constants.window(opts.extent);
    if !opts.override_window && opts.t_end.abs() > window {
        return Err(GeomError::Domain(format!(
            "|t_end| = {:.6} exceeds the guaranteed window {:.6}",
            opts.t_end.f64(),
            window.f64()
        )));
    }
    let steps = (opts.t_end.abs() / opts.dt).ceil().to_usize().unwrap_or(0).max(1);
    let dt = opts.t_end / T::from_usize_lossy(steps);
    let det0: Vec<T> = init.g.iter().map(|g| g.determinant()).collect();
    let floor = c::<T>(1e-12);
    let half = c::<T>(0.5);
    let sixth = T::one() / c::<T>(6.0);
    let mut cur = init.clone();
    let mut states = vec![cur.clone()];
    for k in 1..=steps {
        let t = cur.t;
        for node in 0..cur.g.len() {
            let (g, a) = (&cur.g[node], &cur.a[node]);
            let (k1g, k1a) = rhs(curvature, t, node, g, a)?;
            let (k2g, k2a) = rhs(curvature, t + dt * half, node, &(g + &k1g * (dt * half)), &(a + &k1a * (dt * half)))?;
            let (k3g, k3a) = rhs(curvature, t + dt * half, node, &(g + &k2g * (dt * half)), &(a + &k2a * (dt * half)))?;
            let (k4g, k4a) = rhs(curvature, t + dt, node, &(g + &k3g * dt), &(a + &k3a * dt))?;
            let two = c::<T>(2.0);
            let mut ng = g + (k1g + &k2g * two + &k3g * two + k4g) * (dt * sixth);
            let mut na = a + (k1a + &k2a * two + &k3a * two + k4a) * (dt * sixth);
            symmetrize(&mut ng);
            symmetrize(&mut na);
            let ratio = ng.determinant() / det0[node];
            if !(ratio >= floor) || ng.clone().cholesky().is_none() {
                return Err(GeomError::DegenerateMetric {
                    node,
                    t: (t + dt).f64(),
                    ratio: ratio.f64(),
                });
            }
            cur.g[node] = ng;
            cur.a[node] = na;
        }
        cur.t = opts.t_end * T::from_usize_lossy(k) / T::from_usize_lossy(steps);
        if k % opts.sample_every == 0 || k == steps {
            states.push(cur.clone());
        }
    }
    Ok(FoliationSeries { constants, states })
}

/// Per-sample verdict of the envelope check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsSample {
    pub t: f64,
    pub pass: bool,
    /// `2b₀|t| − max |log λ|` over generalized eigenvalues of `g` against `g₀`.
    pub envelope_margin: f64,
    /// `b₀ − sup |A|`.
    pub curvature_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub samples: Vec<BoundsSample>,
    pub pass: bool,
    pub worst_envelope_margin: f64,
    pub worst_curvature_margin: f64,
}

/// Checks every sample of `series` against the envelope and the `|A|` bound.
pub fn foliation_bounds_check<T: Real>(series: &FoliationSeries<T>) -> Result<BoundsReport> {
    let b0 = series.constants.b0;
    let first = &series.states[0];
    let chol: Vec<_> = first
        .g
        .iter()
        .map(|g| g.clone().cholesky().map(|c| c.l()).ok_or_else(|| GeomError::NotSpacelike("g₀ not positive definite".into())))
        .collect::<Result<_>>()?;
    let tol = c::<T>(1e-12);
    let mut samples = Vec::with_capacity(series.states.len());
    for st in &series.states {
        let mut env = T::max_value().unwrap_or_else(|| c(1e300));
        let mut curv = env;
        for (node, l) in chol.iter().enumerate() {
            let linv = l.clone().try_inverse().ok_or_else(|| GeomError::Shape("singular g₀".into()))?;
            let m = &linv * &st.g[node] * linv.transpose();
            let eig = m.symmetric_eigenvalues();
            let worst = eig.iter().fold(T::zero(), |acc, &e| acc.max(e.ln().abs()));
            env = env.min(c::<T>(2.0) * b0 * st.t.abs() - worst);
            curv = curv.min(b0 - st.a_norm(node)?);
        }
        samples.push(BoundsSample {
            t: st.t.f64(),
            pass: env >= -tol && curv >= -tol,
            envelope_margin: env.f64(),
            curvature_margin: curv.f64(),
        });
    }
    Ok(BoundsReport {
        pass: samples.iter().all(|s| s.pass),
        worst_envelope_margin: samples.iter().map(|s| s.envelope_margin).fold(f64::INFINITY, f64::min),
        worst_curvature_margin: samples.iter().map(|s| s.curvature_margin).fold(f64::INFINITY, f64::min),
        samples,
    })
}
