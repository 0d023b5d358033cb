//! Concrete backgrounds, frames, fields and surfaces.

use nalgebra::{DMatrix, DVector};

use crate::chart::{ChartSpec, Christoffel, Riemann};
use crate::error::{GeomError, Result};
use crate::field::{MinkPoint, MinkowskiCoords, OnChart, RadialField};
use crate::grid::{GraphState, SpatialGrid};
use crate::real::{c, Real};
use crate::surface::ParamGrid;
use crate::sync::{BoxChart, RadialChart, SyncFields, Warp};

fn diag<T: Real>(d: Vec<T>) -> DMatrix<T> {
    DMatrix::from_diagonal(&DVector::from_vec(d))
}

/// Minkowski space `ℝ^{1,n}` in Cartesian coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Minkowski {
    pub n: usize,
}

pub fn make_minkowski_chart(n: usize) -> Minkowski {
    Minkowski { n }
}

impl<T: Real> ChartSpec<T> for Minkowski {
    fn dim(&self) -> usize {
        self.n + 1
    }
    fn name(&self) -> String {
        format!("minkowski{}", self.n)
    }
    fn metric(&self, _p: &[T]) -> Result<DMatrix<T>> {
        let mut d = vec![T::one(); self.n + 1];
        d[0] = -T::one();
        Ok(diag(d))
    }
    fn synchronous(&self) -> bool {
        true
    }
    fn christoffel(&self, _p: &[T]) -> Option<Result<Christoffel<T>>> {
        Some(Ok(Christoffel::zeros(self.n + 1)))
    }
    fn riemann(&self, _p: &[T]) -> Option<Result<Riemann<T>>> {
        Some(Ok(Riemann::zeros(self.n + 1)))
    }
}

impl<T: Real> BoxChart<T> for Minkowski {
    fn spatial_metric(&self, _t: T, _x: &[T]) -> Result<DMatrix<T>> {
        Ok(DMatrix::identity(self.n, self.n))
    }
    fn fields(&self, _t: T, _x: &[T]) -> Result<SyncFields<T>> {
        let n = self.n;
        Ok(SyncFields {
            g: DMatrix::identity(n, n),
            g_t: DMatrix::zeros(n, n),
            g_tt: DMatrix::zeros(n, n),
            gamma: Christoffel::zeros(n),
            gamma_t: Christoffel::zeros(n),
        })
    }
    fn ricci(&self, _t: T, _x: &[T]) -> Result<DMatrix<T>> {
        Ok(DMatrix::zeros(self.n + 1, self.n + 1))
    }
}

impl<T: Real> MinkowskiCoords<T> for Minkowski {
    fn minkowski(&self, p: &[T]) -> Result<MinkPoint<T>> {
        let r = p[1..].iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
        let mut dt = vec![T::zero(); p.len()];
        dt[0] = T::one();
        let mut dr = vec![T::zero(); p.len()];
        if r > T::zero() {
            for k in 1..p.len() {
                dr[k] = p[k] / r;
            }
        }
        Ok(MinkPoint { t: p[0], r, dt, dr })
    }
}

/// Radial coordinate map `R = R(ξ)` for the radial Minkowski chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialMap {
    Identity,
    /// `R = L sinh(ξ/L)`: spacing is uniform in hyperbolic angle for `L = τ₀`.
    Sinh { scale: f64 },
}

impl RadialMap {
    /// `(R, R′, R″)` at `ξ`.
    pub fn eval<T: Real>(&self, xi: T) -> (T, T, T) {
        match *self {
            RadialMap::Identity => (xi, T::one(), T::zero()),
            RadialMap::Sinh { scale } => {
                let l = c::<T>(scale);
                let z = xi / l;
                (l * z.sinh(), z.cosh(), z.sinh() / l)
            }
        }
    }

    /// `ξ` with `R(ξ) = r`.
    pub fn inverse<T: Real>(&self, r: T) -> T {
        match *self {
            RadialMap::Identity => r,
            RadialMap::Sinh { scale } => {
                let l = c::<T>(scale);
                let z = r / l;
                l * (z + (z * z + T::one()).sqrt()).ln()
            }
        }
    }
}

/// Minkowski space in polar coordinates `(t, ξ, angles)` with `r = R(ξ)`:
/// `A = R′²`, `B = R²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinkowskiRadial {
    pub n: usize,
    pub map: RadialMap,
}

impl MinkowskiRadial {
    pub fn new(n: usize, map: RadialMap) -> Self {
        Self { n, map }
    }

    /// `w = sqrt(τ₀² + R(ξ)²)` on a radial grid of this chart.
    pub fn hyperboloid<T: Real>(&self, tau0: T, grid: SpatialGrid<T>) -> GraphState<T> {
        let map = self.map;
        GraphState::from_fn(grid, move |x| {
            let r = map.eval(x[0]).0;
            (tau0 * tau0 + r * r).sqrt()
        })
    }
}

impl<T: Real> RadialChart<T> for MinkowskiRadial {
    fn n(&self) -> usize {
        self.n
    }
    fn name(&self) -> String {
        match self.map {
            RadialMap::Identity => format!("minkowski-radial{}", self.n),
            RadialMap::Sinh { scale } => format!("minkowski-radial{}-sinh{}", self.n, scale),
        }
    }
    fn warp_values(&self, _t: T, r: T) -> Result<(T, T)> {
        let (rr, d, _) = self.map.eval(r);
        Ok((d * d, rr * rr))
    }
    fn warp(&self, _t: T, r: T) -> Result<Warp<T>> {
        let (rr, d, dd) = self.map.eval(r);
        let two = c::<T>(2.0);
        let z = T::zero();
        Ok(Warp {
            a: d * d,
            b: rr * rr,
            a_r: two * d * dd,
            b_r: two * rr * d,
            a_t: z,
            b_t: z,
            a_tt: z,
            b_tt: z,
            a_rt: z,
            b_rt: z,
        })
    }
    fn is_static(&self) -> bool {
        true
    }
    fn ricci_tr(&self, _t: T, _r: T) -> Result<[[T; 2]; 2]> {
        Ok([[T::zero(); 2]; 2])
    }
}

impl<T: Real> MinkowskiCoords<T> for MinkowskiRadial {
    fn minkowski(&self, p: &[T]) -> Result<MinkPoint<T>> {
        let (r, d, _) = self.map.eval(p[1].abs());
        let mut dt = vec![T::zero(); p.len()];
        dt[0] = T::one();
        let mut dr = vec![T::zero(); p.len()];
        dr[1] = if p[1] < T::zero() { -d } else { d };
        Ok(MinkPoint { t: p[0], r, dt, dr })
    }
}

/// Gaussian normal chart of the hyperboloid `S_{τ₀}` in Minkowski space,
/// with geodesic polar radius `ρ` on the slice:
/// `g = s²(dρ² + τ₀² sinh²(ρ/τ₀) σ)`, `s = (τ₀ + t)/τ₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperboloidal {
    pub n: usize,
    pub tau0: f64,
}

impl Hyperboloidal {
    pub fn new(n: usize, tau0: f64) -> Self {
        Self { n, tau0 }
    }
}

impl<T: Real> RadialChart<T> for Hyperboloidal {
    fn n(&self) -> usize {
        self.n
    }
    fn name(&self) -> String {
        format!("hyperboloidal{}-tau{}", self.n, self.tau0)
    }
    fn warp_values(&self, t: T, r: T) -> Result<(T, T)> {
        let w = self.warp(t, r)?;
        Ok((w.a, w.b))
    }
    fn warp(&self, t: T, r: T) -> Result<Warp<T>> {
        let tau0 = c::<T>(self.tau0);
        if t <= -tau0 {
            return Err(GeomError::Domain(format!("t = {:.6} at or below the focal time", t.f64())));
        }
        let two = c::<T>(2.0);
        let s = (tau0 + t) / tau0;
        let st = T::one() / tau0;
        let z = r / tau0;
        let ss = tau0 * z.sinh();
        let ss_r = z.cosh();
        Ok(Warp {
            a: s * s,
            b: s * s * ss * ss,
            a_r: T::zero(),
            b_r: s * s * two * ss * ss_r,
            a_t: two * s * st,
            b_t: two * s * st * ss * ss,
            a_tt: two * st * st,
            b_tt: two * st * st * ss * ss,
            a_rt: T::zero(),
            b_rt: two * s * st * two * ss * ss_r,
        })
    }
    fn ricci_tr(&self, _t: T, _r: T) -> Result<[[T; 2]; 2]> {
        Ok([[T::zero(); 2]; 2])
    }
}

impl<T: Real> MinkowskiCoords<T> for Hyperboloidal {
    fn minkowski(&self, p: &[T]) -> Result<MinkPoint<T>> {
        let tau0 = c::<T>(self.tau0);
        let (t, rho) = (p[0], p[1]);
        if t <= -tau0 {
            return Err(GeomError::Domain("below the focal time".into()));
        }
        let z = rho / tau0;
        let s = (tau0 + t) / tau0;
        let mut dt = vec![T::zero(); p.len()];
        let mut dr = vec![T::zero(); p.len()];
        dt[0] = z.cosh();
        dt[1] = s * z.sinh();
        dr[0] = z.sinh();
        dr[1] = s * z.cosh();
        Ok(MinkPoint {
            t: (tau0 + t) * z.cosh(),
            r: (tau0 + t) * z.sinh(),
            dt,
            dr,
        })
    }
}

/// Flat slicing of de Sitter space, `G = −dt² + e^{2Ht} δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeSitterFlat {
    pub n: usize,
    pub hubble: f64,
}

impl<T: Real> ChartSpec<T> for DeSitterFlat {
    fn dim(&self) -> usize {
        self.n + 1
    }
    fn name(&self) -> String {
        format!("de-sitter{}", self.n)
    }
    fn metric(&self, p: &[T]) -> Result<DMatrix<T>> {
        let e = (c::<T>(2.0 * self.hubble) * p[0]).exp();
        let mut d = vec![e; self.n + 1];
        d[0] = -T::one();
        Ok(diag(d))
    }
    fn synchronous(&self) -> bool {
        true
    }
}

impl<T: Real> BoxChart<T> for DeSitterFlat {
    fn spatial_metric(&self, t: T, _x: &[T]) -> Result<DMatrix<T>> {
        Ok(DMatrix::identity(self.n, self.n) * (c::<T>(2.0 * self.hubble) * t).exp())
    }
    fn fields(&self, t: T, _x: &[T]) -> Result<SyncFields<T>> {
        let h = c::<T>(self.hubble);
        let g = DMatrix::identity(self.n, self.n) * (c::<T>(2.0) * h * t).exp();
        Ok(SyncFields {
            g_t: &g * (c::<T>(2.0) * h),
            g_tt: &g * (c::<T>(4.0) * h * h),
            g,
            gamma: Christoffel::zeros(self.n),
            gamma_t: Christoffel::zeros(self.n),
        })
    }
    fn ricci(&self, t: T, x: &[T]) -> Result<DMatrix<T>> {
        let mut p = vec![t];
        p.extend_from_slice(x);
        let h = c::<T>(self.hubble);
        Ok(self.metric(&p)? * (T::from_usize_lossy(self.n) * h * h))
    }
}

/// Hyperboloidal time function `τ = sqrt(t² − r²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HyperboloidTime;

impl<T: Real> RadialField<T> for HyperboloidTime {
    fn eval(&self, t: T, r: T) -> Result<(T, T, T)> {
        if t <= r.abs() {
            return Err(GeomError::Domain(format!(
                "point (t = {:.6}, r = {:.6}) outside the future cone",
                t.f64(),
                r.f64()
            )));
        }
        let tau = (t * t - r * r).sqrt();
        Ok((tau, t / tau, -r / tau))
    }
}

/// Time function `τ`, lapse `α ≡ 1`, frame `T = (t∂_t + r∂_r)/τ` and proper
/// function `ρ = log(r + 2)` inside the future light cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HyperboloidFrame;

pub fn make_hyperboloid_frame() -> HyperboloidFrame {
    HyperboloidFrame
}

impl HyperboloidFrame {
    pub fn tau<T: Real>(&self, t: T, r: T) -> Result<T> {
        Ok(HyperboloidTime.eval(t, r)?.0)
    }

    /// Lapse from `α^{-2} = −⟨∇τ, ∇τ⟩`.
    pub fn lapse<T: Real>(&self, t: T, r: T) -> Result<T> {
        let (_, a, b) = HyperboloidTime.eval(t, r)?;
        Ok(T::one() / (a * a - b * b).sqrt())
    }

    /// Frame vector in Minkowski polar components `(T^t, T^r)`.
    pub fn frame<T: Real>(&self, t: T, r: T) -> Result<[T; 2]> {
        let tau = self.tau(t, r)?;
        Ok([t / tau, r / tau])
    }

    pub fn rho<T: Real>(&self, r: T) -> T {
        (r + c::<T>(2.0)).ln()
    }

    /// The time function expressed in the coordinates of `chart`.
    pub fn on<C>(&self, chart: C) -> OnChart<HyperboloidTime, C> {
        OnChart::new(HyperboloidTime, chart)
    }
}

/// `ℋ = 2 − e^{−4t + sqrt(r² + 1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExampleCurvature;

impl ExampleCurvature {
    pub fn f<T: Real>(&self, t: T, r: T) -> T {
        (-c::<T>(4.0) * t + (r * r + T::one()).sqrt()).exp()
    }
}

impl<T: Real> RadialField<T> for ExampleCurvature {
    fn eval(&self, t: T, r: T) -> Result<(T, T, T)> {
        let f = self.f(t, r);
        Ok((
            c::<T>(2.0) - f,
            c::<T>(4.0) * f,
            -f * r / (r * r + T::one()).sqrt(),
        ))
    }
    fn monotone_declared(&self) -> bool {
        true
    }
}

pub fn make_example_prescribed_h<C>(chart: C) -> OnChart<ExampleCurvature, C> {
    OnChart::new(ExampleCurvature, chart)
}

/// `w(x) = sqrt(τ₀² + r²)` on a radial grid in ordinary polar coordinates.
pub fn hyperboloid_profile<T: Real>(tau0: T, grid: SpatialGrid<T>) -> GraphState<T> {
    GraphState::from_fn(grid, move |x| {
        let r2 = x.iter().fold(T::zero(), |s, v| s + *v * *v);
        (tau0 * tau0 + r2).sqrt()
    })
}

/// Schwarzschild exterior in retarded null coordinates `(v, x, θ, φ)` with
/// `x = 1/r`: `G = −(1 − 2mx)dv² + 2x^{−2}dv dx + x^{−2}σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schwarzschild {
    pub m: f64,
}

pub fn make_schwarzschild_chart(m: f64) -> Schwarzschild {
    Schwarzschild { m }
}

impl Schwarzschild {
    fn check<T: Real>(&self, p: &[T]) -> Result<()> {
        let x = p[1];
        let lim = if self.m > 0.0 { c::<T>(0.5 / self.m) } else { T::max_value().unwrap_or(x + x) };
        if !(x > T::zero() && x < lim) {
            return Err(GeomError::Domain(format!(
                "x = {:.6} outside (0, 1/(2m)) for m = {}",
                x.f64(),
                self.m
            )));
        }
        if !(p[2] > T::zero() && p[2] < T::pi()) {
            return Err(GeomError::Domain("θ outside (0, π)".into()));
        }
        Ok(())
    }

    /// `r_* = r + 2m log(r/(2m) − 1)`.
    pub fn r_star<T: Real>(&self, r: T) -> T {
        let m = c::<T>(self.m);
        r + c::<T>(2.0) * m * (r / (c::<T>(2.0) * m) - T::one()).ln()
    }

    /// `g̃ = x² G`, regular up to `x = 0`.
    pub fn unphysical_metric<T: Real>(&self, p: &[T]) -> Result<DMatrix<T>> {
        let (x, th) = (p[1], p[2]);
        if !(x >= T::zero()) {
            return Err(GeomError::Domain("x must be non-negative".into()));
        }
        let hx = T::one() - c::<T>(2.0 * self.m) * x;
        let mut g = DMatrix::zeros(4, 4);
        g[(0, 0)] = -hx * x * x;
        g[(0, 1)] = T::one();
        g[(1, 0)] = T::one();
        g[(2, 2)] = T::one();
        g[(3, 3)] = th.sin() * th.sin();
        Ok(g)
    }

    /// Orthonormal static frame `(e_0, e_r, e_θ, e_φ)` in chart components.
    pub fn static_frame<T: Real>(&self, p: &[T]) -> Result<[DVector<T>; 4]> {
        self.check(p)?;
        let (x, th) = (p[1], p[2]);
        let hx = T::one() - c::<T>(2.0 * self.m) * x;
        let sh = hx.sqrt();
        let z = T::zero();
        Ok([
            DVector::from_vec(vec![T::one() / sh, z, z, z]),
            DVector::from_vec(vec![-T::one() / sh, -sh * x * x, z, z]),
            DVector::from_vec(vec![z, z, x, z]),
            DVector::from_vec(vec![z, z, z, x / th.sin()]),
        ])
    }
}

impl<T: Real> ChartSpec<T> for Schwarzschild {
    fn dim(&self) -> usize {
        4
    }
    fn name(&self) -> String {
        format!("schwarzschild-m{}", self.m)
    }
    fn fd_step(&self) -> T {
        c(2e-5)
    }
    fn metric(&self, p: &[T]) -> Result<DMatrix<T>> {
        self.check(p)?;
        let (x, th) = (p[1], p[2]);
        let ix2 = T::one() / (x * x);
        let mut g = DMatrix::zeros(4, 4);
        g[(0, 0)] = -(T::one() - c::<T>(2.0 * self.m) * x);
        g[(0, 1)] = ix2;
        g[(1, 0)] = ix2;
        g[(2, 2)] = ix2;
        g[(3, 3)] = ix2 * th.sin() * th.sin();
        Ok(g)
    }
    fn christoffel(&self, p: &[T]) -> Option<Result<Christoffel<T>>> {
        if let Err(e) = self.check(p) {
            return Some(Err(e));
        }
        let m = c::<T>(self.m);
        let (x, th) = (p[1], p[2]);
        let two = c::<T>(2.0);
        let hx = T::one() - two * m * x;
        let (s, co) = (th.sin(), th.cos());
        let mut g = Christoffel::zeros(4);
        g.set_sym(0, 0, 0, -m * x * x);
        g.set_sym(0, 2, 2, T::one() / x);
        g.set_sym(0, 3, 3, s * s / x);
        g.set_sym(1, 0, 0, -m * x.powi(4) * hx);
        g.set_sym(1, 0, 1, m * x * x);
        g.set_sym(1, 1, 1, -two / x);
        g.set_sym(1, 2, 2, x * hx);
        g.set_sym(1, 3, 3, x * hx * s * s);
        g.set_sym(2, 1, 2, -T::one() / x);
        g.set_sym(2, 3, 3, -s * co);
        g.set_sym(3, 1, 3, -T::one() / x);
        g.set_sym(3, 2, 3, co / s);
        Some(Ok(g))
    }
}

/// Smooth function on the round sphere with analytic derivative data.
pub trait SphereFunction<T: Real>: Send + Sync {
    fn value(&self, theta: T, phi: T) -> T;
    /// `|∇f|²`.
    fn grad_sq(&self, theta: T, phi: T) -> T;
    /// `Δf`.
    fn laplacian(&self, theta: T, phi: T) -> T;
    /// `⟨∇|∇f|², ∇f⟩`.
    fn grad_grad_sq_dot_grad(&self, theta: T, phi: T) -> T;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantOnSphere(pub f64);

impl<T: Real> SphereFunction<T> for ConstantOnSphere {
    fn value(&self, _theta: T, _phi: T) -> T {
        c(self.0)
    }
    fn grad_sq(&self, _theta: T, _phi: T) -> T {
        T::zero()
    }
    fn laplacian(&self, _theta: T, _phi: T) -> T {
        T::zero()
    }
    fn grad_grad_sq_dot_grad(&self, _theta: T, _phi: T) -> T {
        T::zero()
    }
}

/// `f = cos θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CosTheta;

impl<T: Real> SphereFunction<T> for CosTheta {
    fn value(&self, theta: T, _phi: T) -> T {
        theta.cos()
    }
    fn grad_sq(&self, theta: T, _phi: T) -> T {
        theta.sin() * theta.sin()
    }
    fn laplacian(&self, theta: T, _phi: T) -> T {
        -c::<T>(2.0) * theta.cos()
    }
    fn grad_grad_sq_dot_grad(&self, theta: T, _phi: T) -> T {
        -c::<T>(2.0) * theta.sin() * theta.sin() * theta.cos()
    }
}

/// Level sets `v = −P(y, x)` with `P = f + xφ + ½x²ψ`.
pub struct LstSurface<F> {
    pub f: F,
    pub tau: f64,
}

impl<F> LstSurface<F> {
    pub fn new(f: F, tau: f64) -> Self {
        Self { f, tau }
    }

    pub fn phi<T: Real>(&self, theta: T, ph: T) -> T
    where
        F: SphereFunction<T>,
    {
        let tau = c::<T>(self.tau);
        -c::<T>(0.5) * (tau * tau + self.f.grad_sq(theta, ph))
    }

    pub fn psi<T: Real>(&self, theta: T, ph: T) -> T
    where
        F: SphereFunction<T>,
    {
        let tau = c::<T>(self.tau);
        c::<T>(0.5) * (tau * tau * self.f.laplacian(theta, ph) + self.f.grad_grad_sq_dot_grad(theta, ph))
    }

    pub fn p<T: Real>(&self, theta: T, ph: T, x: T) -> T
    where
        F: SphereFunction<T>,
    {
        self.f.value(theta, ph) + x * self.phi(theta, ph) + c::<T>(0.5) * x * x * self.psi(theta, ph)
    }
}

/// Samples `(v = −P, x, θ, φ)` on the parameter grid `(x, θ, φ)`.
pub fn lst_embedding<T: Real, F: SphereFunction<T>>(
    surface: &LstSurface<F>,
    xs: &[T],
    thetas: &[T],
    phis: &[T],
) -> Result<(ParamGrid<T>, Vec<Vec<T>>)> {
    let spacing = |v: &[T], name: &str| -> Result<T> {
        if v.len() < 3 {
            return Err(GeomError::Shape(format!("{name} axis needs at least 3 samples")));
        }
        let h = v[1] - v[0];
        if v.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > c::<T>(1e-9) * h.abs() || w[1] <= w[0]) {
            return Err(GeomError::Shape(format!("{name} axis must be uniform and increasing")));
        }
        Ok(h)
    };
    let pg = ParamGrid {
        shape: vec![xs.len(), thetas.len(), phis.len()],
        h: vec![spacing(xs, "x")?, spacing(thetas, "θ")?, spacing(phis, "φ")?],
    };
    let mut samples = Vec::with_capacity(pg.len());
    for &x in xs {
        if x <= T::zero() {
            return Err(GeomError::Domain("LST samples need x > 0".into()));
        }
        for &th in thetas {
            for &ph in phis {
                samples.push(vec![-surface.p(th, ph, x), x, th, ph]);
            }
        }
    }
    Ok((pg, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{christoffel_at, metric_at, FdOnly};

    #[test]
    fn schwarzschild_components() {
        let s = make_schwarzschild_chart(1.0);
        let p = [0.0, 0.25, std::f64::consts::FRAC_PI_2, 0.0];
        let g = metric_at(&s, &p).unwrap();
        assert!((g[(0, 0)] + 0.5).abs() < 1e-15);
        assert!((g[(0, 1)] - 16.0).abs() < 1e-12);
        assert!((g[(2, 2)] - 16.0).abs() < 1e-12 && (g[(3, 3)] - 16.0).abs() < 1e-12);
        assert!(metric_at(&s, &[0.0, 0.5, 1.0, 0.0]).is_err());
        assert!(metric_at(&s, &[0.0, -0.1, 1.0, 0.0]).is_err());
        assert!((s.r_star(4.0f64) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn schwarzschild_analytic_christoffel_matches_fd() {
        let s = make_schwarzschild_chart(1.0);
        let p = [0.3, 0.1, 1.1, 0.4];
        let a = christoffel_at(&s, &p).unwrap();
        let f = christoffel_at(&FdOnly::new(s), &p).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let (x, y): (f64, f64) = (a.get(i, j, k), f.get(i, j, k));
                    assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{i}{j}{k}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn unphysical_metric_is_regular() {
        let s = make_schwarzschild_chart(1.0);
        let g = s.unphysical_metric(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(g.iter().all(|v: &f64| v.is_finite()));
        assert_eq!(g[(0, 1)], 1.0);
    }

    #[test]
    fn example_field_value() {
        let (v, _, _) = RadialField::<f64>::eval(&ExampleCurvature, 0.5, 0.0).unwrap();
        assert!((v - (2.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((v - 1.632_120_6).abs() < 1e-7);
    }

    #[test]
    fn hyperboloid_frame_values() {
        let f = make_hyperboloid_frame();
        assert_eq!(f.tau(5.0f64, 3.0).unwrap(), 4.0);
        assert!((f.lapse(2.0f64, 1.3).unwrap() - 1.0).abs() < 1e-12);
        assert!(f.tau(1.0f64, 2.0).is_err());
        let grid = SpatialGrid::radial(1, 2.0, 9).unwrap();
        let st = hyperboloid_profile(0.5, grid);
        assert!((st.w[4] - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lst_coefficients() {
        let s = LstSurface::new(CosTheta, 1.3);
        let th = 0.7f64;
        let want = -th.cos() * (1.3 * 1.3 + th.sin() * th.sin());
        assert!((s.psi(th, 0.0) - want).abs() < 1e-14);
        let z = LstSurface::new(ConstantOnSphere(0.0), 2.0);
        assert_eq!(z.phi(1.0f64, 0.0), -2.0);
        assert_eq!(z.psi(1.0f64, 0.0), 0.0);
    }
}
