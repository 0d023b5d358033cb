//! Synchronous charts `G = −dt² + g(t, x)` used by the graph pathway.
//!
//! Radial charts are warped products `g = A(t,r) dr² + B(t,r) σ_{n−1}` with
//! `B ~ A r²` at the origin. Box charts carry an arbitrary spatial metric on
//! Cartesian-like coordinates.

use nalgebra::{DMatrix, DVector};

use crate::chart::{christoffel_from_partials, riemann_at, ChartSpec, Christoffel};
use crate::error::{GeomError, Result};
use crate::real::{c, Real};

/// Warp factors and their partials at one `(t, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Warp<T> {
    pub a: T,
    pub b: T,
    pub a_r: T,
    pub b_r: T,
    pub a_t: T,
    pub b_t: T,
    pub a_tt: T,
    pub b_tt: T,
    pub a_rt: T,
    pub b_rt: T,
}

impl<T: Real> Warp<T> {
    /// Central differences of `ab(t, r) = (A, B)`; `r` is reflected so that
    /// stencils around the origin stay inside the chart.
    pub fn from_fd<F>(ab: F, t: T, r: T, step: T) -> Result<Self>
    where
        F: Fn(T, T) -> Result<(T, T)>,
    {
        let ht = step * (t.abs() + T::one());
        let hr = step * (r.abs() + T::one());
        let f = |tt: T, rr: T| ab(tt, rr.abs());
        let (a, b) = f(t, r)?;
        let (atp, btp) = f(t + ht, r)?;
        let (atm, btm) = f(t - ht, r)?;
        let (arp, brp) = f(t, r + hr)?;
        let (arm, brm) = f(t, r - hr)?;
        let (app, bpp) = f(t + ht, r + hr)?;
        let (apm, bpm) = f(t + ht, r - hr)?;
        let (amp, bmp) = f(t - ht, r + hr)?;
        let (amm, bmm) = f(t - ht, r - hr)?;
        let two = c::<T>(2.0);
        let four = c::<T>(4.0);
        Ok(Self {
            a,
            b,
            a_r: (arp - arm) / (two * hr),
            b_r: (brp - brm) / (two * hr),
            a_t: (atp - atm) / (two * ht),
            b_t: (btp - btm) / (two * ht),
            a_tt: (atp - two * a + atm) / (ht * ht),
            b_tt: (btp - two * b + btm) / (ht * ht),
            a_rt: (app - apm - amp + amm) / (four * ht * hr),
            b_rt: (bpp - bpm - bmp + bmm) / (four * ht * hr),
        })
    }

    pub fn is_static(&self) -> bool {
        self.a_t == T::zero() && self.b_t == T::zero()
    }
}

/// Warped-product synchronous chart over a radial coordinate.
pub trait RadialChart<T: Real>: Send + Sync {
    /// Spatial dimension `n`.
    fn n(&self) -> usize;

    fn name(&self) -> String;

    /// `(A, B)` at `(t, r)`, `r ≥ 0`.
    fn warp_values(&self, t: T, r: T) -> Result<(T, T)>;

    fn fd_step(&self) -> T {
        c(1e-4)
    }

    fn warp(&self, t: T, r: T) -> Result<Warp<T>> {
        Warp::from_fd(|tt, rr| self.warp_values(tt, rr), t, r, self.fd_step())
    }

    /// True when `A`, `B` do not depend on `t`.
    fn is_static(&self) -> bool {
        false
    }

    /// The `(t, r)` block of the spacetime Ricci tensor at an equator point.
    fn ricci_tr(&self, t: T, r: T) -> Result<[[T; 2]; 2]> {
        let chart = WarpedChart::new(self);
        let p = chart.equator_point(t, r);
        let rm = riemann_at(&chart, &p)?;
        let g = chart.metric(&p)?;
        let ginv = g
            .try_inverse()
            .ok_or_else(|| GeomError::Domain("singular metric".into()))?;
        let ric = rm.ricci(&ginv);
        Ok([[ric[(0, 0)], ric[(0, 1)]], [ric[(1, 0)], ric[(1, 1)]]])
    }
}

impl<T: Real, C: RadialChart<T> + ?Sized> RadialChart<T> for &C {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn warp_values(&self, t: T, r: T) -> Result<(T, T)> {
        (**self).warp_values(t, r)
    }
    fn fd_step(&self) -> T {
        (**self).fd_step()
    }
    fn warp(&self, t: T, r: T) -> Result<Warp<T>> {
        (**self).warp(t, r)
    }
    fn is_static(&self) -> bool {
        (**self).is_static()
    }
    fn ricci_tr(&self, t: T, r: T) -> Result<[[T; 2]; 2]> {
        (**self).ricci_tr(t, r)
    }
}

/// Full spacetime chart `(t, r, θ_1, …, θ_{n−1})` of a warped product, with
/// hyperspherical angles. For `n = 1` the coordinates are `(t, r)` with `r`
/// ranging over the whole line.
pub struct WarpedChart<'a, T: Real, C: RadialChart<T> + ?Sized> {
    pub inner: &'a C,
    _t: std::marker::PhantomData<T>,
}

impl<'a, T: Real, C: RadialChart<T> + ?Sized> WarpedChart<'a, T, C> {
    pub fn new(inner: &'a C) -> Self {
        Self {
            inner,
            _t: std::marker::PhantomData,
        }
    }

    /// Point with all angles at `π/2`, where `σ` is the identity.
    pub fn equator_point(&self, t: T, r: T) -> Vec<T> {
        let mut p = vec![t, r];
        p.extend(std::iter::repeat_n(T::frac_pi_2(), self.inner.n() - 1));
        p
    }
}

/// Diagonal of the round metric in hyperspherical angles.
pub fn sphere_diag<T: Real>(angles: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(angles.len());
    let mut f = T::one();
    for th in angles {
        out.push(f);
        let s = th.sin();
        f *= s * s;
    }
    out
}

impl<'a, T: Real, C: RadialChart<T> + ?Sized> ChartSpec<T> for WarpedChart<'a, T, C> {
    fn dim(&self) -> usize {
        self.inner.n() + 1
    }
    fn name(&self) -> String {
        format!("warped({})", self.inner.name())
    }
    fn metric(&self, p: &[T]) -> Result<DMatrix<T>> {
        let n = self.inner.n();
        let (a, b) = self.inner.warp_values(p[0], p[1].abs())?;
        let mut d = vec![-T::one(), a];
        if n > 1 {
            d.extend(sphere_diag(&p[2..]).into_iter().map(|s| b * s));
        }
        Ok(DMatrix::from_diagonal(&DVector::from_vec(d)))
    }
    fn synchronous(&self) -> bool {
        true
    }
    fn fd_step(&self) -> T {
        self.inner.fd_step()
    }
}

/// Spatial fields of a box chart at `(t, x)`.
#[derive(Debug, Clone)]
pub struct SyncFields<T: Real> {
    pub g: DMatrix<T>,
    pub g_t: DMatrix<T>,
    pub g_tt: DMatrix<T>,
    /// Spatial connection `Γ^k_ij`.
    pub gamma: Christoffel<T>,
    pub gamma_t: Christoffel<T>,
}

/// Synchronous chart on Cartesian-like spatial coordinates.
pub trait BoxChart<T: Real>: ChartSpec<T> {
    /// Spatial dimension `n`.
    fn n(&self) -> usize {
        self.dim() - 1
    }

    fn spatial_metric(&self, t: T, x: &[T]) -> Result<DMatrix<T>>;

    fn fields(&self, t: T, x: &[T]) -> Result<SyncFields<T>> {
        fd_fields(self, t, x)
    }

    /// Spacetime Ricci tensor.
    fn ricci(&self, t: T, x: &[T]) -> Result<DMatrix<T>> {
        let mut p = vec![t];
        p.extend_from_slice(x);
        let rm = riemann_at(self, &p)?;
        let g = self.metric(&p)?;
        let ginv = g
            .try_inverse()
            .ok_or_else(|| GeomError::Domain("singular metric".into()))?;
        Ok(rm.ricci(&ginv))
    }
}

fn spatial_christoffel<T: Real, C: BoxChart<T> + ?Sized>(chart: &C, t: T, x: &[T]) -> Result<Christoffel<T>> {
    let step = chart.fd_step();
    let g = chart.spatial_metric(t, x)?;
    let ginv = g
        .try_inverse()
        .ok_or_else(|| GeomError::Domain("singular spatial metric".into()))?;
    let mut dg = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = step * (x[k].abs() + T::one());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        dg.push((chart.spatial_metric(t, &xp)? - chart.spatial_metric(t, &xm)?) / (h + h));
    }
    Ok(christoffel_from_partials(&ginv, &dg))
}

/// Finite-difference spatial fields for any box chart.
pub fn fd_fields<T: Real, C: BoxChart<T> + ?Sized>(chart: &C, t: T, x: &[T]) -> Result<SyncFields<T>> {
    let ht = chart.fd_step() * (t.abs() + T::one());
    let g = chart.spatial_metric(t, x)?;
    let gp = chart.spatial_metric(t + ht, x)?;
    let gm = chart.spatial_metric(t - ht, x)?;
    let two = c::<T>(2.0);
    let gamma = spatial_christoffel(chart, t, x)?;
    let gam_p = spatial_christoffel(chart, t + ht, x)?;
    let gam_m = spatial_christoffel(chart, t - ht, x)?;
    let mut gamma_t = gam_p.sub(&gam_m);
    let n = x.len();
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                let v = gamma_t.get(a, b, cc) / (two * ht);
                gamma_t.set(a, b, cc, v);
            }
        }
    }
    Ok(SyncFields {
        g_t: (&gp - &gm) / (two * ht),
        g_tt: (&gp - &g * two + &gm) / (ht * ht),
        g,
        gamma,
        gamma_t,
    })
}
