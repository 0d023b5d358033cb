//! Extrinsic geometry of spacelike surfaces: graphs over synchronous charts
//! and general parametric embeddings.
//!
//! Conventions: `ν` is the future unit normal, `A_ij = −G(ν, ∇̄_{e_i} e_j)`,
//! `H = γ^{ij} A_ij`. Expanding hyperboloids `t² − r² = τ²` have `A = γ/τ` and
//! `H = n/τ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chart::{christoffel_at, lapse, ChartSpec, TimeFunction};
use crate::error::{GeomError, Result};
use crate::grid::{GraphState, SpatialGrid, Topology};
use crate::real::{c, Real};
use crate::sync::{BoxChart, RadialChart, SyncFields, Warp};

/// Synchronous background a graph lives over.
#[derive(Clone, Copy)]
pub enum Background<'a, T: Real> {
    Radial(&'a dyn RadialChart<T>),
    Box(&'a dyn BoxChart<T>),
}

impl<'a, T: Real> Background<'a, T> {
    pub fn n(&self) -> usize {
        match self {
            Background::Radial(c) => c.n(),
            Background::Box(c) => c.n(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Background::Radial(c) => c.name(),
            Background::Box(c) => c.name(),
        }
    }

    pub(crate) fn check_grid(&self, grid: &SpatialGrid<T>) -> Result<()> {
        let ok = match self {
            Background::Radial(c) => grid.is_radial() && grid.n == c.n(),
            Background::Box(c) => !grid.is_radial() && grid.n == c.n(),
        };
        if ok {
            Ok(())
        } else {
            Err(GeomError::Shape(format!(
                "grid ({:?}, n = {}) does not fit chart {}",
                grid.topology,
                grid.n,
                self.name()
            )))
        }
    }

    /// Chart coordinates `(t, x)` of the surface point above `node`.
    pub fn point(&self, grid: &SpatialGrid<T>, node: usize, w: T) -> Vec<T> {
        let mut p = vec![w];
        p.extend(grid.coords(node));
        p
    }
}

/// Time orientation of the evolving normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Future,
    Past,
}

impl Orientation {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Orientation::Future => T::one(),
            Orientation::Past => -T::one(),
        }
    }
}

/// Geometry at one surface node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry<T: Real> {
    pub gamma: DMatrix<T>,
    pub gamma_inv: DMatrix<T>,
    /// Future unit normal in chart components.
    pub normal: DVector<T>,
    pub second_ff: DMatrix<T>,
    pub h: T,
    pub kappa: T,
    pub u: T,
    pub alpha: T,
    pub q: T,
}

impl<T: Real> NodeGeometry<T> {
    /// `|A|²_γ`.
    pub fn a_norm_sq(&self) -> T {
        let m = &self.gamma_inv * &self.second_ff;
        (&m * &m).trace()
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceGeometry<T: Real> {
    /// Present for graph surfaces.
    pub grid: Option<SpatialGrid<T>>,
    pub nodes: Vec<NodeGeometry<T>>,
    /// Chart coordinates of each node's surface point.
    pub points: Vec<Vec<T>>,
    /// `√det γ` per node (radial grids: per unit round-sphere volume).
    pub sqrt_det: Vec<T>,
}

impl<T: Real> SurfaceGeometry<T> {
    pub fn h(&self) -> Vec<T> {
        self.nodes.iter().map(|g| g.h).collect()
    }

    pub fn u(&self) -> Vec<T> {
        self.nodes.iter().map(|g| g.u).collect()
    }

    pub fn kappa(&self) -> Vec<T> {
        self.nodes.iter().map(|g| g.kappa).collect()
    }
}

/// First and second radial derivatives of a nodal array. The origin uses the
/// even reflection `f_{-1} = f_1`; the outer node uses one-sided formulas.
#[inline]
pub fn radial_derivs<T: Real>(f: &[T], i: usize, h: T) -> (T, T) {
    let n = f.len();
    let two = c::<T>(2.0);
    if i == 0 {
        (T::zero(), two * (f[1] - f[0]) / (h * h))
    } else if i + 1 < n {
        ((f[i + 1] - f[i - 1]) / (two * h), (f[i + 1] - two * f[i] + f[i - 1]) / (h * h))
    } else {
        (
            (c::<T>(3.0) * f[i] - c::<T>(4.0) * f[i - 1] + f[i - 2]) / (two * h),
            (two * f[i] - c::<T>(5.0) * f[i - 1] + c::<T>(4.0) * f[i - 2] - f[i - 3]) / (h * h),
        )
    }
}

/// First partial along `axis` with central differences, one-sided at
/// Dirichlet faces.
pub fn box_d1<T: Real>(grid: &SpatialGrid<T>, f: &[T], node: usize, axis: usize) -> T {
    let h = grid.h[axis];
    let two = c::<T>(2.0);
    match (grid.neighbor(node, axis, -1), grid.neighbor(node, axis, 1)) {
        (Some(m), Some(p)) => (f[p] - f[m]) / (two * h),
        (None, Some(p)) => {
            let pp = grid.neighbor(node, axis, 2).expect("grid too small");
            (-c::<T>(3.0) * f[node] + c::<T>(4.0) * f[p] - f[pp]) / (two * h)
        }
        (Some(m), None) => {
            let mm = grid.neighbor(node, axis, -2).expect("grid too small");
            (c::<T>(3.0) * f[node] - c::<T>(4.0) * f[m] + f[mm]) / (two * h)
        }
        (None, None) => T::zero(),
    }
}

fn box_d2<T: Real>(grid: &SpatialGrid<T>, f: &[T], node: usize, axis: usize) -> T {
    let h = grid.h[axis];
    let two = c::<T>(2.0);
    match (grid.neighbor(node, axis, -1), grid.neighbor(node, axis, 1)) {
        (Some(m), Some(p)) => (f[p] - two * f[node] + f[m]) / (h * h),
        (None, Some(p)) => {
            let p2 = grid.neighbor(node, axis, 2).expect("grid too small");
            let p3 = grid.neighbor(node, axis, 3).expect("grid too small");
            (two * f[node] - c::<T>(5.0) * f[p] + c::<T>(4.0) * f[p2] - f[p3]) / (h * h)
        }
        (Some(m), None) => {
            let m2 = grid.neighbor(node, axis, -2).expect("grid too small");
            let m3 = grid.neighbor(node, axis, -3).expect("grid too small");
            (two * f[node] - c::<T>(5.0) * f[m] + c::<T>(4.0) * f[m2] - f[m3]) / (h * h)
        }
        (None, None) => T::zero(),
    }
}

/// Gradient and coordinate Hessian of a nodal array on a box grid.
pub fn box_derivs<T: Real>(grid: &SpatialGrid<T>, f: &[T], node: usize) -> (DVector<T>, DMatrix<T>) {
    let n = grid.n;
    let grad = DVector::from_fn(n, |a, _| box_d1(grid, f, node, a));
    let mut hess = DMatrix::zeros(n, n);
    for a in 0..n {
        hess[(a, a)] = box_d2(grid, f, node, a);
        for b in (a + 1)..n {
            let h = grid.h[a];
            let two = c::<T>(2.0);
            let v = match (grid.neighbor(node, a, -1), grid.neighbor(node, a, 1)) {
                (Some(m), Some(p)) => (box_d1(grid, f, p, b) - box_d1(grid, f, m, b)) / (two * h),
                (None, Some(p)) => {
                    let pp = grid.neighbor(node, a, 2).expect("grid too small");
                    (-c::<T>(3.0) * box_d1(grid, f, node, b) + c::<T>(4.0) * box_d1(grid, f, p, b)
                        - box_d1(grid, f, pp, b))
                        / (two * h)
                }
                (Some(m), None) => {
                    let mm = grid.neighbor(node, a, -2).expect("grid too small");
                    (c::<T>(3.0) * box_d1(grid, f, node, b) - c::<T>(4.0) * box_d1(grid, f, m, b)
                        + box_d1(grid, f, mm, b))
                        / (two * h)
                }
                (None, None) => T::zero(),
            };
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    (grad, hess)
}

/// Pointwise graph geometry over a radial warped chart, in the frame
/// `(r, equator angles)` for `r > 0` and Cartesian at the origin.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RadialPoint<T> {
    pub q: T,
    pub sqrt_q: T,
    pub h: T,
    pub gamma_rr: T,
    pub gamma_ang: T,
    pub a_rr: T,
    pub a_ang: T,
    /// `w^r = g^{rr} w_r`.
    pub w_up: T,
}

#[inline]
pub(crate) fn radial_point<T: Real>(n: usize, wp: &Warp<T>, origin: bool, w_r: T, w_rr: T) -> RadialPoint<T> {
    let half = c::<T>(0.5);
    if origin {
        let k = w_rr + half * wp.a_t;
        return RadialPoint {
            q: T::one(),
            sqrt_q: T::one(),
            h: T::from_usize_lossy(n) * k / wp.a,
            gamma_rr: wp.a,
            gamma_ang: wp.a,
            a_rr: k,
            a_ang: k,
            w_up: T::zero(),
        };
    }
    let inv_a = T::one() / wp.a;
    let p = w_r * w_r * inv_a;
    let q = T::one() - p;
    let sqrt_q = q.max(T::zero()).sqrt();
    let hess_rr = w_rr - half * wp.a_r * inv_a * w_r;
    let a_rr = (hess_rr + half * wp.a_t - wp.a_t * p) / sqrt_q;
    let gamma_rr = wp.a - w_r * w_r;
    let mut h = a_rr / gamma_rr;
    let mut a_ang = T::zero();
    if n > 1 {
        a_ang = (half * wp.b_r * inv_a * w_r + half * wp.b_t) / sqrt_q;
        h += T::from_usize_lossy(n - 1) * a_ang / wp.b;
    }
    RadialPoint {
        q,
        sqrt_q,
        h,
        gamma_rr,
        gamma_ang: wp.b,
        a_rr,
        a_ang,
        w_up: w_r * inv_a,
    }
}

/// Pointwise graph geometry over a box chart.
#[derive(Debug, Clone)]
pub(crate) struct BoxPoint<T: Real> {
    pub q: T,
    pub sqrt_q: T,
    pub h: T,
    pub gamma: DMatrix<T>,
    /// `a^{ij} = g^{ij} + w^i w^j / q`, the inverse induced metric.
    pub a_inv: DMatrix<T>,
    pub second_ff: DMatrix<T>,
    pub w_up: DVector<T>,
    pub ginv: DMatrix<T>,
    /// `S_ij = w_ij − Γ^k_ij w_k`.
    pub hess: DMatrix<T>,
}

pub(crate) fn covariant_hessian<T: Real>(gam: &crate::chart::Christoffel<T>, w: &DVector<T>, wij: &DMatrix<T>) -> DMatrix<T> {
    let n = w.len();
    DMatrix::from_fn(n, n, |i, j| {
        let mut s = wij[(i, j)];
        for k in 0..n {
            s -= gam.get(k, i, j) * w[k];
        }
        s
    })
}

pub(crate) fn box_point<T: Real>(f: &SyncFields<T>, w: &DVector<T>, wij: &DMatrix<T>) -> Result<BoxPoint<T>> {
    let half = c::<T>(0.5);
    let ginv = f
        .g
        .clone()
        .try_inverse()
        .ok_or_else(|| GeomError::Domain("singular spatial metric".into()))?;
    let w_up = &ginv * w;
    let p = w.dot(&w_up);
    let q = T::one() - p;
    let sqrt_q = q.max(T::zero()).sqrt();
    let a_inv = &ginv + (&w_up * w_up.transpose()) / q;
    let hess = covariant_hessian(&f.gamma, w, wij);
    let k = &f.g_t * &w_up;
    let second_ff = (&hess + &f.g_t * half - (w * k.transpose() + &k * w.transpose()) * half) / sqrt_q;
    let h = (a_inv.component_mul(&hess).sum() + half * (&ginv * &f.g_t).trace()
        - half * w_up.dot(&(&f.g_t * &w_up)) / q)
        / sqrt_q;
    Ok(BoxPoint {
        q,
        sqrt_q,
        h,
        gamma: &f.g - w * w.transpose(),
        a_inv,
        second_ff,
        w_up,
        ginv,
        hess,
    })
}

fn spacelike_check<T: Real>(node: usize, q: T, floor: T) -> Result<()> {
    if !(q >= floor) {
        return Err(GeomError::SpacelikeViolation {
            node,
            q: q.f64(),
            floor: floor.f64(),
        });
    }
    Ok(())
}

/// Tilt, height and lapse at a point with normal `(ν^t, ν^i)`.
fn frame_values<T: Real>(
    frame: Option<&dyn TimeFunction<T>>,
    p: &[T],
    ginv_spatial: &DMatrix<T>,
    normal: &DVector<T>,
) -> Result<(T, T, T)> {
    match frame {
        None => Ok((normal[0], p[0], T::one())),
        Some(tf) => {
            let d = tf.gradient(p)?;
            let m = ginv_spatial.nrows();
            let mut ginv = DMatrix::zeros(m + 1, m + 1);
            ginv[(0, 0)] = -T::one();
            ginv.view_mut((1, 1), (m, m)).copy_from(ginv_spatial);
            let alpha = lapse(&ginv, &d)?;
            let mut dn = T::zero();
            for a in 0..=m {
                dn += d[a] * normal[a];
            }
            Ok((alpha * dn, tf.value(p)?, alpha))
        }
    }
}

/// Warp factors at every node for a static chart, or `None`.
pub(crate) fn static_warps<T: Real>(chart: &dyn RadialChart<T>, grid: &SpatialGrid<T>) -> Result<Option<Vec<Warp<T>>>> {
    if !chart.is_static() {
        return Ok(None);
    }
    (0..grid.len())
        .map(|i| chart.warp(T::zero(), grid.coords(i)[0]))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Full geometry of the graph `t = w(x)`.
pub fn graph_geometry<T: Real>(
    bg: Background<'_, T>,
    state: &GraphState<T>,
    frame: Option<&dyn TimeFunction<T>>,
    delta_floor: T,
) -> Result<SurfaceGeometry<T>> {
    state.check_shape()?;
    let grid = &state.grid;
    bg.check_grid(grid)?;
    let n = grid.n;
    let w = &state.w;
    let mut nodes = Vec::with_capacity(grid.len());
    let mut points = Vec::with_capacity(grid.len());
    let mut sqrt_det = Vec::with_capacity(grid.len());
    match bg {
        Background::Radial(chart) => {
            let h = grid.h[0];
            for i in 0..grid.len() {
                let r = grid.coords(i)[0];
                let wp = chart.warp(w[i], r)?;
                let (w_r, w_rr) = radial_derivs(w, i, h);
                let pt = radial_point(n, &wp, i == 0, w_r, w_rr);
                spacelike_check(i, pt.q, delta_floor)?;
                let mut gamma = DMatrix::from_element(n, n, T::zero());
                let mut sff = gamma.clone();
                gamma[(0, 0)] = pt.gamma_rr;
                sff[(0, 0)] = pt.a_rr;
                for k in 1..n {
                    gamma[(k, k)] = pt.gamma_ang;
                    sff[(k, k)] = pt.a_ang;
                }
                let gamma_inv = DMatrix::from_diagonal(&gamma.diagonal().map(|v| T::one() / v));
                let mut normal = DVector::zeros(n + 1);
                normal[0] = T::one() / pt.sqrt_q;
                normal[1] = pt.w_up / pt.sqrt_q;
                let p = vec![w[i], r];
                let ginv_rr = DMatrix::from_element(1, 1, T::one() / wp.a);
                let (kappa, u, alpha) = frame_values(frame, &p, &ginv_rr, &normal.rows(0, 2).into_owned())?;
                let vol = if i == 0 && n > 1 {
                    T::zero()
                } else {
                    pt.gamma_rr.sqrt() * wp.b.powi(n as i32 - 1).sqrt()
                };
                sqrt_det.push(vol);
                nodes.push(NodeGeometry {
                    gamma,
                    gamma_inv,
                    normal,
                    second_ff: sff,
                    h: pt.h,
                    kappa,
                    u,
                    alpha,
                    q: pt.q,
                });
                points.push(p);
            }
        }
        Background::Box(chart) => {
            for i in 0..grid.len() {
                let x = grid.coords(i);
                let f = chart.fields(w[i], &x)?;
                let (wg, wh) = box_derivs(grid, w, i);
                let pt = box_point(&f, &wg, &wh)?;
                spacelike_check(i, pt.q, delta_floor)?;
                let mut normal = DVector::zeros(n + 1);
                normal[0] = T::one() / pt.sqrt_q;
                for k in 0..n {
                    normal[k + 1] = pt.w_up[k] / pt.sqrt_q;
                }
                let p = bg.point(grid, i, w[i]);
                let (kappa, u, alpha) = frame_values(frame, &p, &pt.ginv, &normal)?;
                sqrt_det.push(pt.gamma.determinant().max(T::zero()).sqrt());
                nodes.push(NodeGeometry {
                    gamma: pt.gamma,
                    gamma_inv: pt.a_inv,
                    normal,
                    second_ff: pt.second_ff,
                    h: pt.h,
                    kappa,
                    u,
                    alpha,
                    q: pt.q,
                });
                points.push(p);
            }
        }
    }
    Ok(SurfaceGeometry {
        grid: Some(grid.clone()),
        nodes,
        points,
        sqrt_det,
    })
}

fn graph_grid<T: Real>(geom: &SurfaceGeometry<T>, field: &[T]) -> Result<SpatialGrid<T>> {
    let grid = geom
        .grid
        .clone()
        .ok_or_else(|| GeomError::Shape("surface operators need a graph grid".into()))?;
    if field.len() != grid.len() || geom.nodes.len() != grid.len() {
        return Err(GeomError::Shape(format!(
            "field has {} samples, grid has {} nodes",
            field.len(),
            grid.len()
        )));
    }
    Ok(grid)
}

/// `Δf = (1/√γ) ∂_i(√γ γ^{ij} ∂_j f)` in conservative form.
pub fn surface_laplacian<T: Real>(geom: &SurfaceGeometry<T>, field: &[T]) -> Result<Vec<T>> {
    let grid = graph_grid(geom, field)?;
    let len = grid.len();
    let mut out = vec![T::zero(); len];
    let half = c::<T>(0.5);
    match grid.topology {
        Topology::Radial => {
            let h = grid.h[0];
            let n = grid.n;
            // √γ carries the polar factor ξ^{n−1}; it is integrated exactly per
            // cell and only the smooth remainder is averaged.
            let xi = |s: T| s * h;
            let polar = |s: T| xi(s).powi(n as i32 - 1);
            let mut vol_s = vec![T::zero(); len];
            let mut flux_s = vec![T::zero(); len];
            for i in 0..len {
                let p = polar(T::from_usize_lossy(i));
                if p > T::zero() {
                    vol_s[i] = geom.sqrt_det[i] / p;
                    flux_s[i] = vol_s[i] * geom.nodes[i].gamma_inv[(0, 0)];
                }
            }
            if n > 1 && len > 2 {
                let third = T::one() / c::<T>(3.0);
                vol_s[0] = (c::<T>(4.0) * vol_s[1] - vol_s[2]) * third;
                flux_s[0] = (c::<T>(4.0) * flux_s[1] - flux_s[2]) * third;
            }
            let nn = T::from_usize_lossy(n);
            out[0] = T::from_usize_lossy(2 * n) * (field[1] - field[0]) / (h * h * geom.nodes[0].gamma[(0, 0)]);
            for i in 1..len - 1 {
                let s = T::from_usize_lossy(i);
                let (sp, sm) = (s + half, s - half);
                let fp = polar(sp) * half * (flux_s[i] + flux_s[i + 1]) * (field[i + 1] - field[i]) / h;
                let fm = polar(sm) * half * (flux_s[i] + flux_s[i - 1]) * (field[i] - field[i - 1]) / h;
                let cell = vol_s[i] * (xi(sp).powi(n as i32) - xi(sm).powi(n as i32)) / nn;
                out[i] = (fp - fm) / cell;
            }
            out[len - 1] = out[len - 2];
        }
        _ => {
            let n = grid.n;
            let mut flux = vec![vec![T::zero(); len]; n];
            for k in 0..len {
                let g = DVector::from_fn(n, |a, _| box_d1(&grid, field, k, a));
                let f = &geom.nodes[k].gamma_inv * g * geom.sqrt_det[k];
                for a in 0..n {
                    flux[a][k] = f[a];
                }
            }
            for k in 0..len {
                let mut div = T::zero();
                for a in 0..n {
                    div += box_d1(&grid, &flux[a], k, a);
                }
                out[k] = div / geom.sqrt_det[k];
            }
            if grid.topology == Topology::BoxDirichlet {
                for k in 0..len {
                    if grid.is_boundary(k) {
                        let mut idx = grid.multi_index(k);
                        let m = grid.nodes_per_axis;
                        for i in idx.iter_mut() {
                            *i = (*i).clamp(1, m - 2);
                        }
                        out[k] = out[grid.flat_index(&idx)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `|∇f|²_γ` per node.
pub fn surface_gradient_sq<T: Real>(geom: &SurfaceGeometry<T>, field: &[T]) -> Result<Vec<T>> {
    let grid = graph_grid(geom, field)?;
    Ok((0..grid.len())
        .map(|k| {
            if grid.is_radial() {
                let (f_r, _) = radial_derivs(field, k, grid.h[0]);
                geom.nodes[k].gamma_inv[(0, 0)] * f_r * f_r
            } else {
                let g = DVector::from_fn(grid.n, |a, _| box_d1(&grid, field, k, a));
                g.dot(&(&geom.nodes[k].gamma_inv * &g))
            }
        })
        .collect())
}

/// Structured parameter grid for embeddings, first axis slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid<T> {
    pub shape: Vec<usize>,
    pub h: Vec<T>,
}

impl<T: Real> ParamGrid<T> {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = k % self.shape[a];
            k /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, m)| acc * m + i)
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.multi_index(k)
            .iter()
            .zip(&self.shape)
            .all(|(&i, &m)| i > 0 && i + 1 < m)
    }
}

fn offset<T: Real>(pg: &ParamGrid<T>, idx: &[usize], moves: &[(usize, isize)]) -> usize {
    let mut j: Vec<usize> = idx.to_vec();
    for &(a, d) in moves {
        j[a] = (j[a] as isize + d) as usize;
    }
    pg.flat_index(&j)
}

/// Future unit normal from tangent vectors via cofactors.
pub fn normal_from_tangents<T: Real>(g: &DMatrix<T>, tangents: &DMatrix<T>, future: &DVector<T>) -> Result<DVector<T>> {
    let dim = g.nrows();
    let covec = DVector::from_fn(dim, |b, _| {
        let minor = tangents.clone().remove_row(b);
        let s = if b % 2 == 0 { T::one() } else { -T::one() };
        s * minor.determinant()
    });
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| GeomError::Domain("singular metric".into()))?;
    let up = &ginv * &covec;
    let nn = covec.dot(&up);
    if !(nn < T::zero()) {
        return Err(GeomError::NotSpacelike(format!(
            "normal is not timelike (G(N,N) = {:.3e})",
            nn.f64()
        )));
    }
    let nu = up / (-nn).sqrt();
    let o = (nu.transpose() * g * future)[(0, 0)];
    if o.abs() < c::<T>(1e-14) {
        return Err(GeomError::Orientation("normal orthogonal to the future field".into()));
    }
    Ok(if o < T::zero() { nu } else { -nu })
}

/// Geometry at one interior parameter node of an embedding.
pub fn embedding_node<T: Real, C: ChartSpec<T> + ?Sized>(
    chart: &C,
    pg: &ParamGrid<T>,
    samples: &[Vec<T>],
    k: usize,
    frame: Option<&dyn TimeFunction<T>>,
) -> Result<NodeGeometry<T>> {
    let dim = chart.dim();
    let m = pg.shape.len();
    let idx = pg.multi_index(k);
    let x = DVector::from_column_slice(&samples[k]);
    let at = |moves: &[(usize, isize)]| DVector::from_column_slice(&samples[offset(pg, &idx, moves)]);
    let two = c::<T>(2.0);
    let four = c::<T>(4.0);
    let mut tangents = DMatrix::zeros(dim, m);
    for i in 0..m {
        tangents.set_column(i, &((at(&[(i, 1)]) - at(&[(i, -1)])) / (two * pg.h[i])));
    }
    let g = chart.metric(&samples[k])?;
    let gamma = tangents.transpose() * &g * &tangents;
    if gamma.clone().cholesky().is_none() {
        return Err(GeomError::NotSpacelike(format!("induced metric not positive definite at parameter node {k}")));
    }
    let gamma_inv = gamma.clone().try_inverse().expect("positive definite");
    let nu = normal_from_tangents(&g, &tangents, &chart.future_vector(&samples[k]))?;
    let chr = christoffel_at(chart, &samples[k])?;
    let g_nu = &g * &nu;
    let mut sff = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let xij = if i == j {
                (at(&[(i, 1)]) - &x * two + at(&[(i, -1)])) / (pg.h[i] * pg.h[i])
            } else {
                (at(&[(i, 1), (j, 1)]) - at(&[(i, 1), (j, -1)]) - at(&[(i, -1), (j, 1)]) + at(&[(i, -1), (j, -1)]))
                    / (four * pg.h[i] * pg.h[j])
            };
            let mut acc = xij;
            for a in 0..dim {
                let mut s = T::zero();
                for b in 0..dim {
                    for cc in 0..dim {
                        s += chr.get(a, b, cc) * tangents[(b, i)] * tangents[(cc, j)];
                    }
                }
                acc[a] += s;
            }
            let v = -g_nu.dot(&acc);
            sff[(i, j)] = v;
            sff[(j, i)] = v;
        }
    }
    let h = (&gamma_inv * &sff).trace();
    let (kappa, u, alpha) = match frame {
        Some(tf) => {
            let d = tf.gradient(&samples[k])?;
            let ginv = g.clone().try_inverse().expect("checked");
            let alpha = lapse(&ginv, &d)?;
            let dn = DVector::from_vec(d).dot(&nu);
            (alpha * dn, tf.value(&samples[k])?, alpha)
        }
        None => {
            let fv = chart.future_vector(&samples[k]);
            let ff = (fv.transpose() * &g * &fv)[(0, 0)];
            let kappa = if ff < T::zero() {
                -g_nu.dot(&fv) / (-ff).sqrt()
            } else {
                T::from_f64(f64::NAN).unwrap_or(T::zero())
            };
            (kappa, samples[k][0], T::one())
        }
    };
    Ok(NodeGeometry {
        gamma,
        gamma_inv,
        normal: nu,
        second_ff: sff,
        h,
        kappa,
        u,
        alpha,
        q: T::one() / (kappa * kappa),
    })
}

/// Geometry at every interior parameter node; `interior` lists their flat
/// parameter indices in order.
#[derive(Debug, Clone)]
pub struct EmbeddedGeometry<T: Real> {
    pub interior: Vec<usize>,
    pub geometry: SurfaceGeometry<T>,
}

pub fn embedding_geometry<T: Real, C: ChartSpec<T> + ?Sized>(
    chart: &C,
    pg: &ParamGrid<T>,
    samples: &[Vec<T>],
    frame: Option<&dyn TimeFunction<T>>,
) -> Result<EmbeddedGeometry<T>> {
    if samples.len() != pg.len() || samples.iter().any(|s| s.len() != chart.dim()) {
        return Err(GeomError::Shape("embedding samples do not match the parameter grid".into()));
    }
    let interior: Vec<usize> = (0..pg.len()).filter(|&k| pg.is_interior(k)).collect();
    let nodes = interior
        .iter()
        .map(|&k| embedding_node(chart, pg, samples, k, frame))
        .collect::<Result<Vec<_>>>()?;
    let sqrt_det = nodes.iter().map(|g| g.gamma.determinant().sqrt()).collect();
    let points = interior.iter().map(|&k| samples[k].clone()).collect();
    Ok(EmbeddedGeometry {
        interior,
        geometry: SurfaceGeometry {
            grid: None,
            nodes,
            points,
            sqrt_det,
        },
    })
}
