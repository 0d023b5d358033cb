//! Lorentz background charts: metric, connection, curvature, reference norms.
//!
//! Index 0 is always the chart time coordinate. The lowered curvature tensor
//! is stored as `R[a][b][c][d] = G(R(∂_a, ∂_b)∂_c, ∂_d)` with
//! `R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`. With this convention the
//! Gaussian-foliation Riccati system reads `∂_t A_ij = R_0i0j + A_ik g^kl A_lj`,
//! and de Sitter in flat slicing has `R_0i0j = g_ij`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::real::{c, Real};

/// Connection coefficients `Γ^a_bc`, stored `a`-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Christoffel<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> T {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: T) {
        self.data[(a * self.dim + b) * self.dim + c] = v;
    }

    /// Sets `Γ^a_bc` and `Γ^a_cb`.
    pub fn set_sym(&mut self, a: usize, b: usize, c: usize, v: T) {
        self.set(a, b, c, v);
        self.set(a, c, b, v);
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a - *b)
                .collect(),
        }
    }

    fn axpy(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * *b;
        }
    }
}

/// Lowered curvature `R_abcd = G(R(∂_a, ∂_b)∂_c, ∂_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Riemann<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim.pow(4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> T {
        self.data[self.idx(a, b, c, d)]
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: T) {
        let i = self.idx(a, b, c, d);
        self.data[i] = v;
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest violation of `R_abcd = −R_bacd = −R_abdc`.
    pub fn antisymmetry_defect(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let v = self.get(a, b, c, d);
                        worst = worst
                            .max((v + self.get(b, a, c, d)).abs())
                            .max((v + self.get(a, b, d, c)).abs());
                    }
                }
            }
        }
        worst
    }

    /// `Ric_bc = G^ad R_abcd`.
    pub fn ricci(&self, ginv: &DMatrix<T>) -> DMatrix<T> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |b, cc| {
            let mut s = T::zero();
            for a in 0..n {
                for d in 0..n {
                    s += ginv[(a, d)] * self.get(a, b, cc, d);
                }
            }
            s
        })
    }

    /// Views the tensor as a generic four-slot covariant tensor.
    pub fn as_tensor(&self) -> Tensor<T> {
        Tensor::new(self.dim, vec![Slot::Lower; 4], self.data.clone())
    }
}

/// Coordinate description of a Lorentz background.
pub trait ChartSpec<T: Real>: Send + Sync {
    /// Spacetime dimension `n + 1`.
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    /// Raw metric components; implementations report points outside the
    /// validity region as [`GeomError::Domain`].
    fn metric(&self, p: &[T]) -> Result<DMatrix<T>>;

    /// `G = −dt² + g(t, x)` with zero shift.
    fn synchronous(&self) -> bool {
        false
    }

    /// Relative finite-difference step; the absolute step for coordinate `a`
    /// is `fd_step · (|x^a| + 1)`.
    fn fd_step(&self) -> T {
        c(1e-4)
    }

    fn christoffel(&self, _p: &[T]) -> Option<Result<Christoffel<T>>> {
        None
    }

    fn riemann(&self, _p: &[T]) -> Option<Result<Riemann<T>>> {
        None
    }

    /// Vector field declaring the time orientation.
    fn future_vector(&self, _p: &[T]) -> DVector<T> {
        let mut v = DVector::zeros(self.dim());
        v[0] = T::one();
        v
    }
}

impl<T: Real, C: ChartSpec<T> + ?Sized> ChartSpec<T> for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn metric(&self, p: &[T]) -> Result<DMatrix<T>> {
        (**self).metric(p)
    }
    fn synchronous(&self) -> bool {
        (**self).synchronous()
    }
    fn fd_step(&self) -> T {
        (**self).fd_step()
    }
    fn christoffel(&self, p: &[T]) -> Option<Result<Christoffel<T>>> {
        (**self).christoffel(p)
    }
    fn riemann(&self, p: &[T]) -> Option<Result<Riemann<T>>> {
        (**self).riemann(p)
    }
    fn future_vector(&self, p: &[T]) -> DVector<T> {
        (**self).future_vector(p)
    }
}

/// Strips analytic overrides and optionally replaces the step, so that the
/// finite-difference fallback can be exercised on any chart.
pub struct FdOnly<C> {
    pub inner: C,
    pub step: Option<f64>,
}

impl<C> FdOnly<C> {
    pub fn new(inner: C) -> Self {
        Self { inner, step: None }
    }

    pub fn with_step(inner: C, step: f64) -> Self {
        Self {
            inner,
            step: Some(step),
        }
    }
}

impl<T: Real, C: ChartSpec<T>> ChartSpec<T> for FdOnly<C> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn name(&self) -> String {
        format!("fd({})", self.inner.name())
    }
    fn metric(&self, p: &[T]) -> Result<DMatrix<T>> {
        self.inner.metric(p)
    }
    fn synchronous(&self) -> bool {
        self.inner.synchronous()
    }
    fn fd_step(&self) -> T {
        self.step.map(c).unwrap_or_else(|| self.inner.fd_step())
    }
    fn future_vector(&self, p: &[T]) -> DVector<T> {
        self.inner.future_vector(p)
    }
}

pub(crate) fn check_signature<T: Real>(g: &DMatrix<T>) -> Result<()> {
    let n = g.nrows();
    let scale = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let asym = (g - g.transpose()).iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if asym > c::<T>(1e-12) * scale.max(T::one()) {
        return Err(GeomError::Shape(format!(
            "metric not symmetric (defect {:.3e})",
            asym.f64()
        )));
    }
    let eig = g.clone().symmetric_eigen().eigenvalues;
    let big = eig.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = c::<T>(1e-10) * big;
    let negative = eig.iter().filter(|&&l| l < -tol).count();
    let positive = eig.iter().filter(|&&l| l > tol).count();
    if negative != 1 || positive != n - 1 {
        return Err(GeomError::Signature {
            negative,
            positive,
            expected_positive: n - 1,
        });
    }
    Ok(())
}

/// Metric at `p` with symmetry and Lorentz-signature checks.
pub fn metric_at<T: Real, C: ChartSpec<T> + ?Sized>(chart: &C, p: &[T]) -> Result<DMatrix<T>> {
    if p.len() != chart.dim() {
        return Err(GeomError::Shape(format!(
            "point has {} coordinates, chart dimension is {}",
            p.len(),
            chart.dim()
        )));
    }
    let g = chart.metric(p)?;
    check_signature(&g)?;
    if chart.synchronous() {
        let off = (1..g.nrows()).fold(T::zero(), |m, i| m.max(g[(0, i)].abs()));
        if g[(0, 0)] != -T::one() || off != T::zero() {
            return Err(GeomError::Domain(format!(
                "chart {} declared synchronous but G_00 = {:.3e}, max |G_0i| = {:.3e}",
                chart.name(),
                g[(0, 0)].f64(),
                off.f64()
            )));
        }
    }
    Ok(g)
}

fn fd_offsets<T: Real, C: ChartSpec<T> + ?Sized>(chart: &C, p: &[T]) -> Vec<T> {
    let s = chart.fd_step();
    p.iter().map(|x| s * (x.abs() + T::one())).collect()
}

fn shifted<T: Real>(p: &[T], axis: usize, delta: T) -> Vec<T> {
    let mut q = p.to_vec();
    q[axis] += delta;
    q
}

/// Metric partials `∂_c G` by central differences.
fn metric_partials<T: Real, C: ChartSpec<T> + ?Sized>(chart: &C, p: &[T]) -> Result<Vec<DMatrix<T>>> {
    let hs = fd_offsets(chart, p);
    (0..chart.dim())
        .map(|k| {
            let gp = chart.metric(&shifted(p, k, hs[k]))?;
            let gm = chart.metric(&shifted(p, k, -hs[k]))?;
            Ok((gp - gm) / (hs[k] + hs[k]))
        })
        .collect()
}

/// Levi-Civita connection from metric values and partials.
pub fn christoffel_from_partials<T: Real>(ginv: &DMatrix<T>, dg: &[DMatrix<T>]) -> Christoffel<T> {
    let n = ginv.nrows();
    let half = c::<T>(0.5);
    let mut gam = Christoffel::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for cc in b..n {
                let mut s = T::zero();
                for d in 0..n {
                    s += ginv[(a, d)] * (dg[cc][(d, b)] + dg[b][(d, cc)] - dg[d][(b, cc)]);
                }
                gam.set_sym(a, b, cc, half * s);
            }
        }
    }
    gam
}

pub(crate) fn inverse<T: Real>(g: &DMatrix<T>) -> Result<DMatrix<T>> {
    g.clone()
        .try_inverse()
        .ok_or_else(|| GeomError::Domain("singular metric".into()))
}

/// `Γ^a_bc` at `p`: analytic when the chart registers it, else central
/// differences of the metric.
pub fn christoffel_at<T: Real, C: ChartSpec<T> + ?Sized>(chart: &C, p: &[T]) -> Result<Christoffel<T>> {
    if let Some(r) = chart.christoffel(p) {
        return r;
    }
    let g = chart.metric(p)?;
    let dg = metric_partials(chart, p)?;
    Ok(christoffel_from_partials(&inverse(&g)?, &dg))
}

/// Lowered Riemann tensor at `p`.
pub fn riemann_at<T: Real, C: ChartSpec<T> + ?Sized>(chart: &C, p: &[T]) -> Result<Riemann<T>> {
    if let Some(r) = chart.riemann(p) {
        return r;
    }
    let n = chart.dim();
    let hs = fd_offsets(chart, p);
    let gam = christoffel_at(chart, p)?;
    let mut dgam = Vec::with_capacity(n);
    for k in 0..n {
        let mut d = christoffel_at(chart, &shifted(p, k, hs[k]))?;
        let m = christoffel_at(chart, &shifted(p, k, -hs[k]))?;
        d.axpy(-T::one(), &m);
        let inv = T::one() / (hs[k] + hs[k]);
        d.data.iter_mut().for_each(|v| *v *= inv);
        dgam.push(d);
    }
    let g = chart.metric(p)?;
    // up[f][a][b][c] = component f of R(∂_a, ∂_b)∂_c
    let mut up = vec![T::zero(); n.pow(4)];
    let at = |f: usize, a: usize, b: usize, cc: usize| ((f * n + a) * n + b) * n + cc;
    for f in 0..n {
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    let mut v = dgam[a].get(f, b, cc) - dgam[b].get(f, a, cc);
                    for e in 0..n {
                        v += gam.get(e, b, cc) * gam.get(f, a, e) - gam.get(e, a, cc) * gam.get(f, b, e);
                    }
                    up[at(f, a, b, cc)] = v;
                }
            }
        }
    }
    let mut r = Riemann::zeros(n);
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    let mut v = T::zero();
                    for f in 0..n {
                        v += g[(d, f)] * up[at(f, a, b, cc)];
                    }
                    r.set(a, b, cc, d, v);
                }
            }
        }
    }
    Ok(r)
}

/// Index position of a tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Upper,
    Lower,
}

/// Dense tensor with row-major components, first slot slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub dim: usize,
    pub slots: Vec<Slot>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(dim: usize, slots: Vec<Slot>, data: Vec<T>) -> Self {
        Self { dim, slots, data }
    }

    pub fn vector(v: &DVector<T>) -> Self {
        Self::new(v.len(), vec![Slot::Upper], v.iter().copied().collect())
    }

    pub fn covector(v: &DVector<T>) -> Self {
        Self::new(v.len(), vec![Slot::Lower], v.iter().copied().collect())
    }

    /// Covariant two-tensor from a matrix.
    pub fn bilinear(m: &DMatrix<T>) -> Self {
        let n = m.nrows();
        Self::new(n, vec![Slot::Lower; 2], (0..n * n).map(|k| m[(k / n, k % n)]).collect())
    }

    /// Applies `m` on one slot: `out[.., α, ..] = Σ_a m[(α, a)] in[.., a, ..]`.
    fn mode_product(&self, slot: usize, m: &DMatrix<T>) -> Vec<T> {
        let n = self.dim;
        let k = self.slots.len();
        let inner = n.pow((k - slot - 1) as u32);
        let outer = n.pow(slot as u32);
        let mut out = vec![T::zero(); self.data.len()];
        for o in 0..outer {
            for alpha in 0..n {
                for i in 0..inner {
                    let mut s = T::zero();
                    for a in 0..n {
                        s += m[(alpha, a)] * self.data[(o * n + a) * inner + i];
                    }
                    out[(o * n + alpha) * inner + i] = s;
                }
            }
        }
        out
    }
}

/// Reference Riemannian metric `G_E = G + 2ω⊗ω` built from a future unit
/// timelike `T` with `ω = G(T, ·)`.
#[derive(Debug, Clone)]
pub struct ReferenceFrame<T: Real> {
    pub base_point: Vec<T>,
    pub t: DVector<T>,
    pub g: DMatrix<T>,
    pub ge: DMatrix<T>,
}

impl<T: Real> ReferenceFrame<T> {
    pub fn new(g: DMatrix<T>, base_point: Vec<T>, t: DVector<T>) -> Result<Self> {
        let norm = (t.transpose() * &g * &t)[(0, 0)];
        if (norm + T::one()).abs() > c(1e-8) {
            return Err(GeomError::Domain(format!(
                "frame vector not unit timelike: G(T,T) = {:.6e}",
                norm.f64()
            )));
        }
        let omega = &g * &t;
        let ge = &g + (&omega * omega.transpose()) * c::<T>(2.0);
        Ok(Self {
            base_point,
            t,
            g,
            ge,
        })
    }

    pub fn at_chart<C: ChartSpec<T> + ?Sized>(chart: &C, p: &[T], t: DVector<T>) -> Result<Self> {
        Self::new(metric_at(chart, p)?, p.to_vec(), t)
    }
}

/// `|||B|||`: full contraction of `B` with itself under `G_E`.
pub fn reference_norm<T: Real>(frame: &ReferenceFrame<T>, tensor: &Tensor<T>) -> Result<T> {
    let n = frame.ge.nrows();
    if tensor.dim != n || tensor.slots.is_empty() || tensor.data.len() != n.pow(tensor.slots.len() as u32) {
        return Err(GeomError::Shape(format!(
            "tensor of dim {} with {} slots and {} components against frame of dim {}",
            tensor.dim,
            tensor.slots.len(),
            tensor.data.len(),
            n
        )));
    }
    let l = frame
        .ge
        .clone()
        .cholesky()
        .ok_or_else(|| GeomError::Domain("reference metric not positive definite".into()))?
        .l();
    let lt = l.transpose();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| GeomError::Domain("singular reference metric".into()))?;
    let mut cur = tensor.clone();
    for slot in 0..tensor.slots.len() {
        let m = match tensor.slots[slot] {
            Slot::Upper => &lt,
            Slot::Lower => &linv,
        };
        cur.data = cur.mode_product(slot, m);
    }
    Ok(cur.data.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt())
}

/// `−G(T, T′)` for future unit timelike vectors.
pub fn tilt_factor<T: Real>(g: &DMatrix<T>, t: &DVector<T>, tp: &DVector<T>) -> Result<T> {
    let v = -(t.transpose() * g * tp)[(0, 0)];
    if v < T::zero() {
        return Err(GeomError::Orientation(format!(
            "vectors have opposite time orientation (−G(T,T′) = {:.6e})",
            v.f64()
        )));
    }
    Ok(v)
}

/// Scalar time function on chart coordinates.
pub trait TimeFunction<T: Real>: Send + Sync {
    fn value(&self, p: &[T]) -> Result<T>;

    /// Covector `dτ` in chart coordinates.
    fn gradient(&self, p: &[T]) -> Result<Vec<T>>;
}

/// Lapse `α` from `α^{-2} = −G^{ab}τ_a τ_b`.
pub fn lapse<T: Real>(ginv: &DMatrix<T>, dtau: &[T]) -> Result<T> {
    let d = DVector::from_column_slice(dtau);
    let nn = (d.transpose() * ginv * &d)[(0, 0)];
    if nn >= T::zero() {
        return Err(GeomError::Domain(format!(
            "time function gradient not timelike (⟨∇τ,∇τ⟩ = {:.3e})",
            nn.f64()
        )));
    }
    Ok(T::one() / (-nn).sqrt())
}

/// Frame field `T = −α∇τ`.
pub fn frame_vector<T: Real>(ginv: &DMatrix<T>, dtau: &[T]) -> Result<DVector<T>> {
    let alpha = lapse(ginv, dtau)?;
    Ok(-(ginv * DVector::from_column_slice(dtau)) * alpha)
}
