//! Prescribed mean curvature fields `ℋ` and scalar fields on Minkowski
//! space pulled back to chart coordinates.

use crate::chart::TimeFunction;
use crate::error::{GeomError, Result};
use crate::real::{c, Real};

/// `ℋ` on chart coordinates.
pub trait PrescribedCurvatureField<T: Real>: Send + Sync {
    fn value(&self, p: &[T]) -> Result<T>;

    /// Covector `dℋ`; finite differences unless overridden.
    fn gradient(&self, p: &[T]) -> Result<Vec<T>> {
        fd_gradient(|q| self.value(q), p, c(1e-4))
    }

    fn has_analytic_gradient(&self) -> bool {
        false
    }

    fn monotone_declared(&self) -> bool {
        false
    }

    /// The value when the field is constant, enabling fast kernels.
    fn constant(&self) -> Option<T> {
        None
    }
}

impl<T: Real, F: PrescribedCurvatureField<T> + ?Sized> PrescribedCurvatureField<T> for &F {
    fn value(&self, p: &[T]) -> Result<T> {
        (**self).value(p)
    }
    fn gradient(&self, p: &[T]) -> Result<Vec<T>> {
        (**self).gradient(p)
    }
    fn has_analytic_gradient(&self) -> bool {
        (**self).has_analytic_gradient()
    }
    fn monotone_declared(&self) -> bool {
        (**self).monotone_declared()
    }
    fn constant(&self) -> Option<T> {
        (**self).constant()
    }
}

pub fn fd_gradient<T: Real, F: Fn(&[T]) -> Result<T>>(f: F, p: &[T], step: T) -> Result<Vec<T>> {
    (0..p.len())
        .map(|a| {
            let h = step * (p[a].abs() + T::one());
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[a] += h;
            pm[a] -= h;
            Ok((f(&pp)? - f(&pm)?) / (h + h))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField<T>(pub T);

impl<T: Real> PrescribedCurvatureField<T> for ConstantField<T> {
    fn value(&self, _p: &[T]) -> Result<T> {
        Ok(self.0)
    }
    fn gradient(&self, p: &[T]) -> Result<Vec<T>> {
        Ok(vec![T::zero(); p.len()])
    }
    fn has_analytic_gradient(&self) -> bool {
        true
    }
    fn monotone_declared(&self) -> bool {
        true
    }
    fn constant(&self) -> Option<T> {
        Some(self.0)
    }
}

/// Minkowski time and radius of a chart point with their chart partials.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkPoint<T> {
    pub t: T,
    pub r: T,
    pub dt: Vec<T>,
    pub dr: Vec<T>,
}

/// Charts of (a region of) Minkowski space adapted to spherical symmetry.
pub trait MinkowskiCoords<T: Real>: Send + Sync {
    fn minkowski(&self, p: &[T]) -> Result<MinkPoint<T>>;
}

/// Spherically symmetric scalar on Minkowski space: value and `(∂_t, ∂_r)`.
pub trait RadialField<T: Real>: Send + Sync {
    fn eval(&self, t: T, r: T) -> Result<(T, T, T)>;

    fn monotone_declared(&self) -> bool {
        false
    }
}

/// A [`RadialField`] expressed in the coordinates of a Minkowski chart.
pub struct OnChart<F, C> {
    pub field: F,
    pub chart: C,
}

impl<F, C> OnChart<F, C> {
    pub fn new(field: F, chart: C) -> Self {
        Self { field, chart }
    }
}

fn eval_full<T: Real, F: RadialField<T>, C: MinkowskiCoords<T>>(oc: &OnChart<F, C>, p: &[T]) -> Result<(T, Vec<T>)> {
    let m = oc.chart.minkowski(p)?;
    let (v, ft, fr) = oc.field.eval(m.t, m.r)?;
    Ok((v, m.dt.iter().zip(&m.dr).map(|(a, b)| ft * *a + fr * *b).collect()))
}

impl<T: Real, F: RadialField<T>, C: MinkowskiCoords<T>> PrescribedCurvatureField<T> for OnChart<F, C> {
    fn value(&self, p: &[T]) -> Result<T> {
        let m = self.chart.minkowski(p)?;
        Ok(self.field.eval(m.t, m.r)?.0)
    }
    fn gradient(&self, p: &[T]) -> Result<Vec<T>> {
        Ok(eval_full(self, p)?.1)
    }
    fn has_analytic_gradient(&self) -> bool {
        true
    }
    fn monotone_declared(&self) -> bool {
        self.field.monotone_declared()
    }
}

impl<T: Real, F: RadialField<T>, C: MinkowskiCoords<T>> TimeFunction<T> for OnChart<F, C> {
    fn value(&self, p: &[T]) -> Result<T> {
        let m = self.chart.minkowski(p)?;
        Ok(self.field.eval(m.t, m.r)?.0)
    }
    fn gradient(&self, p: &[T]) -> Result<Vec<T>> {
        Ok(eval_full(self, p)?.1)
    }
}

/// Natural cubic spline through `(x_k, y_k)`, linear extrapolation outside.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicTable<T> {
    x: Vec<T>,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> CubicTable<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(GeomError::Shape("table needs at least two (x, y) pairs of equal length".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GeomError::Shape("table abscissae must be strictly increasing".into()));
        }
        // second derivatives, tridiagonal solve with natural ends
        let mut m = vec![T::zero(); n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![T::zero(); k];
            let mut rhs = vec![T::zero(); k];
            let mut upper = vec![T::zero(); k];
            let mut lower = vec![T::zero(); k];
            let six = c::<T>(6.0);
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = c::<T>(2.0) * (h0 + h1);
                lower[i - 1] = h0;
                upper[i - 1] = h1;
                rhs[i - 1] = six * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            let sol = crate::linalg::thomas(&lower, &diag, &upper, &rhs)?;
            m[1..n - 1].copy_from_slice(&sol);
        }
        Ok(Self { x, y, m })
    }

    /// Value and first derivative.
    pub fn eval(&self, t: T) -> (T, T) {
        let n = self.x.len();
        if t < self.x[0] {
            let (v, d) = self.eval_inside(0, self.x[0]);
            return (v + d * (t - self.x[0]), d);
        }
        if t > self.x[n - 1] {
            let (v, d) = self.eval_inside(n - 2, self.x[n - 1]);
            return (v + d * (t - self.x[n - 1]), d);
        }
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        self.eval_inside(i, t)
    }

    fn eval_inside(&self, i: usize, t: T) -> (T, T) {
        let six = c::<T>(6.0);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = (t - x0) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / six;
        let d = (self.y[i + 1] - self.y[i]) / h
            + (-(c::<T>(3.0) * a * a - T::one()) * m0 + (c::<T>(3.0) * b * b - T::one()) * m1) * h / six;
        (v, d)
    }
}

/// `ℋ` tabulated against the Minkowski radius, time independent.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable<T>(pub CubicTable<T>);

impl<T: Real> RadialField<T> for RadialTable<T> {
    fn eval(&self, _t: T, r: T) -> Result<(T, T, T)> {
        let (v, d) = self.0.eval(r);
        Ok((v, T::zero(), d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_interior_and_nodes() {
        let x: Vec<f64> = (0..41).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let t = CubicTable::new(x.clone(), y).unwrap();
        for (xi, yi) in x.iter().zip(x.iter().map(|v| v.sin())) {
            assert!((t.eval(*xi).0 - yi).abs() < 1e-14);
        }
        let (v, d) = t.eval(1.234);
        assert!((v - 1.234f64.sin()).abs() < 1e-5);
        assert!((d - 1.234f64.cos()).abs() < 1e-4);
    }

    #[test]
    fn fd_gradient_linear() {
        let g = fd_gradient(|p: &[f64]| Ok(2.0 * p[0] - 3.0 * p[1]), &[0.3, 1.0], 1e-4).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-10 && (g[1] + 3.0).abs() < 1e-10);
    }
}
