use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the geometry is generic over.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }

    fn from_usize_lossy(k: usize) -> Self {
        Self::from_usize(k).expect("representable count")
    }

    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite_real(self) -> bool {
        self.f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub(crate) fn c<T: Real>(x: f64) -> T {
    T::lit(x)
}
