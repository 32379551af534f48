use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the analysis kernels are generic over.
///
/// Everything downstream of pixel storage (similarity terms, clustering
/// heights, losses, gradients) is written against this trait so the same
/// code runs in `f32` or `f64`. Pixel data on disk is always `f32`; see
/// the crate root for the concrete aliases used by the pipelines.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and literals.
    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts into any supported scalar")
    }

    /// Widening (or identity) conversion into `f64` for reporting.
    #[inline]
    fn into_f64(self) -> f64 {
        self.to_f64().expect("supported scalars convert into f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum<T>
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}
