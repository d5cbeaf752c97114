//! Scalar traits shared by every grid computation.
//!
//! Grids are generic over their pixel type. Raw digital numbers and QA words
//! are integers; reflectance, NDVI and areas are real-valued and may be
//! computed in `f32` or `f64`.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Anything that can be stored in a [`RasterGrid`](crate::RasterGrid).
pub trait Sample: Copy + Debug + PartialEq + Send + Sync + 'static {}

impl Sample for bool {}
impl Sample for u8 {}
impl Sample for u16 {}
impl Sample for i16 {}
impl Sample for u32 {}
impl Sample for i32 {}
impl Sample for f32 {}
impl Sample for f64 {}

/// Integer or real pixel that converts losslessly into `f64` for reductions.
pub trait Numeric: Sample + NumCast + ToPrimitive {}

impl<T: Sample + NumCast + ToPrimitive> Numeric for T {}

/// Real-valued pixel (f32 or f64).
pub trait Real: Numeric + Float + FromPrimitive {
    /// Converts from `f64`, rounding to the nearest representable value.
    fn from_f64_lossy(v: f64) -> Self {
        <Self as NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossless(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
