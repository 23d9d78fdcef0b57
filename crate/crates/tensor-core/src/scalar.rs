use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the tensor engine can run on: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Default + 'static
{
    /// Lift an f64 constant into the scalar type.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
