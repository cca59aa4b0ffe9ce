//! Scalar abstraction: the numeric kernels are generic over the real field
//! (`f32` or `f64`), with complex matrices built on top via `num_complex`.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;

/// Real scalar type usable throughout the library.
///
/// Implemented for `f32` and `f64`. The trait adds standard-normal sampling
/// on top of the field operations so channel generation stays generic.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// One draw from N(0, 1).
    fn std_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;
}

impl Real for f64 {
    fn std_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.sample(rand_distr::StandardNormal)
    }
}

impl Real for f32 {
    fn std_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.sample(rand_distr::StandardNormal)
    }
}

/// Shorthand for lifting an `f64` literal into the generic scalar.
#[inline]
pub fn rc<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("literal representable in scalar type")
}

/// dBm to linear milliwatts.
#[inline]
pub fn dbm_to_mw<R: Real>(dbm: R) -> R {
    rc::<R>(10.0).powf(dbm / rc(10.0))
}

/// Linear milliwatts to dBm.
#[inline]
pub fn mw_to_dbm<R: Real>(mw: R) -> R {
    rc::<R>(10.0) * mw.log10()
}
