//! Scalar abstraction for all numerics in this crate.
//!
//! Every algorithm is generic over a floating-point type implementing
//! [`Real`], a thin alias over the `num-traits` float machinery plus the
//! handful of conversions the solvers need. Only `f32` and `f64` implement
//! it; `f64` is the working precision (the crate root re-exports concrete
//! `f64` type aliases), while `f32` exists to keep the code honest about
//! precision assumptions.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive, Zero};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Floating-point scalar usable by every solver in this crate.
///
/// The bounds are the union of what the grid operators, banded solvers and
/// fitting routines require: IEEE float semantics, math constants,
/// assignment operators, summation, and loss-free conversion from small
/// integers and `f64` literals.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type (rounding if needed).
    fn of(x: f64) -> Self;

    /// Converts a `usize` count into this scalar type.
    fn of_usize(n: usize) -> Self;

    /// Machine epsilon of the concrete type.
    fn eps() -> Self;
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f64
    }
    #[inline]
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn of_usize(n: usize) -> Self {
        n as f32
    }
    #[inline]
    fn eps() -> Self {
        f32::EPSILON
    }
}

/// Complex number over the crate scalar.
pub type Cplx<T> = Complex<T>;

/// Element type of a linear system: either the real scalar itself or a
/// complex number over it. This is what the banded LU factorization and the
/// grid operators are generic over, so one solver serves the real Newton
/// systems and the complex time-stepping/splitting systems alike.
pub trait LinearScalar<T: Real>:
    Copy
    + Debug
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<T, Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Cheap pivoting magnitude: `|x|` for reals, `|re| + |im|` for complex.
    fn abs1(&self) -> T;
    /// Embeds a real value.
    fn from_real(x: T) -> Self;
}

impl<T: Real> LinearScalar<T> for T {
    #[inline]
    fn abs1(&self) -> T {
        self.abs()
    }
    #[inline]
    fn from_real(x: T) -> Self {
        x
    }
}

impl<T: Real> LinearScalar<T> for Cplx<T> {
    #[inline]
    fn abs1(&self) -> T {
        self.re.abs() + self.im.abs()
    }
    #[inline]
    fn from_real(x: T) -> Self {
        Cplx::new(x, T::zero())
    }
}

/// Euler Gamma function at integer or half-integer arguments, in closed
/// form: `Γ(k) = (k−1)!` and `Γ(k+1/2) = (2k)!/(4^k k!)·√π`. The unit-sphere
/// area constants only ever need these arguments, so no general
/// special-function dependency is required.
pub fn gamma_half_integer<T: Real>(two_x: u32) -> T {
    debug_assert!(two_x >= 1, "argument must be a positive half-integer");
    if two_x % 2 == 0 {
        // Integer argument k = two_x/2: (k-1)!
        let k = two_x / 2;
        let mut acc = T::one();
        for i in 1..k {
            acc *= T::of_usize(i as usize);
        }
        acc
    } else {
        // Half-integer argument k + 1/2 with k = (two_x-1)/2:
        // Γ(1/2) = √π, then Γ(x+1) = x·Γ(x).
        let k = (two_x - 1) / 2;
        let mut acc = T::PI().sqrt();
        for i in 0..k {
            // multiply by (i + 1/2)
            acc *= T::of_usize(i as usize) + T::of(0.5);
        }
        acc
    }
}

/// Area of the unit sphere S^{N−1} in ℝᴺ: `ω_{N−1} = 2 π^{N/2} / Γ(N/2)`.
pub fn unit_sphere_area<T: Real>(n: u32) -> T {
    let two = T::of(2.0);
    let pi_pow = T::PI().powf(T::of_usize(n as usize) / two);
    two * pi_pow / gamma_half_integer::<T>(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_matches_known_values() {
        // Γ(1)=1, Γ(2)=1, Γ(3)=2, Γ(4)=6
        assert_eq!(gamma_half_integer::<f64>(2), 1.0);
        assert_eq!(gamma_half_integer::<f64>(4), 1.0);
        assert_eq!(gamma_half_integer::<f64>(6), 2.0);
        assert_eq!(gamma_half_integer::<f64>(8), 6.0);
        // Γ(1/2)=√π, Γ(3/2)=√π/2, Γ(5/2)=3√π/4
        let sp = std::f64::consts::PI.sqrt();
        assert!((gamma_half_integer::<f64>(1) - sp).abs() < 1e-15);
        assert!((gamma_half_integer::<f64>(3) - sp / 2.0).abs() < 1e-15);
        assert!((gamma_half_integer::<f64>(5) - 0.75 * sp).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas_match_closed_forms() {
        let pi = std::f64::consts::PI;
        // circle length 2π (N=2), sphere area 4π (N=3), S³ area 2π² (N=4)
        assert!((unit_sphere_area::<f64>(1) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(2) - 2.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(3) - 4.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(4) - 2.0 * pi * pi).abs() < 1e-13);
        assert!((unit_sphere_area::<f64>(5) - 8.0 * pi * pi / 3.0).abs() < 1e-13);
    }

    #[test]
    fn f32_impl_is_usable() {
        let a = unit_sphere_area::<f32>(2);
        assert!((a - 2.0 * std::f32::consts::PI).abs() < 1e-5);
        assert_eq!(f32::of(1.5), 1.5f32);
    }
}
