//! Floating-point scalar used by embeddings and similarity scores.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Scalar type for embedding vectors: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Allowed deviation of a stored embedding's L2 norm from 1.
    fn norm_tolerance() -> Self;

    /// Lossy conversion from `f64`.
    fn from_f64_lossy(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn norm_tolerance() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn norm_tolerance() -> Self {
        1e-6
    }
}

/// Dot product of two equally long slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn l2_norm<S: Scalar>(v: &[S]) -> S {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length in place. Returns `false` for the zero vector.
pub fn normalize_in_place<S: Scalar>(v: &mut [S]) -> bool {
    let norm = l2_norm(v);
    if norm == S::zero() || !norm.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x = *x / norm;
    }
    true
}

pub fn is_unit<S: Scalar>(v: &[S]) -> bool {
    (l2_norm(v) - S::one()).abs() <= S::norm_tolerance()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_makes_unit_vectors() {
        let mut v = vec![3.0f64, 4.0];
        assert!(normalize_in_place(&mut v));
        assert_eq!(v, vec![0.6, 0.8]);
        assert!(is_unit(&v));

        let mut w = vec![3.0f32, 4.0, 12.0];
        assert!(normalize_in_place(&mut w));
        assert!(is_unit(&w));
    }

    #[test]
    fn zero_vector_is_rejected() {
        let mut v = vec![0.0f64; 4];
        assert!(!normalize_in_place(&mut v));
    }
}
