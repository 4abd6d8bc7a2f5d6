//! Small generic helpers for 3-vectors stored as arrays.
//!
//! Public `f64` APIs use [`nalgebra::Vector3`]; the generic evaluators work
//! on `[T; 3]` so they can run at any differentiation depth.

use nalgebra::Vector3;

use crate::autodiff::Scalar;

pub type V3<T> = [T; 3];

#[inline]
pub fn dot<T: Scalar>(a: V3<T>, b: V3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Scalar>(a: V3<T>, b: V3<T>) -> V3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn add<T: Scalar>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Scalar>(a: V3<T>, b: V3<T>) -> V3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Scalar>(s: T, a: V3<T>) -> V3<T> {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn norm2<T: Scalar>(a: V3<T>) -> T {
    dot(a, a)
}

/// Lifts a constant `f64` vector to scalar type `T`.
#[inline]
pub fn lift<T: Scalar>(a: V3<f64>) -> V3<T> {
    a.map(T::cst)
}

#[inline]
pub fn values<T: Scalar>(a: V3<T>) -> V3<f64> {
    a.map(|c| c.val())
}

#[inline]
pub fn to_na(a: V3<f64>) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

#[inline]
pub fn from_na(v: &Vector3<f64>) -> V3<f64> {
    [v.x, v.y, v.z]
}
