//! Two-component spinors and the Pauli matrices.

use num_complex::{Complex, Complex64};
use num_traits::{One, Zero};

use crate::autodiff::{Dual, Scalar};
use crate::vec3::V3;

/// Spinor with components of scalar type `T`.
pub type SpinorT<T> = [Complex<T>; 2];

/// A point value of a spinor field.
pub type Spinor = SpinorT<f64>;

pub fn zero<T: Scalar>() -> SpinorT<T> {
    [Complex::new(T::zero(), T::zero()); 2]
}

pub fn add<T: Scalar>(a: SpinorT<T>, b: SpinorT<T>) -> SpinorT<T> {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn sub<T: Scalar>(a: SpinorT<T>, b: SpinorT<T>) -> SpinorT<T> {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn scale_re<T: Scalar>(s: T, a: SpinorT<T>) -> SpinorT<T> {
    [a[0] * s, a[1] * s]
}

pub fn scale_c<T: Scalar>(s: Complex<T>, a: SpinorT<T>) -> SpinorT<T> {
    [a[0] * s, a[1] * s]
}

/// Multiplies by the imaginary unit.
pub fn times_i<T: Scalar>(a: SpinorT<T>) -> SpinorT<T> {
    a.map(|z| Complex::new(-z.im, z.re))
}

/// `σ·v ψ` for a real vector `v`.
pub fn sigma_dot<T: Scalar>(v: V3<T>, s: SpinorT<T>) -> SpinorT<T> {
    let [x, y, z] = v;
    let m = Complex::new(x, -y); // v1 - i v2
    let p = Complex::new(x, y); // v1 + i v2
    [s[0] * z + m * s[1], p * s[0] - s[1] * z]
}

/// `σ_k ψ` for a single Pauli matrix.
pub fn sigma<T: Scalar>(k: usize, s: SpinorT<T>) -> SpinorT<T> {
    let mut v = [T::zero(); 3];
    v[k] = T::one();
    sigma_dot(v, s)
}

/// `σ·v ψ` where the vector has complex components.
pub fn sigma_dot_c<T: Scalar>(v: [Complex<T>; 3], s: SpinorT<T>) -> SpinorT<T> {
    let i = Complex::new(T::zero(), T::one());
    let m = v[0] - i * v[1];
    let p = v[0] + i * v[1];
    [v[2] * s[0] + m * s[1], p * s[0] - v[2] * s[1]]
}

/// Hermitian inner product `⟨a, b⟩`, conjugate-linear in `a`.
pub fn inner<T: Scalar>(a: SpinorT<T>, b: SpinorT<T>) -> Complex<T> {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

pub fn norm_sqr<T: Scalar>(a: SpinorT<T>) -> T {
    a[0].norm_sqr() + a[1].norm_sqr()
}

pub fn norm(a: Spinor) -> f64 {
    norm_sqr(a).sqrt()
}

pub fn lift<T: Scalar>(a: Spinor) -> SpinorT<T> {
    a.map(|z| Complex::new(T::cst(z.re), T::cst(z.im)))
}

pub fn values<T: Scalar>(a: SpinorT<T>) -> Spinor {
    a.map(|z| Complex64::new(z.re.val(), z.im.val()))
}

/// `exp(z)` for complex `z` over any scalar.
pub fn cexp<T: Scalar>(z: Complex<T>) -> Complex<T> {
    let m = z.re.exp();
    Complex::new(m * z.im.cos(), m * z.im.sin())
}

/// Splits a spinor of duals into value and the three partial derivatives.
pub fn split<T: Scalar>(s: SpinorT<Dual<T>>) -> (SpinorT<T>, [SpinorT<T>; 3]) {
    let value = s.map(|z| Complex::new(z.re.re, z.im.re));
    let d = [0, 1, 2].map(|k| s.map(|z| Complex::new(z.re.eps[k], z.im.eps[k])));
    (value, d)
}

/// Spinor components embedded as constants one differentiation level up.
pub fn embed<T: Scalar>(s: SpinorT<T>) -> SpinorT<Dual<T>> {
    s.map(|z| Complex::new(Dual::constant(z.re), Dual::constant(z.im)))
}

/// The three Pauli matrices as dense 2x2 complex arrays.
pub fn matrices() -> [[[Complex64; 2]; 2]; 3] {
    let o = Complex64::zero();
    let l = Complex64::one();
    let i = Complex64::i();
    [[[o, l], [l, o]], [[o, -i], [i, o]], [[l, o], [o, -l]]]
}

/// Max-norm residual of `(a·σ)(b·σ) = a·b I + i(a×b)·σ` on both basis spinors.
pub fn product_identity_residual(a: V3<f64>, b: V3<f64>) -> f64 {
    use crate::vec3::{cross, dot};
    let mut worst = 0.0f64;
    for basis in [[Complex64::one(), Complex64::zero()], [Complex64::zero(), Complex64::one()]] {
        let lhs = sigma_dot(a, sigma_dot(b, basis));
        let ab = dot(a, b);
        let rhs = add(scale_re(ab, basis), times_i(sigma_dot(cross(a, b), basis)));
        let d = sub(lhs, rhs);
        worst = worst.max(d[0].norm()).max(d[1].norm());
    }
    worst
}

/// Max-norm residual of `a×(b×c) = (a·c)b − (a·b)c`.
pub fn triple_product_residual(a: V3<f64>, b: V3<f64>, c: V3<f64>) -> f64 {
    use crate::vec3::{cross, dot, scale, sub};
    let lhs = cross(a, cross(b, c));
    let rhs = sub(scale(dot(a, c), b), scale(dot(a, b), c));
    let d = sub(lhs, rhs);
    d.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Unit eigenvector of `σ·n` with eigenvalue `+1`, for a unit vector `n`.
pub fn up_along(n: V3<f64>) -> Spinor {
    let [x, y, z] = n;
    if z > -0.5 {
        let s = (2.0 * (1.0 + z)).sqrt();
        [Complex64::new((1.0 + z) / s, 0.0), Complex64::new(x / s, y / s)]
    } else {
        let s = (2.0 * (1.0 - z)).sqrt();
        [Complex64::new(x / s, -y / s), Complex64::new((1.0 - z) / s, 0.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_dot_matches_dense_matrices() {
        let m = matrices();
        let s = [Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5)];
        for k in 0..3 {
            let dense = [
                m[k][0][0] * s[0] + m[k][0][1] * s[1],
                m[k][1][0] * s[0] + m[k][1][1] * s[1],
            ];
            let fast = sigma(k, s);
            assert!((dense[0] - fast[0]).norm() < 1e-15);
            assert!((dense[1] - fast[1]).norm() < 1e-15);
        }
    }

    #[test]
    fn up_along_is_eigenvector() {
        for n in [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [0.6, 0.0, 0.8], [0.0, -0.6, -0.8], [1.0, 0.0, 0.0]] {
            let e = up_along(n);
            let d = sub(sigma_dot(n, e), e);
            assert!(norm(d) < 1e-15, "{n:?}");
            assert!((norm(e) - 1.0).abs() < 1e-15);
        }
    }
}
