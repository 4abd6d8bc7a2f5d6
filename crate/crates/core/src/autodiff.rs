//! Forward-mode automatic differentiation in three variables.
//!
//! [`Dual<T>`] carries a value together with its gradient with respect to the
//! three Cartesian coordinates. Because `Dual<T>` is itself a [`Scalar`]
//! whenever `T` is, nesting gives exact higher derivatives:
//! `Dual<Dual<f64>>` holds value, gradient and Hessian.
//!
//! Field families in this crate are written once, generically over
//! [`Scalar`], and evaluated at whatever depth an operator needs.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Num, One, Zero};

/// Real scalar usable by the generic field evaluators.
pub trait Scalar:
    Num + Copy + Neg<Output = Self> + Debug + Send + Sync + 'static
{
    fn cst(v: f64) -> Self;
    /// Primal value with all derivative information dropped.
    fn val(&self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn atan2(self, x: Self) -> Self;

    fn recip(self) -> Self {
        Self::one() / self
    }

    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// Value plus gradient in three directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: [T; 3],
}

impl<T: Scalar> Dual<T> {
    pub fn constant(re: T) -> Self {
        Dual { re, eps: [T::zero(); 3] }
    }

    /// Seeds the three coordinate variables at `x`.
    pub fn seed(x: [T; 3]) -> [Self; 3] {
        let e = |k: usize, j: usize| if k == j { T::one() } else { T::zero() };
        [0, 1, 2].map(|k| Dual { re: x[k], eps: [e(k, 0), e(k, 1), e(k, 2)] })
    }

    /// Chain rule for a unary function with value `f` and derivative `df`.
    fn chain(self, f: T, df: T) -> Self {
        Dual { re: f, eps: self.eps.map(|d| d * df) }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual {
            re: self.re + o.re,
            eps: [self.eps[0] + o.eps[0], self.eps[1] + o.eps[1], self.eps[2] + o.eps[2]],
        }
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual {
            re: self.re - o.re,
            eps: [self.eps[0] - o.eps[0], self.eps[1] - o.eps[1], self.eps[2] - o.eps[2]],
        }
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual {
            re: self.re * o.re,
            eps: [
                self.eps[0] * o.re + self.re * o.eps[0],
                self.eps[1] * o.re + self.re * o.eps[1],
                self.eps[2] * o.re + self.re * o.eps[2],
            ],
        }
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = T::one() / o.re;
        let q = self.re * inv;
        Dual {
            re: q,
            eps: [
                (self.eps[0] - q * o.eps[0]) * inv,
                (self.eps[1] - q * o.eps[1]) * inv,
                (self.eps[2] - q * o.eps[2]) * inv,
            ],
        }
    }
}

impl<T: Scalar> Rem for Dual<T> {
    type Output = Self;
    fn rem(self, o: Self) -> Self {
        // a % b = a - b*trunc(a/b); trunc is locally constant.
        let k = T::cst((self.re.val() / o.re.val()).trunc());
        self - o * Dual::constant(k)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { re: -self.re, eps: self.eps.map(|d| -d) }
    }
}

impl<T: Scalar> Zero for Dual<T> {
    fn zero() -> Self {
        Dual::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.iter().all(|d| d.is_zero())
    }
}

impl<T: Scalar> One for Dual<T> {
    fn one() -> Self {
        Dual::constant(T::one())
    }
}

impl<T: Scalar> Num for Dual<T> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Dual::constant)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn cst(v: f64) -> Self {
        Dual::constant(T::cst(v))
    }
    fn val(&self) -> f64 {
        self.re.val()
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, (s + s).recip())
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn powf(self, p: f64) -> Self {
        self.chain(self.re.powf(p), self.re.powf(p - 1.0).scale(p))
    }
    fn atan2(self, x: Self) -> Self {
        let r2 = self.re * self.re + x.re * x.re;
        let inv = r2.recip();
        Dual {
            re: self.re.atan2(x.re),
            eps: [0, 1, 2].map(|k| (x.re * self.eps[k] - self.re * x.eps[k]) * inv),
        }
    }
}

/// Splits `f(x)` evaluated at seeded duals into value and partial derivatives.
pub fn split<T: Scalar>(d: Dual<T>) -> (T, [T; 3]) {
    (d.re, d.eps)
}

/// Gradient of a scalar function at `x`.
pub fn gradient<F>(f: F, x: [f64; 3]) -> [f64; 3]
where
    F: Fn([Dual<f64>; 3]) -> Dual<f64>,
{
    f(Dual::seed(x)).eps
}

/// Value, gradient and Hessian of a scalar function at `x`.
pub fn hessian<F>(f: F, x: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3])
where
    F: Fn([Dual<Dual<f64>>; 3]) -> Dual<Dual<f64>>,
{
    let xd = Dual::seed(Dual::seed(x));
    let r = f(xd);
    let g = [r.eps[0].re, r.eps[1].re, r.eps[2].re];
    let h = [r.eps[0].eps, r.eps[1].eps, r.eps[2].eps];
    (r.re.re, g, h)
}

/// Jacobian `J[i][j] = ∂_i F_j` of a vector field at `x`.
pub fn jacobian<F>(f: F, x: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3])
where
    F: Fn([Dual<f64>; 3]) -> [Dual<f64>; 3],
{
    let v = f(Dual::seed(x));
    let mut j = [[0.0; 3]; 3];
    for (i, row) in j.iter_mut().enumerate() {
        for (jj, out) in row.iter_mut().enumerate() {
            *out = v[jj].eps[i];
        }
    }
    (v.map(|c| c.re), j)
}

/// Value, Jacobian `∂_i F_j` and second derivatives `∂_k ∂_i F_j` (indexed `[k][i][j]`).
#[allow(clippy::type_complexity)]
pub fn second_jet<F>(f: F, x: [f64; 3]) -> ([f64; 3], [[f64; 3]; 3], [[[f64; 3]; 3]; 3])
where
    F: Fn([Dual<Dual<f64>>; 3]) -> [Dual<Dual<f64>>; 3],
{
    let v = f(Dual::seed(Dual::seed(x)));
    let mut jac = [[0.0; 3]; 3];
    let mut sec = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            jac[i][j] = v[j].eps[i].re;
            for k in 0..3 {
                sec[k][i][j] = v[j].eps[i].eps[k];
            }
        }
    }
    (v.map(|c| c.re.re), jac, sec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let g = gradient(|x| x[0] * x[1] / (x[2] + Dual::cst(1.0)), [2.0, 3.0, 1.0]);
        assert!((g[0] - 1.5).abs() < 1e-15);
        assert!((g[1] - 1.0).abs() < 1e-15);
        assert!((g[2] + 1.5).abs() < 1e-15);
    }

    #[test]
    fn nested_duals_give_hessian() {
        // f = x0^2 x1 + sin(x2)
        let (v, g, h) = hessian(|x| x[0] * x[0] * x[1] + x[2].sin(), [1.5, -2.0, 0.3]);
        assert!((v - (1.5f64.powi(2) * -2.0 + 0.3f64.sin())).abs() < 1e-14);
        assert!((g[0] - 2.0 * 1.5 * -2.0).abs() < 1e-14);
        assert!((g[2] - 0.3f64.cos()).abs() < 1e-14);
        assert!((h[0][0] + 4.0).abs() < 1e-14);
        assert!((h[0][1] - 3.0).abs() < 1e-14);
        assert!((h[1][0] - 3.0).abs() < 1e-14);
        assert!((h[2][2] + 0.3f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn transcendental_against_central_differences() {
        let f64f = |x: [f64; 3]| (x[0].powf(1.5) * x[1].exp()).ln() + x[2].atan2(x[0]) + (x[1] * x[2]).cos().sqrt();
        let x = [0.7, 0.2, -0.4];
        let g = gradient(
            |x| (x[0].powf(1.5) * x[1].exp()).ln() + x[2].atan2(x[0]) + (x[1] * x[2]).cos().sqrt(),
            x,
        );
        for k in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (f64f(xp) - f64f(xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "k={k}: {fd} vs {}", g[k]);
        }
    }
}
