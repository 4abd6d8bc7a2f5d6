//! Conformal Killing fields on R³.
//!
//! Every conformal Killing field is `X(x) = a + b0·x + b×x + (c·x)x − ½|x|²c`
//! for ten real parameters. The fields with `X·curl X ≡ 0` fall into four
//! canonical kinds; [`classify`] recovers the kind together with its center,
//! axis and scale.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{jacobian, second_jet, Scalar};
use crate::error::{Error, Result};
use crate::vec3::{add, cross, dot, lift, norm2, scale, sub, V3};

/// Points with `|X| ≤ EPS_FRAME` or `|curl X| ≤ EPS_FRAME` have no frame.
pub const EPS_FRAME: f64 = 1e-10;

/// Relative tolerance for the simple-rotation test in [`classify`].
pub const EPS_CLASSIFY: f64 = 1e-9;

/// The ten parameters of a conformal Killing field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CkfParams {
    pub a: V3<f64>,
    pub b0: f64,
    pub b: V3<f64>,
    pub c: V3<f64>,
}

impl CkfParams {
    pub const fn new(a: V3<f64>, b0: f64, b: V3<f64>, c: V3<f64>) -> Self {
        CkfParams { a, b0, b, c }
    }

    pub const fn zero() -> Self {
        CkfParams::new([0.0; 3], 0.0, [0.0; 3], [0.0; 3])
    }

    /// The uniform field `e₃`.
    pub const fn uniform() -> Self {
        CkfParams::new([0.0, 0.0, 1.0], 0.0, [0.0; 3], [0.0; 3])
    }

    /// Rotation about the x₃-axis, `e₃ × x`.
    pub const fn rotation() -> Self {
        CkfParams::new([0.0; 3], 0.0, [0.0, 0.0, 1.0], [0.0; 3])
    }

    /// The special field whose non-axis orbits link the circle of radius `mu`.
    pub fn special(mu: f64) -> Self {
        CkfParams::new([0.0, 0.0, 0.5 * mu * mu], 0.0, [0.0; 3], [0.0, 0.0, 1.0])
    }

    /// Sum of the rotation field and the special field with `mu = 1`.
    pub fn isoclinic() -> Self {
        CkfParams::rotation() + CkfParams::special(1.0)
    }

    /// Parameters rotated by the orthogonal matrix `r` (row-major).
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> Self {
        let m = |v: V3<f64>| [0, 1, 2].map(|i| dot(r[i], v));
        CkfParams::new(m(self.a), self.b0, m(self.b), m(self.c))
    }

    pub fn max_abs(&self) -> f64 {
        let n = |v: V3<f64>| norm2(v).sqrt();
        n(self.a).max(self.b0.abs()).max(n(self.b)).max(n(self.c))
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.b.iter()).chain(self.c.iter()).all(|v| v.is_finite()) && self.b0.is_finite()
    }

    /// `X(x)` at any differentiation depth.
    pub fn eval_t<T: Scalar>(&self, x: V3<T>) -> V3<T> {
        let c = lift::<T>(self.c);
        let cx = dot(c, x);
        let half_r2 = norm2(x).scale(0.5);
        let lin = add(scale(T::cst(self.b0), x), cross(lift(self.b), x));
        add(add(lift(self.a), lin), sub(scale(cx, x), scale(half_r2, c)))
    }

    /// `curl X = 2b + 2c×x`.
    pub fn curl_t<T: Scalar>(&self, x: V3<T>) -> V3<T> {
        let two = T::cst(2.0);
        add(scale(two, lift(self.b)), scale(two, cross(lift(self.c), x)))
    }

    /// `div X = 3b0 + 3c·x`.
    pub fn div_t<T: Scalar>(&self, x: V3<T>) -> T {
        (T::cst(self.b0) + dot(lift(self.c), x)).scale(3.0)
    }

    pub fn eval(&self, x: V3<f64>) -> V3<f64> {
        self.eval_t(x)
    }

    pub fn curl(&self, x: V3<f64>) -> V3<f64> {
        self.curl_t(x)
    }

    pub fn div(&self, x: V3<f64>) -> f64 {
        self.div_t(x)
    }

    /// `w = |X|`.
    pub fn w(&self, x: V3<f64>) -> f64 {
        norm2(self.eval(x)).sqrt()
    }
}

impl std::ops::Add for CkfParams {
    type Output = CkfParams;
    fn add(self, o: CkfParams) -> CkfParams {
        CkfParams::new(add(self.a, o.a), self.b0 + o.b0, add(self.b, o.b), add(self.c, o.c))
    }
}

impl std::ops::Mul<CkfParams> for f64 {
    type Output = CkfParams;
    fn mul(self, p: CkfParams) -> CkfParams {
        CkfParams::new(scale(self, p.a), self * p.b0, scale(self, p.b), scale(self, p.c))
    }
}

/// `X(x)` from the ten parameters.
pub fn eval_ckf(p: &CkfParams, x: V3<f64>) -> V3<f64> {
    p.eval(x)
}

/// Max over `i, j` of `|∇_i X_j + ∇_j X_i − (2/3)(div X)δ_ij|` from exact derivatives.
pub fn conformal_killing_residual(p: &CkfParams, x: V3<f64>) -> f64 {
    let (_, j) = jacobian(|y| p.eval_t(y), x);
    let div = j[0][0] + j[1][1] + j[2][2];
    let mut worst = 0.0f64;
    for i in 0..3 {
        for k in 0..3 {
            let delta = if i == k { 2.0 / 3.0 * div } else { 0.0 };
            worst = worst.max((j[i][k] + j[k][i] - delta).abs());
        }
    }
    worst
}

/// Max over `i, j` of `|∇_i Y_j + ∇_j Y_i|` for `Y = curl X`, with `Y`
/// itself obtained by differentiating `X`.
pub fn killing_residual_of_curl(p: &CkfParams, x: V3<f64>) -> f64 {
    let (_, _, sec) = second_jet(|y| p.eval_t(y), x);
    // ∇_m Y_k = ε_kij ∂_m ∂_i X_j
    let mut dy = [[0.0; 3]; 3];
    for (m, row) in dy.iter_mut().enumerate() {
        for (k, out) in row.iter_mut().enumerate() {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            *out = sec[m][i][j] - sec[m][j][i];
        }
    }
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((dy[i][j] + dy[j][i]).abs());
        }
    }
    worst
}

/// Coefficients of `X·curl X = 2a·b + 2(b0 b − c×a)·x + (b·c)|x|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimpleRotationResidual {
    pub a_dot_b: f64,
    pub c_dot_b: f64,
    pub linear: V3<f64>,
}

impl SimpleRotationResidual {
    pub fn norm(&self) -> f64 {
        self.a_dot_b.abs().max(self.c_dot_b.abs()).max(norm2(self.linear).sqrt())
    }
}

pub fn simple_rotation_residual(p: &CkfParams) -> SimpleRotationResidual {
    SimpleRotationResidual {
        a_dot_b: dot(p.a, p.b),
        c_dot_b: dot(p.c, p.b),
        linear: sub(scale(p.b0, p.b), cross(p.c, p.a)),
    }
}

/// Whether `X·curl X ≡ 0` within the classification tolerance.
pub fn is_simple_rotation(p: &CkfParams) -> bool {
    let s = p.max_abs();
    simple_rotation_residual(p).norm() <= EPS_CLASSIFY * s * s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CanonicalKind {
    /// `X = a`
    Translation,
    /// `X = b0 (x − x0)`
    Dilation,
    /// `X = b × (x − x0)`
    Rotation,
    /// `X = νc + (c·(x−x0))(x−x0) − ½|x−x0|²c`
    Special,
}

/// Canonical data of a simple-rotation field.
///
/// `axis` is a unit vector and `scale` the positive length of the
/// corresponding parameter vector (`a`, `b` or `c`); for a dilation the
/// signed rate is kept in `rate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalForm {
    pub kind: CanonicalKind,
    pub x0: V3<f64>,
    pub axis: V3<f64>,
    pub scale: f64,
    pub rate: f64,
    pub nu: f64,
    pub admissible: bool,
}

impl CanonicalForm {
    fn new(kind: CanonicalKind, x0: V3<f64>, axis: V3<f64>, scale: f64, rate: f64, nu: f64) -> Self {
        let admissible = match kind {
            CanonicalKind::Translation | CanonicalKind::Rotation => true,
            CanonicalKind::Special => nu > 0.0,
            CanonicalKind::Dilation => false,
        };
        CanonicalForm { kind, x0, axis, scale, rate, nu, admissible }
    }

    pub fn translation(a: V3<f64>) -> Self {
        let s = norm2(a).sqrt();
        CanonicalForm::new(CanonicalKind::Translation, [0.0; 3], scale(1.0 / s, a), s, 0.0, 0.0)
    }

    pub fn dilation(rate: f64, x0: V3<f64>) -> Self {
        CanonicalForm::new(CanonicalKind::Dilation, x0, [0.0; 3], rate.abs(), rate, 0.0)
    }

    pub fn rotation(b: V3<f64>, x0: V3<f64>) -> Self {
        let s = norm2(b).sqrt();
        CanonicalForm::new(CanonicalKind::Rotation, x0, scale(1.0 / s, b), s, 0.0, 0.0)
    }

    pub fn special(c: V3<f64>, x0: V3<f64>, nu: f64) -> Self {
        let s = norm2(c).sqrt();
        CanonicalForm::new(CanonicalKind::Special, x0, scale(1.0 / s, c), s, 0.0, nu)
    }

    /// `μ = √(2ν)`, the radius of the circle of zeros of a special field.
    pub fn mu(&self) -> Option<f64> {
        (self.kind == CanonicalKind::Special && self.nu > 0.0).then(|| (2.0 * self.nu).sqrt())
    }

    /// Minimal period of closed orbits, when the kind has them.
    pub fn orbit_period(&self) -> Option<f64> {
        match self.kind {
            CanonicalKind::Rotation => Some(2.0 * std::f64::consts::PI / self.scale),
            CanonicalKind::Special => self.mu().map(|mu| 2.0 * std::f64::consts::PI / (mu * self.scale)),
            _ => None,
        }
    }

    /// Expands the canonical data back into the ten parameters.
    pub fn to_params(&self) -> CkfParams {
        let v = scale(self.scale, self.axis);
        match self.kind {
            CanonicalKind::Translation => CkfParams::new(v, 0.0, [0.0; 3], [0.0; 3]),
            CanonicalKind::Dilation => CkfParams::new(scale(-self.rate, self.x0), self.rate, [0.0; 3], [0.0; 3]),
            CanonicalKind::Rotation => CkfParams::new(scale(-1.0, cross(v, self.x0)), 0.0, v, [0.0; 3]),
            CanonicalKind::Special => {
                let x0 = self.x0;
                let a = add(scale(self.nu, v), sub(scale(dot(v, x0), x0), scale(0.5 * norm2(x0), v)));
                CkfParams::new(a, -dot(v, x0), scale(-1.0, cross(v, x0)), v)
            }
        }
    }
}

/// Canonical form of a simple-rotation field.
pub fn classify(p: &CkfParams) -> Result<CanonicalForm> {
    let s = p.max_abs();
    if s == 0.0 {
        return Err(Error::ZeroField);
    }
    let residual = simple_rotation_residual(p).norm();
    let tolerance = EPS_CLASSIFY * s * s;
    if residual > tolerance {
        return Err(Error::NotSimpleRotation { residual, tolerance });
    }
    let tiny = EPS_CLASSIFY * s;
    let nb = norm2(p.b);
    let nc = norm2(p.c);
    if nc.sqrt() > tiny {
        let x0 = scale(1.0 / nc, sub(cross(p.c, p.b), scale(p.b0, p.c)));
        let nu = 0.5 / nc * (2.0 * dot(p.a, p.c) + nb - p.b0 * p.b0);
        Ok(CanonicalForm::special(p.c, x0, nu))
    } else if nb.sqrt() > tiny {
        Ok(CanonicalForm::rotation(p.b, scale(1.0 / nb, cross(p.b, p.a))))
    } else if p.b0.abs() > tiny {
        Ok(CanonicalForm::dilation(p.b0, scale(-1.0 / p.b0, p.a)))
    } else {
        Ok(CanonicalForm::translation(p.a))
    }
}

/// Orthonormal frame `T = X/w`, `N = X×Y/|X×Y|`, `B = Y/|Y|` and related data at a point.
///
/// The frame is orthonormal when `X·Y = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldFrame {
    pub x: V3<f64>,
    pub field: V3<f64>,
    pub w: f64,
    pub div: f64,
    pub curl: V3<f64>,
    pub x_cross_y: V3<f64>,
    pub t: V3<f64>,
    pub n: V3<f64>,
    pub b: V3<f64>,
}

pub fn frame_at(p: &CkfParams, x: V3<f64>) -> Result<FieldFrame> {
    let field = p.eval(x);
    let curl = p.curl(x);
    let w = norm2(field).sqrt();
    let ny = norm2(curl).sqrt();
    let z = cross(field, curl);
    let nz = norm2(z).sqrt();
    if w <= EPS_FRAME || ny <= EPS_FRAME || nz <= EPS_FRAME * EPS_FRAME {
        return Err(Error::FrameUndefined { point: x, w, curl: ny });
    }
    Ok(FieldFrame {
        x,
        field,
        w,
        div: p.div(x),
        curl,
        x_cross_y: z,
        t: scale(1.0 / w, field),
        n: scale(1.0 / nz, z),
        b: scale(1.0 / ny, curl),
    })
}

/// Uniformly random parameters in `[-1, 1]` per component.
pub fn random_params<R: Rng>(rng: &mut R) -> CkfParams {
    let mut v = || [0; 3].map(|_| rng.gen_range(-1.0..1.0));
    let a = v();
    let b = v();
    let c = v();
    CkfParams::new(a, rng.gen_range(-1.0..1.0), b, c)
}

/// Random canonical data of a simple-rotation field, all four kinds.
pub fn random_canonical<R: Rng>(rng: &mut R) -> CanonicalForm {
    let mut v = |lo: f64, hi: f64| [0; 3].map(|_| rng.gen_range(lo..hi));
    let u = v(-1.0, 1.0);
    let x0 = v(-2.0, 2.0);
    let kind = rng.gen_range(0..8);
    match kind {
        0 => CanonicalForm::translation(u),
        1 => CanonicalForm::dilation(rng.gen_range(0.2..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, x0),
        2 | 3 | 4 => CanonicalForm::rotation(u, project_out(x0, u)),
        _ => CanonicalForm::special(u, x0, rng.gen_range(-1.5..1.5)),
    }
}

/// A rotation center is only defined up to shifts along the axis; keep the
/// representative perpendicular to it, which is what [`classify`] returns.
fn project_out(x: V3<f64>, axis: V3<f64>) -> V3<f64> {
    sub(x, scale(dot(x, axis) / norm2(axis), axis))
}
