//! Pointwise checks of the differential identities satisfied by conformal
//! Killing fields.
//!
//! Each identity is a stable string id. Left- and right-hand sides are
//! evaluated independently from exact (automatic) derivatives of `X`, so a
//! residual measures only floating-point roundoff.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{gradient, second_jet, Scalar};
use crate::ckf::{is_simple_rotation, CkfParams, EPS_FRAME};
use crate::error::{Error, Result};
use crate::vec3::{add, cross, dot, norm2, scale, sub, V3};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Which fields an identity applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scope {
    /// Every conformal Killing field.
    General,
    /// Only fields with `X·curl X ≡ 0`.
    SimpleRotation,
}

pub struct Identity {
    pub id: &'static str,
    pub scope: Scope,
    /// Needs `w > 0` at the point.
    pub needs_w: bool,
    pub doc: &'static str,
    eval: fn(&LocalData) -> f64,
}

/// Exact local derivatives of `X` at a point.
pub struct LocalData {
    pub x: V3<f64>,
    pub field: V3<f64>,
    /// `jac[i][j] = ∂_i X_j`
    pub jac: [[f64; 3]; 3],
    /// `sec[k][i][j] = ∂_k ∂_i X_j`
    pub sec: [[[f64; 3]; 3]; 3],
    pub w: f64,
    pub div: f64,
    pub curl: V3<f64>,
    /// `dcurl[m][k] = ∂_m Y_k`
    pub dcurl: [[f64; 3]; 3],
    pub grad_div: V3<f64>,
    pub lap: V3<f64>,
    pub grad_w2: V3<f64>,
    p: CkfParams,
}

impl LocalData {
    pub fn new(p: &CkfParams, x: V3<f64>) -> Self {
        let (field, jac, sec) = second_jet(|y| p.eval_t(y), x);
        let div = jac[0][0] + jac[1][1] + jac[2][2];
        let curl_of = |d: &[[f64; 3]; 3]| [0, 1, 2].map(|k| d[(k + 1) % 3][(k + 2) % 3] - d[(k + 2) % 3][(k + 1) % 3]);
        let curl = curl_of(&jac);
        let dcurl = [0, 1, 2].map(|m| curl_of(&sec[m]));
        let grad_div = [0, 1, 2].map(|k| (0..3).map(|i| sec[k][i][i]).sum());
        let lap = [0, 1, 2].map(|j| (0..3).map(|i| sec[i][i][j]).sum());
        let grad_w2 = gradient(|y| norm2(p.eval_t(y)), x);
        LocalData { x, field, jac, sec, w: norm2(field).sqrt(), div, curl, dcurl, grad_div, lap, grad_w2, p: *p }
    }

    /// `∇_V U` for `U` with Jacobian `d[i][j] = ∂_i U_j`.
    fn along(v: V3<f64>, d: &[[f64; 3]; 3]) -> V3<f64> {
        [0, 1, 2].map(|j| (0..3).map(|i| v[i] * d[i][j]).sum())
    }

    fn xdx(&self) -> V3<f64> {
        Self::along(self.field, &self.jac)
    }

    fn xdy(&self) -> V3<f64> {
        Self::along(self.field, &self.dcurl)
    }

    fn z(&self) -> V3<f64> {
        cross(self.field, self.curl)
    }
}

fn maxnorm(v: V3<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn diff(a: V3<f64>, b: V3<f64>) -> f64 {
    maxnorm(sub(a, b))
}

fn x_dot_grad_w_alpha(d: &LocalData) -> f64 {
    let mut worst = 0.0f64;
    for alpha in [-1.0, 0.5, 3.0] {
        let g = gradient(|y| norm2(d.p.eval_t(y)).powf(alpha / 2.0), d.x);
        let lhs = dot(d.field, g);
        let rhs = alpha / 3.0 * d.div * d.w.powf(alpha);
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

fn xdx_from_grad_w2(d: &LocalData) -> f64 {
    diff(d.xdx(), add(scale(-0.5, d.grad_w2), scale(2.0 / 3.0 * d.div, d.field)))
}

fn x_cross_curl(d: &LocalData) -> f64 {
    diff(d.z(), add(scale(-2.0, d.xdx()), scale(2.0 / 3.0 * d.div, d.field)))
}

fn xdx_from_z(d: &LocalData) -> f64 {
    diff(d.xdx(), sub(scale(d.div / 3.0, d.field), scale(0.5, d.z())))
}

fn grad_w2(d: &LocalData) -> f64 {
    diff(d.grad_w2, add(scale(2.0 / 3.0 * d.div, d.field), d.z()))
}

fn x_cross_grad_w(d: &LocalData) -> f64 {
    let gw = gradient(|y| norm2(d.p.eval_t(y)).sqrt(), d.x);
    let lhs = cross(d.field, gw);
    let rhs = sub(scale(0.5 / d.w * dot(d.field, d.curl), d.field), scale(0.5 * d.w, d.curl));
    diff(lhs, rhs)
}

fn xdy_general(d: &LocalData) -> f64 {
    let p = d.p;
    let g = gradient(|y| dot(p.eval_t(y), p.curl_t(y)), d.x);
    diff(d.xdy(), sub(scale(d.div / 3.0, d.curl), g))
}

fn xdy_laplacian(d: &LocalData) -> f64 {
    diff(d.xdy(), scale(2.0, cross(d.field, d.lap)))
}

fn zdy(d: &LocalData) -> f64 {
    let lhs = LocalData::along(d.z(), &d.dcurl);
    let rhs = sub(scale(2.0 * dot(d.field, d.lap), d.curl), scale(2.0 * dot(d.curl, d.lap), d.field));
    diff(lhs, rhs)
}

fn laplacian(d: &LocalData) -> f64 {
    diff(d.lap, scale(-1.0 / 3.0, d.grad_div))
}

fn laplacian_closed_form(d: &LocalData) -> f64 {
    diff(d.lap, scale(-1.0, d.p.c))
}

fn curl_is_killing(d: &LocalData) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((d.dcurl[i][j] + d.dcurl[j][i]).abs());
        }
    }
    worst
}

fn curl_closed_form(d: &LocalData) -> f64 {
    diff(d.curl, d.p.curl(d.x)).max((d.div - d.p.div(d.x)).abs())
}

fn ydx(d: &LocalData) -> f64 {
    // Y_i ∇X_i = ∇_Y X = (1/3)(div X) Y
    let yi_grad_xi = [0, 1, 2].map(|k| (0..3).map(|i| d.curl[i] * d.jac[k][i]).sum());
    let y_dx = LocalData::along(d.curl, &d.jac);
    diff(yi_grad_xi, y_dx).max(diff(y_dx, scale(d.div / 3.0, d.curl)))
}

fn x_dot_y_zero(d: &LocalData) -> f64 {
    dot(d.field, d.curl).abs()
}

fn grad_w_norm_simple(d: &LocalData) -> f64 {
    let gw = gradient(|y| norm2(d.p.eval_t(y)).sqrt(), d.x);
    (norm2(gw) - (d.div * d.div / 9.0 + 0.25 * norm2(d.curl))).abs()
}

fn xdy_simple(d: &LocalData) -> f64 {
    diff(d.xdy(), scale(d.div / 3.0, d.curl))
}

fn zdy_simple(d: &LocalData) -> f64 {
    let lhs = LocalData::along(d.z(), &d.dcurl);
    diff(lhs, scale(2.0 * dot(d.field, d.lap), d.curl))
}

fn frame_relations(d: &LocalData) -> f64 {
    let ny = norm2(d.curl).sqrt();
    let r1 = (norm2(d.z()).sqrt() - d.w * ny).abs();
    let r2 = diff(cross(d.field, d.z()), scale(-d.w * d.w, d.curl));
    r1.max(r2)
}

fn curl_dot_lap_zero(d: &LocalData) -> f64 {
    (d.w * d.w * dot(d.curl, d.lap)).abs()
}

/// All registered identities.
pub static REGISTRY: &[Identity] = &[
    Identity { id: "ckf_equation", scope: Scope::General, needs_w: false, doc: "∇_iX_j + ∇_jX_i = (2/3)(div X)δ_ij", eval: |d| crate::ckf::conformal_killing_residual(&d.p, d.x) },
    Identity { id: "curl_div_closed_form", scope: Scope::General, needs_w: false, doc: "curl X = 2b + 2c×x, div X = 3b0 + 3c·x", eval: curl_closed_form },
    Identity { id: "XDw_alpha", scope: Scope::General, needs_w: true, doc: "∇_X w^α = (α/3)(div X) w^α for α ∈ {−1, ½, 3}", eval: x_dot_grad_w_alpha },
    Identity { id: "XDX_grad_w2", scope: Scope::General, needs_w: false, doc: "∇_X X = −½∇w² + (2/3)(div X)X", eval: xdx_from_grad_w2 },
    Identity { id: "XxY_expr", scope: Scope::General, needs_w: false, doc: "X×Y = −2∇_X X + (2/3)(div X)X", eval: x_cross_curl },
    Identity { id: "XDX_expr", scope: Scope::General, needs_w: false, doc: "∇_X X = (1/3)(div X)X − ½X×Y", eval: xdx_from_z },
    Identity { id: "grad_w2", scope: Scope::General, needs_w: false, doc: "∇w² = (2/3)(div X)X + X×Y", eval: grad_w2 },
    Identity { id: "Xxgrad_w", scope: Scope::General, needs_w: true, doc: "(X×∇)w = ½w⁻¹(X·Y)X − ½wY", eval: x_cross_grad_w },
    Identity { id: "curl_killing", scope: Scope::General, needs_w: false, doc: "∇_iY_j + ∇_jY_i = 0", eval: curl_is_killing },
    Identity { id: "YDX", scope: Scope::General, needs_w: false, doc: "Y_i∇X_i = ∇_Y X = (1/3)(div X)Y", eval: ydx },
    Identity { id: "XDY_general", scope: Scope::General, needs_w: false, doc: "∇_X Y = (1/3)(div X)Y − ∇(X·Y)", eval: xdy_general },
    Identity { id: "XDY_laplacian", scope: Scope::General, needs_w: false, doc: "∇_X Y = 2X×ΔX", eval: xdy_laplacian },
    Identity { id: "ZDY", scope: Scope::General, needs_w: false, doc: "∇_{X×Y}Y = 2(X·ΔX)Y − 2(Y·ΔX)X", eval: zdy },
    Identity { id: "laplacian_X", scope: Scope::General, needs_w: false, doc: "ΔX_j = −(1/3)∇_j(div X)", eval: laplacian },
    Identity { id: "laplacian_closed_form", scope: Scope::General, needs_w: false, doc: "ΔX = −c", eval: laplacian_closed_form },
    Identity { id: "XdotY_zero", scope: Scope::SimpleRotation, needs_w: false, doc: "X·Y = 0", eval: x_dot_y_zero },
    Identity { id: "grad_w_norm_simple", scope: Scope::SimpleRotation, needs_w: true, doc: "|∇w|² = (1/9)(div X)² + ¼|Y|²", eval: grad_w_norm_simple },
    Identity { id: "frame_relations", scope: Scope::SimpleRotation, needs_w: false, doc: "|X×Y| = w|Y| and X×(X×Y) = −w²Y", eval: frame_relations },
    Identity { id: "YdotlapX_zero", scope: Scope::SimpleRotation, needs_w: false, doc: "w² Y·ΔX = 0", eval: curl_dot_lap_zero },
    Identity { id: "XDY_simple", scope: Scope::SimpleRotation, needs_w: false, doc: "∇_X Y = (1/3)(div X)Y", eval: xdy_simple },
    Identity { id: "ZDY_simple", scope: Scope::SimpleRotation, needs_w: false, doc: "∇_{X×Y}Y = 2(X·ΔX)Y", eval: zdy_simple },
];

pub fn lookup(id: &str) -> Result<&'static Identity> {
    REGISTRY.iter().find(|i| i.id == id).ok_or_else(|| Error::UnknownIdentity(id.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity_id: String,
    pub point: V3<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn new(id: &str, point: V3<f64>, residual: f64, tolerance: f64) -> Self {
        IdentityReport { identity_id: id.to_string(), point, residual, tolerance, pass: residual <= tolerance }
    }
}

fn check_with(identity: &Identity, d: &LocalData, tolerance: f64) -> Result<IdentityReport> {
    if identity.needs_w && d.w <= EPS_FRAME {
        return Err(Error::FrameUndefined { point: d.x, w: d.w, curl: norm2(d.curl).sqrt() });
    }
    Ok(IdentityReport::new(identity.id, d.x, (identity.eval)(d), tolerance))
}

/// Checks one identity at one point.
pub fn check_identity(id: &str, p: &CkfParams, x: V3<f64>) -> Result<IdentityReport> {
    let identity = lookup(id)?;
    check_with(identity, &LocalData::new(p, x), DEFAULT_TOLERANCE)
}

/// Checks every applicable identity at `n_points` random points of `[−2, 2]³`.
///
/// Identities scoped to simple rotations are skipped unless `X·curl X ≡ 0`.
/// Reports are ordered by point index, then registry order.
pub fn run_identity_suite(p: &CkfParams, n_points: usize, seed: u64) -> Vec<IdentityReport> {
    run_identity_suite_with(p, n_points, seed, DEFAULT_TOLERANCE)
}

pub fn run_identity_suite_with(p: &CkfParams, n_points: usize, seed: u64, tolerance: f64) -> Vec<IdentityReport> {
    let points = sample_points(p, n_points, seed);
    let simple = is_simple_rotation(p);
    let mut out = Vec::with_capacity(points.len() * REGISTRY.len());
    for x in points {
        let d = LocalData::new(p, x);
        for identity in REGISTRY.iter().filter(|i| simple || i.scope == Scope::General) {
            // points were drawn with w > EPS_FRAME, so no identity can refuse them
            if let Ok(r) = check_with(identity, &d, tolerance) {
                out.push(r);
            }
        }
    }
    out
}

/// Uniform points of `[−2, 2]³` with `w > EPS_FRAME`, deterministic in `seed`.
pub fn sample_points(p: &CkfParams, n: usize, seed: u64) -> Vec<V3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < 1000 * n.max(1) {
        attempts += 1;
        let x = [0; 3].map(|_| rng.gen_range(-2.0..2.0));
        if p.w(x) > EPS_FRAME {
            out.push(x);
        }
    }
    out
}
