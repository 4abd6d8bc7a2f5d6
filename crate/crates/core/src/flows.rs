//! Integral curves of conformal Killing fields: adaptive Dormand–Prince
//! integration, closed-orbit detection, and integrals around closed orbits.

use nalgebra::{Matrix3xX, SVD};
use serde::{Deserialize, Serialize};

use crate::autodiff::jacobian;
use crate::ckf::{classify, CanonicalForm, CanonicalKind, CkfParams, EPS_FRAME};
use crate::error::{Error, Result};
use crate::fields::PotentialSpec;
use crate::quadrature::gauss_legendre;
use crate::vec3::{add, cross, dot, norm2, scale, sub, V3};

/// `|γ|` beyond which a curve is declared to blow up.
pub const ESCAPE_RADIUS: f64 = 1e6;
/// Section-crossing refinement tolerance.
pub const TOL_CLOSE: f64 = 1e-10;
const MAX_STEPS: usize = 5_000_000;
const LOOP_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AnalyticTag {
    /// Circle of radius `rho` about the rotation axis at axial height `x3`.
    RoCircle { rho: f64, x3: f64 },
    /// Orbit of a special field with invariants `ρ = |z−μ|/|z+μ|` and angle `θ`.
    CrCurve { mu: f64, rho: f64, theta: f64 },
    /// On the axis of a special field; blows up in finite time.
    CrAxis { mu: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveTrace {
    /// `(t, γ(t))`; for closed curves the last sample is the first return to the section.
    pub samples: Vec<(f64, V3<f64>)>,
    pub closed: bool,
    pub period: Option<f64>,
    pub plane_normal: Option<V3<f64>>,
    pub analytic_tag: Option<AnalyticTag>,
    pub rk_tol: f64,
}

impl CurveTrace {
    pub fn start(&self) -> V3<f64> {
        self.samples[0].1
    }

    fn require_closed(&self) -> Result<f64> {
        match (self.closed, self.period) {
            (true, Some(t)) => Ok(t),
            _ => Err(Error::NotClosed),
        }
    }
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// One Dormand–Prince step of `γ' = X(γ)`; returns the 5th-order solution and the error estimate.
pub fn dp_step<F: Fn(V3<f64>) -> V3<f64>>(f: &F, x: V3<f64>, h: f64) -> (V3<f64>, V3<f64>) {
    let mut k = [[0.0; 3]; 7];
    k[0] = f(x);
    for s in 1..7 {
        let mut y = x;
        for j in 0..s {
            y = add(y, scale(h * A[s][j], k[j]));
        }
        k[s] = f(y);
    }
    let _ = C;
    let mut xn = x;
    let mut err = [0.0; 3];
    for s in 0..7 {
        xn = add(xn, scale(h * B[s], k[s]));
        err = add(err, scale(h * E[s], k[s]));
    }
    (xn, err)
}

fn error_norm(err: V3<f64>, a: V3<f64>, b: V3<f64>, tol: f64) -> f64 {
    (0..3).map(|k| err[k].abs() / (tol + tol * a[k].abs().max(b[k].abs()))).fold(0.0, f64::max)
}

/// Point with invariants `(ρ, θ)` on the `x3 = 0` plane for the special field of radius μ about `e3`.
pub fn special_orbit_point(mu: f64, rho: f64, theta: f64) -> V3<f64> {
    let r = mu * (1.0 + rho) / (1.0 - rho);
    [r * theta.cos(), r * theta.sin(), 0.0]
}

/// Closed-form orbit `z(t) = μ(1+ρe^{−iμt})/(1−ρe^{−iμt})`, `z = r + i x3`, for the special field about `e3`.
pub fn special_orbit_exact(mu: f64, rho: f64, theta: f64, t: f64) -> V3<f64> {
    use num_complex::Complex64;
    let e = Complex64::from_polar(rho, -mu * t);
    let z = mu * (1.0 + e) / (1.0 - e);
    [z.re * theta.cos(), z.re * theta.sin(), z.im]
}

/// Orthonormal `(u, v)` completing `axis` to a right-handed frame.
fn perpendicular_basis(axis: V3<f64>) -> (V3<f64>, V3<f64>) {
    let helper = if axis[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = cross(axis, helper);
    let u = scale(1.0 / norm2(u).sqrt(), u);
    (u, cross(axis, u))
}

fn tag_for(form: &CanonicalForm, x: V3<f64>) -> Option<AnalyticTag> {
    let y = sub(x, form.x0);
    let h = dot(y, form.axis);
    let perp = sub(y, scale(h, form.axis));
    let r = norm2(perp).sqrt();
    match form.kind {
        CanonicalKind::Rotation => Some(AnalyticTag::RoCircle { rho: r, x3: h }),
        CanonicalKind::Special => {
            let mu = form.mu()?;
            if r <= 1e-12 * (1.0 + mu) {
                return Some(AnalyticTag::CrAxis { mu });
            }
            let (u, v) = perpendicular_basis(form.axis);
            let rho = ((r - mu).powi(2) + h * h).sqrt() / ((r + mu).powi(2) + h * h).sqrt();
            let theta = if form.axis == [0.0, 0.0, 1.0] { perp[1].atan2(perp[0]) } else { dot(perp, v).atan2(dot(perp, u)) };
            Some(AnalyticTag::CrCurve { mu, rho, theta })
        }
        _ => None,
    }
}

/// Integrates `γ' = X(γ)` from `x0` until the first return to `x0`, `t_max`, or blow-up.
///
/// The return is detected as an upward crossing of the plane through `x0`
/// orthogonal to `X(x0)` and refined by bisection on single steps.
pub fn integrate_curve(p: &CkfParams, x0: V3<f64>, t_max: f64, rk_tol: f64) -> Result<CurveTrace> {
    let form = classify(p)?;
    if !form.admissible {
        return Err(Error::NotAdmissible(format!("{:?} with ν = {}", form.kind, form.nu)));
    }
    let v0 = p.eval(x0);
    let w0 = norm2(v0).sqrt();
    if w0 <= EPS_FRAME {
        return Err(Error::FrameUndefined { point: x0, w: w0, curl: norm2(p.curl(x0)).sqrt() });
    }
    let f = |x: V3<f64>| p.eval(x);
    let n = scale(1.0 / w0, v0);
    let g = |x: V3<f64>| dot(sub(x, x0), n);
    let scale_len = 1.0 + norm2(x0).sqrt();
    let return_radius = 1e-6 * scale_len;

    let mut samples = vec![(0.0, x0)];
    let mut t = 0.0;
    let mut x = x0;
    let mut h = (0.01 * scale_len / w0).min(t_max);
    let mut g_prev = 0.0;
    let mut closed = false;
    let mut travelled = 0.0;

    for _ in 0..MAX_STEPS {
        if t >= t_max {
            break;
        }
        let h_try = h.min(t_max - t);
        let (xn, err) = dp_step(&f, x, h_try);
        let e = error_norm(err, x, xn, rk_tol);
        if !e.is_finite() || e > 1.0 {
            h = h_try * (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
            if !e.is_finite() {
                h = h_try * 0.2;
            }
            continue;
        }
        let g_new = g(xn);
        travelled += norm2(sub(xn, x)).sqrt();
        // an upward crossing after having left the section, near the start
        if g_prev < 0.0 && g_new >= 0.0 && norm2(sub(xn, x0)).sqrt() < 0.5 * travelled {
            let (mut lo, mut hi) = (0.0, h_try);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(dp_step(&f, x, mid).0) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= TOL_CLOSE * (1.0 + t) * 1e-3 {
                    break;
                }
            }
            let s = 0.5 * (lo + hi);
            let xr = dp_step(&f, x, s).0;
            if norm2(sub(xr, x0)).sqrt() <= return_radius {
                samples.push((t + s, xr));
                closed = true;
                break;
            }
        }
        t += h_try;
        x = xn;
        samples.push((t, x));
        if norm2(x).sqrt() > ESCAPE_RADIUS {
            return Err(Error::BlowUp { t, radius: ESCAPE_RADIUS });
        }
        g_prev = g_new;
        h = h_try * (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }

    let period = closed.then(|| samples.last().unwrap().0);
    let plane_normal = if closed {
        let y = p.curl(x0);
        let ny = norm2(y).sqrt();
        (ny > EPS_FRAME).then(|| scale(1.0 / ny, y))
    } else {
        None
    };
    Ok(CurveTrace { samples, closed, period, plane_normal, analytic_tag: tag_for(&form, x0), rk_tol })
}

/// `∮ div X dt`, `∮ |Y| dt` and `∮ X·A dt` around a closed orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LoopIntegrals {
    pub int_div: f64,
    pub int_abs_y: f64,
    pub int_flux: Option<f64>,
}

/// Evaluates `integrand` at Gauss–Legendre nodes of every step interval of a
/// closed trace and returns the integral over one period. Node positions come
/// from single Dormand–Prince steps out of the preceding sample.
pub fn integrate_along<G>(trace: &CurveTrace, p: &CkfParams, integrand: G) -> Result<f64>
where
    G: Fn(V3<f64>) -> f64,
{
    trace.require_closed()?;
    let f = |x: V3<f64>| p.eval(x);
    let (gx, gw) = gauss_legendre(LOOP_NODES);
    let mut total = 0.0;
    for pair in trace.samples.windows(2) {
        let (t0, x0) = pair[0];
        let h = pair[1].0 - t0;
        let mut part = 0.0;
        for (xi, wi) in gx.iter().zip(&gw) {
            let s = 0.5 * h * (1.0 + xi);
            part += wi * integrand(dp_step(&f, x0, s).0);
        }
        total += 0.5 * h * part;
    }
    Ok(total)
}

pub fn loop_integrals(trace: &CurveTrace, p: &CkfParams, spec: Option<&PotentialSpec>) -> Result<LoopIntegrals> {
    let int_div = integrate_along(trace, p, |x| p.div(x))?;
    let int_abs_y = integrate_along(trace, p, |x| norm2(p.curl(x)).sqrt())?;
    let int_flux = match spec {
        Some(s) => Some(integrate_along(trace, p, |x| dot(p.eval(x), s.potential(x)))?),
        None => None,
    };
    Ok(LoopIntegrals { int_div, int_abs_y, int_flux })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlanarityReport {
    /// `max |(x_i − x_0)·N|`
    pub max_plane_dev: f64,
    /// `max |κ − ½|Y|/w| / (½|Y|/w)` with `κ = |γ′×γ″|/|γ′|³`, `γ″ = ∇_X X`.
    pub max_curvature_residual: f64,
    /// Angle between `N` and the normal of the least-squares plane through the samples.
    pub fit_angle: f64,
}

pub fn planarity_and_curvature(trace: &CurveTrace, p: &CkfParams) -> Result<PlanarityReport> {
    trace.require_closed()?;
    let n = trace.plane_normal.ok_or(Error::NotClosed)?;
    let x0 = trace.start();
    let mut dev = 0.0f64;
    let mut curv = 0.0f64;
    for &(_, x) in &trace.samples {
        dev = dev.max(dot(sub(x, x0), n).abs());
        let (v, j) = jacobian(|y| p.eval_t(y), x);
        let acc = [0, 1, 2].map(|k| (0..3).map(|i| v[i] * j[i][k]).sum::<f64>());
        let w = norm2(v).sqrt();
        let kappa = norm2(cross(v, acc)).sqrt() / (w * w * w);
        let expect = 0.5 * norm2(p.curl(x)).sqrt() / w;
        curv = curv.max((kappa - expect).abs() / expect);
    }
    let fit = best_fit_normal(&trace.samples.iter().map(|s| s.1).collect::<Vec<_>>());
    let fit_angle = norm2(cross(fit, n)).sqrt().asin();
    Ok(PlanarityReport { max_plane_dev: dev, max_curvature_residual: curv, fit_angle })
}

/// Unit normal of the least-squares plane through a point cloud.
pub fn best_fit_normal(points: &[V3<f64>]) -> V3<f64> {
    let m = points.len() as f64;
    let c = points.iter().fold([0.0; 3], |acc, &x| add(acc, x)).map(|v| v / m);
    let mat = Matrix3xX::from_fn(points.len(), |i, j| points[j][i] - c[i]);
    let svd = SVD::new(mat, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let (k, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
    [u[(0, k)], u[(1, k)], u[(2, k)]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FixedPointKind {
    /// Isolated zero of a dilation.
    DilationCenter,
    /// Double zero of a special field with `ν = 0`.
    Dipole,
    /// One of the two zeros of a special field with `ν < 0`.
    SpecialPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DegenerateLocus {
    /// Zero line of a rotation.
    Line { point: V3<f64>, direction: V3<f64> },
    /// Zero circle of a special field with `ν > 0`.
    Circle { center: V3<f64>, normal: V3<f64>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointCensus {
    pub isolated: Vec<(V3<f64>, FixedPointKind)>,
    pub degenerate: Option<DegenerateLocus>,
}

/// Zeros of a simple-rotation field, from its canonical form.
pub fn fixed_point_census(p: &CkfParams) -> Result<FixedPointCensus> {
    let form = classify(p)?;
    let mut census = FixedPointCensus { isolated: Vec::new(), degenerate: None };
    match form.kind {
        CanonicalKind::Translation => {}
        CanonicalKind::Dilation => census.isolated.push((form.x0, FixedPointKind::DilationCenter)),
        CanonicalKind::Rotation => census.degenerate = Some(DegenerateLocus::Line { point: form.x0, direction: form.axis }),
        CanonicalKind::Special => {
            if form.nu > 0.0 {
                census.degenerate = Some(DegenerateLocus::Circle { center: form.x0, normal: form.axis, radius: (2.0 * form.nu).sqrt() });
            } else if form.nu == 0.0 {
                census.isolated.push((form.x0, FixedPointKind::Dipole));
            } else {
                let d = scale((-2.0 * form.nu).sqrt(), form.axis);
                census.isolated.push((add(form.x0, d), FixedPointKind::SpecialPair));
                census.isolated.push((sub(form.x0, d), FixedPointKind::SpecialPair));
            }
        }
    }
    Ok(census)
}
