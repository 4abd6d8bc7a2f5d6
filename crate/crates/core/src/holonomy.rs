//! Transport of `Q`-eigenspinors around closed orbits and the resulting
//! quantization of eigenvalues: `λ ∈ (2Z+1)π/τ`, so `λ ≠ 0`.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

use crate::autodiff::Scalar;
use crate::ckf::{CkfParams, EPS_FRAME};
use crate::error::{Error, Result};
use crate::fields::PotentialSpec;
use crate::flows::{integrate_along, CurveTrace};
use crate::pauli::{self, Spinor, SpinorT};
use crate::spin::{Projected, Qop, SpinorFn};
use crate::vec3::{dot, norm2, scale, V3};

/// `{offset + k·step : k ∈ Z}`
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArithmeticSet {
    pub offset: f64,
    pub step: f64,
}

impl ArithmeticSet {
    /// Distance from `lambda` to the nearest element.
    pub fn distance(&self, lambda: f64) -> f64 {
        let r = (lambda - self.offset).rem_euclid(self.step);
        r.min(self.step - r)
    }

    pub fn contains(&self, lambda: f64, tol: f64) -> bool {
        self.distance(lambda) <= tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolonomyResult {
    pub curve: CurveTrace,
    pub period: f64,
    /// `∮ (¼|Y| − (2/3) i div X − X·A) dt`
    pub phase_integral: Complex64,
    pub admissible_lambdas: ArithmeticSet,
    pub monodromy_at_zero: Complex64,
    /// Distance from the offset to the nearest point of `(2Z+1)π/τ`.
    pub quantization_residual: f64,
    /// Monodromies at `λ = 0` computed from `⟨e±, Q e±⟩` in each spin sector.
    pub sector_monodromies: [Complex64; 2],
}

/// Wraps an angle into `(−π, π]`.
fn wrap(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI { PI } else { r }
}

fn period_of(trace: &CurveTrace) -> Result<f64> {
    match (trace.closed, trace.period) {
        (true, Some(t)) => Ok(t),
        _ => Err(Error::NotClosed),
    }
}

fn require_frame(p: &CkfParams, trace: &CurveTrace) -> Result<()> {
    for &(_, x) in &trace.samples {
        let w = p.w(x);
        let ny = norm2(p.curl(x)).sqrt();
        if w <= EPS_FRAME || ny <= EPS_FRAME {
            return Err(Error::FrameUndefined { point: x, w, curl: ny });
        }
    }
    Ok(())
}

/// `∮ (¼|Y| − (2/3) i div X − X·A) dt` over one period.
pub fn phase_integral(p: &CkfParams, spec: &PotentialSpec, trace: &CurveTrace) -> Result<Complex64> {
    let re = integrate_along(trace, p, |x| 0.25 * norm2(p.curl(x)).sqrt() - dot(p.eval(x), spec.potential(x)))?;
    let im = integrate_along(trace, p, |x| -2.0 / 3.0 * p.div(x))?;
    Ok(Complex64::new(re, im))
}

/// Multiplier `u(τ)/u(0) = exp(−i∮(…)dt + iλτ)` of the transport equation.
pub fn transport(p: &CkfParams, spec: &PotentialSpec, trace: &CurveTrace, lambda: f64) -> Result<Complex64> {
    let tau = period_of(trace)?;
    require_frame(p, trace)?;
    let phi = phase_integral(p, spec, trace)?;
    Ok((Complex64::i() * (lambda * tau - phi)).exp())
}

/// `e₀ = √2 · (+1 eigenvector of σ·N)` with `N = Y/|Y|`, and `e± = P± e₀`.
pub fn frame_spinor(p: &CkfParams, x: V3<f64>) -> Result<(Spinor, Spinor)> {
    let e0 = base_spinor(p, x)?;
    let field = p.eval(x);
    let w = norm2(field).sqrt();
    let s = pauli::scale_re(1.0 / w, pauli::sigma_dot(field, e0));
    let plus = pauli::scale_re(0.5, pauli::add(e0, s));
    let minus = pauli::scale_re(0.5, pauli::sub(e0, s));
    Ok((plus, minus))
}

fn base_spinor(p: &CkfParams, x: V3<f64>) -> Result<Spinor> {
    let w = p.w(x);
    let y = p.curl(x);
    let ny = norm2(y).sqrt();
    if w <= EPS_FRAME || ny <= EPS_FRAME {
        return Err(Error::FrameUndefined { point: x, w, curl: ny });
    }
    Ok(pauli::scale_re(SQRT_2, pauli::up_along(scale(1.0 / ny, y))))
}

/// The constant spinor `e₀`, as a field.
struct Constant(Spinor);

impl SpinorFn for Constant {
    fn eval<T: Scalar>(&self, _x: V3<T>) -> SpinorT<T> {
        pauli::lift(self.0)
    }
}

/// Monodromy at `λ = 0` of each spin sector, from `∮⟨e±, Q e±⟩dt` with `Q`
/// applied to the spinor field `P± e₀` by exact differentiation.
pub fn sector_monodromies(p: &CkfParams, spec: &PotentialSpec, trace: &CurveTrace) -> Result<[Complex64; 2]> {
    period_of(trace)?;
    let e0 = Constant(base_spinor(p, trace.start())?);
    let mut out = [Complex64::new(0.0, 0.0); 2];
    for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
        let e = Projected { p, sign, f: &e0 };
        let q = Qop { p, spec, f: &e };
        let coefficient = |x: V3<f64>| pauli::inner(e.value(x), q.value(x));
        let re = integrate_along(trace, p, |x| coefficient(x).re)?;
        let im = integrate_along(trace, p, |x| coefficient(x).im)?;
        out[k] = (-Complex64::i() * Complex64::new(re, im)).exp();
    }
    Ok(out)
}

/// Eigenvalues of `Q` compatible with single-valued transport around the orbit.
pub fn admissible_spectrum(p: &CkfParams, spec: &PotentialSpec, trace: &CurveTrace) -> Result<HolonomyResult> {
    let tau = period_of(trace)?;
    require_frame(p, trace)?;
    let phi = phase_integral(p, spec, trace)?;
    let step = 2.0 * PI / tau;
    let offset = (phi.re / tau).rem_euclid(step);
    Ok(HolonomyResult {
        curve: trace.clone(),
        period: tau,
        phase_integral: phi,
        admissible_lambdas: ArithmeticSet { offset, step },
        monodromy_at_zero: (-Complex64::i() * phi).exp(),
        quantization_residual: wrap(phi.re - PI).abs() / tau,
        sector_monodromies: sector_monodromies(p, spec, trace)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GaugeFunction;
    use crate::flows::{integrate_curve, special_orbit_point};

    fn ro_circle() -> CurveTrace {
        integrate_curve(&CkfParams::rotation(), [1.0, 0.0, 0.0], 20.0, 1e-12).unwrap()
    }

    #[test]
    fn rotation_transport() {
        let tr = ro_circle();
        let p = CkfParams::rotation();
        let m0 = transport(&p, &PotentialSpec::Zero, &tr, 0.0).unwrap();
        assert!((m0 + 1.0).norm() < 1e-10);
        let m = transport(&p, &PotentialSpec::Zero, &tr, 0.5).unwrap();
        assert!((m - 1.0).norm() < 1e-10);
        let h = admissible_spectrum(&p, &PotentialSpec::Zero, &tr).unwrap();
        assert!((h.admissible_lambdas.offset - 0.5).abs() < 1e-10);
        assert!((h.admissible_lambdas.step - 1.0).abs() < 1e-10);
        assert!(h.admissible_lambdas.contains(-1.5, 1e-9));
        assert!(!h.admissible_lambdas.contains(0.0, 0.1));
        for m in h.sector_monodromies {
            assert!((m - h.monodromy_at_zero).norm() < 1e-10);
        }
    }

    #[test]
    fn special_orbit_quantization() {
        let p = CkfParams::special(2.0);
        let spec = PotentialSpec::HopfBase { mu: 2.0 };
        let tr = integrate_curve(&p, special_orbit_point(2.0, 0.5, 0.0), 20.0, 1e-12).unwrap();
        let h = admissible_spectrum(&p, &spec, &tr).unwrap();
        assert!((h.period - PI).abs() < 1e-8);
        assert!(h.quantization_residual < 1e-6);
        assert!((h.admissible_lambdas.offset - 1.0).abs() < 1e-6);
        assert!((h.monodromy_at_zero + 1.0).norm() < 1e-6);
        assert!(h.phase_integral.im.abs() < 1e-8);
        for m in h.sector_monodromies {
            assert!((m - h.monodromy_at_zero).norm() < 1e-10);
        }
    }

    #[test]
    fn monodromy_is_exponential_in_lambda() {
        let p = CkfParams::special(1.0);
        let spec = PotentialSpec::HopfBase { mu: 1.0 };
        let tr = integrate_curve(&p, special_orbit_point(1.0, 0.3, 1.0), 20.0, 1e-12).unwrap();
        let m0 = transport(&p, &spec, &tr, 0.0).unwrap();
        let tau = tr.period.unwrap();
        for lambda in [-2.0, -0.3, 0.7, 1.9, 5.0] {
            let m = transport(&p, &spec, &tr, lambda).unwrap();
            assert!((m - m0 * Complex64::from_polar(1.0, lambda * tau)).norm() < 1e-10);
        }
    }

    #[test]
    fn spectrum_is_independent_of_start_gauge_and_scale() {
        let p = CkfParams::special(1.0);
        let spec = PotentialSpec::modulated_hopf(1.0);
        let tr = integrate_curve(&p, special_orbit_point(1.0, 0.5, 0.0), 20.0, 1e-12).unwrap();
        let base = admissible_spectrum(&p, &spec, &tr).unwrap().admissible_lambdas.offset;
        // other starting points on the same orbit
        for k in [tr.samples.len() / 3, 2 * tr.samples.len() / 3] {
            let tr2 = integrate_curve(&p, tr.samples[k].1, 20.0, 1e-12).unwrap();
            let o = admissible_spectrum(&p, &spec, &tr2).unwrap().admissible_lambdas.offset;
            assert!((o - base).abs() < 1e-7);
        }
        let gauged = spec.clone().gauged(GaugeFunction::SinProduct);
        let o = admissible_spectrum(&p, &gauged, &tr).unwrap().admissible_lambdas.offset;
        assert!((o - base).abs() < 1e-8);
        for t in [0.0, 1.0, 10.0] {
            let o = admissible_spectrum(&p, &spec.clone().scaled(t), &tr).unwrap().admissible_lambdas.offset;
            assert!((o - base).abs() < 1e-8);
        }
    }

    #[test]
    fn frame_spinor_properties() {
        let p = CkfParams::rotation();
        let (ep, em) = frame_spinor(&p, [1.0, 0.0, 0.0]).unwrap();
        assert!((pauli::norm(ep) - 1.0).abs() < 1e-12 && (pauli::norm(em) - 1.0).abs() < 1e-12);
        assert!(pauli::inner(ep, em).norm() < 1e-13);
        let e0 = pauli::add(ep, em);
        assert!((pauli::norm_sqr(e0) - 2.0).abs() < 1e-14);
        let s = pauli::sigma_dot([0.0, 1.0, 0.0], e0);
        assert!(pauli::inner(e0, s).norm() < 1e-12);

        let p = CkfParams::special(1.0);
        for x in [[2.0, 0.0, 0.3], [0.1, 1.7, -0.5]] {
            let (ep, em) = frame_spinor(&p, x).unwrap();
            assert!((pauli::norm(ep) - 1.0).abs() < 1e-12 && (pauli::norm(em) - 1.0).abs() < 1e-12);
            let e0 = pauli::add(ep, em);
            let y = p.curl(x);
            let ny = norm2(y).sqrt();
            // ⟨e₀, P± σ·Y e₀⟩ = |Y|
            let sy = pauli::sigma_dot(y, e0);
            let field = p.eval(x);
            let s_sy = pauli::scale_re(1.0 / norm2(field).sqrt(), pauli::sigma_dot(field, sy));
            for sign in [1.0, -1.0] {
                let proj = pauli::scale_re(0.5, pauli::add(sy, pauli::scale_re(sign, s_sy)));
                assert!((pauli::inner(e0, proj) - ny).norm() < 1e-12);
            }
        }
        assert!(matches!(frame_spinor(&CkfParams::uniform(), [0.0; 3]), Err(Error::FrameUndefined { .. })));
    }

    #[test]
    fn open_curves_are_rejected() {
        let tr = integrate_curve(&CkfParams::uniform(), [0.0; 3], 1.0, 1e-10).unwrap();
        assert!(matches!(transport(&CkfParams::uniform(), &PotentialSpec::Zero, &tr, 0.0), Err(Error::NotClosed)));
    }
}
