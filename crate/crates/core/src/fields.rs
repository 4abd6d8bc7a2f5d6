//! Analytic magnetic potentials whose fields are parallel to a conformal
//! Killing field, plus the Loss–Yau zero-mode potential used as a control.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{jacobian, Dual, Scalar};
use crate::ckf::{CkfParams, EPS_FRAME};
use crate::error::{Error, Result};
use crate::flows::CurveTrace;
use crate::pauli::{self, SpinorT};
use crate::spin::{SpinorField, SpinorFn};
use crate::vec3::{cross, dot, lift, norm2, scale, V3};

/// Floor for the denominator of [`parallelism_residual`].
pub const PARALLEL_FLOOR: f64 = 1e-300;

/// A real function of one variable with exact derivatives at any depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `amp·exp(−1/(1−s²))`, `s = (2u − lo − hi)/(hi − lo)`, zero for `|s| ≥ 1`.
    SmoothBump { lo: f64, hi: f64, amplitude: f64 },
    /// `amp·exp(−(u − center)²/(2 width²))`
    Gaussian { center: f64, width: f64, amplitude: f64 },
    /// `Σ c_k u^k`
    Polynomial { coefficients: Vec<f64> },
    Constant { value: f64 },
}

impl Profile {
    pub fn eval_t<T: Scalar>(&self, u: T) -> T {
        match self {
            Profile::SmoothBump { lo, hi, amplitude } => {
                let s = (u.scale(2.0) - T::cst(lo + hi)).scale(1.0 / (hi - lo));
                if s.val().abs() >= 1.0 {
                    T::zero()
                } else {
                    (-(T::one() - s * s).recip()).exp().scale(*amplitude)
                }
            }
            Profile::Gaussian { center, width, amplitude } => {
                let d = (u - T::cst(*center)).scale(1.0 / width);
                (-(d * d).scale(0.5)).exp().scale(*amplitude)
            }
            Profile::Polynomial { coefficients } => coefficients.iter().rev().fold(T::zero(), |acc, &c| acc * u + T::cst(c)),
            Profile::Constant { value } => T::cst(*value),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.eval_t(u)
    }

    /// Value, first and second derivative.
    pub fn jet(&self, u: f64) -> (f64, f64, f64) {
        let d = Dual::seed(Dual::seed([u, 0.0, 0.0]))[0];
        let r = self.eval_t(d);
        (r.re.re, r.eps[0].re, r.eps[0].eps[0])
    }
}

/// Gauge functions `g` whose gradient may be added to any potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugeFunction {
    /// `g = k·x`
    Linear { k: V3<f64> },
    /// `g = sin(x1)·x2`
    SinProduct,
}

impl GaugeFunction {
    pub fn value_t<T: Scalar>(&self, x: V3<T>) -> T {
        match self {
            GaugeFunction::Linear { k } => dot(lift(*k), x),
            GaugeFunction::SinProduct => x[0].sin() * x[1],
        }
    }

    pub fn grad_t<T: Scalar>(&self, x: V3<T>) -> V3<T> {
        match self {
            GaugeFunction::Linear { k } => lift(*k),
            GaugeFunction::SinProduct => [x[0].cos() * x[1], x[0].sin(), T::zero()],
        }
    }
}

/// Magnetic potential families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    /// `A = f(x1²+x2²)·g(x3)·e3`; the field is `−2 f′ g · (e3 × x)`.
    Axial { radial: Profile, vertical: Profile },
    /// `A = (μ² + |x|²)⁻² (e3 × x)`; the field is `4(μ²+|x|²)⁻³` times the special field of radius μ.
    HopfBase { mu: f64 },
    /// The base potential multiplied by `f(I1)·g(I2)` for two invariants of
    /// the base's parent flow: `(x1²+x2², x3)` for `Axial`, and
    /// `(ρ, θ)` with `ρ = |z−μ|/|z+μ|`, `z = r + i x3`, `θ = atan2(x2, x1)`
    /// for `HopfBase`. `second` should be 2π-periodic when it acts on θ.
    Modulated { base: Box<PotentialSpec>, first: Profile, second: Profile },
    /// Potential of the Loss–Yau zero mode, parallel to `e3×x` plus the special field of radius 1.
    LossYau,
    Scaled { t: f64, base: Box<PotentialSpec> },
    /// `A + ∇g`
    Gauged { base: Box<PotentialSpec>, gauge: GaugeFunction },
}

impl PotentialSpec {
    pub fn scaled(self, t: f64) -> Self {
        PotentialSpec::Scaled { t, base: Box::new(self) }
    }

    pub fn gauged(self, gauge: GaugeFunction) -> Self {
        PotentialSpec::Gauged { base: Box::new(self), gauge }
    }

    /// Compactly supported axial bump used throughout the tests and experiments.
    pub fn axial_bump() -> Self {
        PotentialSpec::Axial {
            radial: Profile::SmoothBump { lo: 0.25, hi: 4.0, amplitude: 1.0 },
            vertical: Profile::SmoothBump { lo: -2.0, hi: 2.0, amplitude: 1.0 },
        }
    }

    /// Hopf base potential modulated by a bump in ρ, compactly supported around the circle of radius μ.
    pub fn modulated_hopf(mu: f64) -> Self {
        PotentialSpec::Modulated {
            base: Box::new(PotentialSpec::HopfBase { mu }),
            first: Profile::SmoothBump { lo: 0.1, hi: 0.8, amplitude: 4.0 },
            second: Profile::Constant { value: 1.0 },
        }
    }

    /// The conformal Killing field this potential's field is parallel to.
    pub fn parent(&self) -> Option<CkfParams> {
        match self {
            PotentialSpec::Zero => None,
            PotentialSpec::Axial { .. } => Some(CkfParams::rotation()),
            PotentialSpec::HopfBase { mu } => Some(CkfParams::special(*mu)),
            PotentialSpec::LossYau => Some(CkfParams::isoclinic()),
            PotentialSpec::Modulated { base, .. } | PotentialSpec::Gauged { base, .. } => base.parent(),
            PotentialSpec::Scaled { t, base } => if *t == 0.0 { None } else { base.parent() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Modulated { base, .. } => match **base {
                PotentialSpec::Axial { .. } | PotentialSpec::HopfBase { .. } => Ok(()),
                _ => Err(Error::Invalid("modulation needs an Axial or HopfBase base".into())),
            },
            PotentialSpec::HopfBase { mu } if !(*mu > 0.0) => Err(Error::Invalid(format!("HopfBase needs μ > 0, got {mu}"))),
            PotentialSpec::Scaled { base, t } => {
                if !t.is_finite() {
                    return Err(Error::Invalid("non-finite scaling".into()));
                }
                base.validate()
            }
            PotentialSpec::Gauged { base, .. } => base.validate(),
            _ => Ok(()),
        }
    }

    pub fn potential_t<T: Scalar>(&self, x: V3<T>) -> V3<T> {
        match self {
            PotentialSpec::Zero => [T::zero(); 3],
            PotentialSpec::Axial { radial, vertical } => {
                let u = x[0] * x[0] + x[1] * x[1];
                [T::zero(), T::zero(), radial.eval_t(u) * vertical.eval_t(x[2])]
            }
            PotentialSpec::HopfBase { mu } => {
                let s = (T::cst(mu * mu) + norm2(x)).recip();
                scale(s * s, rot_t(x))
            }
            PotentialSpec::Modulated { base, first, second } => {
                let (i1, i2) = match **base {
                    PotentialSpec::Axial { .. } => (x[0] * x[0] + x[1] * x[1], x[2]),
                    PotentialSpec::HopfBase { mu } => hopf_invariants(mu, x),
                    _ => return [T::cst(f64::NAN); 3],
                };
                scale(first.eval_t(i1) * second.eval_t(i2), base.potential_t(x))
            }
            PotentialSpec::LossYau => losyau_potential_t(x).0,
            PotentialSpec::Scaled { t, base } => scale(T::cst(*t), base.potential_t(x)),
            PotentialSpec::Gauged { base, gauge } => crate::vec3::add(base.potential_t(x), gauge.grad_t(x)),
        }
    }

    /// `curl A` at any differentiation depth.
    pub fn field_t<T: Scalar>(&self, x: V3<T>) -> V3<T> {
        let a = self.potential_t(Dual::seed(x));
        let d = |i: usize, j: usize| a[j].eps[i];
        [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)]
    }

    pub fn potential(&self, x: V3<f64>) -> V3<f64> {
        self.potential_t(x)
    }

    pub fn field(&self, x: V3<f64>) -> V3<f64> {
        self.field_t(x)
    }
}

fn rot_t<T: Scalar>(x: V3<T>) -> V3<T> {
    [-x[1], x[0], T::zero()]
}

/// `(ρ, θ)`, constant along the orbits of the special field of radius μ.
pub fn hopf_invariants<T: Scalar>(mu: f64, x: V3<T>) -> (T, T) {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let r = r2.sqrt();
    let q = r2 + x[2] * x[2] + T::cst(mu * mu);
    let m = r.scale(2.0 * mu);
    (((q - m) / (q + m)).sqrt(), x[1].atan2(x[0]))
}

pub fn eval_potential(spec: &PotentialSpec, x: V3<f64>) -> V3<f64> {
    spec.potential(x)
}

pub fn eval_field(spec: &PotentialSpec, x: V3<f64>) -> V3<f64> {
    spec.field(x)
}

/// Divergence of `B`, which vanishes identically.
pub fn field_divergence(spec: &PotentialSpec, x: V3<f64>) -> f64 {
    let (_, j) = jacobian(|y| spec.field_t(y), x);
    j[0][0] + j[1][1] + j[2][2]
}

/// `|B × X| / max(|B||X|, floor)` against the potential's parent field.
pub fn parallelism_residual(spec: &PotentialSpec, x: V3<f64>) -> f64 {
    match spec.parent() {
        Some(p) => parallelism_residual_to(spec, &p, x),
        None => 0.0,
    }
}

pub fn parallelism_residual_to(spec: &PotentialSpec, p: &CkfParams, x: V3<f64>) -> f64 {
    let b = spec.field(x);
    let v = p.eval(x);
    norm2(cross(b, v)).sqrt() / (norm2(b).sqrt() * norm2(v).sqrt()).max(PARALLEL_FLOOR)
}

/// `ψ = (1+|x|²)^{−3/2} (I + i x·σ)(1, 0)`
pub fn losyau_mode_t<T: Scalar>(x: V3<T>) -> SpinorT<T> {
    use num_complex::Complex;
    let s = (T::one() + norm2(x)).powf(-1.5);
    [Complex::new(s, s * x[2]), Complex::new(-(s * x[1]), s * x[0])]
}

/// Potential defined by `σ·A ψ = σ·(−i∇)ψ` for the Loss–Yau mode:
/// `A_j = Re⟨ψ, σ_j σ·(−i∇)ψ⟩ / |ψ|²`. The second value holds the
/// discarded imaginary parts, which vanish when the equation is solvable.
pub fn losyau_potential_t<T: Scalar>(x: V3<T>) -> (V3<T>, V3<T>) {
    let (psi, dpsi) = pauli::split(losyau_mode_t(Dual::seed(x)));
    let mut g = pauli::zero();
    for (k, d) in dpsi.iter().enumerate() {
        g = pauli::add(g, pauli::sigma(k, *d));
    }
    let g = pauli::scale_re(-T::one(), pauli::times_i(g));
    let n = pauli::norm_sqr(psi);
    let z = [0, 1, 2].map(|j| pauli::inner(psi, pauli::sigma(j, g)) / n);
    (z.map(|c| c.re), z.map(|c| c.im))
}

/// Result of [`construct_losyau`] and its certification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossYauCertificate {
    pub points: usize,
    pub max_imaginary: f64,
    pub max_dirac_residual: f64,
    pub max_parallel_residual: f64,
}

pub const LOSYAU_TOLERANCE: f64 = 1e-10;
const LOSYAU_POINTS: usize = 1000;

/// Builds the Loss–Yau potential from its zero mode and certifies it at
/// random points of `[−3, 3]³`.
pub fn construct_losyau() -> Result<(PotentialSpec, SpinorField)> {
    let cert = certify_losyau(LOSYAU_POINTS, 0x105a)?;
    debug_assert!(cert.max_dirac_residual <= LOSYAU_TOLERANCE);
    Ok((PotentialSpec::LossYau, SpinorField::LossYauMode))
}

pub fn certify_losyau(points: usize, seed: u64) -> Result<LossYauCertificate> {
    let spec = PotentialSpec::LossYau;
    let mode = SpinorField::LossYauMode;
    let iso = CkfParams::isoclinic();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cert = LossYauCertificate { points, max_imaginary: 0.0, max_dirac_residual: 0.0, max_parallel_residual: 0.0 };
    for _ in 0..points {
        let x = [0; 3].map(|_| rng.gen_range(-3.0..3.0));
        let (_, im) = losyau_potential_t(x);
        cert.max_imaginary = cert.max_imaginary.max(norm2(im).sqrt());
        let psi = mode.value(x);
        let r = pauli::norm(crate::spin::apply_d(&spec, &mode, x)) / pauli::norm(psi);
        cert.max_dirac_residual = cert.max_dirac_residual.max(r);
        cert.max_parallel_residual = cert.max_parallel_residual.max(parallelism_residual_to(&spec, &iso, x));
    }
    let worst = cert.max_imaginary.max(cert.max_dirac_residual).max(cert.max_parallel_residual);
    if !(worst <= LOSYAU_TOLERANCE) {
        return Err(Error::ConstructionFailed(format!("{cert:?}")));
    }
    Ok(cert)
}

/// Samples of `f·w³` along a curve, where `B = f X`, and their spread.
pub fn fw3_along_curve(spec: &PotentialSpec, p: &CkfParams, trace: &CurveTrace) -> Result<(Vec<f64>, f64)> {
    let mut out = Vec::with_capacity(trace.samples.len());
    for &(_, x) in &trace.samples {
        let v = p.eval(x);
        let w2 = norm2(v);
        let w = w2.sqrt();
        if w <= EPS_FRAME {
            return Err(Error::FrameUndefined { point: x, w, curl: norm2(p.curl(x)).sqrt() });
        }
        out.push(dot(spec.field(x), v) / w2 * w2 * w);
    }
    let (lo, hi) = out.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let spread = if out.is_empty() { 0.0 } else { hi - lo };
    Ok((out, spread))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::sub;

    fn max_abs(v: V3<f64>) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn fd_curl(spec: &PotentialSpec, x: V3<f64>) -> V3<f64> {
        let h = 1e-5;
        let d = |i: usize, j: usize| {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            (spec.potential(xp)[j] - spec.potential(xm)[j]) / (2.0 * h)
        };
        [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)]
    }

    fn random_points(n: usize, seed: u64, half: f64) -> Vec<V3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [0; 3].map(|_| rng.gen_range(-half..half))).collect()
    }

    #[test]
    fn profile_jets() {
        let bump = Profile::SmoothBump { lo: 0.0, hi: 2.0, amplitude: 1.0 };
        assert_eq!(bump.eval(1.0), (-1.0f64).exp());
        assert_eq!(bump.eval(2.0), 0.0);
        assert_eq!(bump.eval(-0.1), 0.0);
        let (_, d1, _) = bump.jet(1.0);
        assert!(d1.abs() < 1e-15);
        let poly = Profile::Polynomial { coefficients: vec![1.0, 2.0, 3.0] };
        assert_eq!(poly.jet(2.0), (17.0, 14.0, 6.0));
        let g = Profile::Gaussian { center: 1.0, width: 0.5, amplitude: 2.0 };
        let (v, d, dd) = g.jet(1.5);
        let e = (-0.5f64).exp();
        assert!((v - 2.0 * e).abs() < 1e-15);
        assert!((d + 4.0 * e).abs() < 1e-14);
        // d = (u − c)/width = 1 is an inflection point
        assert!(dd.abs() < 1e-13);
    }

    #[test]
    fn potential_examples() {
        let axial_const = PotentialSpec::Axial { radial: Profile::Constant { value: 1.0 }, vertical: Profile::Constant { value: 1.0 } };
        assert_eq!(axial_const.potential([0.3, 2.0, -1.0]), [0.0, 0.0, 1.0]);
        assert_eq!(axial_const.field([0.3, 2.0, -1.0]), [0.0, 0.0, 0.0]);
        assert_eq!(PotentialSpec::HopfBase { mu: 1.0 }.potential([1.0, 0.0, 0.0]), [0.0, 0.25, 0.0]);
        assert_eq!(PotentialSpec::HopfBase { mu: 1.0 }.field([0.0, 0.0, 0.0]), [0.0, 0.0, 2.0]);
        let axial_u = PotentialSpec::Axial {
            radial: Profile::Polynomial { coefficients: vec![0.0, 1.0] },
            vertical: Profile::Constant { value: 1.0 },
        };
        let x = [1.0, 1.0, 0.0];
        assert_eq!(axial_u.field(x), [2.0, -2.0, 0.0]);
        assert!(max_abs(sub(fd_curl(&axial_u, x), [2.0, -2.0, 0.0])) < 1e-8);
    }

    #[test]
    fn closed_form_fields() {
        let bump = PotentialSpec::axial_bump();
        let hopf = PotentialSpec::HopfBase { mu: 1.3 };
        let crf = CkfParams::special(1.3);
        for x in random_points(200, 3, 2.5) {
            let u = x[0] * x[0] + x[1] * x[1];
            let PotentialSpec::Axial { radial, vertical } = &bump else { unreachable!() };
            let expect = scale(-2.0 * radial.jet(u).1 * vertical.eval(x[2]), CkfParams::rotation().eval(x));
            assert!(max_abs(sub(bump.field(x), expect)) < 1e-12);
            let expect = scale(4.0 * (1.69 + norm2(x)).powi(-3), crf.eval(x));
            assert!(max_abs(sub(hopf.field(x), expect)) < 1e-13);
            assert!(max_abs(sub(hopf.field(x), fd_curl(&hopf, x))) < 1e-7);
            assert!(dot(crf.eval(x), hopf.potential(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn fields_are_parallel_and_divergence_free() {
        let specs = [
            PotentialSpec::axial_bump(),
            PotentialSpec::HopfBase { mu: 1.0 },
            PotentialSpec::modulated_hopf(1.0),
            PotentialSpec::Modulated {
                base: Box::new(PotentialSpec::HopfBase { mu: 0.7 }),
                first: Profile::Gaussian { center: 0.5, width: 0.2, amplitude: 1.0 },
                second: Profile::Polynomial { coefficients: vec![1.0, 0.3] },
            },
            PotentialSpec::LossYau,
        ];
        for spec in &specs {
            spec.validate().unwrap();
            for x in random_points(1000, 11, 2.0) {
                assert!(parallelism_residual(spec, x) < 1e-10, "{spec:?} at {x:?}");
                assert!(field_divergence(spec, x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn modulation_profile_is_invariant_along_the_flow() {
        let p = CkfParams::special(0.8);
        for x in random_points(500, 5, 2.0) {
            let v = p.eval(x);
            let g = crate::autodiff::gradient(|y| hopf_invariants(0.8, y).0, x);
            let h = crate::autodiff::gradient(|y| hopf_invariants(0.8, y).1, x);
            assert!(dot(g, v).abs() < 1e-11 * (1.0 + norm2(v)));
            assert!(dot(h, v).abs() < 1e-11 * (1.0 + norm2(v)));
        }
    }

    #[test]
    fn gauge_and_scaling() {
        for base in [PotentialSpec::axial_bump(), PotentialSpec::HopfBase { mu: 1.0 }, PotentialSpec::LossYau] {
            let gauged = base.clone().gauged(GaugeFunction::SinProduct);
            let scaled = base.clone().scaled(3.5);
            for x in random_points(100, 9, 2.0) {
                assert!(max_abs(sub(gauged.field(x), base.field(x))) < 1e-12);
                assert!(max_abs(sub(gauged.potential(x), base.potential(x))) > 0.0);
                assert!(max_abs(sub(scaled.field(x), scale(3.5, base.field(x)))) <= 1e-15 * (1.0 + max_abs(scaled.field(x))));
            }
        }
    }

    #[test]
    fn losyau_matches_closed_form() {
        // σ·(−i∇)ψ = (σ·A)ψ is solved by A = 3(1+|x|²)⁻²((1−|x|²)e3 + 2x3 x + 2 e3×x)
        for x in random_points(300, 21, 3.0) {
            let r2 = norm2(x);
            let k = 3.0 / (1.0 + r2).powi(2);
            let expect = [
                k * (2.0 * x[2] * x[0] - 2.0 * x[1]),
                k * (2.0 * x[2] * x[1] + 2.0 * x[0]),
                k * (1.0 - r2 + 2.0 * x[2] * x[2]),
            ];
            assert!(max_abs(sub(PotentialSpec::LossYau.potential(x), expect)) < 1e-13);
            let psi = losyau_mode_t(x);
            assert!((pauli::norm_sqr(psi) - (1.0 + r2).powi(-2)).abs() < 1e-15);
        }
        assert_eq!(PotentialSpec::LossYau.potential([0.0; 3]), [0.0, 0.0, 3.0]);
    }

    #[test]
    fn losyau_construction_certifies() {
        let (spec, mode) = construct_losyau().unwrap();
        assert_eq!(spec, PotentialSpec::LossYau);
        assert_eq!(mode, SpinorField::LossYauMode);
        let cert = certify_losyau(100, 1).unwrap();
        assert!(cert.max_dirac_residual < 1e-12);
    }

    #[test]
    fn losyau_mode_is_square_integrable() {
        // ∫|ψ|² over the ball of radius L is 4π∫r²/(1+r²)² dr, which converges to π².
        let total = |l: f64| {
            let n = 20000;
            let h = l / n as f64;
            (0..n).map(|i| {
                let r = (i as f64 + 0.5) * h;
                4.0 * std::f64::consts::PI * r * r / (1.0 + r * r).powi(2) * h
            }).sum::<f64>()
        };
        let pi2 = std::f64::consts::PI.powi(2);
        for l in [5.0, 50.0, 500.0] {
            // the tail beyond L is 4π/L to leading order
            let tail = pi2 - total(l);
            assert!((tail * l / (4.0 * std::f64::consts::PI) - 1.0).abs() < 0.1, "L={l}: {tail}");
        }
    }

    #[test]
    fn invalid_modulation_is_rejected() {
        let bad = PotentialSpec::Modulated {
            base: Box::new(PotentialSpec::LossYau),
            first: Profile::Constant { value: 1.0 },
            second: Profile::Constant { value: 1.0 },
        };
        assert!(bad.validate().is_err());
        assert!(PotentialSpec::HopfBase { mu: -1.0 }.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let spec = PotentialSpec::modulated_hopf(2.0).gauged(GaugeFunction::Linear { k: [1.0, 0.0, 2.0] }).scaled(0.5);
        let s = serde_json::to_string(&spec).unwrap();
        let back: PotentialSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
    }
}
