//! Spinor fields and the operators `D`, `Q`, `S`, `P±` built from a
//! conformal Killing field and a parallel magnetic potential.
//!
//! Operators are composable wrappers implementing [`SpinorFn`]; each one
//! evaluates its argument one differentiation level deeper, so composites
//! such as `D(w Q f)` are evaluated with exact derivatives.

use num_complex::{Complex, Complex64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Dual, Scalar};
use crate::ckf::{CkfParams, EPS_FRAME};
use crate::error::{Error, Result};
use crate::fields::{losyau_mode_t, parallelism_residual_to, GaugeFunction, PotentialSpec};
use crate::pauli::{self, Spinor, SpinorT};
use crate::quadrature;
use crate::vec3::{dot, lift, norm2, sub, V3};

/// Largest tolerated `|B × X| / (|B||X|)` for operators that need a parallel field.
pub const PARALLEL_TOLERANCE: f64 = 1e-8;

/// A spinor-valued function that can be evaluated at any differentiation depth.
pub trait SpinorFn: Sync {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T>;

    fn value(&self, x: V3<f64>) -> Spinor {
        self.eval(x)
    }
}

impl<F: SpinorFn> SpinorFn for &F {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        (**self).eval(x)
    }
}

/// `coefficient · Π (x − center)_k^{powers_k}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: Complex64,
    pub powers: [u32; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpinorField {
    /// `exp(−|x−c|²/(2 width²)) · m(x − c) · spinor`, with `m = 1` when `modulation` is empty.
    GaussianPacket { center: V3<f64>, width: f64, spinor: Spinor, modulation: Vec<Monomial> },
    /// A smooth bump supported in the solid torus of radii `major`, `minor`
    /// around the x3-axis at height `height`, times a constant spinor.
    BumpPacket { major: f64, minor: f64, height: f64, spinor: Spinor },
    /// `exp(i k·x) · spinor`
    PlaneWave { k: V3<f64>, spinor: Spinor },
    /// `(1+|x|²)^{−3/2} (I + i x·σ)(1, 0)`
    LossYauMode,
}

impl SpinorField {
    /// Gaussian packet with a complex linear modulation, used as a generic test spinor.
    pub fn test_packet(center: V3<f64>, width: f64) -> Self {
        SpinorField::GaussianPacket {
            center,
            width,
            spinor: [Complex64::new(0.6, 0.2), Complex64::new(-0.3, 0.7)],
            modulation: vec![
                Monomial { coefficient: Complex64::new(1.0, 0.0), powers: [0, 0, 0] },
                Monomial { coefficient: Complex64::new(0.3, -0.4), powers: [1, 0, 0] },
                Monomial { coefficient: Complex64::new(0.0, 0.5), powers: [0, 1, 1] },
                Monomial { coefficient: Complex64::new(-0.2, 0.1), powers: [0, 0, 2] },
            ],
        }
    }

    /// Torus bump around the x3-axis, away from the axis.
    pub fn test_bump() -> Self {
        SpinorField::BumpPacket {
            major: 1.5,
            minor: 0.7,
            height: 0.0,
            spinor: [Complex64::new(0.8, -0.1), Complex64::new(0.2, 0.5)],
        }
    }

    /// Axis-aligned box containing the support, for compactly supported fields.
    pub fn support_box(&self) -> Option<(V3<f64>, V3<f64>)> {
        match self {
            SpinorField::BumpPacket { major, minor, height, .. } => {
                let r = major + minor;
                Some(([-r, -r, height - minor], [r, r, height + minor]))
            }
            _ => None,
        }
    }
}

impl SpinorFn for SpinorField {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        match self {
            SpinorField::GaussianPacket { center, width, spinor, modulation } => {
                let d = sub(x, lift(*center));
                let g = (-norm2(d).scale(0.5 / (width * width))).exp();
                let m = if modulation.is_empty() {
                    Complex::new(T::one(), T::zero())
                } else {
                    modulation.iter().fold(Complex::new(T::zero(), T::zero()), |acc, mono| {
                        let mut t = T::one();
                        for (k, &p) in mono.powers.iter().enumerate() {
                            for _ in 0..p {
                                t = t * d[k];
                            }
                        }
                        acc + Complex::new(t.scale(mono.coefficient.re), t.scale(mono.coefficient.im))
                    })
                };
                pauli::scale_c(m * g, pauli::lift(*spinor))
            }
            SpinorField::BumpPacket { major, minor, height, spinor } => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let dr = r - T::cst(*major);
                let dz = x[2] - T::cst(*height);
                let s = (dr * dr + dz * dz).scale(1.0 / (minor * minor));
                if s.val() >= 1.0 {
                    pauli::zero()
                } else {
                    pauli::scale_re((-(T::one() - s).recip()).exp(), pauli::lift(*spinor))
                }
            }
            SpinorField::PlaneWave { k, spinor } => {
                let phase = dot(lift(*k), x);
                pauli::scale_c(Complex::new(phase.cos(), phase.sin()), pauli::lift(*spinor))
            }
            SpinorField::LossYauMode => losyau_mode_t(x),
        }
    }
}

/// `f(x)` and its three partial derivatives at depth `T`.
fn jet<T: Scalar, F: SpinorFn>(f: &F, x: V3<T>) -> (SpinorT<T>, [SpinorT<T>; 3]) {
    pauli::split(f.eval(Dual::seed(x)))
}

/// Components `(−i∂_k − A_k) f`.
fn momenta<T: Scalar, F: SpinorFn>(spec: &PotentialSpec, f: &F, x: V3<T>) -> (SpinorT<T>, [SpinorT<T>; 3]) {
    let (v, d) = jet(f, x);
    let a = spec.potential_t(x);
    let m = [0, 1, 2].map(|k| pauli::sub(pauli::scale_re(-T::one(), pauli::times_i(d[k])), pauli::scale_re(a[k], v)));
    (v, m)
}

/// `D f = σ·(−i∇ − A) f`
pub struct Dirac<'a, F> {
    pub spec: &'a PotentialSpec,
    pub f: F,
}

impl<F: SpinorFn> SpinorFn for Dirac<'_, F> {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        let (_, m) = momenta(self.spec, &self.f, x);
        (0..3).fold(pauli::zero(), |acc, k| pauli::add(acc, pauli::sigma(k, m[k])))
    }
}

/// `Q f = X·(−i∇ − A) f + ¼ σ·Y f − (2/3) i (div X) f`
pub struct Qop<'a, F> {
    pub p: &'a CkfParams,
    pub spec: &'a PotentialSpec,
    pub f: F,
}

impl<F: SpinorFn> SpinorFn for Qop<'_, F> {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        let (v, m) = momenta(self.spec, &self.f, x);
        let field = self.p.eval_t(x);
        let transport = (0..3).fold(pauli::zero(), |acc, k| pauli::add(acc, pauli::scale_re(field[k], m[k])));
        let spin = pauli::sigma_dot(self.p.curl_t(x), v);
        let div = self.p.div_t(x);
        let r = pauli::add(transport, pauli::scale_re(T::cst(0.25), spin));
        pauli::sub(r, pauli::scale_re(div.scale(2.0 / 3.0), pauli::times_i(v)))
    }
}

/// `S f = w⁻¹ σ·X f`
pub struct Spin<'a, F> {
    pub p: &'a CkfParams,
    pub f: F,
}

fn spin_at<T: Scalar>(p: &CkfParams, x: V3<T>, v: SpinorT<T>) -> SpinorT<T> {
    let field = p.eval_t(x);
    pauli::scale_re(norm2(field).sqrt().recip(), pauli::sigma_dot(field, v))
}

impl<F: SpinorFn> SpinorFn for Spin<'_, F> {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        spin_at(self.p, x, self.f.eval(x))
    }
}

/// `P± f = ½(f ± S f)`
pub struct Projected<'a, F> {
    pub p: &'a CkfParams,
    pub sign: f64,
    pub f: F,
}

impl<F: SpinorFn> SpinorFn for Projected<'_, F> {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        let v = self.f.eval(x);
        let s = spin_at(self.p, x, v);
        pauli::scale_re(T::cst(0.5), pauli::add(v, pauli::scale_re(T::cst(self.sign), s)))
    }
}

/// `w f`
pub struct Weighted<'a, F> {
    pub p: &'a CkfParams,
    pub f: F,
}

impl<F: SpinorFn> SpinorFn for Weighted<'_, F> {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        pauli::scale_re(norm2(self.p.eval_t(x)).sqrt(), self.f.eval(x))
    }
}

/// `e^{ig} f`
pub struct Phased<'a, F> {
    pub gauge: &'a GaugeFunction,
    pub f: F,
}

impl<F: SpinorFn> SpinorFn for Phased<'_, F> {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        let g = self.gauge.value_t(x);
        pauli::scale_c(Complex::new(g.cos(), g.sin()), self.f.eval(x))
    }
}

/// Sum of two spinor functions with a real factor on the second.
pub struct Combined<F, G> {
    pub f: F,
    pub g: G,
    pub factor: f64,
}

impl<F: SpinorFn, G: SpinorFn> SpinorFn for Combined<F, G> {
    fn eval<T: Scalar>(&self, x: V3<T>) -> SpinorT<T> {
        pauli::add(self.f.eval(x), pauli::scale_re(T::cst(self.factor), self.g.eval(x)))
    }
}

fn frame_check(p: &CkfParams, x: V3<f64>) -> Result<f64> {
    let w = p.w(x);
    if w <= EPS_FRAME {
        return Err(Error::FrameUndefined { point: x, w, curl: norm2(p.curl(x)).sqrt() });
    }
    Ok(w)
}

fn parallel_check(p: &CkfParams, spec: &PotentialSpec, x: V3<f64>) -> Result<()> {
    let residual = parallelism_residual_to(spec, p, x);
    if residual > PARALLEL_TOLERANCE {
        return Err(Error::NotParallel { point: x, residual });
    }
    Ok(())
}

pub fn apply_d<F: SpinorFn>(spec: &PotentialSpec, f: &F, x: V3<f64>) -> Spinor {
    Dirac { spec, f }.value(x)
}

pub fn apply_q<F: SpinorFn>(p: &CkfParams, spec: &PotentialSpec, f: &F, x: V3<f64>) -> Result<Spinor> {
    parallel_check(p, spec, x)?;
    Ok(Qop { p, spec, f }.value(x))
}

pub fn apply_s<F: SpinorFn>(p: &CkfParams, f: &F, x: V3<f64>) -> Result<Spinor> {
    frame_check(p, x)?;
    Ok(Spin { p, f }.value(x))
}

pub fn apply_projection<F: SpinorFn>(p: &CkfParams, sign: f64, f: &F, x: V3<f64>) -> Result<Spinor> {
    frame_check(p, x)?;
    Ok(Projected { p, sign, f }.value(x))
}

/// Norms of the residual spinors of
/// (i) `[Dw, Q] f = 0`, (ii) `[Q, S] f = 0`,
/// (iii) `{Dw, S} f = 2Q f + ½ w⁻¹ (X·Y) S f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CommutatorResiduals {
    pub dw_q: f64,
    pub q_s: f64,
    pub dw_s: f64,
}

impl CommutatorResiduals {
    pub fn max(&self) -> f64 {
        self.dw_q.max(self.q_s).max(self.dw_s)
    }
}

pub fn commutator_residuals<F: SpinorFn>(p: &CkfParams, spec: &PotentialSpec, f: &F, x: V3<f64>) -> Result<CommutatorResiduals> {
    let w = frame_check(p, x)?;
    parallel_check(p, spec, x)?;
    let r1 = pauli::sub(
        Dirac { spec, f: Weighted { p, f: Qop { p, spec, f } } }.value(x),
        Qop { p, spec, f: Dirac { spec, f: Weighted { p, f } } }.value(x),
    );
    let r2 = pauli::sub(Qop { p, spec, f: Spin { p, f } }.value(x), Spin { p, f: Qop { p, spec, f } }.value(x));

    let anti = pauli::add(
        Dirac { spec, f: Weighted { p, f: Spin { p, f } } }.value(x),
        Spin { p, f: Dirac { spec, f: Weighted { p, f } } }.value(x),
    );
    let xy = dot(p.eval(x), p.curl(x));
    let rhs = pauli::add(pauli::scale_re(2.0, Qop { p, spec, f }.value(x)), pauli::scale_re(0.5 * xy / w, Spin { p, f }.value(x)));
    let r3 = pauli::sub(anti, rhs);
    Ok(CommutatorResiduals { dw_q: pauli::norm(r1), q_s: pauli::norm(r2), dw_s: pauli::norm(r3) })
}

/// Tensor-product composite Gauss–Legendre rule: `panels` panels of `order` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub order: usize,
}

impl QuadratureSpec {
    /// A rule with `n` nodes per axis in panels of four.
    pub fn with_points(n: usize) -> Self {
        QuadratureSpec { panels: (n / 4).max(1), order: 4 }
    }

    pub fn points_per_axis(&self) -> usize {
        self.panels * self.order
    }
}

/// The w-weighted squared norms in `‖Dwφ‖² = ‖T₊φ‖² + ‖T₋φ‖² + ‖Qφ‖²`,
/// with `T± = P± D w P∓`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormDecomposition {
    pub lhs: f64,
    pub t_plus: f64,
    pub t_minus: f64,
    pub q: f64,
    pub rel_err: f64,
}

pub fn norm_decomposition_check(p: &CkfParams, spec: &PotentialSpec, f: &SpinorField, quad: QuadratureSpec) -> Result<NormDecomposition> {
    if !crate::ckf::is_simple_rotation(p) {
        return Err(Error::NotSimpleRotation { residual: crate::ckf::simple_rotation_residual(p).norm(), tolerance: crate::ckf::EPS_CLASSIFY });
    }
    let (lo, hi) = f.support_box().ok_or_else(|| Error::SupportViolation("the field has no compact support box".into()))?;
    check_support_in_ox(p, f)?;
    let axes: Vec<(Vec<f64>, Vec<f64>)> =
        (0..3).map(|k| quadrature::composite(lo[k], hi[k], quad.panels, quad.order)).collect();

    let dw = Dirac { spec, f: Weighted { p, f } };
    let t_plus = Projected { p, sign: 1.0, f: Dirac { spec, f: Weighted { p, f: Projected { p, sign: -1.0, f } } } };
    let t_minus = Projected { p, sign: -1.0, f: Dirac { spec, f: Weighted { p, f: Projected { p, sign: 1.0, f } } } };
    let qf = Qop { p, spec, f };

    // One partial sum per x-slab, combined in index order for reproducibility.
    let slabs: Vec<Result<[f64; 4]>> = axes[0]
        .0
        .par_iter()
        .zip(axes[0].1.par_iter())
        .map(|(&x0, &w0)| {
            let mut acc = [0.0; 4];
            for (&x1, &w1) in axes[1].0.iter().zip(&axes[1].1) {
                for (&x2, &w2) in axes[2].0.iter().zip(&axes[2].1) {
                    let x = [x0, x1, x2];
                    if pauli::norm_sqr(f.value(x)) == 0.0 {
                        continue;
                    }
                    let w = p.w(x);
                    if w <= 1e-8 {
                        return Err(Error::SupportViolation(format!("support reaches the zero set of X near {x:?}")));
                    }
                    let weight = w0 * w1 * w2 * w;
                    acc[0] += weight * pauli::norm_sqr(dw.value(x));
                    acc[1] += weight * pauli::norm_sqr(t_plus.value(x));
                    acc[2] += weight * pauli::norm_sqr(t_minus.value(x));
                    acc[3] += weight * pauli::norm_sqr(qf.value(x));
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = [0.0; 4];
    for s in slabs {
        let s = s?;
        for k in 0..4 {
            total[k] += s[k];
        }
    }
    let [lhs, tp, tm, q] = total;
    Ok(NormDecomposition { lhs, t_plus: tp, t_minus: tm, q, rel_err: (lhs - tp - tm - q).abs() / lhs })
}

/// Rejects bump packets whose closed support meets the zero set of `X`.
fn check_support_in_ox(p: &CkfParams, f: &SpinorField) -> Result<()> {
    use crate::flows::{fixed_point_census, DegenerateLocus};
    let SpinorField::BumpPacket { major, minor, height, .. } = f else {
        return Ok(());
    };
    let census = fixed_point_census(p)?;
    let mut zeros: Vec<V3<f64>> = census.isolated.iter().map(|z| z.0).collect();
    let n = 4096;
    match census.degenerate {
        Some(DegenerateLocus::Line { point, direction }) => {
            let reach = 2.0 * (major + minor + height.abs() + norm2(point).sqrt());
            zeros.extend((0..=n).map(|i| {
                let s = reach * (2.0 * i as f64 / n as f64 - 1.0);
                crate::vec3::add(point, crate::vec3::scale(s, direction))
            }));
        }
        Some(DegenerateLocus::Circle { center, normal, radius }) => {
            let helper = if normal[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
            let u = crate::vec3::cross(normal, helper);
            let u = crate::vec3::scale(1.0 / norm2(u).sqrt(), u);
            let v = crate::vec3::cross(normal, u);
            zeros.extend((0..n).map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let off = crate::vec3::add(crate::vec3::scale(radius * a.cos(), u), crate::vec3::scale(radius * a.sin(), v));
                crate::vec3::add(center, off)
            }));
        }
        None => {}
    }
    // a margin covers the spacing of the sampled zero set
    let margin = 1e-3 * minor;
    for z in zeros {
        let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
        let d = ((r - major).powi(2) + (z[2] - height).powi(2)).sqrt();
        if d <= minor + margin {
            return Err(Error::SupportViolation(format!("support meets the zero set of X at {z:?}")));
        }
    }
    Ok(())
}

/// The smooth step `χ₀(t) = ψ(1−t)/(ψ(1−t)+ψ(t))`, `ψ(t) = e^{−1/t}` for `t > 0`:
/// equal to 1 for `t ≤ 0`, 0 for `t ≥ 1`, non-increasing in between.
pub fn chi0<T: Scalar>(t: T) -> T {
    let v = t.val();
    if v <= 0.0 {
        T::one()
    } else if v >= 1.0 {
        T::zero()
    } else {
        let a = (-(T::one() - t).recip()).exp();
        let b = (-t.recip()).exp();
        a / (a + b)
    }
}

/// `sup |χ₀′|`, computed numerically on a fine grid of `(0, 1)`.
pub fn chi0_derivative_sup() -> f64 {
    let n = 20_000;
    (1..n)
        .map(|i| {
            let t = Dual::seed([i as f64 / n as f64, 0.0, 0.0])[0];
            chi0(t).eps[0].abs()
        })
        .fold(0.0, f64::max)
}

/// Outer and inner cut-offs: `χ_R(x) = χ₀(log log|x| − log log R)` for `|x| > 1`
/// (1 otherwise) and `η_ε(x) = χ_{1/ε}(1/w(x))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffPair {
    pub r: f64,
    pub eps: f64,
}

fn chi_scale<T: Scalar>(r: f64, t: T) -> T {
    if t.val() <= 1.0 {
        T::one()
    } else {
        chi0(t.ln().ln() - T::cst(r.ln().ln()))
    }
}

impl CutoffPair {
    pub fn outer_t<T: Scalar>(&self, x: V3<T>) -> T {
        chi_scale(self.r, norm2(x).sqrt())
    }

    pub fn inner(&self, p: &CkfParams, x: V3<f64>) -> f64 {
        let w = p.w(x);
        if w == 0.0 {
            return 0.0;
        }
        chi_scale(1.0 / self.eps, 1.0 / w)
    }
}

/// Constant `C` with `w^{1/2} ≤ C(1+|x|)`: `|X| ≤ |a| + (|b0|+|b|)|x| + ½|c||x|²`.
pub fn growth_constant(p: &CkfParams) -> f64 {
    let n = |v: V3<f64>| norm2(v).sqrt();
    n(p.a).max(0.5 * (p.b0.abs() + n(p.b))).max(0.5 * n(p.c)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CutoffBound {
    pub sup_outer: f64,
    pub bound: f64,
    pub growth_constant: f64,
    pub chi0_prime_sup: f64,
}

/// Samples `w^{1/2}|∇χ_R|` over the shell `R ≤ |x| ≤ R^e` on `radii`
/// log-spaced radii times `directions` Fibonacci-sphere directions, and
/// returns its maximum together with `2C‖χ₀′‖/log R`.
pub fn cutoff_bound_check(p: &CkfParams, r: f64, radii: usize, directions: usize) -> Result<CutoffBound> {
    if !(r > std::f64::consts::E) {
        return Err(Error::Invalid(format!("outer cut-off needs R > e, got {r}")));
    }
    let c = CutoffPair { r, eps: 0.5 };
    let dirs = fibonacci_sphere(directions);
    let (l0, l1) = (r.ln(), r.ln() * std::f64::consts::E);
    let sup = (0..radii)
        .into_par_iter()
        .map(|i| {
            let rad = (l0 + (l1 - l0) * (i as f64 + 0.5) / radii as f64).exp();
            dirs.iter()
                .map(|d| {
                    let x = d.map(|c| c * rad);
                    let g = crate::autodiff::gradient(|y| c.outer_t(y), x);
                    p.w(x).sqrt() * norm2(g).sqrt()
                })
                .fold(0.0, f64::max)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    let k = growth_constant(p);
    let d = chi0_derivative_sup();
    Ok(CutoffBound { sup_outer: sup, bound: 2.0 * k * d / r.ln(), growth_constant: k, chi0_prime_sup: d })
}

pub fn fibonacci_sphere(n: usize) -> Vec<V3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect()
}
