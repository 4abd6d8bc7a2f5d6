use proptest::prelude::*;

use ckfdirac::ckf::{classify, conformal_killing_residual, killing_residual_of_curl, CkfParams};
use ckfdirac::fields::{parallelism_residual_to, PotentialSpec, Profile};
use ckfdirac::grid::{assemble, GridSpec, Stencil};
use ckfdirac::holonomy::ArithmeticSet;
use ckfdirac::identities::{check_identity, LocalData, Scope, REGISTRY};
use ckfdirac::pauli::{product_identity_residual, triple_product_residual};

fn v3(r: f64) -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-r..r)
}

fn params() -> impl Strategy<Value = CkfParams> {
    (v3(1.0), -1.0..1.0f64, v3(1.0), v3(1.0)).prop_map(|(a, b0, b, c)| CkfParams::new(a, b0, b, c))
}

/// Rotation matrix from a unit quaternion.
fn rotation() -> impl Strategy<Value = [[f64; 3]; 3]> {
    prop::array::uniform4(-1.0..1.0f64).prop_filter("nonzero", |q| q.iter().map(|x| x * x).sum::<f64>() > 1e-2).prop_map(|q| {
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|c| c / n);
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    })
}

fn apply(r: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pauli_identities(a in v3(3.0), b in v3(3.0), c in v3(3.0)) {
        let s = 1.0 + a.iter().chain(&b).chain(&c).map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(product_identity_residual(a, b) <= 1e-14 * s * s);
        prop_assert!(triple_product_residual(a, b, c) <= 1e-14 * s * s * s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_parameter_set_is_conformal_killing(p in params(), x in v3(3.0)) {
        prop_assert!(conformal_killing_residual(&p, x) <= 1e-12);
        prop_assert!(killing_residual_of_curl(&p, x) <= 1e-12);
    }

    #[test]
    fn residuals_are_rotation_invariant(p in params(), x in v3(2.0), r in rotation()) {
        let q = p.rotated(&r);
        let y = apply(&r, x);
        prop_assume!(p.w(x) > 1e-3);
        // frame quantities transform as vectors; their lengths are invariant
        let (dp, dq) = (LocalData::new(&p, x), LocalData::new(&q, y));
        prop_assert!((dp.w - dq.w).abs() <= 1e-12 * (1.0 + dp.w));
        prop_assert!((p.div(x) - q.div(y)).abs() <= 1e-12);
        let n = |v: [f64; 3]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!((n(p.curl(x)) - n(q.curl(y))).abs() <= 1e-12);
        for id in REGISTRY.iter().filter(|i| i.scope == Scope::General) {
            let a = check_identity(id.id, &p, x).unwrap();
            let b = check_identity(id.id, &q, y).unwrap();
            prop_assert!(a.pass && b.pass, "{} {} {}", id.id, a.residual, b.residual);
        }
    }

    #[test]
    fn classification_is_equivariant(r in rotation(), mu in 0.2..3.0f64) {
        let p = CkfParams::special(mu).rotated(&r);
        let cf = classify(&p).unwrap();
        prop_assert!((cf.mu().unwrap() - mu).abs() <= 1e-10);
        let axis = apply(&r, [0.0, 0.0, 1.0]);
        let d: f64 = (0..3).map(|i| cf.axis[i] * axis[i]).sum();
        prop_assert!((d.abs() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn axial_potentials_are_parallel_to_rotation(lo in 0.1..1.0f64, width in 0.5..3.0f64, amp in -5.0..5.0f64, x in v3(3.0)) {
        let spec = PotentialSpec::Axial {
            radial: Profile::SmoothBump { lo, hi: lo + width, amplitude: amp },
            vertical: Profile::Gaussian { center: 0.2, width: 0.7, amplitude: 1.0 },
        };
        prop_assert!(parallelism_residual_to(&spec, &CkfParams::rotation(), x) <= 1e-12);
    }

    #[test]
    fn arithmetic_set_distance(offset in -3.0..3.0f64, step in 0.1..5.0f64, k in -20i32..20, delta in -0.04..0.04f64) {
        let s = ArithmeticSet { offset, step };
        let lambda = offset + k as f64 * step + delta * step;
        prop_assert!((s.distance(lambda) - delta.abs() * step).abs() <= 1e-9 * (1.0 + lambda.abs()));
        prop_assert!(s.distance(lambda) <= 0.5 * step + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn grid_operator_is_exactly_hermitian(t in -20.0..20.0f64, n in 8usize..11, l in 1.0..6.0f64, order4 in any::<bool>()) {
        let stencil = if order4 { Stencil::Order4 } else { Stencil::Order2 };
        let g = GridSpec::new(l, n, stencil).unwrap();
        for spec in [PotentialSpec::axial_bump().scaled(t), PotentialSpec::modulated_hopf(1.0).scaled(t), PotentialSpec::LossYau.scaled(t)] {
            prop_assert_eq!(assemble(&spec, g).unwrap().hermiticity_defect(), 0.0);
        }
    }
}
