use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use finsler_plap::material::flux;
use finsler_plap::mesh::{build_domain, Domain};
use finsler_plap::solver::{energy, zero_dirichlet};
use finsler_plap::{
    solve, FinslerNorm, MaterialProfile, ProfileKind, ScalarField, SolveOptions, SourceTerm,
};

fn norm_strategy() -> impl Strategy<Value = FinslerNorm> {
    prop_oneof![
        Just(FinslerNorm::euclidean(2).unwrap()),
        (0.2f64..5.0, 0.2f64..5.0).prop_map(|(a, b)| FinslerNorm::diagonal(&[a, b]).unwrap()),
        (0.5f64..3.0, -0.4f64..0.4, 0.5f64..3.0).prop_map(|(a, c, b)| {
            FinslerNorm::ellipsoidal(DMatrix::from_row_slice(2, 2, &[a, c, c, b])).unwrap()
        }),
        (2.0f64..6.0).prop_map(|q| FinslerNorm::lp(2, q).unwrap()),
    ]
}

fn material_strategy() -> impl Strategy<Value = MaterialProfile> {
    prop_oneof![
        (1.2f64..5.0).prop_map(|p| MaterialProfile::power(p).unwrap()),
        (1.2f64..5.0, 0.01f64..1.0).prop_map(|(p, k)| MaterialProfile::shifted(p, k).unwrap()),
    ]
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    (0.0f64..std::f64::consts::TAU, -3.0f64..2.0)
        .prop_map(|(t, e)| vec![10f64.powf(e) * t.cos(), 10f64.powf(e) * t.sin()])
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn norm_is_even_and_homogeneous(h in norm_strategy(), xi in vector(), t in -10.0f64..10.0) {
        let base = h.eval(&xi).unwrap();
        let scaled: Vec<f64> = xi.iter().map(|x| t * x).collect();
        prop_assert!(close(h.eval(&scaled).unwrap(), t.abs() * base, 1e-12));
        let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
        prop_assert!(close(h.eval(&neg).unwrap(), base, 1e-14));
    }

    #[test]
    fn euler_identity(h in norm_strategy(), xi in vector()) {
        let g = h.gradient(&xi).unwrap();
        let dot = g[0] * xi[0] + g[1] * xi[1];
        prop_assert!(close(dot, h.eval(&xi).unwrap(), 1e-12));
        // D²H(ξ)ξ = 0 by 0-homogeneity of ∇H
        let d2 = h.hessian(&xi).unwrap();
        let scale = d2.abs().max() * xi[0].hypot(xi[1]);
        prop_assert!((&d2 * nalgebra::DVector::from_column_slice(&xi)).abs().max() <= 1e-9 * (1.0 + scale));
    }

    #[test]
    fn dual_pairing_inequality_and_duality(h in norm_strategy(), xi in vector(), x in vector()) {
        let pairing = xi[0] * x[0] + xi[1] * x[1];
        prop_assert!(pairing <= h.eval(&xi).unwrap() * h.dual(&x).unwrap() * (1.0 + 1e-12));
        let back = h.eval(&h.dual_gradient(&x).unwrap()).unwrap();
        prop_assert!(close(back, 1.0, 1e-10));
        let dual = h.dual_norm().expect("closed-form kinds");
        prop_assert!(close(dual.dual(&xi).unwrap(), h.eval(&xi).unwrap(), 1e-10));
    }

    #[test]
    fn profile_is_monotone_and_invertible(m in material_strategy(), s in 1e-4f64..50.0, ds in 1e-3f64..10.0) {
        prop_assert!(m.b_prime(s + ds) > m.b_prime(s));
        prop_assert!(m.b(s + ds) > m.b(s));
        prop_assert!(m.l(s + ds) > m.l(s));
        let phi = m.phi(-s);
        prop_assert!(close(m.phi_inverse(phi).unwrap(), -s, 1e-9));
        prop_assert!(close(m.l_inverse(m.l(s)).unwrap(), s, 1e-9));
    }

    #[test]
    fn flux_is_monotone(m in material_strategy(), h in norm_strategy(), x in vector(), y in vector()) {
        let ax = flux(&m, &h, &x).unwrap();
        let ay = flux(&m, &h, &y).unwrap();
        let inner = (ax[0] - ay[0]) * (x[0] - y[0]) + (ax[1] - ay[1]) * (x[1] - y[1]);
        prop_assert!(inner >= -1e-12 * (1.0 + ax[0].hypot(ax[1]) + ay[0].hypot(ay[1])));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    // The discrete solution minimizes the energy: perturbing interior
    // values never lowers it, and its boundary values stay at zero.
    #[test]
    fn solution_minimizes_energy(
        p in 1.6f64..4.0,
        kind in prop_oneof![Just(ProfileKind::Power), Just(ProfileKind::Shifted)],
        seed in 0u64..1000,
    ) {
        let m = MaterialProfile::new(kind, p, if kind == ProfileKind::Shifted { 0.3 } else { 0.0 }).unwrap();
        let h = FinslerNorm::diagonal(&[2.0, 1.0]).unwrap();
        let source = SourceTerm::constant(1.0).unwrap();
        let mesh = Arc::new(build_domain(&Domain::Rectangle { a: 1.0, b: 1.0 }, 0.2).unwrap());
        let bc = zero_dirichlet(&mesh);
        let (u, _) = solve(mesh.clone(), &m, &h, &source, &bc, &SolveOptions::default()).unwrap();
        for &v in mesh.boundary_vertices() {
            prop_assert_eq!(u.values()[v], 0.0);
        }
        let e0 = energy(&u, &m, &h, &source).unwrap();
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let values: Vec<f64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, x)| {
                if mesh.is_boundary(i) {
                    return *x;
                }
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                x + 1e-3 * (((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0)
            })
            .collect();
        let e1 = energy(&ScalarField::new(mesh, values).unwrap(), &m, &h, &source).unwrap();
        prop_assert!(e1 >= e0 - 1e-12, "{e1} < {e0}");
    }
}
