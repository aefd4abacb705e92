//! Randomized structural invariants of the lattice, directional, and band
//! machinery.

use blochinv::bands::{assemble_and_solve, BasisSpec};
use blochinv::hill::hill_solve;
use blochinv::lattice::{
    dual_lattice, gamma_delta, gcd_slice, maximal_elements, LatticeBasis,
};
use blochinv::potential::{DirectionalPotential, FourierPotential, VectorTrigPoly};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Random well-conditioned 2x2 lattice basis.
fn basis2() -> impl Strategy<Value = LatticeBasis> {
    (1.0f64..3.0, -1.0f64..1.0, -1.0f64..1.0, 1.0f64..3.0)
        .prop_filter_map("near-singular", |(a, b, c, d)| {
            let m = DMatrix::from_row_slice(2, 2, &[a, b, c, d]);
            if m.determinant().abs() < 0.5 {
                return None;
            }
            LatticeBasis::new(m * (2.0 * PI)).ok()
        })
}

/// Random maximal direction in a 2-D dual lattice.
fn maximal2() -> impl Strategy<Value = Vec<i64>> {
    (-3i64..=3, -3i64..=3).prop_filter_map("zero or non-maximal", |(a, b)| {
        let g = gcd_slice(&[a, b]);
        if g == 0 {
            None
        } else {
            Some(vec![a / g, b / g])
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dual_basis_pairs_to_two_pi(lat in basis2()) {
        let dual = dual_lattice(&lat).unwrap();
        let pairing = dual.basis().transpose() * lat.basis();
        for i in 0..2 {
            for k in 0..2 {
                let want = if i == k { 2.0 * PI } else { 0.0 };
                prop_assert!((pairing[(i, k)] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn decomposition_round_trips(
        lat in basis2(),
        delta in maximal2(),
        c0 in -20.0f64..20.0,
        c1 in -20.0f64..20.0,
    ) {
        let dual = dual_lattice(&lat).unwrap();
        let gd = gamma_delta(&lat, &dual, &delta).unwrap();
        let p = DVector::from_vec(vec![c0, c1]);
        let d = gd.decompose(&p);
        prop_assert!(d.v >= 0.0 && d.v < 1.0);
        let back = gd.compose(&d.beta, &d.tau, d.j, d.v);
        prop_assert!((&back - &p).norm() < 1e-9 * p.norm().max(1.0));
        // tau lies in the centred cell of the hyperplane lattice.
        let u = gd.hyperplane_coords(&d.tau);
        for &x in u.iter() {
            prop_assert!((-0.5 - 1e-9..0.5 + 1e-9).contains(&x));
        }
    }

    #[test]
    fn maximal_elements_match_brute_force(lat in basis2(), radius in 3.0f64..8.0) {
        let dual = dual_lattice(&lat).unwrap();
        let got = maximal_elements(&dual, radius);
        for c in &got {
            prop_assert_eq!(gcd_slice(c), 1);
            prop_assert!(dual.point(c).norm() < radius);
        }
        // Every coprime dual point inside the ball is listed.
        let bound = (radius / dual.basis().column(0).norm().min(dual.basis().column(1).norm())
            * 2.0)
            .ceil() as i64;
        let mut want = 0usize;
        for a in -bound..=bound {
            for b in -bound..=bound {
                if gcd_slice(&[a, b]) == 1 && dual.point(&[a, b]).norm() < radius {
                    want += 1;
                }
            }
        }
        prop_assert_eq!(got.len(), want);
    }

    #[test]
    fn floquet_reflection_preserves_spectrum(
        v in 0.01f64..0.99,
        amp1 in 0.1f64..1.5,
        amp2 in 0.0f64..1.0,
    ) {
        let lat = LatticeBasis::cubic(2.0 * PI, 2);
        let dual = dual_lattice(&lat).unwrap();
        let gd = gamma_delta(&lat, &dual, &[0, 1]).unwrap();
        let q = FourierPotential::cosine_sum(&[(vec![0, 1], amp1), (vec![0, 2], amp2)]);
        let qd = blochinv::potential::directional(&q, &gd);
        let s1 = hill_solve(&qd, v, 24).unwrap();
        let s2 = hill_solve(&qd, 1.0 - v, 24).unwrap();
        for (a, b) in s1.sorted_values().iter().zip(s2.sorted_values()).take(20) {
            prop_assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn band_functions_are_dual_periodic(
        t0 in -0.45f64..0.45,
        t1 in -0.45f64..0.45,
        g0 in -1i64..=1,
        g1 in -1i64..=1,
    ) {
        let lat = LatticeBasis::cubic(2.0 * PI, 2);
        let dual = dual_lattice(&lat).unwrap();
        let q = FourierPotential::cosine_sum(&[(vec![0, 1], 0.7), (vec![1, 0], 0.4)]);
        let t = DVector::from_vec(vec![t0, t1]);
        let shifted = &t + dual.point(&[g0, g1]);
        let spec = BasisSpec::Ball { radius: 4.5 };
        let s1 = assemble_and_solve(&q, &dual, &t, &spec, 10_000).unwrap();
        let s2 = assemble_and_solve(&q, &dual, &shifted, &spec, 10_000).unwrap();
        for (a, b) in s1.values().iter().zip(s2.values()).take(6) {
            if s1.trusted(*a) && s2.trusted(*b) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn squared_field_mean_is_the_coefficient_energy(
        re1 in -1.0f64..1.0, im1 in -1.0f64..1.0,
        re2 in -1.0f64..1.0, im2 in -1.0f64..1.0,
    ) {
        let poly = VectorTrigPoly {
            terms: vec![
                (
                    vec![1, 0],
                    DVector::from_vec(vec![
                        Complex64::new(re1, im1),
                        Complex64::new(im2, re2),
                    ]),
                ),
                (
                    vec![0, 2],
                    DVector::from_vec(vec![
                        Complex64::new(re2, im2),
                        Complex64::new(re1, -im1),
                    ]),
                ),
            ],
        };
        let mean = poly.norm_sq().mean();
        let energy: f64 = poly
            .terms
            .iter()
            .map(|(_, u)| u.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        prop_assert!(mean.im.abs() < 1e-12);
        prop_assert!((mean.re - energy).abs() < 1e-12 * energy.max(1.0));
        prop_assert!(mean.re >= 0.0);
    }

    #[test]
    fn directional_energy_is_nonnegative_and_additive(
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
    ) {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(1, Complex64::new(a, b));
        coeffs.insert(-1, Complex64::new(a, -b));
        let qd = DirectionalPotential::from_coeffs(coeffs, 1.0);
        prop_assert!((qd.energy() - 2.0 * (a * a + b * b)).abs() < 1e-12);
    }
}
