use motionlab_core::cycles::{cycle_mass, periodic_points, CycleOptions};
use motionlab_core::metrics::wasserstein1;
use motionlab_core::thermo::DiscreteMeasure;
use motionlab_core::{chordal_dist, Complex64, RationalMap, SpherePoint, Weight};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = SpherePoint> {
    prop_oneof![
        9 => (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(re, im)| SpherePoint::from_re_im(re, im)),
        1 => Just(SpherePoint::Infinity),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chordal_metric_axioms(a in point(), b in point(), c in point()) {
        let ab = chordal_dist(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - chordal_dist(&b, &a)).abs() < 1e-15);
        prop_assert!(chordal_dist(&a, &a) < 1e-15);
        prop_assert!(ab <= chordal_dist(&a, &c) + chordal_dist(&c, &b) + 1e-12);
    }

    #[test]
    fn inversion_is_a_chordal_isometry(a in point(), b in point()) {
        let inv = |p: &SpherePoint| match p.finite() {
            Some(z) if z.norm() > 0.0 => SpherePoint::new(z.inv()),
            Some(_) => SpherePoint::Infinity,
            None => SpherePoint::ZERO,
        };
        prop_assert!((chordal_dist(&a, &b) - chordal_dist(&inv(&a), &inv(&b))).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_count_of_quadratics(re in -1.0f64..0.2, im in -0.6f64..0.6, n in 1usize..5) {
        let f = RationalMap::quadratic(Complex64::new(re, im));
        let set = periodic_points(&f, &Weight::zero(), n, &CycleOptions::default()).unwrap();
        prop_assert_eq!(set.found, (1 << n) + 1);
        for p in &set.points {
            let mut z = p.point;
            for _ in 0..n {
                z = f.eval(&z);
            }
            prop_assert!(chordal_dist(&z, &p.point) < 1e-8);
        }
    }

    #[test]
    fn constant_weights_leave_cycle_masses_unchanged(t in -0.3f64..0.3, n in 1usize..5) {
        let f = RationalMap::quadratic(Complex64::new(-0.2, 0.1));
        let w0 = Weight::zero();
        let wt = Weight::constant(t);
        let a = periodic_points(&f, &w0, n, &CycleOptions::default()).unwrap();
        let b = periodic_points(&f, &wt, n, &CycleOptions::default()).unwrap();
        for (x, y) in a.points.iter().zip(&b.points) {
            let shift = cycle_mass(y, std::f64::consts::LN_2 + t) - cycle_mass(x, std::f64::consts::LN_2);
            prop_assert!(shift.abs() < 1e-9);
        }
    }

    #[test]
    fn transport_distance_is_symmetric_and_bounded(xs in prop::collection::vec(point(), 1..12), ys in prop::collection::vec(point(), 1..12)) {
        let mu = DiscreteMeasure::uniform(&xs);
        let nu = DiscreteMeasure::uniform(&ys);
        let d = wasserstein1(&mu, &nu).unwrap().distance;
        let e = wasserstein1(&nu, &mu).unwrap().distance;
        prop_assert!((d - e).abs() < 1e-9);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d));
        prop_assert!(wasserstein1(&mu, &mu).unwrap().distance < 1e-12);
    }
}
