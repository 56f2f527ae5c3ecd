use std::f64::consts::PI;

use proptest::prelude::*;

use gainterm::collision::{qplus_eval, Cutoff, KernelSpec, Output, QuadConfig};
use gainterm::config::Config;
use gainterm::geometry::{angle_between, critical_points, pre_collision, sphere_calculus, Frame};
use gainterm::grid::{apply_dpow, dft, norm, sample_on_grid, Direction, GridFunction, NormSpec, VelocityGrid};
use gainterm::partitions::{radial_partition, region_classify, s_bar, s_cut, zeta, RadialKind, Ramp};
use gainterm::quadrature::SphereQuadrature;
use gainterm::report::{from_json, to_json};
use gainterm::symbol::{symbol_direct_auto, symbol_exact, DEFAULT_FLOOR_C};
use gainterm::verify::{EstimateReport, TrialRecord};
use gainterm::{AnalyticFn, Vec3};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

fn unit() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, 0.0..2.0 * PI).prop_map(|(z, phi)| {
        let s = (1.0 - z * z).sqrt();
        Vec3::new(s * phi.cos(), s * phi.sin(), z)
    })
}

fn ramp() -> impl Strategy<Value = Ramp> {
    prop_oneof![Just(Ramp::Exp), Just(Ramp::ExpSquared)]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pre_collision_is_an_involution_and_conserves(v in vec3(10.0), vs in vec3(10.0), w in unit()) {
        let (p, ps) = pre_collision(v, vs, w).unwrap();
        let (q, qs) = pre_collision(p, ps, w).unwrap();
        prop_assert!((q - v).norm() < 1e-12 * (1.0 + v.norm()));
        prop_assert!((qs - vs).norm() < 1e-12 * (1.0 + vs.norm()));
        prop_assert!(((p + ps) - (v + vs)).norm() < 1e-12 * (1.0 + v.norm() + vs.norm()));
        let e0 = v.norm2() + vs.norm2();
        prop_assert!(close(p.norm2() + ps.norm2(), e0, 1e-12));
    }

    #[test]
    fn critical_points_are_stationary(x in unit(), xi in unit(), sx in 0.1f64..50.0, sxi in 0.1f64..50.0) {
        prop_assume!(angle_between(x, xi) > 1e-3 && angle_between(x, xi) < PI - 1e-3);
        let (x, xi) = (x * sx, xi * sxi);
        let cp = critical_points(x, xi).unwrap();
        prop_assert!(!cp.degenerate);
        let frame = Frame::new(x).unwrap();
        for (w, sigma, hess) in [
            (cp.omega_plus, cp.sigma_plus, cp.hess_plus.unwrap()),
            (cp.omega_minus, cp.sigma_minus, cp.hess_minus.unwrap()),
        ] {
            prop_assert!((w.norm() - 1.0).abs() < 1e-12);
            prop_assert!(w.dot(x) >= -1e-12);
            let s = x.dot(w) * xi.dot(w) / (x.norm() * xi.norm());
            prop_assert!((s - sigma).abs() < 1e-12);
            let sp = frame.angles(w).unwrap();
            if let Ok((grad, h)) = sphere_calculus(x, xi, sp) {
                prop_assert!(grad[0].abs() < 1e-9 && grad[1].abs() < 1e-9, "{grad:?}");
                prop_assert!((h[0][0] - hess[0][0]).abs() < 1e-6, "{h:?} vs {hess:?}");
                prop_assert!((h[1][1] - hess[1][1]).abs() < 1e-6, "{h:?} vs {hess:?}");
            }
        }
    }

    #[test]
    fn radial_partition_sums_to_one(lr in -12.0f64..12.0, ramp in ramp()) {
        let r = 2f64.powf(lr);
        let total: f64 = (-40..=40).map(|k| radial_partition(RadialKind::Rho, k, r, ramp).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "{total}");
        for k in -40..=40 {
            let v = radial_partition(RadialKind::Rho, k, r, ramp).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn small_and_large_cutoffs_complement(r in 0.0f64..40.0, ramp in ramp()) {
        let (s, b) = (s_cut(r, ramp), s_bar(r, ramp));
        prop_assert!((s + b - 1.0).abs() < 1e-15);
        if r < 4.0 { prop_assert_eq!(s, 1.0); }
        if r > 16.0 { prop_assert_eq!(s, 0.0); }
        let k = KernelSpec::new(1.0, Cutoff::Full).unwrap().with_ramp(ramp);
        let ks = KernelSpec::new(1.0, Cutoff::Small).unwrap().with_ramp(ramp);
        let kl = KernelSpec::new(1.0, Cutoff::Large).unwrap().with_ramp(ramp);
        prop_assert!((k.radial(r) - ks.radial(r) - kl.radial(r)).abs() <= 1e-12 * (1.0 + r));
    }

    #[test]
    fn angular_partition_sums_to_one(t in 1e-6f64..(PI - 1e-6), ramp in ramp()) {
        let total: f64 = (-60..=60).map(|z| zeta(z, t, ramp)).sum();
        prop_assert!((total - 1.0).abs() < 1e-10, "{total}");
    }

    #[test]
    fn every_pair_gets_a_region(x in vec3(200.0), xi in vec3(200.0)) {
        prop_assume!(x.norm() > 1e-6 && xi.norm() > 1e-6);
        let label = region_classify(x, xi, Ramp::Exp).unwrap();
        prop_assert!(label.cone.is_some());
        prop_assert_eq!(label.zone.is_some(), label.coarse == gainterm::partitions::Coarse::A);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symbol_quadrature_matches_closed_form(x in unit(), xi in unit(), lam in 0.5f64..60.0, gamma in 0.0f64..1.0) {
        let s = lam.sqrt();
        let (x, xi) = (x * s, xi * s);
        let q = symbol_direct_auto(x, xi, gamma, DEFAULT_FLOOR_C).unwrap().value;
        let e = symbol_exact(x, xi, gamma).unwrap();
        prop_assert!((q - e).norm() < 1e-9 * (1.0 + e.norm()), "{q} vs {e}");
        let swapped = symbol_exact(xi, x, gamma).unwrap();
        prop_assert!((swapped - e).norm() < 1e-12 * (1.0 + e.norm()));
    }

    #[test]
    fn dft_round_trip_and_parseval(vals in proptest::collection::vec(-1.0f64..1.0, 512)) {
        let grid = VelocityGrid::new(8, 4.0).unwrap();
        let gf = GridFunction::from_real(grid, &vals).unwrap();
        let back = dft(&dft(&gf, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        for (a, b) in gf.values.iter().zip(&back.values) {
            prop_assert!((a - b).norm() < 1e-12);
        }
        let l2 = norm(&gf, NormSpec::lp(2.0)).unwrap();
        let h0 = norm(&gf, NormSpec::SobolevInhom { alpha: 0.0 }).unwrap();
        prop_assert!(close(l2, h0, 1e-12), "{l2} {h0}");
    }

    #[test]
    fn norms_are_homogeneous_and_shift_invariant(
        vals in proptest::collection::vec(-1.0f64..1.0, 512),
        c in -3.0f64..3.0,
        alpha in 0.0f64..2.0,
        d in (0isize..8, 0isize..8, 0isize..8),
    ) {
        let grid = VelocityGrid::new(8, 4.0).unwrap();
        let gf = GridFunction::from_real(grid, &vals).unwrap();
        let scaled = GridFunction::from_real(grid, &vals.iter().map(|v| c * v).collect::<Vec<_>>()).unwrap();
        for spec in [NormSpec::lp(1.5), NormSpec::SobolevHom { alpha }, NormSpec::SobolevInhom { alpha }] {
            let a = norm(&gf, spec).unwrap();
            prop_assert!(close(norm(&scaled, spec).unwrap(), c.abs() * a, 1e-12));
        }
        let shifted = gf.circular_shift([d.0, d.1, d.2]);
        for spec in [NormSpec::SobolevHom { alpha }, NormSpec::SobolevInhom { alpha }] {
            prop_assert!(close(norm(&shifted, spec).unwrap(), norm(&gf, spec).unwrap(), 1e-12));
        }
    }

    #[test]
    fn fractional_powers_compose(s in 0.0f64..1.5, t in 0.0f64..1.5) {
        let grid = VelocityGrid::new(16, 8.0).unwrap();
        let f = AnalyticFn::gaussian(Vec3::new(0.3, -0.2, 0.1), 1.0, 1.0);
        let gf = sample_on_grid(&f, &grid);
        let a = apply_dpow(&apply_dpow(&gf, s).unwrap(), t).unwrap();
        let b = apply_dpow(&gf, s + t).unwrap();
        let scale = b.max_abs();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).norm() < 1e-10 * scale);
        }
    }

    #[test]
    fn function_specs_round_trip(
        c in vec3(2.0),
        w in 0.3f64..2.0,
        a in 0.1f64..3.0,
        lam in 0.5f64..2.0,
        m in vec3(1.0),
        k in vec3(1.0),
        ph in 0.0f64..6.0,
        probe in vec3(3.0),
    ) {
        let f = AnalyticFn::gaussian(c, w, a)
            .modulated(k, ph)
            .dilate(lam)
            .plus(AnalyticFn::bump(m, 2.0 * w, a).translate(c));
        let text = f.to_string();
        let back: AnalyticFn = text.parse().unwrap();
        prop_assert!(close(back.eval(probe), f.eval(probe), 1e-12), "{text}");
        let tr = AnalyticFn::gaussian(c, w, a).translate(m);
        prop_assert!(close(tr.eval(probe), AnalyticFn::gaussian(c, w, a).eval(probe + m), 1e-14));
        let dl = AnalyticFn::gaussian(c, w, a).dilate(lam);
        prop_assert!(close(dl.eval(probe), AnalyticFn::gaussian(c, w, a).eval(probe * lam), 1e-14));
    }

    #[test]
    fn config_round_trips(seed in 0..=i64::MAX as u64, log_n in 1u32..7, theta in 0.1f64..3.0, tol in 1e-14f64..1.0) {
        let mut c = Config { seed, ..Config::default() };
        c.grid.n = 1 << log_n;
        c.stationary.theta0 = vec![theta];
        c.identity.weak_tol = tol;
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn report_json_round_trips(
        vals in proptest::collection::vec(prop_oneof![Just(f64::NAN), -1e6f64..1e6], 1..20),
        seed in any::<u64>(),
    ) {
        let mut r = EstimateReport::new("estimate", seed);
        for (i, &v) in vals.iter().enumerate() {
            r.check_le(format!("c{i}"), v, 0.0);
            r.aggregate(format!("a{i}"), v);
            r.trials.push(TrialRecord {
                trial: i, gamma: 0.5, p: 2.0, q: 1.0,
                ratio_hom: v, ratio_inhom: v, ratio_lr: v, refinement_delta: v,
                values: Default::default(),
            });
        }
        let text = to_json(&r);
        let back = from_json(&text).unwrap();
        prop_assert_eq!(to_json(&back), text);
        prop_assert_eq!(back.passed(), r.passed());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn qplus_is_bilinear(a in 0.2f64..3.0, b in 0.2f64..3.0, gamma in 0.0f64..1.0, v in vec3(2.0)) {
        let quad = QuadConfig::new(SphereQuadrature::hemisphere(8, 8).unwrap(), VelocityGrid::new(8, 8.0).unwrap()).unwrap();
        let k = KernelSpec::full(gamma).unwrap();
        let f = AnalyticFn::gaussian(Vec3::new(0.2, 0.0, -0.1), 1.0, 1.0);
        let g = AnalyticFn::gaussian(Vec3::new(-0.3, 0.1, 0.0), 0.9, 1.0);
        let out = Output::Points(vec![v]);
        let base = qplus_eval(&f, &g, &out, k, &quad, 1e-6).unwrap()[0];
        let scaled = qplus_eval(&f.clone().scale(a), &g.clone().scale(b), &out, k, &quad, 1e-6).unwrap()[0];
        prop_assert!(close(scaled, a * b * base, 1e-12), "{scaled} vs {}", a * b * base);
        let sum = qplus_eval(&f.clone().plus(g.clone()), &g, &out, k, &quad, 1e-6).unwrap()[0];
        let parts = base + qplus_eval(&g, &g, &out, k, &quad, 1e-6).unwrap()[0];
        prop_assert!(close(sum, parts, 1e-12), "{sum} vs {parts}");
        prop_assert!(base >= 0.0);
    }
}
