use std::f64::consts::PI;

use tubecalc_core::functionals::{eval_f1, perimeter, volume, volume_with, Integrand};
use tubecalc_core::reach::{estimate_reach, uniform_ball_check};
use tubecalc_core::tube::{build_tube, build_tube_with, curvature_at, jacobian_factor, surface_integral, TubeParams};
use tubecalc_core::{Point, Shape, ShapeSpec, TubeError};

fn shape(spec: ShapeSpec) -> Shape {
    Shape::new(&spec).unwrap()
}

#[test]
fn sphere_area_is_independent_of_the_tube_width() {
    let s = shape(ShapeSpec::ball(3, 1.0));
    let areas: Vec<f64> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&h| surface_integral(&build_tube(&s, h, 0.02).unwrap(), |_| 1.0))
        .collect();
    for a in &areas {
        assert!((a - 4.0 * PI).abs() < 0.02 * 4.0 * PI, "{areas:?}");
    }
    for i in 0..3 {
        for j in 0..i {
            assert!((areas[i] - areas[j]).abs() < 0.01 * areas[j], "{areas:?}");
        }
    }
}

#[test]
fn normal_flux_of_a_constant_field_vanishes() {
    for spec in [ShapeSpec::ball(3, 1.0), ShapeSpec::torus(2.0, 0.5), ShapeSpec::ellipsoid(&[1.2, 1.0, 0.8])] {
        let s = shape(spec);
        let quad = build_tube_with(&s, &TubeParams::new(0.1, 0.025)).unwrap();
        let flux = surface_integral(&quad, |n| n.nu[2]);
        let area = surface_integral(&quad, |_| 1.0);
        assert!(flux.abs() < 1e-3 * area, "{flux}");
    }
}

#[test]
fn jacobians_stay_near_one_in_thin_tubes() {
    // reach r0 >= 1 and h = 0.1 r0, so each factor 1 + tκ lies in [0.9, 1.1]
    let cases = [
        ShapeSpec::ball(3, 1.0),
        ShapeSpec::ball(3, 1.5),
        ShapeSpec::capsule(3, 1.0, 1.0),
        ShapeSpec::ball(2, 1.0),
        ShapeSpec::capsule(2, 1.0, 1.2),
    ];
    for spec in cases {
        let s = shape(spec);
        let quad = build_tube(&s, 0.1, 0.02).unwrap();
        let k = (s.dim() - 1) as i32;
        let (lo, hi) = (0.9f64.powi(k), 1.1f64.powi(k));
        assert!(quad.nodes.iter().all(|n| n.jac >= lo - 1e-12 && n.jac <= hi + 1e-12));
        if s.dim() == 2 {
            assert!(quad.nodes.iter().all(|n| (n.jac - 1.0).abs() <= 0.15));
        }
    }
}

#[test]
fn area_is_bounded_by_the_container_volume() {
    for spec in [ShapeSpec::ball(3, 1.0), ShapeSpec::torus(2.0, 0.5)] {
        let s = shape(spec);
        let h = 0.1;
        let area = perimeter(&s, &TubeParams::new(h, 0.02)).unwrap();
        // D ⊂ U_h(D), so vol(D) bounds vol(U_h(D)) from below
        let container = s.default_box().volume(3);
        assert!(area <= 0.75 / h * container);
    }
}

#[test]
fn area_error_decreases_with_spacing() {
    // averaged over radii so that lattice alignment effects wash out
    let err = |sp: f64| -> f64 {
        (0..8)
            .map(|k| {
                let r = 0.9037 + 0.025 * k as f64;
                let a = surface_integral(&build_tube(&shape(ShapeSpec::ball(3, r)), 0.2, sp).unwrap(), |_| 1.0);
                (a / (4.0 * PI * r * r) - 1.0).abs()
            })
            .sum()
    };
    let (coarse, fine) = (err(0.04), err(0.02));
    let order = (coarse / fine).log2();
    assert!(order >= 0.9, "order {order}: {coarse} -> {fine}");
}

#[test]
fn jacobian_factor_matches_the_extrusion_determinant() {
    // torus outer equator: direct determinant of x ↦ x + t∇b(x) on the surface
    let s = shape(ShapeSpec::torus(2.0, 0.5));
    let x = Point::new(2.5, 0.0, 0.0);
    let t = 0.25;
    let e = 1e-5;
    let ext = |p: Point| {
        let q = s.project(&p).unwrap();
        q + s.eval(&q).unwrap().grad * t
    };
    let d1 = (ext(x + Point::y() * e) - ext(x - Point::y() * e)) / (2.0 * e);
    let d2 = (ext(x + Point::z() * e) - ext(x - Point::z() * e)) / (2.0 * e);
    let det = d1.cross(&d2).norm();
    let c = curvature_at(&s, &x).unwrap();
    assert!((jacobian_factor(t, &c.kappas).unwrap() - det).abs() < 1e-6, "{det}");
    assert!((jacobian_factor(t, &c.kappas).unwrap() - 1.65).abs() < 1e-9);
}

#[test]
fn willmore_and_mean_curvature_of_spheres() {
    let p = TubeParams::new(0.1, 0.02);
    let w = eval_f1(&shape(ShapeSpec::ball(3, 1.0)), &Integrand::Willmore, &p).unwrap();
    assert!((w - 16.0 * PI).abs() < 0.03 * 16.0 * PI);
    for r in [0.7, 1.5] {
        let m = eval_f1(&shape(ShapeSpec::ball(3, r)), &Integrand::MeanCurvature, &TubeParams::new(0.1 * r, 0.02 * r)).unwrap();
        assert!((m - 8.0 * PI * r).abs() < 0.03 * 8.0 * PI * r, "{r}: {m}");
    }
}

/// Lat-long midpoint quadrature of the ellipsoid area element.
fn ellipsoid_area_oracle(a: f64, b: f64, c: f64) -> f64 {
    let n = 1000;
    let mut total = 0.0;
    for i in 0..n {
        let th = PI * (i as f64 + 0.5) / n as f64;
        let (st, ct) = th.sin_cos();
        for j in 0..n {
            let ph = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            let (sp, cp) = ph.sin_cos();
            let xt = Point::new(a * ct * cp, b * ct * sp, -c * st);
            let xp = Point::new(-a * st * sp, b * st * cp, 0.0);
            total += xt.cross(&xp).norm();
        }
    }
    total * (PI / n as f64) * (2.0 * PI / n as f64)
}

#[test]
fn ellipsoid_area_matches_parametric_quadrature() {
    let oracle = ellipsoid_area_oracle(1.1, 1.0, 1.0);
    let a = perimeter(&shape(ShapeSpec::ellipsoid(&[1.1, 1.0, 1.0])), &TubeParams::new(0.1, 0.02)).unwrap();
    assert!((a - oracle).abs() < 0.01 * oracle, "{a} vs {oracle}");
}

#[test]
fn torus_area_and_volume() {
    let t = shape(ShapeSpec::torus(2.0, 0.5));
    let a = perimeter(&t, &TubeParams::new(0.1, 0.02)).unwrap();
    assert!((a - 4.0 * PI * PI).abs() < 0.02 * 4.0 * PI * PI, "{a}");
    let v = volume(&t, 0.02).unwrap();
    assert!((v - PI * PI).abs() < 0.01 * PI * PI, "{v}");
}

#[test]
fn perimeter_and_volume_scale() {
    let base = ShapeSpec::ellipsoid(&[1.2, 1.0, 0.8]);
    let p1 = perimeter(&shape(base.clone()), &TubeParams::new(0.1, 0.02)).unwrap();
    let v1 = volume_with(&shape(base.clone()), 0.02, true).unwrap();
    let lambda = 1.5;
    let p2 = perimeter(&shape(base.scaled(lambda)), &TubeParams::new(0.1 * lambda, 0.02 * lambda)).unwrap();
    let v2 = volume_with(&shape(base.scaled(lambda)), 0.02 * lambda, true).unwrap();
    assert!((p2 - lambda.powi(2) * p1).abs() < 0.02 * p2);
    assert!((v2 - lambda.powi(3) * v1).abs() < 0.02 * v2);
}

#[test]
fn willmore_inequality_on_ellipsoids() {
    let p = TubeParams::new(0.1, 0.025);
    let sphere = eval_f1(&shape(ShapeSpec::ball(3, 1.0)), &Integrand::Willmore, &p).unwrap();
    for axes in [[1.2, 1.0, 1.0], [1.0, 0.9, 0.8], [1.4, 1.1, 1.0]] {
        let w = eval_f1(&shape(ShapeSpec::ellipsoid(&axes)), &Integrand::Willmore, &p).unwrap();
        assert!(w >= sphere - 0.5, "{axes:?}: {w} < {sphere}");
    }
}

#[test]
fn isoperimetric_inequality() {
    let cases = [
        (ShapeSpec::ball(3, 1.0), 0.1),
        (ShapeSpec::ellipsoid(&[1.5, 1.0, 0.7]), 0.1),
        (ShapeSpec::torus(2.0, 0.5), 0.1),
        (ShapeSpec::capsule(3, 1.0, 0.5), 0.1),
        (ShapeSpec::ellipsoid(&[1.5, 0.8]), 0.1),
        (ShapeSpec::capsule(2, 1.0, 0.5), 0.1),
    ];
    for (spec, h) in cases {
        let s = shape(spec);
        let d = s.dim() as i32;
        let p = perimeter(&s, &TubeParams::new(h, 0.02)).unwrap();
        let v = volume_with(&s, 0.02, true).unwrap();
        let omega = if d == 2 { PI } else { 4.0 * PI / 3.0 };
        let lhs = p.powi(d);
        let rhs = (d as f64).powi(d) * omega * v.powi(d - 1);
        assert!(lhs >= rhs * (1.0 - 0.03), "{lhs} < {rhs}");
    }
}

#[test]
fn reach_examples() {
    let ball = shape(ShapeSpec::ball(3, 1.0));
    assert!(uniform_ball_check(&ball, 0.5, 1024).unwrap().passed);
    assert!(!uniform_ball_check(&ball, 1.2, 1024).unwrap().passed);
    let torus = shape(ShapeSpec::torus(2.0, 0.5));
    assert!(uniform_ball_check(&torus, 0.4, 2048).unwrap().passed);
    let tol = 1e-3;
    assert!((estimate_reach(&torus, tol).unwrap() - 0.5).abs() <= 2.0 * tol);
    let pair = shape(ShapeSpec::union_of_balls(3, &[(1.0, vec![-2.0, 0.0, 0.0]), (1.0, vec![2.0, 0.0, 0.0])]));
    assert!((estimate_reach(&pair, tol).unwrap() - 1.0).abs() <= 2.0 * tol);
}

#[test]
fn ball_check_is_monotone_in_h() {
    for spec in [ShapeSpec::ball(3, 1.0), ShapeSpec::torus(2.0, 0.5), ShapeSpec::ellipsoid(&[1.3, 1.0, 0.9])] {
        let s = shape(spec);
        let ladder = [0.1, 0.3, 0.5, 0.8, 1.2];
        let passed: Vec<bool> = ladder.iter().map(|&h| uniform_ball_check(&s, h, 1024).unwrap().passed).collect();
        assert!(passed.windows(2).all(|w| w[0] || !w[1]), "{passed:?}");
        let margins: Vec<f64> = ladder.iter().map(|&h| uniform_ball_check(&s, h, 1024).unwrap().worst_margin).collect();
        assert!(margins.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{margins:?}");
    }
}

#[test]
fn tube_wider_than_the_reach_is_rejected() {
    let torus = shape(ShapeSpec::torus(2.0, 0.5));
    let r = build_tube(&torus, 0.6, 0.05);
    assert!(matches!(r, Err(TubeError::DegenerateExtrusion { .. })), "{r:?}");
    assert!(build_tube(&torus, 0.45, 0.05).is_ok());
}
