use std::f64::consts::PI;

use tubecalc_core::convergence::{
    cn_matrix, rconv_metrics, run_sequence_experiment, transport_jacobian, ExperimentSettings, Family, ShapeSequence,
};
use tubecalc_core::reach::BoundarySamples;
use tubecalc_core::tube::TubeParams;
use tubecalc_core::{Mat, Point, Shape, ShapeSpec};

fn light_settings() -> ExperimentSettings {
    ExperimentSettings {
        quad: TubeParams::new(0.15, 0.04),
        lb_quad: TubeParams::new(0.15, 0.07),
        n_domain_samples: 4000,
        n_surface_samples: 200,
        component_spacing: 0.15,
        ..ExperimentSettings::default()
    }
}

#[test]
fn shipped_families_are_certified() {
    for family in [Family::EllipsoidToSphere, Family::HarmonicDecay, Family::RadiusRamp] {
        for dim in [2, 3] {
            let seq = ShapeSequence::family(family, dim, 6).unwrap();
            assert!(seq.certify(0).unwrap().iter().all(|p| *p), "{family:?} d={dim}");
        }
    }
}

#[test]
fn concentric_spheres_distance_gap() {
    let seq = ShapeSequence::family(Family::RadiusRamp, 3, 4).unwrap();
    let settings = light_settings();
    for i in 0..4 {
        let row = rconv_metrics(&seq, i, &settings).unwrap();
        let gap = 0.5f64.powi(row.n as i32);
        assert!((row.sup_b - gap).abs() < 1e-12, "{} vs {gap}", row.sup_b);
        assert!(row.sup_gradb < 1e-12);
        let r = 1.0 + gap;
        let exact = 4.0 * PI * (r * r - 1.0);
        assert!((row.perim_gap - exact).abs() < 0.02 * 4.0 * PI * r * r, "{} vs {exact}", row.perim_gap);
    }
}

#[test]
fn ellipsoid_distance_gap_is_bounded_by_the_axis_gap() {
    let seq = ShapeSequence::family(Family::EllipsoidToSphere, 3, 4).unwrap();
    let settings = light_settings();
    for i in 0..4 {
        let row = rconv_metrics(&seq, i, &settings).unwrap();
        assert!(row.sup_b <= 0.5f64.powi(row.n as i32) + 1e-9);
        // the uniform Hessian bound needs U_r(Γ∞) inside the member's own reach tube
        if row.sup_b + 0.5 * seq.r0 < seq.r0 {
            assert!(row.sup_hess <= 2.0 / (0.5 * seq.r0), "{}", row.sup_hess);
        }
    }
}

#[test]
fn constant_sequence_has_no_gaps() {
    let seq = ShapeSequence::family(Family::Constant, 3, 3).unwrap();
    let report = run_sequence_experiment(&seq, &light_settings()).unwrap();
    for row in &report.rows {
        assert_eq!(row.sup_b, 0.0);
        assert_eq!(row.perim_gap, 0.0);
        assert_eq!(row.vol_gap, 0.0);
        assert!(row.cn_norm < 1e-12);
        assert!(row.jac_tau_dev < 1e-6);
        assert_eq!(row.f1, report.limit.f1);
        assert_eq!(row.f2, report.limit.f2);
    }
    let lsc = report.assertions.iter().find(|a| a.lemma == "lsc_f1").unwrap();
    assert_eq!(lsc.value, 0.0);
    assert!(report.assertions.iter().all(|a| a.passed), "{:?}", report.assertions);
}

#[test]
fn transport_jacobian_grows_with_the_deformation() {
    let sphere = ShapeSpec::ball(3, 1.0);
    let samples = BoundarySamples::collect(&Shape::new(&sphere).unwrap(), 300, 1).unwrap();
    let sup = |a: f64| {
        let member = ShapeSpec::ellipsoid(&[a, 1.0, 1.0]);
        samples
            .points
            .iter()
            .map(|x| (transport_jacobian(&sphere, &member, x).unwrap() - 1.0).abs())
            .fold(0.0, f64::max)
    };
    assert!(sup(1.1) < sup(1.2));
    assert!((transport_jacobian(&sphere, &sphere, &samples.points[0]).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn gradient_transport_matrix_of_concentric_spheres() {
    // C = -δ P (nnᵀ - I) = δ P on the unit sphere, so |C| = δ
    let x = Point::new(0.48, 0.6, 0.64);
    let c = cn_matrix(&ShapeSpec::ball(3, 1.0), &ShapeSpec::ball(3, 1.1), &x).unwrap();
    let p = Mat::identity() - x * x.transpose();
    assert!((c - p * 0.1).norm() < 1e-12);
    assert!((c.svd(false, false).singular_values.max() - 0.1).abs() < 1e-12);
}

#[test]
fn gradient_transport_identity() {
    let limit = ShapeSpec::ball(3, 1.0);
    let lim = Shape::new(&limit).unwrap();
    let samples = BoundarySamples::collect(&lim, 100, 2).unwrap();
    for member_spec in [ShapeSpec::ball(3, 1.1), ShapeSpec::ellipsoid(&[1.1, 1.0, 1.0]), ShapeSpec::ellipsoid(&[1.05, 0.95, 1.0])] {
        let member = Shape::new(&member_spec).unwrap();
        let tau = |y: &Point| member.project(&lim.project(y).unwrap()).unwrap();
        let mut worst: f64 = 0.0;
        for (x, nu) in samples.points.iter().zip(&samples.normals) {
            let helper = if nu[0].abs() < 0.9 { Point::x() } else { Point::y() };
            let e1 = (helper - nu * nu.dot(&helper)).normalize();
            let e2 = nu.cross(&e1);
            let d = 1e-5;
            let lhs: Point = [e1, e2].iter().map(|e| e * ((tau(&(x + e * d))[2] - tau(&(x - e * d))[2]) / (2.0 * d))).sum();
            let tx = tau(x);
            let n = member.eval(&tx).unwrap().grad;
            let grad_member = Point::z() - n * n[2];
            let c = cn_matrix(&limit, &member_spec, x).unwrap();
            let rhs = (grad_member.transpose() * (Mat::identity() + c)).transpose();
            worst = worst.max((lhs - rhs).norm());
        }
        assert!(worst < 1e-3, "{member_spec:?}: {worst}");
    }
}

#[test]
fn radius_ramp_experiment() {
    let seq = ShapeSequence::family(Family::RadiusRamp, 3, 4).unwrap();
    let report = run_sequence_experiment(&seq, &light_settings()).unwrap();
    assert_eq!(report.rows.len(), 4);
    let names: Vec<&str> = report.assertions.iter().map(|a| a.lemma.as_str()).collect();
    for n in ["perimeter_continuity", "volume_continuity", "transport_jacobian_limit", "gradient_transport_limit", "lsc_f1", "lsc_f2", "tube_inclusion"] {
        assert!(names.contains(&n), "{names:?}");
    }
    for row in &report.rows {
        let r = 1.0 + 0.5f64.powi(row.n as i32);
        // Jac(τ) = r² exactly for concentric spheres
        assert!((row.jac_tau_dev - (r * r - 1.0)).abs() < 1e-4);
        assert!(row.components == 1);
    }
    let jac: Vec<f64> = report.rows.iter().map(|r| r.jac_tau_dev).collect();
    assert!(jac.windows(2).all(|w| w[1] < w[0]));
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 5);
    let json: serde_json::Value = serde_json::to_value(&report).unwrap();
    assert!(json["note"].as_str().unwrap().contains("weak-star"));
}

#[test]
fn experiment_is_independent_of_the_thread_count() {
    let seq = ShapeSequence::family(Family::HarmonicDecay, 3, 2).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&run_sequence_experiment(&seq, &light_settings()).unwrap()).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(4));
    assert_eq!(a, run(4));
}
