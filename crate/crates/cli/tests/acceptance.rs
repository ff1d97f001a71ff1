//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tubecalc_core::convergence::{run_sequence_experiment, ExperimentSettings, Family, ShapeSequence};
use tubecalc_core::domain_pde::{boundary_trace, eval_f3, solve_poisson_dirichlet, trace_deviation_norm, DomainParams};
use tubecalc_core::functionals::{eval_f1, perimeter, Integrand};
use tubecalc_core::reach::{estimate_reach, uniform_ball_check};
use tubecalc_core::sampling::Halton;
use tubecalc_core::surface_pde::{solve_lb, SurfaceOperator};
use tubecalc_core::tube::{build_tube, build_tube_with, hessian_at_footpoint, transport_hessian, TubeParams};
use tubecalc_core::{Point, Shape, ShapeKind, ShapeSpec};

struct Suite {
    failed: usize,
}

impl Suite {
    fn check(&mut self, id: &str, what: &str, passed: bool, detail: String) {
        if !passed {
            self.failed += 1;
        }
        println!("{} {id:<3} {what}: {detail}", if passed { "PASS" } else { "FAIL" });
    }

    /// Criterion whose computation itself errored.
    fn error(&mut self, id: &str, what: &str, e: impl std::fmt::Display) {
        self.check(id, what, false, format!("error: {e}"));
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn shape(spec: ShapeSpec) -> Shape {
    Shape::new(&spec).expect("catalogue shape")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn sphere_area(s: &mut Suite) {
    let sphere = shape(ShapeSpec::ball(3, 1.0));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let area = pool.install(|| perimeter(&sphere, &TubeParams::new(0.1, 0.02)));
    let secs = start.elapsed().as_secs_f64();
    match area {
        Ok(a) => s.check(
            "1a",
            "unit sphere area, h 0.1, spacing 0.02, one thread",
            rel(a, 4.0 * PI) < 0.02 && secs < 30.0,
            format!("area {a:.6} (rel err {:.2e}, bound 2e-2), {secs:.2} s (bound 30 s)", rel(a, 4.0 * PI)),
        ),
        Err(e) => s.error("1a", "unit sphere area", e),
    }
    let areas: Result<Vec<f64>, _> =
        [0.05, 0.1, 0.2].iter().map(|&h| perimeter(&sphere, &TubeParams::new(h, 0.02))).collect();
    match areas {
        Ok(a) => {
            let mut worst: f64 = 0.0;
            for i in 0..a.len() {
                for j in i + 1..a.len() {
                    worst = worst.max(rel(a[i], a[j]));
                }
            }
            s.check("1b", "area independent of h in {0.05, 0.1, 0.2}", worst < 0.01, format!("{a:.5?}, worst pairwise {worst:.2e} (bound 1e-2)"));
        }
        Err(e) => s.error("1b", "area independent of h", e),
    }
}

fn curvature_functionals(s: &mut Suite) {
    let target = 16.0 * PI;
    let willmore = Integrand::from_name("willmore").unwrap();
    match eval_f1(&shape(ShapeSpec::ball(3, 1.0)), &willmore, &TubeParams::new(0.1, 0.02)) {
        Ok(w) => s.check("2a", "Willmore of the unit sphere", rel(w, target) < 0.03, format!("{w:.5} vs 16pi (rel err {:.2e}, bound 3e-2)", rel(w, target))),
        Err(e) => s.error("2a", "Willmore of the unit sphere", e),
    }
    let mean = Integrand::from_name("mean-curvature").unwrap();
    match eval_f1(&shape(ShapeSpec::ball(3, 2.0)), &mean, &TubeParams::new(0.2, 0.04)) {
        Ok(m) => s.check("2b", "mean curvature integral, radius-2 sphere", rel(m, target) < 0.03, format!("{m:.5} vs 16pi (rel err {:.2e}, bound 3e-2)", rel(m, target))),
        Err(e) => s.error("2b", "mean curvature integral, radius-2 sphere", e),
    }
}

fn reach(s: &mut Suite) {
    for (id, spec, exact, what) in [
        ("3a", ShapeSpec::ball(3, 1.0), 1.0, "reach of the unit sphere"),
        ("3b", ShapeSpec::torus(2.0, 0.5), 0.5, "reach of the torus R 2, r 0.5"),
    ] {
        let sh = shape(spec);
        match estimate_reach(&sh, 1e-4 * sh.diameter()) {
            Ok(r) => s.check(id, what, (r - exact).abs() <= 0.02, format!("{r:.5} vs {exact} (bound 0.02)")),
            Err(e) => s.error(id, what, e),
        }
    }
    let ladder = [0.1, 0.3, 0.5, 0.8, 1.2];
    let mut ok = true;
    let mut detail = String::new();
    for (name, spec) in [("sphere", ShapeSpec::ball(3, 1.0)), ("torus", ShapeSpec::torus(2.0, 0.5)), ("ellipsoid", ShapeSpec::ellipsoid(&[1.3, 1.0, 0.9]))] {
        let sh = shape(spec);
        let certs: Result<Vec<_>, _> = ladder.iter().map(|&h| uniform_ball_check(&sh, h, 1024)).collect();
        match certs {
            Ok(c) => {
                let passed: Vec<bool> = c.iter().map(|c| c.passed).collect();
                ok &= passed.windows(2).all(|w| w[0] || !w[1]);
                detail += &format!("{name} {passed:?} ");
            }
            Err(e) => {
                ok = false;
                detail += &format!("{name} error {e} ");
            }
        }
    }
    s.check("3c", "ball check monotone on h ladder 0.1..1.2", ok, detail.trim_end().to_string());
}

fn random_zero_mean(op: &SurfaceOperator, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    op.remove_mean(&mut v);
    v
}

fn laplace_beltrami(s: &mut Suite) {
    let sphere = shape(ShapeSpec::ball(3, 1.0));
    let (op, field, _) = match solve_lb(&sphere, |x| x[2], &TubeParams::new(0.15, 0.05), 1.0) {
        Ok(r) => r,
        Err(e) => return s.error("4a", "Laplace-Beltrami solve", e),
    };
    let err: Vec<f64> = op.quadrature().nodes.iter().zip(&field.values).map(|(n, v)| v + n.x[2] / 2.0).collect();
    let exact: Vec<f64> = op.quadrature().nodes.iter().map(|n| -n.x[2] / 2.0).collect();
    let rel_l2 = (op.l2_norm2(&err) / op.l2_norm2(&exact)).sqrt();
    s.check("4a", "LB solution vs -z/2, spacing 0.05, h 0.15", rel_l2 < 0.1, format!("relative L2 error {rel_l2:.3e} (bound 1e-1)"));

    let load = op.sample_load(|x| x[2]);
    let e0 = op.discrete_energy(&field.values, &load);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut min_gain = f64::INFINITY;
    for _ in 0..10 {
        let phi = random_zero_mean(&op, &mut rng);
        for step in [1e-3, -1e-3] {
            let moved: Vec<f64> = field.values.iter().zip(&phi).map(|(u, p)| u + step * p).collect();
            min_gain = min_gain.min(op.discrete_energy(&moved, &load) - e0);
        }
    }
    s.check("4b", "energy increases along 10 random directions", min_gain > 0.0, format!("smallest energy gain {min_gain:.3e}"));

    match op.poincare_constant() {
        Ok(c) => s.check("5", "Poincare constant of the unit sphere", rel(c, 2.0) < 0.15, format!("{c:.5} vs 2 (rel err {:.2e}, bound 0.15)", rel(c, 2.0))),
        Err(e) => s.error("5", "Poincare constant of the unit sphere", e),
    }
}

fn poisson(s: &mut Suite) {
    let ball = shape(ShapeSpec::ball(3, 1.0));
    let exact = |x: &Point| (x.norm_squared() - 1.0) / 6.0;
    let errs: Result<Vec<f64>, _> = [0.08, 0.04, 0.02]
        .iter()
        .map(|&sp| {
            solve_poisson_dirichlet(&ball, |_| 1.0, |_| 0.0, &DomainParams::new(sp).with_reach(1.0)).map(|f| {
                (0..f.values.len()).map(|i| (f.values[i] - exact(&f.position(i))).abs()).fold(0.0, f64::max)
            })
        })
        .collect();
    match errs {
        Ok(errs) => {
            s.check("6a", "Poisson max-node error at spacing 0.02", errs[2] < 1e-2, format!("{:.3e} (bound 1e-2)", errs[2]));
            let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
            let order = orders.iter().copied().fold(f64::INFINITY, f64::min);
            s.check(
                "6b",
                "Poisson convergence order, spacings 0.08/0.04/0.02",
                order >= 1.8,
                format!("errors {}, orders {orders:.2?} (bound 1.8)", sci(&errs)),
            );
        }
        Err(e) => s.error("6a", "Poisson solve", e),
    }
    let f3 = solve_poisson_dirichlet(&ball, |_| 1.0, |_| 0.0, &DomainParams::new(0.02).with_reach(1.0)).and_then(|field| {
        let quad = build_tube_with(&ball, &TubeParams::new(0.1, 0.02))?;
        let traces = boundary_trace(&field, |_| 0.0, &quad)?;
        Ok(eval_f3(&quad, &traces, |t| t.normal_derivative().powi(2)))
    });
    let target = 4.0 * PI / 9.0;
    match f3 {
        Ok(v) => s.check("6c", "F3 with squared normal derivative", rel(v, target) < 0.05, format!("{v:.5} vs 4pi/9 (rel err {:.2e}, bound 5e-2)", rel(v, target))),
        Err(e) => s.error("6c", "F3 with squared normal derivative", e),
    }
}

fn convergence_lab(s: &mut Suite) {
    let settings = ExperimentSettings::default();
    let report = ShapeSequence::family(Family::EllipsoidToSphere, 3, 6)
        .and_then(|seq| run_sequence_experiment(&seq, &settings));
    let report = match report {
        Ok(r) => r,
        Err(e) => return s.error("7", "ellipsoid_to_sphere experiment", e),
    };
    let last = report.rows.last().expect("six members");
    let bound = 1e-2 * 4.0 * PI;
    s.check("7a", "final perimeter gap", last.perim_gap.abs() < bound, format!("{:.4e} (bound {bound:.4e})", last.perim_gap.abs()));
    let bound = 1e-2 * 4.0 * PI / 3.0;
    s.check("7b", "final volume gap", last.vol_gap.abs() < bound, format!("{:.4e} (bound {bound:.4e})", last.vol_gap.abs()));
    s.check("7c", "final sup |Jac(tau_n) - 1|", last.jac_tau_dev < 0.02, format!("{:.4e} (bound 2e-2)", last.jac_tau_dev));
    let series: Vec<f64> = report.rows.iter().map(|r| r.jac_tau_dev).collect();
    let monotone = report.assertions.iter().find(|a| a.lemma == "transport_jacobian_monotone").map(|a| a.passed).unwrap_or(false);
    s.check("7d", "Jacobian deviation decreasing first to last third", monotone, sci(&series));
    s.check("7e", "final sup |C_n|", last.cn_norm < 0.05, format!("{:.4e} (bound 5e-2)", last.cn_norm));
    let floor = 16.0 * PI - 0.5;
    let worst = report.rows.iter().map(|r| r.f1).fold(f64::INFINITY, f64::min);
    s.check("7f", "Willmore lsc bound for every n", worst >= floor, format!("min F1 {worst:.5} (bound >= {floor:.5})"));
}

fn probe_shapes() -> Vec<(ShapeSpec, f64)> {
    vec![
        (ShapeSpec::ball(3, 1.0), 1.0),
        (ShapeSpec::ball(2, 0.8).with_center(&[0.3, -0.2]), 0.8),
        (ShapeSpec::torus(2.0, 0.5), 0.5),
        (ShapeSpec::capsule(3, 1.0, 0.5), 0.5),
        (ShapeSpec::capsule(2, 0.7, 0.4), 0.4),
        (ShapeSpec::ellipsoid(&[1.3, 1.0, 0.8]), 0.3),
        (ShapeSpec::ellipsoid(&[1.4, 0.9]), 0.3),
        (ShapeSpec::harmonic_sphere(3, 1.0, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.06]), 0.3),
    ]
}

/// Quasi-random points of the tube `|b| < 0.3 reach` built from boundary points.
fn probe_points(sh: &Shape, reach: f64, n: usize) -> Vec<Point> {
    let mut halton = Halton::new(3, 17);
    (0..n)
        .map(|_| {
            let u = halton.next_unit();
            let mut d = Point::new(2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0, 0.0);
            if sh.dim() == 3 {
                d[2] = 2.0 * u[2] - 1.0;
            }
            if d.norm() < 1e-3 {
                d = Point::x();
            }
            let x = sh.project(&(sh.center() + d.normalize() * 3.0)).unwrap();
            let nu = sh.eval(&x).unwrap().grad;
            let frac = if sh.dim() == 3 { 2.0 * ((u[0] * 7.0 + u[2] * 3.0).fract()) - 1.0 } else { 2.0 * u[2] - 1.0 };
            x + nu * (frac * 0.3 * reach)
        })
        .collect()
}

fn invariants(s: &mut Suite) {
    let (mut eik, mut kernel, mut idem, mut transport) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (spec, reach) in probe_shapes() {
        let sh = shape(spec.clone());
        let closed = matches!(spec.kind, ShapeKind::Ball | ShapeKind::Torus | ShapeKind::Capsule);
        for y in probe_points(&sh, reach, 64) {
            let smp = sh.eval(&y).unwrap();
            let eps = 1e-6;
            let mut fd = Point::zeros();
            for a in 0..sh.dim() {
                let mut e = Point::zeros();
                e[a] = eps;
                fd[a] = (sh.signed_distance(&(y + e)).unwrap() - sh.signed_distance(&(y - e)).unwrap()) / (2.0 * eps);
            }
            eik = eik.max((smp.grad.norm() - 1.0).abs()).max((fd.norm() - 1.0).abs());
            kernel = kernel.max((smp.hess * smp.grad).norm() / (1.0 + smp.hess.norm()));
            let p = sh.project(&y).unwrap();
            let pp = sh.project(&p).unwrap();
            idem = idem.max((p - pp).norm() / sh.diameter()).max(sh.signed_distance(&p).unwrap().abs() / sh.diameter());
            if closed {
                let direct = sh.eval(&smp.footpoint).unwrap().hess;
                let moved = transport_hessian(&smp, sh.dim()).unwrap();
                let via = hessian_at_footpoint(&sh, &y).unwrap();
                transport = transport.max((moved - direct).norm()).max((via - direct).norm());
            }
        }
    }
    s.check("8a", "eikonal |grad b| = 1 in tubes", eik < 1e-4, format!("max deviation {eik:.2e} (bound 1e-4 finite-difference, 1e-9 analytic)"));
    s.check("8b", "Hessian annihilates the normal", kernel < 1e-8, format!("max relative |Hess b nu| {kernel:.2e} (bound 1e-8)"));
    s.check("8c", "projection idempotent", idem < 1e-9, format!("max relative deviation {idem:.2e} (bound 1e-9)"));
    s.check("8d", "Hessian transport on closed forms", transport < 1e-6, format!("max deviation {transport:.2e} (bound 1e-6)"));

    let ball = shape(ShapeSpec::ball(3, 1.0));
    let norms: Result<Vec<f64>, _> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&h| build_tube(&ball, h, 0.0125).map(|q| trace_deviation_norm(&q, |x| x[2])))
        .collect();
    match norms {
        Ok(n) => {
            let ratios: Vec<f64> = n.windows(2).map(|w| w[0] / w[1]).collect();
            let ok = ratios.iter().all(|r| (r - 2.0).abs() < 0.2 * 2.0);
            s.check("8e", "trace deviation linear in h", ok, format!("norms {}, halving ratios {ratios:.3?} (2 +- 20%)", sci(&n)));
        }
        Err(e) => s.error("8e", "trace deviation linear in h", e),
    }
}

fn determinism(s: &mut Suite) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("converge.json");
    std::fs::write(
        &cfg,
        r#"{"family": "ellipsoid_to_sphere", "n_max": 3, "dim": 3, "spacing": 0.04, "lb_spacing": 0.07,
            "n_domain_samples": 4000, "n_surface_samples": 200}"#,
    )
    .unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_tubecalc"))
            .args(["converge", "--config"])
            .arg(&cfg)
            .env("TUBECALC_THREADS", threads)
            .output()
            .expect("tubecalc runs")
    };
    let outs = [run("4"), run("4"), run("4")];
    let same = outs.windows(2).all(|w| w[0].stdout == w[1].stdout);
    let nonempty = outs.iter().all(|o| !o.stdout.is_empty() && o.status.code().is_some_and(|c| c != 1));
    s.check(
        "9",
        "repeated converge runs give identical JSON",
        same && nonempty,
        format!("{} bytes, exit {:?}", outs[0].stdout.len(), outs[0].status.code()),
    );
}

fn main() {
    let mut s = Suite { failed: 0 };
    sphere_area(&mut s);
    curvature_functionals(&mut s);
    reach(&mut s);
    laplace_beltrami(&mut s);
    poisson(&mut s);
    convergence_lab(&mut s);
    invariants(&mut s);
    determinism(&mut s);
    println!("{} criteria failed", s.failed);
    if s.failed > 0 {
        std::process::exit(1);
    }
}
