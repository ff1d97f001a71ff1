use serde_json::{json, Value};
use tubecalc_core::convergence::{run_sequence_experiment, ExperimentSettings, Family, ShapeSequence};
use tubecalc_core::domain_pde::{boundary_trace, eval_f3, solve_poisson_dirichlet, DomainParams};
use tubecalc_core::fields::ScalarField;
use tubecalc_core::functionals::{eval_f1_on, volume_with, Integrand};
use tubecalc_core::reach::{default_samples, estimate_reach_with, uniform_ball_check_seeded, REACH_TOL_REL};
use tubecalc_core::surface_pde::{eval_f2, SurfaceOperator, DEFAULT_EPS_NORMAL};
use tubecalc_core::tube::{build_tube_with, TubeParams};
use tubecalc_core::{Shape, ShapeSpec};

use crate::config::{Command, RunConfig};
use crate::{CliError, Outcome};

type Result<T> = std::result::Result<T, CliError>;

/// Relative bisection tolerance used when the reach only seeds default parameters.
const PARAM_REACH_TOL: f64 = 1e-3;

pub fn dispatch(config: &mut RunConfig) -> Result<Outcome> {
    match config.command {
        Some(Command::Reach) => reach(config),
        Some(Command::Functional) => functional(config),
        Some(Command::SolveLb) => solve_lb(config),
        Some(Command::SolvePoisson) => solve_poisson(config),
        Some(Command::Converge) => converge(config),
        None => Err(CliError::Invalid("no command given".into())),
    }
}

pub fn load_shape(config: &RunConfig) -> Result<Shape> {
    let path = config.require_shape()?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let spec: ShapeSpec = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok(Shape::new(&spec)?)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(buf)
}

fn estimated_reach(shape: &Shape, config: &RunConfig) -> Result<f64> {
    let n = config.n_samples.unwrap_or_else(|| default_samples(shape.dim()));
    Ok(estimate_reach_with(shape, PARAM_REACH_TOL * shape.diameter(), n, config.seed())?)
}

/// Quadrature parameters; missing values default to `h = reach / 4`,
/// `spacing = h / 5` and are written back into the config.
fn tube_params(shape: &Shape, config: &mut RunConfig) -> Result<TubeParams> {
    if config.h.is_none() {
        config.h = Some(TubeParams::from_reach(estimated_reach(shape, config)?).h);
    }
    let h = config.h.unwrap_or_default();
    let spacing = *config.spacing.get_or_insert(h / 5.0);
    let subcells = *config.subcells.get_or_insert(false);
    Ok(TubeParams { h, spacing, subcells })
}

fn reach(config: &mut RunConfig) -> Result<Outcome> {
    let shape = load_shape(config)?;
    let n = *config.n_samples.get_or_insert(default_samples(shape.dim()));
    let seed = *config.seed.get_or_insert(0);
    let results = match config.h {
        Some(h) => serde_json::to_value(uniform_ball_check_seeded(&shape, h, n, seed)?).unwrap_or(Value::Null),
        None => {
            let rel = *config.reach_tol.get_or_insert(REACH_TOL_REL);
            let tol = rel * shape.diameter();
            json!({ "reach": estimate_reach_with(&shape, tol, n, seed)?, "tol": tol })
        }
    };
    Ok(Outcome { results, assertions: Vec::new(), csv: None })
}

fn functional(config: &mut RunConfig) -> Result<Outcome> {
    let shape = load_shape(config)?;
    let name = config.integrand.get_or_insert_with(|| "area".into()).clone();
    let params = tube_params(&shape, config)?;
    if name == "volume" {
        let value = volume_with(&shape, params.spacing, params.subcells)?;
        return Ok(Outcome { results: json!({ "integrand": name, "value": value }), assertions: Vec::new(), csv: None });
    }
    let j = Integrand::from_name(&name)?;
    let quad = build_tube_with(&shape, &params)?;
    let value = eval_f1_on(&quad, &j);
    let csv = match config.csv {
        Some(_) => Some(csv_bytes(|b| quad.write_csv(b))?),
        None => None,
    };
    Ok(Outcome {
        results: json!({ "integrand": name, "value": value, "nodes": quad.len() }),
        assertions: Vec::new(),
        csv,
    })
}

fn solve_lb(config: &mut RunConfig) -> Result<Outcome> {
    let shape = load_shape(config)?;
    let f = *config.field.get_or_insert(ScalarField::Coordinate(2));
    let eps = *config.eps_normal.get_or_insert(DEFAULT_EPS_NORMAL);
    let params = TubeParams { subcells: false, ..tube_params(&shape, config)? };
    config.subcells = Some(false);
    let op = SurfaceOperator::new(build_tube_with(&shape, &params)?, eps)?;
    let (field, energy) = op.solve(|x| f.eval(x))?;
    let mut results = json!({
        "nodes": op.len(),
        "area": op.area(),
        "energy": energy,
        "mean": op.integral(&field.values) / op.area(),
        "l2_norm": op.l2_norm2(&field.values).sqrt(),
        "f2": {
            "gradient_squared": eval_f2(&op, &field, |_, _, _, g| g.norm_squared()),
            "value_squared": eval_f2(&op, &field, |_, _, v, _| v * v),
        },
    });
    if *config.poincare.get_or_insert(false) {
        results["poincare_constant"] = json!(op.poincare_constant()?);
    }
    let csv = match config.csv {
        Some(_) => Some(csv_bytes(|b| field.write_csv(b))?),
        None => None,
    };
    Ok(Outcome { results, assertions: Vec::new(), csv })
}

fn solve_poisson(config: &mut RunConfig) -> Result<Outcome> {
    let shape = load_shape(config)?;
    let source = *config.source.get_or_insert(ScalarField::Constant(1.0));
    let g = *config.boundary.get_or_insert(ScalarField::Constant(0.0));
    let reach = estimated_reach(&shape, config)?;
    let s = *config.poisson_spacing.get_or_insert(reach / 10.0);
    let field = solve_poisson_dirichlet(&shape, |x| source.eval(x), |x| g.eval(x), &DomainParams::new(s).with_reach(reach))?;
    let params = tube_params(&shape, config)?;
    let quad = build_tube_with(&shape, &params)?;
    let traces = boundary_trace(&field, |x| g.eval(x), &quad)?;
    let dn: Vec<f64> = traces.iter().map(|t| t.normal_derivative()).collect();
    let center = field.interpolate(&shape.center()).ok();
    let results = json!({
        "unknowns": field.len(),
        "iterations": field.stats.iterations,
        "residual": field.stats.residual,
        "u_center": center,
        "normal_derivative": {
            "min": dn.iter().copied().fold(f64::INFINITY, f64::min),
            "max": dn.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        },
        "f3": {
            "normal_derivative_squared": eval_f3(&quad, &traces, |t| t.normal_derivative().powi(2)),
            "value_squared": eval_f3(&quad, &traces, |t| t.u * t.u),
            "one": eval_f3(&quad, &traces, |_| 1.0),
        },
    });
    let csv = match config.csv {
        Some(_) => Some(csv_bytes(|b| field.write_csv(b))?),
        None => None,
    };
    Ok(Outcome { results, assertions: Vec::new(), csv })
}

/// Experiment settings from the config; written back so the report shows them.
pub fn experiment_settings(config: &mut RunConfig) -> ExperimentSettings {
    let d = ExperimentSettings::default();
    let h = *config.h.get_or_insert(d.quad.h);
    let spacing = *config.spacing.get_or_insert(d.quad.spacing);
    let lb_h = *config.lb_h.get_or_insert(d.lb_quad.h);
    let lb_spacing = *config.lb_spacing.get_or_insert(d.lb_quad.spacing);
    ExperimentSettings {
        quad: TubeParams::new(h, spacing),
        lb_quad: TubeParams::new(lb_h, lb_spacing),
        eps_normal: *config.eps_normal.get_or_insert(d.eps_normal),
        f1: Some(config.integrand.get_or_insert_with(|| d.f1.clone().unwrap_or_default()).clone()),
        f2_load: Some(*config.field.get_or_insert(d.f2_load.unwrap_or(ScalarField::Coordinate(2)))),
        f2_density: d.f2_density,
        n_domain_samples: *config.n_domain_samples.get_or_insert(d.n_domain_samples),
        n_surface_samples: *config.n_surface_samples.get_or_insert(d.n_surface_samples),
        seed: *config.seed.get_or_insert(d.seed),
        rel_gap_threshold: *config.rel_gap_threshold.get_or_insert(d.rel_gap_threshold),
        jac_threshold: *config.jac_threshold.get_or_insert(d.jac_threshold),
        cn_threshold: *config.cn_threshold.get_or_insert(d.cn_threshold),
        tol_lsc: *config.tol_lsc.get_or_insert(d.tol_lsc),
        component_spacing: d.component_spacing,
    }
}

fn converge(config: &mut RunConfig) -> Result<Outcome> {
    let family = *config.family.get_or_insert(Family::EllipsoidToSphere);
    let n_max = *config.n_max.get_or_insert(6);
    let dim = *config.dim.get_or_insert(3);
    let settings = experiment_settings(config);
    let seq = ShapeSequence::family(family, dim, n_max)?;
    let certified = seq.certify(settings.seed)?;
    if let Some(k) = certified.iter().position(|ok| !ok) {
        let which = if k == 0 { "the limit".to_string() } else { format!("member {}", seq.members[k - 1].0) };
        return Err(CliError::Invalid(format!("{which} fails the ball condition at r0 = {}", seq.r0)));
    }
    let report = run_sequence_experiment(&seq, &settings)?;
    let csv = match config.csv {
        Some(_) => Some(csv_bytes(|b| report.write_csv(b))?),
        None => None,
    };
    let mut results = serde_json::to_value(&report).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut results {
        map.remove("assertions");
    }
    Ok(Outcome { results, assertions: report.assertions, csv })
}

