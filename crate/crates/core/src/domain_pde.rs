//! Dirichlet Poisson problem `Δu = f` in `Ω`, `u = g` on `∂Ω`, on a Cartesian
//! lattice with Shortley–Weller boundary stencils, plus boundary traces of `u`
//! and `∇u` at tube footpoints.

use std::io::Write;

use rayon::prelude::*;
use sprs::{CsMat, TriMat};

use crate::error::{Result, TubeError};
use crate::geometry::grid::{inside_mask, Lattice, SCAN_BUDGET};
use crate::geometry::{ambient_identity, Shape};
use crate::linalg::{bicgstab, pairwise_sum, SolveStats};
use crate::reach::estimate_reach;
use crate::tube::{TubeNode, TubeQuadrature};
use crate::{Mat, Point};

pub const TOL_SOLVE: f64 = 1e-8;
/// Intercepts are located to this fraction of the grid spacing.
const INTERCEPT_TOL_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainParams {
    pub spacing: f64,
    /// Certified reach; estimated when absent.
    pub reach: Option<f64>,
    pub tol: f64,
}

impl DomainParams {
    pub fn new(spacing: f64) -> Self {
        Self { spacing, reach: None, tol: TOL_SOLVE }
    }

    pub fn with_reach(mut self, reach: f64) -> Self {
        self.reach = Some(reach);
        self
    }
}

/// Discrete solution at the lattice nodes with `b < 0`.
#[derive(Debug, Clone)]
pub struct DomainField {
    pub lattice: Lattice,
    /// Unknown index per lattice node, `None` outside `Ω`.
    pub index: Vec<Option<usize>>,
    /// Flat lattice index of each unknown.
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

/// Boundary values of `u` and `∇u` at a footpoint.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceSample {
    pub x: Point,
    pub nu: Point,
    pub u: f64,
    pub grad: Point,
}

impl TraceSample {
    pub fn normal_derivative(&self) -> f64 {
        self.grad.dot(&self.nu)
    }
}

/// Fraction `θ ∈ (0, 1]` of the segment `a → c` where `b` first reaches 0,
/// assuming `b(a) < 0 <= b(c)`.
fn intercept(shape: &Shape, a: &Point, c: &Point, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    let len = (c - a).norm();
    while (hi - lo) * len > tol {
        let mid = 0.5 * (lo + hi);
        if shape.signed_distance(&(a + (c - a) * mid))? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_spacing(shape: &Shape, params: &DomainParams) -> Result<()> {
    let s = params.spacing;
    if !(s.is_finite() && s > 0.0) {
        return Err(TubeError::InvalidInput(format!("grid spacing must be positive, got {s}")));
    }
    let reach = match params.reach {
        Some(r) => r,
        None => estimate_reach(shape, 1e-3 * shape.diameter())?,
    };
    if s >= reach / 5.0 {
        return Err(TubeError::SpacingTooCoarse { spacing: s, h: reach });
    }
    Ok(())
}

/// Shortley–Weller solve of `Δu = f` in `Ω` with `u = g` on `∂Ω`.
pub fn solve_poisson_dirichlet<F, G>(shape: &Shape, source: F, g: G, params: &DomainParams) -> Result<DomainField>
where
    F: Fn(&Point) -> f64 + Sync,
    G: Fn(&Point) -> f64 + Sync,
{
    check_spacing(shape, params)?;
    let s = params.spacing;
    let dim = shape.dim();
    let bx = shape.bounding_box().padded(2.0 * s, dim);
    let lat = Lattice::nodes(&bx, s, dim, SCAN_BUDGET)?;
    let mask = inside_mask(shape, &lat)?;
    let mut index = vec![None; lat.len()];
    let mut nodes = Vec::new();
    for (f, inside) in mask.iter().enumerate() {
        if *inside {
            index[f] = Some(nodes.len());
            nodes.push(f);
        }
    }
    if nodes.is_empty() {
        return Err(TubeError::InvalidInput("no lattice node inside the shape".into()));
    }
    let tol = INTERCEPT_TOL_REL * s;

    // Row i of -Δ_h: (diagonal, off-diagonals, boundary contribution to the rhs).
    type Row = (f64, Vec<(usize, f64)>, f64);
    let rows = nodes
        .par_iter()
        .map(|&flat| -> Result<Row> {
            let x = lat.position_flat(flat);
            let mut diag = 0.0;
            let mut off = Vec::with_capacity(2 * dim);
            let mut known = 0.0;
            for a in 0..dim {
                // (distance, Ok(unknown) | Err(boundary value)) on each side
                let mut side = [(s, Err(0.0)); 2];
                for (k, dir) in [-1i32, 1].into_iter().enumerate() {
                    let mut e = Point::zeros();
                    e[a] = dir as f64 * s;
                    match lat.neighbor(flat, a, dir).and_then(|n| index[n]) {
                        Some(j) => side[k] = (s, Ok(j)),
                        None => {
                            let theta = intercept(shape, &x, &(x + e), tol)?;
                            let xb = x + e * theta;
                            side[k] = (theta * s, Err(g(&xb)));
                        }
                    }
                }
                let (hl, hr) = (side[0].0, side[1].0);
                let cl = 2.0 / (hl * (hl + hr));
                let cr = 2.0 / (hr * (hl + hr));
                diag += cl + cr;
                for (c, v) in [(cl, side[0].1), (cr, side[1].1)] {
                    match v {
                        Ok(j) => off.push((j, -c)),
                        Err(gb) => known += c * gb,
                    }
                }
            }
            Ok((diag, off, known - source(&x)))
        })
        .collect::<Result<Vec<Row>>>()?;

    let n = nodes.len();
    let mut tri = TriMat::new((n, n));
    let mut rhs = Vec::with_capacity(n);
    // Rows are normalized by their diagonal: near-boundary rows carry
    // coefficients of order 1/(θs²) that would otherwise swamp the residual.
    for (i, (diag, off, r)) in rows.into_iter().enumerate() {
        tri.add_triplet(i, i, 1.0);
        for (j, v) in off {
            tri.add_triplet(i, j, v / diag);
        }
        rhs.push(r / diag);
    }
    let a: CsMat<f64> = tri.to_csr();
    let max_iter = ((10.0 * (n as f64).sqrt()).ceil() as usize).max(100);
    let (values, stats) = bicgstab(&a, &rhs, params.tol, max_iter)?;
    Ok(DomainField { lattice: lat, index, nodes, values, stats })
}

impl DomainField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, i: usize) -> Point {
        self.lattice.position_flat(self.nodes[i])
    }

    /// Multilinear interpolation; every corner of the enclosing cell must be
    /// an interior node.
    pub fn interpolate(&self, x: &Point) -> Result<f64> {
        let missing = || TubeError::InsufficientInteriorStencil { point: [x[0], x[1], x[2]] };
        let (base, frac) = self.lattice.locate(x).ok_or_else(missing)?;
        let dim = self.lattice.dim;
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut ijk = base;
            let mut w = 1.0;
            for a in 0..dim {
                if corner >> a & 1 == 1 {
                    ijk[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            let i = self.index[self.lattice.flat(ijk)].ok_or_else(missing)?;
            acc += w * self.values[i];
        }
        Ok(acc)
    }

    /// CSV with node coordinates and value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.lattice.dim;
        let axes = ["x", "y", "z"];
        let header: Vec<String> = (0..d).map(|a| axes[a].to_string()).chain(["value".to_string()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.position(i);
            let row: Vec<String> = (0..d).map(|a| p[a].to_string()).chain([v.to_string()]).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn gradient_fd<G: Fn(&Point) -> f64>(g: &G, x: &Point, dim: usize, step: f64) -> Point {
    let mut out = Point::zeros();
    for a in 0..dim {
        let mut e = Point::zeros();
        e[a] = step;
        out[a] = (g(&(x + e)) - g(&(x - e))) / (2.0 * step);
    }
    out
}

/// Trace at one footpoint: `u = g(x)`, `∂_ν u` from a one-sided three-point
/// difference along `-ν` at depths `2s` and `4s`, tangential part `P∇g`.
pub fn trace_at<G: Fn(&Point) -> f64>(field: &DomainField, g: &G, x: &Point, nu: &Point) -> Result<TraceSample> {
    let s = field.lattice.spacing;
    let dim = field.lattice.dim;
    let delta = 2.0 * s;
    let u0 = g(x);
    let u1 = field.interpolate(&(x - nu * delta))?;
    let u2 = field.interpolate(&(x - nu * (2.0 * delta)))?;
    let dn = -(-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * delta);
    let p: Mat = ambient_identity(dim) - nu * nu.transpose();
    let tangential = p * gradient_fd(g, x, dim, f64::EPSILON.cbrt() * s.max(1e-3));
    Ok(TraceSample { x: *x, nu: *nu, u: u0, grad: tangential + nu * dn })
}

/// Traces at every footpoint of the quadrature, in node order.
pub fn boundary_trace<G>(field: &DomainField, g: G, quad: &TubeQuadrature) -> Result<Vec<TraceSample>>
where
    G: Fn(&Point) -> f64 + Sync,
{
    quad.nodes.par_iter().map(|nd| trace_at(field, &g, &nd.x, &nd.nu)).collect()
}

/// `∫ j₃(x, ν, u, ∇u) dμ` from traces aligned with the quadrature nodes.
pub fn eval_f3<J>(quad: &TubeQuadrature, traces: &[TraceSample], j3: J) -> f64
where
    J: Fn(&TraceSample) -> f64 + Sync,
{
    let terms: Vec<f64> = quad.nodes.par_iter().zip(traces.par_iter()).map(|(nd, tr)| j3(tr) * nd.weight()).collect();
    pairwise_sum(&terms) / (2.0 * quad.h)
}

/// Thickened norm `((1/2h) ∫_{U_h} |f(y) - f(p(y))|² / J)^{1/2}` of the
/// deviation of `f` from its normal extension.
pub fn trace_deviation_norm<F: Fn(&Point) -> f64 + Sync>(quad: &TubeQuadrature, f: F) -> f64 {
    let terms: Vec<f64> = quad
        .nodes
        .par_iter()
        .map(|nd: &TubeNode| (f(&nd.y) - f(&nd.x)).powi(2) * nd.weight())
        .collect();
    (pairwise_sum(&terms) / (2.0 * quad.h)).sqrt()
}

/// CSV of trace samples: footpoint, u and ∇u.
pub fn write_trace_csv<W: Write>(traces: &[TraceSample], dim: usize, mut out: W) -> std::io::Result<()> {
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = (0..dim).map(|a| format!("x_{}", axes[a])).collect();
    header.push("u".into());
    header.extend((0..dim).map(|a| format!("du_d{}", axes[a])));
    writeln!(out, "{}", header.join(","))?;
    for t in traces {
        let mut row: Vec<String> = (0..dim).map(|a| t.x[a].to_string()).collect();
        row.push(t.u.to_string());
        row.extend((0..dim).map(|a| t.grad[a].to_string()));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShapeSpec;

    fn ball() -> Shape {
        Shape::new(&ShapeSpec::ball(3, 1.0)).unwrap()
    }

    #[test]
    fn constants_are_reproduced() {
        let f = solve_poisson_dirichlet(&ball(), |_| 0.0, |_| 2.5, &DomainParams::new(0.1).with_reach(1.0)).unwrap();
        let worst = f.values.iter().map(|v| (v - 2.5).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst} {:?}", f.stats);
    }

    #[test]
    fn linear_data_is_harmonic() {
        let f = solve_poisson_dirichlet(&ball(), |_| 0.0, |x| x[2], &DomainParams::new(0.1).with_reach(1.0)).unwrap();
        for (i, v) in f.values.iter().enumerate() {
            assert!((v - f.position(i)[2]).abs() < 1e-6);
        }
    }

    #[test]
    fn radial_quadratic() {
        let f = solve_poisson_dirichlet(&ball(), |_| 1.0, |_| 0.0, &DomainParams::new(0.1).with_reach(1.0)).unwrap();
        let center = f.interpolate(&Point::zeros()).unwrap();
        assert!((center + 1.0 / 6.0).abs() < 1e-5, "{center}");
        assert!(f.values.iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn coarse_spacing_rejected() {
        let r = solve_poisson_dirichlet(&ball(), |_| 1.0, |_| 0.0, &DomainParams::new(0.25).with_reach(1.0));
        assert!(matches!(r, Err(TubeError::SpacingTooCoarse { .. })));
    }

    #[test]
    fn interpolation_needs_interior_corners() {
        let f = solve_poisson_dirichlet(&ball(), |_| 1.0, |_| 0.0, &DomainParams::new(0.1).with_reach(1.0)).unwrap();
        let r = f.interpolate(&Point::new(0.0, 0.0, 0.99));
        assert!(matches!(r, Err(TubeError::InsufficientInteriorStencil { .. })));
    }
}
