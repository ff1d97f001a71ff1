//! Laplace–Beltrami problems on a hypersurface, posed on its tubular
//! neighborhood.
//!
//! A surface function `v` is represented by its normal extension `u = v∘p`
//! on the tube nodes. The discrete energy is
//!
//! ```text
//! E(u) = Σ_i m_i [ ½|P_i ∇u_i|² + (ε/2)⟨∇u_i, ν_i⟩² - g_i u_i ],   m_i = V / (2h J_i)
//! ```
//!
//! Its minimizer solves `-Δ_Γ v = g`, so `Δ_Γ v = f` is solved with the load `g = -f`.
//!
//! where each squared gradient is the mean of its forward-difference and
//! backward-difference values. (The centered gradient alone annihilates
//! checkerboard modes and leaves the discrete problem nearly singular.) The
//! minimizer over zero-mean fields solves `A u = M g`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use sprs::{CsMat, TriMat};

use crate::error::{Result, TubeError};
use crate::geometry::{ambient_identity, Shape};
use crate::linalg::{dot, pairwise_sum, pcg, spmv, Deflation, SolveStats};
use crate::tube::{build_tube_with, TubeParams, TubeQuadrature};
use crate::{Mat, Point};

pub const TOL_CG: f64 = 1e-8;
pub const DEFAULT_EPS_NORMAL: f64 = 1.0;
const POWER_MAX_ITER: usize = 200;
const POWER_TOL: f64 = 1e-7;

/// Energy terms of a discrete field.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyReport {
    /// `½ ∫ |∇_Γ u|²`, tangential part only.
    pub dirichlet: f64,
    /// `∫ g u` with the energy load `g = -f`.
    pub load: f64,
    /// `dirichlet - load`.
    pub total: f64,
    /// `(ε/2) ∫ ⟨∇u, ν⟩²`, reported separately from the tangential energy.
    pub normal_penalty: f64,
    pub cg_iters: usize,
    pub residual: f64,
}

/// Discretized Laplace–Beltrami operator on a tube quadrature.
#[derive(Debug, Clone)]
pub struct SurfaceOperator {
    quad: Arc<TubeQuadrature>,
    eps_normal: f64,
    /// Stacked centered gradient, `3N × N`.
    grad: CsMat<f64>,
    stiffness: CsMat<f64>,
    /// Surface measure weights `m_i`.
    mass: Vec<f64>,
}

/// Normal extension of a surface function, stored at the tube nodes.
#[derive(Debug, Clone)]
pub struct SurfaceField {
    pub values: Vec<f64>,
    pub quad: Arc<TubeQuadrature>,
    pub zero_mean: bool,
}

impl SurfaceOperator {
    pub fn new(quad: TubeQuadrature, eps_normal: f64) -> Result<Self> {
        if eps_normal == 0.0 {
            return Err(TubeError::SingularWithoutRegularization);
        }
        if !(eps_normal.is_finite() && eps_normal > 0.0) {
            return Err(TubeError::InvalidInput(format!("normal regularization must be positive, got {eps_normal}")));
        }
        let n = quad.len();
        if n == 0 {
            return Err(TubeError::InvalidInput("empty tube".into()));
        }
        let mut lattice_ids = Vec::with_capacity(n);
        for node in &quad.nodes {
            let id = node
                .lattice_index
                .ok_or_else(|| TubeError::InvalidInput("surface solver needs a tube without subcells".into()))?;
            lattice_ids.push(id);
        }
        let lookup = |flat: usize| lattice_ids.binary_search(&flat).ok();
        let dim = quad.dim;
        let s = quad.spacing;
        let lat = quad.lattice;

        // One-sided gradients (forward, backward, and their mean, the centered
        // gradient). A missing neighbor falls back to the other side.
        let mut fwd = TriMat::new((3 * n, n));
        let mut bwd = TriMat::new((3 * n, n));
        for (i, id) in lattice_ids.iter().enumerate() {
            for a in 0..dim {
                let plus = lat.neighbor(*id, a, 1).and_then(lookup);
                let minus = lat.neighbor(*id, a, -1).and_then(lookup);
                let row = 3 * i + a;
                let push = |t: &mut TriMat<f64>, hi: usize, lo: usize| {
                    t.add_triplet(row, hi, 1.0 / s);
                    t.add_triplet(row, lo, -1.0 / s);
                };
                match (minus, plus) {
                    (Some(m), Some(p)) => {
                        push(&mut fwd, p, i);
                        push(&mut bwd, i, m);
                    }
                    (None, Some(p)) => {
                        push(&mut fwd, p, i);
                        push(&mut bwd, p, i);
                    }
                    (Some(m), None) => {
                        push(&mut fwd, i, m);
                        push(&mut bwd, i, m);
                    }
                    (None, None) => {}
                }
            }
        }
        let fwd: CsMat<f64> = fwd.to_csr();
        let bwd: CsMat<f64> = bwd.to_csr();
        let grad: CsMat<f64> = (&fwd + &bwd).map(|v| 0.5 * v);

        let mass: Vec<f64> = quad.nodes.iter().map(|nd| nd.weight() / (2.0 * quad.h)).collect();
        let mut blocks = TriMat::new((3 * n, 3 * n));
        let id = ambient_identity(dim);
        for (i, nd) in quad.nodes.iter().enumerate() {
            let nn = nd.nu * nd.nu.transpose();
            let m = (id - nn + nn * eps_normal) * (0.5 * mass[i]);
            for a in 0..dim {
                for b in 0..dim {
                    if m[(a, b)] != 0.0 {
                        blocks.add_triplet(3 * i + a, 3 * i + b, m[(a, b)]);
                    }
                }
            }
        }
        let blocks: CsMat<f64> = blocks.to_csr();
        let half_form = |g: &CsMat<f64>| -> CsMat<f64> {
            let gt: CsMat<f64> = g.transpose_view().to_csr();
            let mg = &blocks * g;
            &gt * &mg
        };
        let stiffness = &half_form(&fwd) + &half_form(&bwd);
        Ok(Self { quad: Arc::new(quad), eps_normal, grad, stiffness, mass })
    }

    pub fn quadrature(&self) -> &TubeQuadrature {
        &self.quad
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn eps_normal(&self) -> f64 {
        self.eps_normal
    }

    pub fn stiffness(&self) -> &CsMat<f64> {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `10 √N`.
    pub fn max_iters(&self) -> usize {
        ((10.0 * (self.len() as f64).sqrt()).ceil() as usize).max(1)
    }

    /// `∫ u dμ`.
    pub fn integral(&self, u: &[f64]) -> f64 {
        dot(&self.mass, u)
    }

    pub fn area(&self) -> f64 {
        pairwise_sum(&self.mass)
    }

    /// Subtracts the surface mean.
    pub fn remove_mean(&self, u: &mut [f64]) {
        let c = self.integral(u) / self.area();
        u.par_iter_mut().for_each(|v| *v -= c);
    }

    /// `∫ u²`.
    pub fn l2_norm2(&self, u: &[f64]) -> f64 {
        let sq: Vec<f64> = u.iter().zip(&self.mass).map(|(v, m)| m * v * v).collect();
        pairwise_sum(&sq)
    }

    /// `uᵀ A u`, i.e. `∫ |P∇u|² + ε⟨∇u, ν⟩²`.
    pub fn stiffness_form(&self, u: &[f64]) -> f64 {
        dot(u, &spmv(&self.stiffness, u))
    }

    /// Grid gradients `∇u` at the nodes.
    pub fn grid_gradients(&self, u: &[f64]) -> Vec<Point> {
        let flat = spmv(&self.grad, u);
        flat.chunks(3).map(|c| Point::new(c[0], c[1], c[2])).collect()
    }

    /// Tangential gradients at the footpoints, `∇_Γv(x) = (I + tW) P ∇u(y)`.
    pub fn surface_gradients(&self, u: &[f64]) -> Vec<Point> {
        let id = ambient_identity(self.quad.dim);
        self.grid_gradients(u)
            .iter()
            .zip(&self.quad.nodes)
            .map(|(g, nd)| {
                let p: Mat = id - nd.nu * nd.nu.transpose();
                (id + nd.shape_op * nd.t) * (p * g)
            })
            .collect()
    }

    /// `½ uᵀ A u - ∫ f u`, the functional minimized by [`SurfaceOperator::solve`].
    pub fn discrete_energy(&self, u: &[f64], f: &[f64]) -> f64 {
        let load: Vec<f64> = (0..u.len()).map(|i| self.mass[i] * f[i] * u[i]).collect();
        0.5 * self.stiffness_form(u) - pairwise_sum(&load)
    }

    /// `A u - M g` for load values `g`.
    pub fn residual(&self, u: &[f64], f: &[f64]) -> Vec<f64> {
        let au = spmv(&self.stiffness, u);
        au.iter().enumerate().map(|(i, v)| v - self.mass[i] * f[i]).collect()
    }

    pub fn energy_report(&self, u: &[f64], f: &[f64], stats: SolveStats) -> EnergyReport {
        let grads = self.grid_gradients(u);
        let (tan, nor): (Vec<f64>, Vec<f64>) = grads
            .iter()
            .zip(&self.quad.nodes)
            .zip(&self.mass)
            .map(|((g, nd), m)| {
                let gn = g.dot(&nd.nu);
                let gt2 = (g.norm_squared() - gn * gn).max(0.0);
                (0.5 * m * gt2, 0.5 * self.eps_normal * m * gn * gn)
            })
            .unzip();
        let dirichlet = pairwise_sum(&tan);
        let load_terms: Vec<f64> = (0..u.len()).map(|i| self.mass[i] * f[i] * u[i]).collect();
        let load = pairwise_sum(&load_terms);
        EnergyReport {
            dirichlet,
            load,
            total: dirichlet - load,
            normal_penalty: pairwise_sum(&nor),
            cg_iters: stats.iterations,
            residual: stats.residual,
        }
    }

    /// Energy load `-f` sampled at the footpoints, with its surface mean removed.
    pub fn sample_load<F: Fn(&Point) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        let mut v: Vec<f64> = self.quad.nodes.par_iter().map(|nd| -f(&nd.x)).collect();
        self.remove_mean(&mut v);
        v
    }

    /// Zero-mean minimizer of the discrete energy for the load values `f`
    /// (already sampled at the nodes and mean-free).
    pub fn solve_values(&self, f: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let rhs: Vec<f64> = f.iter().zip(&self.mass).map(|(f, m)| f * m).collect();
        let defl = Deflation::new(vec![1.0; self.len()]);
        let (mut u, stats) = pcg(&self.stiffness, &rhs, Some(&defl), TOL_CG, self.max_iters())?;
        self.remove_mean(&mut u);
        Ok((u, stats))
    }

    /// Zero-mean solution of `Δ_Γ v = f - mean(f)`, i.e. the minimizer of the
    /// energy with load `-f`.
    pub fn solve<F: Fn(&Point) -> f64 + Sync>(&self, f: F) -> Result<(SurfaceField, EnergyReport)> {
        let load = self.sample_load(f);
        let (u, stats) = self.solve_values(&load)?;
        let report = self.energy_report(&u, &load, stats);
        Ok((SurfaceField { values: u, quad: self.quad.clone(), zero_mean: true }, report))
    }

    /// Smallest nonzero eigenvalue of `A u = λ M u` by inverse iteration.
    pub fn poincare_constant(&self) -> Result<f64> {
        let dir = Point::new(0.31, 0.57, 0.76);
        let mut u: Vec<f64> = self.quad.nodes.iter().map(|nd| nd.x.dot(&dir) + 0.1 * nd.x[0] * nd.x[1]).collect();
        self.remove_mean(&mut u);
        let mut lambda = f64::INFINITY;
        for it in 1..=POWER_MAX_ITER {
            let n2 = self.l2_norm2(&u).sqrt();
            if n2 == 0.0 {
                return Err(TubeError::NoConvergence { iterations: it, residual: f64::INFINITY });
            }
            u.iter_mut().for_each(|v| *v /= n2);
            let next = self.stiffness_form(&u) / self.l2_norm2(&u);
            if (next - lambda).abs() <= POWER_TOL * next.abs() {
                return Ok(next);
            }
            lambda = next;
            let (w, _) = self.solve_values(&u)?;
            u = w;
        }
        Err(TubeError::NoConvergence { iterations: POWER_MAX_ITER, residual: lambda })
    }
}

impl SurfaceField {
    /// CSV with node coordinates, offset, footpoint and value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.quad.dim;
        let axes = ["x", "y", "z"];
        let mut header: Vec<String> = (0..d).map(|a| format!("y_{}", axes[a])).collect();
        header.push("t".into());
        header.extend((0..d).map(|a| format!("x_{}", axes[a])));
        header.push("value".into());
        writeln!(out, "{}", header.join(","))?;
        for (nd, v) in self.quad.nodes.iter().zip(&self.values) {
            let mut row: Vec<String> = (0..d).map(|a| nd.y[a].to_string()).collect();
            row.push(nd.t.to_string());
            row.extend((0..d).map(|a| nd.x[a].to_string()));
            row.push(v.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Solves `Δ_Γ v = f - mean(f)` with zero mean on `∂Ω`.
pub fn solve_lb<F>(shape: &Shape, f: F, params: &TubeParams, eps_normal: f64) -> Result<(SurfaceOperator, SurfaceField, EnergyReport)>
where
    F: Fn(&Point) -> f64 + Sync,
{
    if eps_normal == 0.0 {
        return Err(TubeError::SingularWithoutRegularization);
    }
    let params = TubeParams { subcells: false, ..*params };
    let op = SurfaceOperator::new(build_tube_with(shape, &params)?, eps_normal)?;
    let (field, report) = op.solve(f)?;
    Ok((op, field, report))
}

/// Best discrete constant in `∫|∇_Γu|² ≥ C ∫u²` over zero-mean fields.
pub fn rayleigh_poincare(shape: &Shape, params: &TubeParams) -> Result<f64> {
    let params = TubeParams { subcells: false, ..*params };
    SurfaceOperator::new(build_tube_with(shape, &params)?, DEFAULT_EPS_NORMAL)?.poincare_constant()
}

/// `∫ j₂(x, ν, v, ∇_Γv) dμ` for a solved field.
pub fn eval_f2<J>(op: &SurfaceOperator, field: &SurfaceField, j2: J) -> f64
where
    J: Fn(&Point, &Point, f64, &Point) -> f64 + Sync,
{
    let grads = op.surface_gradients(&field.values);
    let quad = op.quadrature();
    let terms: Vec<f64> = quad
        .nodes
        .par_iter()
        .enumerate()
        .map(|(i, nd)| j2(&nd.x, &nd.nu, field.values[i], &grads[i]) * nd.weight())
        .collect();
    pairwise_sum(&terms) / (2.0 * quad.h)
}
