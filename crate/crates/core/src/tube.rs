//! Tubular-neighborhood quadrature, extrusion Jacobians and curvatures.
//!
//! A surface integral is evaluated as a volume integral over the tube
//! `U_h = {|b| < h}`: with `y = x + t ν(x)` and `J(t, x) = ∏(1 + t κ_i(x))`,
//!
//! ```text
//! ∫_∂Ω f dμ = (1/2h) ∫_{U_h} f(p(y)) / J(b(y), p(y)) dy
//! ```
//!
//! exactly for every `h` below the reach.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TubeError};
use crate::geometry::grid::{band_samples, Lattice, SCAN_BUDGET};
use crate::geometry::{ambient_identity, SdfSample, Shape, ShapeSpec};
use crate::linalg::pairwise_sum;
use crate::{Mat, Point};

/// Quadrature parameters: tube half-width and grid spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeParams {
    pub h: f64,
    pub spacing: f64,
    /// Split cells straddling `|b| = h` into `2^d` subcells.
    #[serde(default)]
    pub subcells: bool,
}

impl TubeParams {
    pub fn new(h: f64, spacing: f64) -> Self {
        Self { h, spacing, subcells: false }
    }

    /// `h = reach / 4`, `spacing = h / 5`.
    pub fn from_reach(reach: f64) -> Self {
        let h = 0.25 * reach;
        Self::new(h, h / 5.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeNode {
    /// Cell center.
    pub y: Point,
    /// Offset `b(y)`.
    pub t: f64,
    /// Footpoint `p(y)`.
    pub x: Point,
    pub nu: Point,
    /// Principal curvatures at the footpoint; only the first `d - 1` are used.
    pub kappas: [f64; 2],
    /// `∇²b` at the footpoint.
    pub shape_op: Mat,
    pub jac: f64,
    pub cell_volume: f64,
    /// Index in the quadrature lattice, `None` for subcells.
    pub lattice_index: Option<usize>,
}

impl TubeNode {
    pub fn mean_curvature(&self) -> f64 {
        self.kappas[0] + self.kappas[1]
    }

    /// Quadrature weight `V / J`.
    pub fn weight(&self) -> f64 {
        self.cell_volume / self.jac
    }
}

#[derive(Debug, Clone)]
pub struct TubeQuadrature {
    pub nodes: Vec<TubeNode>,
    pub h: f64,
    pub spacing: f64,
    pub shape: ShapeSpec,
    pub dim: usize,
    pub lattice: Lattice,
}

impl TubeQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(1/2h) Σ w` over the tube, i.e. the surface measure.
    pub fn total_measure(&self) -> f64 {
        surface_integral(self, |_| 1.0)
    }

    /// Debug dump with columns y, t, x, kappas, J, cell_volume.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.dim;
        let axes = ["x", "y", "z"];
        let mut header: Vec<String> = (0..d).map(|a| format!("y_{}", axes[a])).collect();
        header.push("t".into());
        header.extend((0..d).map(|a| format!("x_{}", axes[a])));
        header.extend((1..d).map(|i| format!("kappa_{i}")));
        header.push("J".into());
        header.push("cell_volume".into());
        writeln!(out, "{}", header.join(","))?;
        for n in &self.nodes {
            let mut row: Vec<String> = (0..d).map(|a| n.y[a].to_string()).collect();
            row.push(n.t.to_string());
            row.extend((0..d).map(|a| n.x[a].to_string()));
            row.extend(n.kappas[..d - 1].iter().map(|k| k.to_string()));
            row.push(n.jac.to_string());
            row.push(n.cell_volume.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `∏ (1 + t κ_i)`.
pub fn jacobian_factor(t: f64, kappas: &[f64]) -> Result<f64> {
    let mut j = 1.0;
    for k in kappas {
        let f = 1.0 + t * k;
        if f <= 0.0 {
            return Err(TubeError::DegenerateExtrusion { factor: f });
        }
        j *= f;
    }
    Ok(j)
}

/// Tangential eigenvalues of a Hessian of `b`: the eigenvalue of least modulus
/// belongs to the normal direction and is dropped.
pub fn principal_curvatures(hess: &Mat, dim: usize) -> Result<[f64; 2]> {
    let mut eig: Vec<f64> = if dim == 2 {
        hess.fixed_view::<2, 2>(0, 0).into_owned().symmetric_eigen().eigenvalues.iter().copied().collect()
    } else {
        hess.symmetric_eigen().eigenvalues.iter().copied().collect()
    };
    eig.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    if eig[1].abs() > 0.0 && eig[0].abs() >= 0.1 * eig[1].abs() {
        return Err(TubeError::AmbiguousNormalEigenvalue { eigenvalues: eig });
    }
    let mut k = [0.0; 2];
    let mut tangential = eig[1..].to_vec();
    tangential.sort_by(|a, b| b.total_cmp(a));
    for (slot, v) in k.iter_mut().zip(tangential) {
        *slot = v;
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub x: Point,
    /// Mean curvature as the undivided trace `Σ κ_i`.
    pub mean: f64,
    /// Gauss curvature `∏ κ_i` (the curvature itself in 2D).
    pub gauss: f64,
    pub kappas: Vec<f64>,
}

fn curvature_sample(x: Point, kappas: [f64; 2], dim: usize) -> CurvatureSample {
    let k = kappas[..dim - 1].to_vec();
    CurvatureSample { x, mean: k.iter().sum(), gauss: k.iter().product(), kappas: k }
}

/// Principal, mean and Gauss curvature at a surface point.
pub fn curvature_at(shape: &Shape, x: &Point) -> Result<CurvatureSample> {
    let s = shape.eval(x)?;
    if s.b.abs() >= shape.tol_surface().max(1e-12) {
        return Err(TubeError::InvalidInput(format!("point is off the surface by {}", s.b)));
    }
    let k = principal_curvatures(&s.hess, shape.dim())?;
    Ok(curvature_sample(*x, k, shape.dim()))
}

/// `∇²b(p(y)) = ∇²b(y) [I - b(y) ∇²b(y)]⁻¹`.
pub fn transport_hessian(sample: &SdfSample, dim: usize) -> Result<Mat> {
    let m = ambient_identity(dim) - sample.hess * sample.b;
    let mut full = m;
    if dim == 2 {
        full[(2, 2)] = 1.0;
    }
    let det = full.determinant();
    if det.abs() < 1e-12 {
        return Err(TubeError::DegenerateExtrusion { factor: det });
    }
    let inv = full.try_inverse().ok_or(TubeError::DegenerateExtrusion { factor: det })?;
    let out = sample.hess * inv;
    Ok((out + out.transpose()) * 0.5)
}

/// Hessian of `b` at the footpoint of `y`, from the Hessian at `y`.
pub fn hessian_at_footpoint(shape: &Shape, y: &Point) -> Result<Mat> {
    transport_hessian(&shape.eval(y)?, shape.dim())
}

fn make_node(sample: &SdfSample, y: Point, dim: usize, h: f64, volume: f64, index: Option<usize>) -> Result<TubeNode> {
    if !sample.footpoint_valid {
        return Err(TubeError::TubeOverlapsMedialAxis { point: [y[0], y[1], y[2]] });
    }
    let shape_op = transport_hessian(sample, dim)?;
    let kappas = principal_curvatures(&shape_op, dim)?;
    let jac = jacobian_factor(sample.b, &kappas[..dim - 1])?;
    // the whole normal segment (-h, h) must stay below the focal distance
    jacobian_factor(h, &kappas[..dim - 1])?;
    jacobian_factor(-h, &kappas[..dim - 1])?;
    Ok(TubeNode {
        y,
        t: sample.b,
        x: sample.footpoint,
        nu: sample.grad,
        kappas,
        shape_op,
        jac,
        cell_volume: volume,
        lattice_index: index,
    })
}

/// Quadrature nodes at all cell centers with `|b| < h`.
pub fn build_tube(shape: &Shape, h: f64, spacing: f64) -> Result<TubeQuadrature> {
    build_tube_with(shape, &TubeParams::new(h, spacing))
}

pub fn build_tube_with(shape: &Shape, params: &TubeParams) -> Result<TubeQuadrature> {
    let TubeParams { h, spacing, subcells } = *params;
    if !(h.is_finite() && h > 0.0) {
        return Err(TubeError::InvalidInput(format!("tube half-width must be positive, got {h}")));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(TubeError::InvalidInput(format!("grid spacing must be positive, got {spacing}")));
    }
    if spacing >= 0.5 * h {
        return Err(TubeError::SpacingTooCoarse { spacing, h });
    }
    let dim = shape.dim();
    let bx = shape.bounding_box().padded(h + 2.0 * spacing, dim);
    let lattice = Lattice::cells(&bx, spacing, dim, SCAN_BUDGET)?;
    let volume = lattice.cell_volume();
    let half_diag = 0.5 * spacing * (dim as f64).sqrt();
    let reach = if subcells { h + half_diag } else { h };
    let band = band_samples(shape, &lattice, -reach, reach)?;
    if let Some((idx, _)) = band.iter().find(|(_, s)| !s.footpoint_valid && s.b.abs() < h) {
        let y = lattice.position_flat(*idx);
        return Err(TubeError::TubeOverlapsMedialAxis { point: [y[0], y[1], y[2]] });
    }

    let per_cell = band
        .par_iter()
        .map(|(idx, s)| -> Result<Vec<TubeNode>> {
            let straddles = (s.b.abs() - h).abs() < half_diag;
            if !subcells || !straddles {
                if s.b.abs() < h {
                    return Ok(vec![make_node(s, lattice.position_flat(*idx), dim, h, volume, Some(*idx))?]);
                }
                return Ok(Vec::new());
            }
            let mut out = Vec::new();
            let q = 0.25 * spacing;
            let center = lattice.position_flat(*idx);
            for corner in 0..(1usize << dim) {
                let mut off = Point::zeros();
                for a in 0..dim {
                    off[a] = if corner >> a & 1 == 1 { q } else { -q };
                }
                let y = center + off;
                let sub = shape.eval(&y)?;
                if sub.b.abs() < h {
                    out.push(make_node(&sub, y, dim, h, volume / (1 << dim) as f64, None)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let nodes: Vec<TubeNode> = per_cell.into_iter().flatten().collect();
    Ok(TubeQuadrature { nodes, h, spacing, shape: shape.spec().clone(), dim, lattice })
}

/// `(1/2h) Σ f(node) V / J`.
pub fn surface_integral<F>(quad: &TubeQuadrature, f: F) -> f64
where
    F: Fn(&TubeNode) -> f64 + Sync,
{
    let terms: Vec<f64> = quad.nodes.par_iter().map(|n| f(n) * n.weight()).collect();
    pairwise_sum(&terms) / (2.0 * quad.h)
}

/// Like [`surface_integral`] for fallible integrands.
pub fn try_surface_integral<F>(quad: &TubeQuadrature, f: F) -> Result<f64>
where
    F: Fn(&TubeNode) -> Result<f64> + Sync,
{
    let terms = quad
        .nodes
        .par_iter()
        .map(|n| Ok(f(n)? * n.weight()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms) / (2.0 * quad.h))
}
