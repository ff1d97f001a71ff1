//! Geometric shape functionals: integrals of `j(x, ν, H)` over the boundary,
//! perimeter and volume.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Result, TubeError};
use crate::fields::ScalarField;
use crate::geometry::grid::{band_samples, inside_mask, Lattice, SCAN_BUDGET};
use crate::geometry::Shape;
use crate::tube::{build_tube_with, surface_integral, TubeParams, TubeQuadrature};
use crate::Point;

type Tabulated = Arc<dyn Fn(&Point, &Point, f64) -> f64 + Send + Sync>;

/// Surface integrand `j(x, ν, H)`; `H` is the undivided mean curvature.
#[derive(Clone)]
pub enum Integrand {
    ConstantOne,
    MeanCurvature,
    /// `H²`.
    Willmore,
    /// `⟨ν, e⟩` for a fixed unit `e`.
    NormalMoment { direction: Point },
    /// `g(x) · H`.
    PositionWeighted { weight: ScalarField },
    /// Values supplied by a callback at each footpoint.
    Tabulated { f: Tabulated, convex_in_h: bool },
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrand::Tabulated { convex_in_h, .. } => write!(f, "Tabulated {{ convex_in_h: {convex_in_h} }}"),
            other => write!(f, "{}", other.name()),
        }
    }
}

impl Integrand {
    /// Catalogue entry by its command-line name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "area" => Integrand::ConstantOne,
            "mean-curvature" => Integrand::MeanCurvature,
            "willmore" => Integrand::Willmore,
            "normal-moment" => Integrand::NormalMoment { direction: Point::z() },
            "weighted-curvature" => Integrand::PositionWeighted { weight: ScalarField::RadiusSquared },
            other => {
                return Err(TubeError::InvalidInput(format!(
                    "unknown integrand '{other}' (expected area, mean-curvature, willmore, normal-moment or weighted-curvature)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Integrand::ConstantOne => "area",
            Integrand::MeanCurvature => "mean-curvature",
            Integrand::Willmore => "willmore",
            Integrand::NormalMoment { .. } => "normal-moment",
            Integrand::PositionWeighted { .. } => "weighted-curvature",
            Integrand::Tabulated { .. } => "tabulated",
        }
    }

    pub fn tabulated<F>(f: F, convex_in_h: bool) -> Self
    where
        F: Fn(&Point, &Point, f64) -> f64 + Send + Sync + 'static,
    {
        Integrand::Tabulated { f: Arc::new(f), convex_in_h }
    }

    /// Whether `j` is convex in its curvature argument.
    pub fn convex_in_h(&self) -> bool {
        match self {
            Integrand::ConstantOne | Integrand::MeanCurvature | Integrand::Willmore | Integrand::NormalMoment { .. } => true,
            Integrand::PositionWeighted { .. } => true,
            Integrand::Tabulated { convex_in_h, .. } => *convex_in_h,
        }
    }

    pub fn eval(&self, x: &Point, nu: &Point, mean: f64) -> f64 {
        match self {
            Integrand::ConstantOne => 1.0,
            Integrand::MeanCurvature => mean,
            Integrand::Willmore => mean * mean,
            Integrand::NormalMoment { direction } => nu.dot(direction),
            Integrand::PositionWeighted { weight } => weight.eval(x) * mean,
            Integrand::Tabulated { f, .. } => f(x, nu, mean),
        }
    }
}

/// `∫_∂Ω j(x, ν(x), H(x)) dμ` on an existing quadrature.
pub fn eval_f1_on(quad: &TubeQuadrature, j: &Integrand) -> f64 {
    surface_integral(quad, |n| j.eval(&n.x, &n.nu, n.mean_curvature()))
}

pub fn eval_f1(shape: &Shape, j: &Integrand, params: &TubeParams) -> Result<f64> {
    Ok(eval_f1_on(&build_tube_with(shape, params)?, j))
}

pub fn perimeter(shape: &Shape, params: &TubeParams) -> Result<f64> {
    eval_f1(shape, &Integrand::ConstantOne, params)
}

/// Cell-count volume of `{b < 0}`.
pub fn volume(shape: &Shape, spacing: f64) -> Result<f64> {
    volume_with(shape, spacing, false)
}

/// Cell-count volume; with `subcells`, cells within half a diagonal of the
/// boundary are split into `2^d` subcells.
pub fn volume_with(shape: &Shape, spacing: f64, subcells: bool) -> Result<f64> {
    let dim = shape.dim();
    let bx = shape.bounding_box().padded(2.0 * spacing, dim);
    let lat = Lattice::cells(&bx, spacing, dim, SCAN_BUDGET)?;
    let inside = inside_mask(shape, &lat)?.iter().filter(|m| **m).count();
    let cell = lat.cell_volume();
    if !subcells {
        return Ok(inside as f64 * cell);
    }
    let hd = 0.5 * spacing * (dim as f64).sqrt();
    let band = band_samples(shape, &lat, -hd, hd)?;
    let corrections = band
        .par_iter()
        .map(|(idx, s)| -> Result<f64> {
            let center = lat.position_flat(*idx);
            let q = 0.25 * spacing;
            let mut count = 0usize;
            for corner in 0..(1usize << dim) {
                let mut off = Point::zeros();
                for a in 0..dim {
                    off[a] = if corner >> a & 1 == 1 { q } else { -q };
                }
                if shape.signed_distance(&(center + off))? < 0.0 {
                    count += 1;
                }
            }
            let whole = if s.b < 0.0 { 1.0 } else { 0.0 };
            Ok(count as f64 / (1 << dim) as f64 - whole)
        })
        .collect::<Result<Vec<_>>>()?;
    let delta = crate::linalg::pairwise_sum(&corrections);
    Ok((inside as f64 + delta) * cell)
}
