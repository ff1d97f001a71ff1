//! Sampled certification of the uniform ball condition and reach estimation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, TubeError};
use crate::geometry::Shape;
use crate::sampling::Halton;
use crate::Point;

/// Reach tolerance relative to the shape diameter.
pub const REACH_TOL_REL: f64 = 1e-6;
/// Number of surface samples offered as extra Newton starts.
const SEED_POOL: usize = 256;
const SEEDS_PER_QUERY: usize = 3;

pub fn default_samples(dim: usize) -> usize {
    if dim == 2 {
        512
    } else {
        4096
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachCertificate {
    #[serde(rename = "h")]
    pub h_tested: f64,
    pub passed: bool,
    pub worst_point: Point,
    pub worst_margin: f64,
    pub n_samples: usize,
}

/// Quasi-uniform boundary points with their outward normals.
#[derive(Debug, Clone)]
pub struct BoundarySamples {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    seed_pool: Vec<Point>,
}

impl BoundarySamples {
    /// Projects Halton points of the shape's default box onto `∂Ω`, skipping
    /// points on the medial axis, until `n` footpoints are collected.
    pub fn collect(shape: &Shape, n: usize, seed: u64) -> Result<Self> {
        let bx = shape.default_box();
        let mut halton = Halton::new(shape.dim(), seed);
        let mut points = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let tol_norm = 1e-6;
        let mut rounds = 0;
        while points.len() < n {
            rounds += 1;
            if rounds > 20 {
                return Err(TubeError::InvalidShape(format!(
                    "could only project {} of {n} boundary samples",
                    points.len()
                )));
            }
            let batch: Vec<Point> = (0..n - points.len()).map(|_| halton.next_in(&bx)).collect();
            let projected = batch
                .par_iter()
                .map(|y| -> Result<Option<(Point, Point)>> {
                    let s = match shape.eval(y) {
                        Ok(s) => s,
                        Err(TubeError::NonConvergedProjection { .. }) => return Ok(None),
                        Err(e) => return Err(e),
                    };
                    if !s.footpoint_valid {
                        return Ok(None);
                    }
                    let on = shape.eval(&s.footpoint)?;
                    let norm = on.grad.norm();
                    if (norm - 1.0).abs() > tol_norm {
                        return Err(TubeError::DegenerateNormal { norm });
                    }
                    Ok(Some((s.footpoint, on.grad)))
                })
                .collect::<Result<Vec<_>>>()?;
            for (p, g) in projected.into_iter().flatten() {
                points.push(p);
                normals.push(g);
            }
        }
        let stride = (points.len() / SEED_POOL).max(1);
        let seed_pool = points.iter().step_by(stride).copied().collect();
        Ok(Self { points, normals, seed_pool })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest pooled surface points to `y`, used as Newton starts.
    pub fn seeds_near(&self, y: &Point) -> Vec<Point> {
        let mut best: Vec<(f64, Point)> = Vec::with_capacity(SEEDS_PER_QUERY + 1);
        for p in &self.seed_pool {
            let d = (p - y).norm_squared();
            if best.len() < SEEDS_PER_QUERY || d < best[best.len() - 1].0 {
                let at = best.partition_point(|(e, _)| *e <= d);
                best.insert(at, (d, *p));
                best.truncate(SEEDS_PER_QUERY);
            }
        }
        best.into_iter().map(|(_, p)| p).collect()
    }
}

fn signed_distance(shape: &Shape, samples: &BoundarySamples, y: &Point) -> Result<f64> {
    if shape.has_closed_form() {
        shape.signed_distance(y)
    } else {
        Ok(shape.eval_seeded(y, &samples.seeds_near(y))?.b)
    }
}

/// Ball condition at tube half-width `h` over precomputed boundary samples.
pub fn check_samples(shape: &Shape, samples: &BoundarySamples, h: f64) -> Result<ReachCertificate> {
    if !(h.is_finite() && h > 0.0) {
        return Err(TubeError::InvalidInput(format!("tube half-width must be positive, got {h}")));
    }
    let tol = REACH_TOL_REL * shape.diameter();
    let margins = samples
        .points
        .par_iter()
        .zip(samples.normals.par_iter())
        .map(|(x, d)| -> Result<f64> {
            let inner = -signed_distance(shape, samples, &(x - d * h))? - h;
            let outer = signed_distance(shape, samples, &(x + d * h))? - h;
            Ok(inner.min(outer))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0;
    for (i, m) in margins.iter().enumerate() {
        if *m < margins[worst] {
            worst = i;
        }
    }
    let worst_margin = margins.get(worst).copied().unwrap_or(f64::INFINITY);
    Ok(ReachCertificate {
        h_tested: h,
        passed: worst_margin >= -tol,
        worst_point: samples.points.get(worst).copied().unwrap_or_else(Point::zeros),
        worst_margin,
        n_samples: samples.len(),
    })
}

/// Sampled check of the uniform ball condition at half-width `h`.
pub fn uniform_ball_check(shape: &Shape, h: f64, n_samples: usize) -> Result<ReachCertificate> {
    uniform_ball_check_seeded(shape, h, n_samples, 0)
}

pub fn uniform_ball_check_seeded(shape: &Shape, h: f64, n_samples: usize, seed: u64) -> Result<ReachCertificate> {
    if n_samples < 100 {
        return Err(TubeError::InvalidInput(format!("need at least 100 boundary samples, got {n_samples}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(TubeError::InvalidInput(format!("tube half-width must be positive, got {h}")));
    }
    let samples = BoundarySamples::collect(shape, n_samples, seed)?;
    check_samples(shape, &samples, h)
}

/// Largest sampled-passing `h` on `[tol_bisect, diam(D)]`, by bisection.
pub fn estimate_reach(shape: &Shape, tol_bisect: f64) -> Result<f64> {
    estimate_reach_with(shape, tol_bisect, default_samples(shape.dim()), 0)
}

pub fn estimate_reach_with(shape: &Shape, tol_bisect: f64, n_samples: usize, seed: u64) -> Result<f64> {
    if !(tol_bisect.is_finite() && tol_bisect > 0.0) {
        return Err(TubeError::InvalidInput(format!("bisection tolerance must be positive, got {tol_bisect}")));
    }
    if n_samples < 100 {
        return Err(TubeError::InvalidInput(format!("need at least 100 boundary samples, got {n_samples}")));
    }
    let samples = BoundarySamples::collect(shape, n_samples, seed)?;
    let mut lo = tol_bisect;
    let mut hi = shape.default_box().diameter();
    if !check_samples(shape, &samples, lo)?.passed {
        return Err(TubeError::InvalidShape(format!("uniform ball condition fails already at h = {lo}")));
    }
    if check_samples(shape, &samples, hi)?.passed {
        return Ok(hi);
    }
    while hi - lo > tol_bisect {
        let mid = 0.5 * (lo + hi);
        if check_samples(shape, &samples, mid)?.passed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
