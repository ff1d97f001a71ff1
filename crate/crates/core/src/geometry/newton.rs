//! Footpoint projection onto implicit surfaces `{φ = 0}` by damped Newton on
//! the optimality system `p - y + λ∇φ(p) = 0, φ(p) = 0`.

use nalgebra::{Matrix4, Vector4};

use super::harmonics::HarmonicRadius;
use super::{ambient_identity, SdfSample, NEWTON_MAX_ITER};
use crate::error::{Result, TubeError};
use crate::{Mat, Point};

pub(super) trait ImplicitFn {
    /// `(φ, ∇φ, ∇²φ)` at a center-relative point.
    fn eval(&self, rel: &Point) -> (f64, Point, Mat);
    /// A point of `{φ = 0}` on the ray from the center through `rel`.
    fn radial_projection(&self, rel: &Point) -> Point;
    /// Further starting points specific to the surface.
    fn extra_inits(&self, _rel: &Point) -> Vec<Point> {
        Vec::new()
    }
}

pub(super) struct EllipsoidFn {
    pub axes: Point,
    pub dim: usize,
}

impl ImplicitFn for EllipsoidFn {
    fn eval(&self, rel: &Point) -> (f64, Point, Mat) {
        let mut phi = -1.0;
        let mut g = Point::zeros();
        let mut h = Mat::zeros();
        for i in 0..self.dim {
            let a2 = self.axes[i] * self.axes[i];
            phi += rel[i] * rel[i] / a2;
            g[i] = 2.0 * rel[i] / a2;
            h[(i, i)] = 2.0 / a2;
        }
        (phi, g, h)
    }

    fn radial_projection(&self, rel: &Point) -> Point {
        let s: f64 = (0..self.dim).map(|i| (rel[i] / self.axes[i]).powi(2)).sum::<f64>().sqrt();
        if s < 1e-300 {
            let mut p = Point::zeros();
            p[self.dim - 1] = self.axes[self.dim - 1];
            return p;
        }
        rel / s
    }

    /// Critical point from the largest root of
    /// `Σ (aᵢ yᵢ / (t + aᵢ²))² = 1`, found by bisection. Away from the focal
    /// set this is the closest point.
    fn extra_inits(&self, rel: &Point) -> Vec<Point> {
        let active: Vec<usize> = (0..self.dim).filter(|&i| rel[i] != 0.0).collect();
        if active.is_empty() {
            return Vec::new();
        }
        let f = |t: f64| {
            active.iter().map(|&i| (self.axes[i] * rel[i] / (t + self.axes[i] * self.axes[i])).powi(2)).sum::<f64>() - 1.0
        };
        let amax = (0..self.dim).map(|i| self.axes[i]).fold(0.0, f64::max);
        let mut lo = -active.iter().map(|&i| self.axes[i] * self.axes[i]).fold(f64::INFINITY, f64::min);
        let mut hi = amax * rel.norm();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let mut p = Point::zeros();
        for &i in &active {
            let a2 = self.axes[i] * self.axes[i];
            p[i] = a2 * rel[i] / (t + a2);
        }
        vec![p]
    }
}

pub(super) struct HarmonicFn<'a> {
    pub radius: &'a HarmonicRadius,
    pub dim: usize,
}

impl HarmonicFn<'_> {
    fn direction(&self, rel: &Point) -> Point {
        let n = rel.norm();
        if n < 1e-300 {
            if self.dim == 2 {
                Point::y()
            } else {
                Point::z()
            }
        } else {
            rel / n
        }
    }
}

impl ImplicitFn for HarmonicFn<'_> {
    fn eval(&self, rel: &Point) -> (f64, Point, Mat) {
        let r = rel.norm();
        let x = if r < 1e-300 { self.direction(rel) * 1e-300 } else { *rel };
        let r = x.norm();
        let u = x / r;
        let (rad, rg, rh) = self.radius.eval(&x);
        let phi = r - rad;
        let g = u - rg;
        let h = (ambient_identity(self.dim) - u * u.transpose()) / r - rh;
        (phi, g, h)
    }

    fn radial_projection(&self, rel: &Point) -> Point {
        let u = self.direction(rel);
        u * self.radius.eval(&u).0
    }
}

fn merit(y: &Point, p: &Point, lambda: f64, phi: f64, g: &Point) -> f64 {
    let r1 = p - y + g * lambda;
    r1.norm_squared() + (phi / g.norm()).powi(2)
}

/// Newton solve of the footpoint system from `init`. Returns `None` when the
/// iteration stalls or hits the iteration cap.
fn newton_footpoint<F: ImplicitFn>(f: &F, y: &Point, init: Point, tol: f64) -> Option<Point> {
    let mut p = init;
    let (mut phi, mut g, mut h) = f.eval(&p);
    let g2 = g.norm_squared();
    if g2 == 0.0 {
        return None;
    }
    let mut lambda = (y - p).dot(&g) / g2;
    for _ in 0..NEWTON_MAX_ITER {
        let gn = g.norm();
        if gn == 0.0 || !gn.is_finite() {
            return None;
        }
        let r1 = p - y + g * lambda;
        if r1.norm() < tol && (phi / gn).abs() < tol {
            return Some(p);
        }
        let mut jac = Matrix4::zeros();
        let top = Mat::identity() + h * lambda;
        for i in 0..3 {
            for j in 0..3 {
                jac[(i, j)] = top[(i, j)];
            }
            jac[(i, 3)] = g[i];
            jac[(3, i)] = g[i];
        }
        let rhs = -Vector4::new(r1[0], r1[1], r1[2], phi);
        let step = jac.lu().solve(&rhs)?;
        let dp = Point::new(step[0], step[1], step[2]);
        let m0 = merit(y, &p, lambda, phi, &g);
        let mut alpha = 1.0;
        loop {
            let cand = p + dp * alpha;
            let cand_lambda = lambda + step[3] * alpha;
            let (cphi, cg, ch) = f.eval(&cand);
            let m1 = merit(y, &cand, cand_lambda, cphi, &cg);
            if m1 < (1.0 - 1e-4 * alpha) * m0 || alpha < 1.0 / 1024.0 {
                p = cand;
                lambda = cand_lambda;
                phi = cphi;
                g = cg;
                h = ch;
                break;
            }
            alpha *= 0.5;
        }
    }
    None
}

/// Signed distance sample of an implicit shape at a center-relative point.
///
/// Newton runs from the radial projection of `rel`, from the radial
/// projection of a shifted copy of `rel`, and from every extra seed. The
/// closest converged footpoint wins; a second footpoint at the same distance
/// but elsewhere marks the point as medial.
pub(super) fn implicit_sdf<F: ImplicitFn>(
    f: &F,
    dim: usize,
    rel: &Point,
    seeds: &[Point],
    center: Point,
    tol: f64,
    diameter: f64,
) -> Result<SdfSample> {
    let mut shift = Point::new(0.48, 0.36, 0.8);
    if dim == 2 {
        shift[2] = 0.0;
    }
    let shift = shift.normalize() * (0.05 * diameter);
    let mut inits = vec![f.radial_projection(rel), f.radial_projection(&(rel + shift))];
    inits.extend(f.extra_inits(rel));
    inits.extend(seeds.iter().map(|s| s - center));

    let mut found: Vec<(f64, Point)> = Vec::with_capacity(inits.len());
    for init in inits {
        if let Some(p) = newton_footpoint(f, rel, init, tol) {
            found.push(((rel - p).norm(), p));
        }
    }
    let Some(&(dist, p)) = found.iter().min_by(|a, b| a.0.total_cmp(&b.0)) else {
        return Err(TubeError::NonConvergedProjection {
            iterations: NEWTON_MAX_ITER,
            point: [rel[0] + center[0], rel[1] + center[1], rel[2] + center[2]],
        });
    };
    let competing = found
        .iter()
        .any(|(d, q)| (q - p).norm() > 10.0 * tol && (d - dist).abs() <= 1e-6 * diameter);

    let (phi_y, _, _) = f.eval(rel);
    let b = if phi_y < 0.0 { -dist } else { dist };
    let (_, g, h) = f.eval(&p);
    let gn = g.norm();
    let n = g / gn;
    let proj = ambient_identity(dim) - n * n.transpose();
    let shape_op = proj * h * proj / gn;
    let offset = Mat::identity() + shape_op * b;
    let (hess, regular) = match offset.try_inverse() {
        Some(inv) => {
            let m = shape_op * inv;
            ((m + m.transpose()) * 0.5, true)
        }
        None => (shape_op, false),
    };
    Ok(SdfSample { b, grad: n, hess, footpoint: p, footpoint_valid: regular && !competing })
}
