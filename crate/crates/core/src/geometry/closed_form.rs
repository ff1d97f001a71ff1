//! Closed-form signed distances of the catalogue shapes.
//! All inputs are relative to the shape center; footpoints are returned
//! relative to the center as well.

use super::{ambient_identity, SdfSample};
use crate::{Mat, Point};

fn medial(b: f64, footpoint: Point, grad: Point) -> SdfSample {
    SdfSample { b, grad, hess: Mat::zeros(), footpoint, footpoint_valid: false }
}

fn fallback_normal(dim: usize) -> Point {
    if dim == 2 {
        Point::y()
    } else {
        Point::z()
    }
}

pub(super) fn ball(dim: usize, rel: &Point, radius: f64, tol: f64) -> SdfSample {
    let dist = rel.norm();
    if dist < tol {
        let n = fallback_normal(dim);
        return medial(-radius, n * radius, n);
    }
    let n = rel / dist;
    let hess = (ambient_identity(dim) - n * n.transpose()) / dist;
    SdfSample { b: dist - radius, grad: n, hess, footpoint: n * radius, footpoint_valid: true }
}

pub(super) fn torus(rel: &Point, major: f64, minor: f64, tol: f64) -> SdfSample {
    let rho = rel.xy().norm();
    if rho < tol {
        // every point of the core circle is equidistant
        let s = (major * major + rel.z * rel.z).sqrt();
        let q = Point::new(-major, 0.0, rel.z) / s;
        return medial(s - minor, Point::new(major, 0.0, 0.0) + q * minor, q);
    }
    let e_rho = Point::new(rel.x / rho, rel.y / rho, 0.0);
    let e_phi = Point::new(-rel.y / rho, rel.x / rho, 0.0);
    let q = e_rho * (rho - major) + Point::z() * rel.z;
    let s = q.norm();
    let core = e_rho * major;
    if s < tol {
        return medial(-minor, core + Point::z() * minor, Point::z());
    }
    let n = q / s;
    let along_phi = e_phi * e_phi.transpose();
    let hess = (Mat::identity() - n * n.transpose() - along_phi) / s + along_phi * (n.dot(&e_rho) / rho);
    SdfSample { b: s - minor, grad: n, hess, footpoint: core + n * minor, footpoint_valid: true }
}

pub(super) fn capsule(dim: usize, rel: &Point, half_length: f64, radius: f64, tol: f64) -> SdfSample {
    let t = rel.x.clamp(-half_length, half_length);
    let on_axis = Point::new(t, 0.0, 0.0);
    let q = rel - on_axis;
    let s = q.norm();
    if s < tol {
        let n = fallback_normal(dim);
        return medial(-radius, on_axis + n * radius, n);
    }
    let n = q / s;
    let mut tangential = ambient_identity(dim) - n * n.transpose();
    if rel.x.abs() < half_length {
        tangential -= Point::x() * Point::x().transpose();
    }
    SdfSample { b: s - radius, grad: n, hess: tangential / s, footpoint: on_axis + n * radius, footpoint_valid: true }
}

pub(super) fn union_of_balls(dim: usize, rel: &Point, balls: &[(Point, f64)], tol: f64) -> SdfSample {
    let mut best = (f64::INFINITY, 0usize);
    let mut second = f64::INFINITY;
    for (i, (c, r)) in balls.iter().enumerate() {
        let d = (rel - c).norm() - r;
        if d < best.0 {
            second = best.0;
            best = (d, i);
        } else if d < second {
            second = d;
        }
    }
    let (c, r) = balls[best.1];
    let mut s = ball(dim, &(rel - c), r, tol);
    s.footpoint += c;
    if best.0 > 0.0 && second - best.0 < 10.0 * tol {
        s.footpoint_valid = false;
    }
    s
}
