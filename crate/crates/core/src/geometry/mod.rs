//! Signed distance functions of the shape catalogue.
//!
//! Every shape is a compact set `Ω` with `b < 0` inside, so `∇b` is the outward
//! unit normal on the boundary. Balls, tori, capsules and disjoint unions of
//! balls have closed forms; ellipsoids and harmonic spheres are resolved by a
//! damped Newton solve of the footpoint optimality system.

mod closed_form;
pub mod grid;
pub mod harmonics;
mod newton;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TubeError};
use crate::{Mat, Point};
use harmonics::HarmonicRadius;

/// Footpoint solver iteration cap.
pub const NEWTON_MAX_ITER: usize = 50;
/// Relative tolerance of the footpoint solve, scaled by the shape diameter.
pub const SURFACE_TOL_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Ball,
    Ellipsoid,
    Torus,
    Capsule,
    UnionOfBalls,
    HarmonicSphere,
}

/// Declarative description of an admissible shape, as read from shape JSON files.
///
/// `params` by kind (all lengths in world units, relative to `center`):
/// - `ball`: `[r]`
/// - `ellipsoid`: semi-axes `[a, b, c]` (or `[a, b]` in 2D)
/// - `torus`: `[R, r]` (3D only, axis `z`)
/// - `capsule`: `[half_length, radius]`, segment along `x`
/// - `union_of_balls`: repeated `[r, cx, cy(, cz)]` with offsets from `center`
/// - `harmonic_sphere`: `[r0, c_0, c_1, ...]` coefficients of real spherical
///   harmonics of degree <= 4 indexed `l*l + l + m` (Fourier modes
///   `1, cos θ, sin θ, cos 2θ, ...` in 2D)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub params: Vec<f64>,
    pub center: Vec<f64>,
    pub dim: usize,
}

impl ShapeSpec {
    pub fn ball(dim: usize, radius: f64) -> Self {
        Self { kind: ShapeKind::Ball, params: vec![radius], center: vec![0.0; dim], dim }
    }

    pub fn ellipsoid(axes: &[f64]) -> Self {
        Self { kind: ShapeKind::Ellipsoid, params: axes.to_vec(), center: vec![0.0; axes.len()], dim: axes.len() }
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        Self { kind: ShapeKind::Torus, params: vec![major, minor], center: vec![0.0; 3], dim: 3 }
    }

    pub fn capsule(dim: usize, half_length: f64, radius: f64) -> Self {
        Self { kind: ShapeKind::Capsule, params: vec![half_length, radius], center: vec![0.0; dim], dim }
    }

    /// Union of balls given as `(radius, center)` pairs.
    pub fn union_of_balls(dim: usize, balls: &[(f64, Vec<f64>)]) -> Self {
        let mut params = Vec::new();
        for (r, c) in balls {
            params.push(*r);
            params.extend_from_slice(c);
        }
        Self { kind: ShapeKind::UnionOfBalls, params, center: vec![0.0; dim], dim }
    }

    pub fn harmonic_sphere(dim: usize, base: f64, coefficients: &[f64]) -> Self {
        let mut params = vec![base];
        params.extend_from_slice(coefficients);
        Self { kind: ShapeKind::HarmonicSphere, params, center: vec![0.0; dim], dim }
    }

    pub fn with_center(mut self, center: &[f64]) -> Self {
        self.center = center.to_vec();
        self
    }

    /// Homothety of ratio `lambda` about the origin.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            kind: self.kind,
            params: self.params.iter().map(|p| p * lambda).collect(),
            center: self.center.iter().map(|c| c * lambda).collect(),
            dim: self.dim,
        }
    }
}

/// Signed distance with its first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfSample {
    pub b: f64,
    pub grad: Point,
    pub hess: Mat,
    pub footpoint: Point,
    /// False when the point sits on (or numerically at) the medial axis.
    pub footpoint_valid: bool,
}

/// Axis-aligned container `D` of admissible shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbientBox {
    pub lo: Point,
    pub hi: Point,
}

impl AmbientBox {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if (0..3).any(|i| !(lo[i] <= hi[i])) {
            return Err(TubeError::InvalidInput(format!("box corners not ordered: {lo:?} {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(dim: usize, half: f64) -> Self {
        let z = if dim == 3 { half } else { 0.0 };
        Self { lo: Point::new(-half, -half, -z), hi: Point::new(half, half, z) }
    }

    pub fn padded(&self, margin: f64, dim: usize) -> Self {
        let mut m = Point::repeat(margin);
        if dim == 2 {
            m[2] = 0.0;
        }
        Self { lo: self.lo - m, hi: self.hi + m }
    }

    pub fn union(&self, other: &AmbientBox) -> Self {
        Self { lo: self.lo.inf(&other.lo), hi: self.hi.sup(&other.hi) }
    }

    pub fn diameter(&self) -> f64 {
        (self.hi - self.lo).norm()
    }

    pub fn volume(&self, dim: usize) -> f64 {
        let e = self.hi - self.lo;
        (0..dim).map(|i| e[i]).product()
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

#[derive(Debug, Clone)]
enum Geometry {
    Ball { radius: f64 },
    Ellipsoid { axes: Point },
    Torus { major: f64, minor: f64 },
    Capsule { half_length: f64, radius: f64 },
    Union { balls: Vec<(Point, f64)> },
    Harmonic(HarmonicRadius),
}

/// A validated shape ready for evaluation.
#[derive(Debug, Clone)]
pub struct Shape {
    spec: ShapeSpec,
    dim: usize,
    center: Point,
    geometry: Geometry,
    bbox: AmbientBox,
}

/// Identity on the active coordinates (`diag(1, 1, 0)` in 2D).
pub fn ambient_identity(dim: usize) -> Mat {
    let mut m = Mat::identity();
    if dim == 2 {
        m[(2, 2)] = 0.0;
    }
    m
}

pub(crate) fn embed(dim: usize, x: &Point) -> Point {
    if dim == 2 {
        Point::new(x[0], x[1], 0.0)
    } else {
        *x
    }
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(TubeError::InvalidShape(format!("{what} must be positive and finite, got {v}")))
    }
}

impl Shape {
    pub fn new(spec: &ShapeSpec) -> Result<Self> {
        let dim = spec.dim;
        if dim != 2 && dim != 3 {
            return Err(TubeError::InvalidShape(format!("dim must be 2 or 3, got {dim}")));
        }
        if spec.center.len() != dim || spec.center.iter().any(|c| !c.is_finite()) {
            return Err(TubeError::InvalidShape(format!("center must have {dim} finite entries")));
        }
        let mut center = Point::zeros();
        for i in 0..dim {
            center[i] = spec.center[i];
        }
        let p = &spec.params;
        let need = |n: usize| -> Result<()> {
            if p.len() == n {
                Ok(())
            } else {
                Err(TubeError::InvalidShape(format!("{:?} expects {n} params, got {}", spec.kind, p.len())))
            }
        };
        let (geometry, half_extent) = match spec.kind {
            ShapeKind::Ball => {
                need(1)?;
                let r = positive(p[0], "radius")?;
                (Geometry::Ball { radius: r }, Point::repeat(r))
            }
            ShapeKind::Ellipsoid => {
                need(dim)?;
                let mut axes = Point::repeat(1.0);
                for i in 0..dim {
                    axes[i] = positive(p[i], "semi-axis")?;
                }
                (Geometry::Ellipsoid { axes }, axes)
            }
            ShapeKind::Torus => {
                if dim != 3 {
                    return Err(TubeError::InvalidShape("torus is only defined in 3D".into()));
                }
                need(2)?;
                let major = positive(p[0], "major radius")?;
                let minor = positive(p[1], "minor radius")?;
                if minor >= major {
                    return Err(TubeError::InvalidShape("torus needs minor < major radius".into()));
                }
                let e = major + minor;
                (Geometry::Torus { major, minor }, Point::new(e, e, minor))
            }
            ShapeKind::Capsule => {
                need(2)?;
                if !(p[0].is_finite() && p[0] >= 0.0) {
                    return Err(TubeError::InvalidShape("capsule half length must be >= 0".into()));
                }
                let radius = positive(p[1], "capsule radius")?;
                (Geometry::Capsule { half_length: p[0], radius }, Point::new(p[0] + radius, radius, radius))
            }
            ShapeKind::UnionOfBalls => {
                let stride = dim + 1;
                if p.is_empty() || p.len() % stride != 0 {
                    return Err(TubeError::InvalidShape(format!(
                        "union_of_balls params must be groups of {stride} (radius then offset)"
                    )));
                }
                let mut balls = Vec::new();
                let mut ext = Point::zeros();
                for g in p.chunks(stride) {
                    let r = positive(g[0], "ball radius")?;
                    let mut c = Point::zeros();
                    for i in 0..dim {
                        if !g[1 + i].is_finite() {
                            return Err(TubeError::InvalidShape("ball offset must be finite".into()));
                        }
                        c[i] = g[1 + i];
                    }
                    ext = ext.sup(&(c.abs() + Point::repeat(r)));
                    balls.push((c, r));
                }
                for i in 0..balls.len() {
                    for j in i + 1..balls.len() {
                        let gap = (balls[i].0 - balls[j].0).norm() - balls[i].1 - balls[j].1;
                        if gap <= 0.0 {
                            return Err(TubeError::InvalidShape(format!(
                                "balls {i} and {j} touch or overlap; the union would have zero reach"
                            )));
                        }
                    }
                }
                (Geometry::Union { balls }, ext)
            }
            ShapeKind::HarmonicSphere => {
                if p.is_empty() || p.len() > 1 + harmonics::basis_len(dim) {
                    return Err(TubeError::InvalidShape(format!(
                        "harmonic_sphere takes a base radius and at most {} coefficients",
                        harmonics::basis_len(dim)
                    )));
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(TubeError::InvalidShape("harmonic coefficients must be finite".into()));
                }
                positive(p[0], "base radius")?;
                let rad = HarmonicRadius::new(dim, p[0], &p[1..]);
                validate_radial_graph(dim, &rad)?;
                (Geometry::Harmonic(rad.clone()), Point::repeat(rad.sup_bound()))
            }
        };
        let mut ext = half_extent;
        if dim == 2 {
            ext[2] = 0.0;
        }
        let bbox = AmbientBox { lo: center - ext, hi: center + ext };
        Ok(Self { spec: spec.clone(), dim, center, geometry, bbox })
    }

    pub fn spec(&self) -> &ShapeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> Point {
        self.center
    }

    /// Tight (or conservative, for harmonic spheres) bounding box of `Ω`.
    pub fn bounding_box(&self) -> AmbientBox {
        self.bbox
    }

    pub fn diameter(&self) -> f64 {
        self.bbox.diameter()
    }

    /// Footpoint tolerance `10⁻¹⁰ · diameter`.
    pub fn tol_surface(&self) -> f64 {
        SURFACE_TOL_REL * self.diameter()
    }

    /// Default container: the bounding box padded by a quarter diameter.
    pub fn default_box(&self) -> AmbientBox {
        self.bbox.padded(0.25 * self.diameter(), self.dim)
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self.geometry, Geometry::Ellipsoid { .. } | Geometry::Harmonic(_))
    }

    /// Signed distance, gradient and Hessian at `x`.
    pub fn eval(&self, x: &Point) -> Result<SdfSample> {
        self.eval_seeded(x, &[])
    }

    /// Like [`Shape::eval`], with additional surface points used as extra
    /// Newton starts for the implicit shapes (ignored by closed forms).
    pub fn eval_seeded(&self, x: &Point, seeds: &[Point]) -> Result<SdfSample> {
        let y = embed(self.dim, x);
        let rel = y - self.center;
        let tol = self.tol_surface();
        let mut s = match &self.geometry {
            Geometry::Ball { radius } => closed_form::ball(self.dim, &rel, *radius, tol),
            Geometry::Torus { major, minor } => closed_form::torus(&rel, *major, *minor, tol),
            Geometry::Capsule { half_length, radius } => {
                closed_form::capsule(self.dim, &rel, *half_length, *radius, tol)
            }
            Geometry::Union { balls } => closed_form::union_of_balls(self.dim, &rel, balls, tol),
            Geometry::Ellipsoid { axes } => {
                let f = newton::EllipsoidFn { axes: *axes, dim: self.dim };
                newton::implicit_sdf(&f, self.dim, &rel, seeds, self.center, tol, self.diameter())?
            }
            Geometry::Harmonic(rad) => {
                let f = newton::HarmonicFn { radius: rad, dim: self.dim };
                newton::implicit_sdf(&f, self.dim, &rel, seeds, self.center, tol, self.diameter())?
            }
        };
        s.footpoint += self.center;
        Ok(s)
    }

    /// Signed distance only.
    pub fn signed_distance(&self, x: &Point) -> Result<f64> {
        Ok(self.eval(x)?.b)
    }

    /// Orthogonal projection `p(x) = x - b(x)∇b(x)` onto `∂Ω`.
    pub fn project(&self, x: &Point) -> Result<Point> {
        Ok(self.eval(x)?.footpoint)
    }
}

/// Reject radial graphs whose perturbation is too steep or not positive.
fn validate_radial_graph(dim: usize, rad: &HarmonicRadius) -> Result<()> {
    let dirs = crate::sampling::unit_directions(dim, 2000);
    for u in &dirs {
        let (r, g, _) = rad.eval(u);
        if r <= 0.0 {
            return Err(TubeError::InvalidShape("harmonic radius is not positive in every direction".into()));
        }
        if g.norm() / r >= 1.0 {
            return Err(TubeError::InvalidShape(format!(
                "harmonic perturbation slope {} >= 1 is not a valid radial graph",
                g.norm() / r
            )));
        }
    }
    Ok(())
}

/// Signed distance at `x` (catalogue closed form or Newton footpoint).
pub fn eval_sdf(shape: &Shape, x: &Point) -> Result<SdfSample> {
    shape.eval(x)
}

/// Footpoint of `x` on `∂Ω`.
pub fn project_to_surface(shape: &Shape, x: &Point) -> Result<Point> {
    shape.project(x)
}

/// Central-difference step `ε^{1/3} · diameter`.
pub fn hessian_step(shape: &Shape) -> f64 {
    f64::EPSILON.cbrt() * shape.diameter()
}

/// Hessian of `b` by central differences of the gradient.
pub fn hessian_fd(shape: &Shape, x: &Point) -> Result<Mat> {
    let d = hessian_step(shape);
    let mut h = Mat::zeros();
    for j in 0..shape.dim() {
        let mut e = Point::zeros();
        e[j] = d;
        let gp = shape.eval(&(x + e))?.grad;
        let gm = shape.eval(&(x - e))?.grad;
        h.set_column(j, &((gp - gm) / (2.0 * d)));
    }
    Ok((h + h.transpose()) * 0.5)
}
