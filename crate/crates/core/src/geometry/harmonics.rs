//! Real spherical harmonics (degree <= 4) and planar Fourier modes, stored as
//! homogeneous polynomials so that value, gradient and Hessian of the
//! zero-homogeneous extension `Y(x / |x|)` are exact.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::{Mat, Point};

/// Maximum harmonic degree supported by `harmonic_sphere` shapes.
pub const MAX_DEGREE: u32 = 4;

/// Sparse polynomial in (x, y, z), keyed by exponent triple.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<[u32; 3], f64>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        let mut p = Self::default();
        p.add_term([0, 0, 0], c);
        p
    }

    pub fn var(axis: usize) -> Self {
        let mut e = [0; 3];
        e[axis] = 1;
        let mut p = Self::default();
        p.add_term(e, 1.0);
        p
    }

    fn add_term(&mut self, e: [u32; 3], c: f64) {
        let entry = self.terms.entry(e).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, *c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::default();
        for (e, c) in &self.terms {
            out.add_term(*e, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                out.add_term([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], ca * cb);
            }
        }
        out
    }

    /// Total degree, assuming the polynomial is homogeneous.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e[0] + e[1] + e[2]).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.terms.keys().all(|e| e[0] + e[1] + e[2] == d)
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
            .sum()
    }

    fn derivative(&self, axis: usize) -> Poly {
        let mut out = Poly::default();
        for (e, c) in &self.terms {
            if e[axis] > 0 {
                let mut ne = *e;
                ne[axis] -= 1;
                out.add_term(ne, c * e[axis] as f64);
            }
        }
        out
    }
}

/// A polynomial compiled together with its first and second derivatives.
#[derive(Debug, Clone)]
struct CompiledPoly {
    degree: i32,
    value: Poly,
    grad: [Poly; 3],
    hess: [[Poly; 3]; 3],
}

impl CompiledPoly {
    fn new(p: Poly) -> Self {
        debug_assert!(p.is_homogeneous());
        let grad = [p.derivative(0), p.derivative(1), p.derivative(2)];
        let hess = [0, 1, 2].map(|i| [0, 1, 2].map(|j| grad[i].derivative(j)));
        Self { degree: p.degree() as i32, value: p, grad, hess }
    }
}

fn real_spherical_harmonics() -> Vec<Poly> {
    let x = Poly::var(0);
    let y = Poly::var(1);
    let z = Poly::var(2);
    let c = Poly::constant;
    let r2 = x.mul(&x).add(&y.mul(&y)).add(&z.mul(&z));
    let x2 = x.mul(&x);
    let y2 = y.mul(&y);
    let z2 = z.mul(&z);
    let xy = x.mul(&y);
    let x2_m_y2 = x2.sub(&y2);
    let s = |a: f64| a.sqrt();

    let mut out = Vec::with_capacity(25);
    // l = 0
    out.push(c(0.5 * s(1.0 / PI)));
    // l = 1: m = -1, 0, 1
    let k1 = s(3.0 / (4.0 * PI));
    out.push(y.scale(k1));
    out.push(z.scale(k1));
    out.push(x.scale(k1));
    // l = 2
    out.push(xy.scale(0.5 * s(15.0 / PI)));
    out.push(y.mul(&z).scale(0.5 * s(15.0 / PI)));
    out.push(z2.scale(3.0).sub(&r2).scale(0.25 * s(5.0 / PI)));
    out.push(x.mul(&z).scale(0.5 * s(15.0 / PI)));
    out.push(x2_m_y2.scale(0.25 * s(15.0 / PI)));
    // l = 3
    out.push(y.mul(&x2.scale(3.0).sub(&y2)).scale(0.25 * s(35.0 / (2.0 * PI))));
    out.push(xy.mul(&z).scale(0.5 * s(105.0 / PI)));
    let five_z2_m_r2 = z2.scale(5.0).sub(&r2);
    out.push(y.mul(&five_z2_m_r2).scale(0.25 * s(21.0 / (2.0 * PI))));
    out.push(z.mul(&z2.scale(5.0).sub(&r2.scale(3.0))).scale(0.25 * s(7.0 / PI)));
    out.push(x.mul(&five_z2_m_r2).scale(0.25 * s(21.0 / (2.0 * PI))));
    out.push(z.mul(&x2_m_y2).scale(0.25 * s(105.0 / PI)));
    out.push(x.mul(&x2.sub(&y2.scale(3.0))).scale(0.25 * s(35.0 / (2.0 * PI))));
    // l = 4
    let seven_z2_m_r2 = z2.scale(7.0).sub(&r2);
    let seven_z2_m_3r2 = z2.scale(7.0).sub(&r2.scale(3.0));
    out.push(xy.mul(&x2_m_y2).scale(0.75 * s(35.0 / PI)));
    out.push(y.mul(&z).mul(&x2.scale(3.0).sub(&y2)).scale(0.75 * s(35.0 / (2.0 * PI))));
    out.push(xy.mul(&seven_z2_m_r2).scale(0.75 * s(5.0 / PI)));
    out.push(y.mul(&z).mul(&seven_z2_m_3r2).scale(0.75 * s(5.0 / (2.0 * PI))));
    let z4 = z2.mul(&z2);
    out.push(
        z4.scale(35.0)
            .sub(&z2.mul(&r2).scale(30.0))
            .add(&r2.mul(&r2).scale(3.0))
            .scale(3.0 / 16.0 * s(1.0 / PI)),
    );
    out.push(x.mul(&z).mul(&seven_z2_m_3r2).scale(0.75 * s(5.0 / (2.0 * PI))));
    out.push(x2_m_y2.mul(&seven_z2_m_r2).scale(3.0 / 8.0 * s(5.0 / PI)));
    out.push(x.mul(&z).mul(&x2.sub(&y2.scale(3.0))).scale(0.75 * s(35.0 / (2.0 * PI))));
    out.push(
        x2.mul(&x2.sub(&y2.scale(3.0)))
            .sub(&y2.mul(&x2.scale(3.0).sub(&y2)))
            .scale(3.0 / 16.0 * s(35.0 / PI)),
    );
    out
}

fn fourier_modes() -> Vec<Poly> {
    let x = Poly::var(0);
    let y = Poly::var(1);
    let mut out = vec![Poly::constant(1.0 / (2.0 * PI).sqrt())];
    // (x + i y)^k = re + i im
    let (mut re, mut im) = (Poly::constant(1.0), Poly::default());
    let norm = 1.0 / PI.sqrt();
    for _ in 1..=MAX_DEGREE {
        let next_re = re.mul(&x).sub(&im.mul(&y));
        let next_im = re.mul(&y).add(&im.mul(&x));
        re = next_re;
        im = next_im;
        out.push(re.scale(norm));
        out.push(im.scale(norm));
    }
    out
}

/// Number of basis functions available in dimension `dim`.
pub fn basis_len(dim: usize) -> usize {
    if dim == 2 {
        (2 * MAX_DEGREE + 1) as usize
    } else {
        ((MAX_DEGREE + 1) * (MAX_DEGREE + 1)) as usize
    }
}

/// Sup-norm bound of each basis function on the unit sphere (circle).
fn basis_sup_bound(dim: usize, index: usize) -> f64 {
    if dim == 2 {
        if index == 0 {
            1.0 / (2.0 * PI).sqrt()
        } else {
            1.0 / PI.sqrt()
        }
    } else {
        let l = (index as f64).sqrt().floor();
        ((2.0 * l + 1.0) / (4.0 * PI)).sqrt()
    }
}

/// Radial function `R(u) = r0 + sum_j c_j Y_j(u)` extended to a
/// zero-homogeneous function of `x`.
#[derive(Debug, Clone)]
pub struct HarmonicRadius {
    base: f64,
    terms: Vec<(f64, CompiledPoly)>,
    sup_bound: f64,
}

impl HarmonicRadius {
    pub fn new(dim: usize, base: f64, coefficients: &[f64]) -> Self {
        let basis = if dim == 2 { fourier_modes() } else { real_spherical_harmonics() };
        let mut sup_bound = base;
        let terms = coefficients
            .iter()
            .zip(basis)
            .enumerate()
            .filter(|(_, (c, _))| **c != 0.0)
            .map(|(j, (c, p))| {
                sup_bound += c.abs() * basis_sup_bound(dim, j);
                (*c, CompiledPoly::new(p))
            })
            .collect();
        Self { base, terms, sup_bound }
    }

    /// Upper bound on `R` over all directions.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Value, gradient and Hessian of `R(x/|x|)` at `x != 0`.
    pub fn eval(&self, x: &Point) -> (f64, Point, Mat) {
        let r2 = x.norm_squared();
        let r = r2.sqrt();
        let mut val = self.base;
        let mut grad = Point::zeros();
        let mut hess = Mat::zeros();
        for (c, p) in &self.terms {
            let l = p.degree;
            if l == 0 {
                val += c * p.value.eval(x);
                continue;
            }
            let lf = l as f64;
            let pv = p.value.eval(x);
            let pg = Point::new(p.grad[0].eval(x), p.grad[1].eval(x), p.grad[2].eval(x));
            let mut ph = Mat::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    ph[(i, j)] = p.hess[i][j].eval(x);
                }
            }
            let rl = r.powi(-l);
            let rl2 = rl / r2;
            // g = P |x|^{-l}
            val += c * pv * rl;
            grad += (pg * rl - x * (lf * pv * rl2)) * *c;
            let cross = x * pg.transpose() + pg * x.transpose();
            let h = ph * rl - cross * (lf * rl2) - Mat::identity() * (lf * pv * rl2)
                + x * x.transpose() * (lf * (lf + 2.0) * pv * rl2 / r2);
            hess += h * *c;
        }
        (val, grad, hess)
    }
}
