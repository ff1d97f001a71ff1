//! Deterministic low-discrepancy point sets.

use crate::geometry::AmbientBox;
use crate::Point;

const PRIMES: [u64; 3] = [2, 3, 5];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    out
}

/// Halton sequence in the unit cube `[0,1)^dim`, starting after `seed` skipped points.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!((1..=3).contains(&dim));
        Self { dim, index: seed + 1 }
    }

    /// Next point mapped into `bx` (unused coordinates stay at `bx.lo`).
    pub fn next_in(&mut self, bx: &AmbientBox) -> Point {
        let u = self.next_unit();
        bx.lo + (bx.hi - bx.lo).component_mul(&u)
    }

    pub fn next_unit(&mut self) -> Point {
        let mut u = Point::zeros();
        for (k, p) in PRIMES.iter().enumerate().take(self.dim) {
            u[k] = radical_inverse(self.index, *p);
        }
        self.index += 1;
        u
    }
}

/// `n` quasi-uniform unit directions (Fibonacci lattice in 3D, equal angles in 2D).
pub fn unit_directions(dim: usize, n: usize) -> Vec<Point> {
    if dim == 2 {
        return (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / n as f64;
                Point::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * k as f64;
            Point::new(r * t.cos(), r * t.sin(), z)
        })
        .collect()
}
