//! Uniform Cartesian lattices and Lipschitz-pruned scans of the signed distance.

use rayon::prelude::*;

use super::{AmbientBox, SdfSample, Shape};
use crate::error::{Result, TubeError};
use crate::Point;

/// Node budget of [`sample_grid`], which stores a full sample per node.
pub const SAMPLE_GRID_BUDGET: usize = 8_000_000;
/// Node budget of scans that only keep a band of nodes.
pub const SCAN_BUDGET: usize = 400_000_000;

const BLOCK: usize = 8;

/// Regular lattice `origin + spacing · (i, j, k)`; in 2D `counts[2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub origin: Point,
    pub spacing: f64,
    pub counts: [usize; 3],
    pub dim: usize,
}

fn check_spacing(spacing: f64) -> Result<()> {
    if spacing.is_finite() && spacing > 0.0 {
        Ok(())
    } else {
        Err(TubeError::InvalidInput(format!("grid spacing must be positive, got {spacing}")))
    }
}

impl Lattice {
    fn build(origin: Point, spacing: f64, counts: [usize; 3], dim: usize, budget: usize) -> Result<Self> {
        let nodes = counts.iter().try_fold(1usize, |acc, c| acc.checked_mul(*c)).unwrap_or(usize::MAX);
        if nodes > budget {
            return Err(TubeError::GridTooLarge { nodes, budget });
        }
        Ok(Self { origin, spacing, counts, dim })
    }

    /// Nodes `lo, lo + s, ...` up to `hi` inclusive on every active axis.
    pub fn nodes(bx: &AmbientBox, spacing: f64, dim: usize, budget: usize) -> Result<Self> {
        check_spacing(spacing)?;
        let mut counts = [1; 3];
        for (a, c) in counts.iter_mut().enumerate().take(dim) {
            let span = (bx.hi[a] - bx.lo[a]) / spacing;
            if span > budget as f64 {
                return Err(TubeError::GridTooLarge { nodes: usize::MAX, budget });
            }
            *c = (span + 1e-9).floor() as usize + 1;
        }
        let mut origin = bx.lo;
        if dim == 2 {
            origin[2] = 0.0;
        }
        Self::build(origin, spacing, counts, dim, budget)
    }

    /// Centers of the cells of side `spacing` tiling `bx` (rounded up).
    pub fn cells(bx: &AmbientBox, spacing: f64, dim: usize, budget: usize) -> Result<Self> {
        check_spacing(spacing)?;
        let mut counts = [1; 3];
        let mut origin = bx.lo;
        for a in 0..3 {
            if a < dim {
                let span = (bx.hi[a] - bx.lo[a]) / spacing;
                if span > budget as f64 {
                    return Err(TubeError::GridTooLarge { nodes: usize::MAX, budget });
                }
                counts[a] = (span - 1e-9).ceil().max(1.0) as usize;
                origin[a] += 0.5 * spacing;
            } else {
                origin[a] = 0.0;
            }
        }
        Self::build(origin, spacing, counts, dim, budget)
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume (area in 2D) attached to one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn flat(&self, ijk: [usize; 3]) -> usize {
        (ijk[2] * self.counts[1] + ijk[1]) * self.counts[0] + ijk[0]
    }

    pub fn ijk(&self, flat: usize) -> [usize; 3] {
        let i = flat % self.counts[0];
        let r = flat / self.counts[0];
        [i, r % self.counts[1], r / self.counts[1]]
    }

    pub fn position(&self, ijk: [usize; 3]) -> Point {
        self.origin + Point::new(ijk[0] as f64, ijk[1] as f64, ijk[2] as f64) * self.spacing
    }

    pub fn position_flat(&self, flat: usize) -> Point {
        self.position(self.ijk(flat))
    }

    /// Neighbor one step along `axis` in direction `dir` (±1).
    pub fn neighbor(&self, flat: usize, axis: usize, dir: i32) -> Option<usize> {
        let mut ijk = self.ijk(flat);
        let c = ijk[axis] as i64 + dir as i64;
        if c < 0 || c >= self.counts[axis] as i64 {
            return None;
        }
        ijk[axis] = c as usize;
        Some(self.flat(ijk))
    }

    /// Lower corner index and fractional offsets of the lattice cell holding `x`.
    pub fn locate(&self, x: &Point) -> Option<([usize; 3], Point)> {
        let mut ijk = [0; 3];
        let mut frac = Point::zeros();
        for a in 0..self.dim {
            let u = (x[a] - self.origin[a]) / self.spacing;
            if u < 0.0 || u > (self.counts[a] - 1) as f64 {
                return None;
            }
            let i = (u.floor() as usize).min(self.counts[a].saturating_sub(2));
            ijk[a] = i;
            frac[a] = u - i as f64;
        }
        Some((ijk, frac))
    }

    /// Blocks of at most `BLOCK` nodes per axis as `(start, len)` triples.
    fn blocks(&self) -> Vec<[(usize, usize); 3]> {
        let split = |n: usize| -> Vec<(usize, usize)> {
            (0..n).step_by(BLOCK).map(|s| (s, BLOCK.min(n - s))).collect()
        };
        let (bx, by, bz) = (split(self.counts[0]), split(self.counts[1]), split(self.counts[2]));
        let mut out = Vec::with_capacity(bx.len() * by.len() * bz.len());
        for z in &bz {
            for y in &by {
                for x in &bx {
                    out.push([*x, *y, *z]);
                }
            }
        }
        out
    }

    fn block_center_radius(&self, block: &[(usize, usize); 3]) -> (Point, f64) {
        let mut c = self.origin;
        let mut r2 = 0.0;
        for a in 0..3 {
            let (s, n) = block[a];
            c[a] += self.spacing * (s as f64 + (n as f64 - 1.0) / 2.0);
            r2 += (self.spacing * (n as f64 - 1.0) / 2.0).powi(2);
        }
        (c, r2.sqrt())
    }

    fn block_nodes(&self, block: &[(usize, usize); 3]) -> impl Iterator<Item = usize> + '_ {
        let [(x0, nx), (y0, ny), (z0, nz)] = *block;
        (z0..z0 + nz).flat_map(move |k| {
            (y0..y0 + ny).flat_map(move |j| (x0..x0 + nx).map(move |i| self.flat([i, j, k])))
        })
    }
}

/// Classification of a sampled grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Inside,
    Outside,
    /// Within half a cell diagonal of the boundary.
    Tube,
}

#[derive(Debug, Clone)]
pub struct SampledGrid {
    pub lattice: Lattice,
    pub samples: Vec<SdfSample>,
    pub classes: Vec<NodeClass>,
}

/// Signed distance samples on the node lattice covering `bx`.
pub fn sample_grid(shape: &Shape, bx: &AmbientBox, spacing: f64) -> Result<SampledGrid> {
    let lattice = Lattice::nodes(bx, spacing, shape.dim(), SAMPLE_GRID_BUDGET)?;
    let samples = (0..lattice.len())
        .into_par_iter()
        .map(|f| shape.eval(&lattice.position_flat(f)))
        .collect::<Result<Vec<_>>>()?;
    let half_diag = 0.5 * spacing * (shape.dim() as f64).sqrt();
    let classes = samples
        .iter()
        .map(|s| {
            if s.b.abs() <= half_diag {
                NodeClass::Tube
            } else if s.b < 0.0 {
                NodeClass::Inside
            } else {
                NodeClass::Outside
            }
        })
        .collect();
    Ok(SampledGrid { lattice, samples, classes })
}

/// All lattice nodes with `lo < b < hi`, sorted by flat index. Blocks whose
/// center distance proves (1-Lipschitz) that no node can qualify are skipped.
pub fn band_samples(shape: &Shape, lat: &Lattice, lo: f64, hi: f64) -> Result<Vec<(usize, SdfSample)>> {
    let parts = lat
        .blocks()
        .par_iter()
        .map(|block| -> Result<Vec<(usize, SdfSample)>> {
            let (c, rad) = lat.block_center_radius(block);
            if let Ok(bc) = shape.signed_distance(&c) {
                if bc + rad <= lo || bc - rad >= hi {
                    return Ok(Vec::new());
                }
            }
            let mut out = Vec::new();
            for f in lat.block_nodes(block) {
                let s = shape.eval(&lat.position_flat(f))?;
                if s.b > lo && s.b < hi {
                    out.push((f, s));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<(usize, SdfSample)> = parts.into_iter().flatten().collect();
    all.sort_by_key(|(f, _)| *f);
    Ok(all)
}

/// `b < 0` mask over the lattice.
pub fn inside_mask(shape: &Shape, lat: &Lattice) -> Result<Vec<bool>> {
    let parts = lat
        .blocks()
        .par_iter()
        .map(|block| -> Result<Vec<(usize, bool)>> {
            let (c, rad) = lat.block_center_radius(block);
            let verdict = shape.signed_distance(&c).ok().and_then(|bc| {
                if bc + rad < 0.0 {
                    Some(true)
                } else if bc - rad >= 0.0 {
                    Some(false)
                } else {
                    None
                }
            });
            lat.block_nodes(block)
                .map(|f| match verdict {
                    Some(v) => Ok((f, v)),
                    None => Ok((f, shape.signed_distance(&lat.position_flat(f))? < 0.0)),
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mask = vec![false; lat.len()];
    for (f, v) in parts.into_iter().flatten() {
        mask[f] = v;
    }
    Ok(mask)
}

/// Number of face-connected components of the `b < 0` region sampled on the
/// node lattice of `bx`.
pub fn inside_components(shape: &Shape, bx: &AmbientBox, spacing: f64) -> Result<usize> {
    let lat = Lattice::nodes(bx, spacing, shape.dim(), SCAN_BUDGET)?;
    let mask = inside_mask(shape, &lat)?;
    let mut seen = vec![false; mask.len()];
    let mut components = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(f) = stack.pop() {
            for axis in 0..lat.dim {
                for dir in [-1, 1] {
                    if let Some(n) = lat.neighbor(f, axis, dir) {
                        if mask[n] && !seen[n] {
                            seen[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
    }
    Ok(components)
}
