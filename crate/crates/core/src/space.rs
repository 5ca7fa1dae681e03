//! Periodic box geometry and finite point configurations.
//!
//! The box is the torus [0, L)^d with minimum-image distances. A
//! `Configuration` is a finite simple point pattern; each point carries a
//! stable id so jump and diffusion trajectories can follow individual
//! particles while the mathematical object stays the unlabeled set.

use crate::error::{Error, Result};

pub type Point = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicBox {
    pub dim: usize,
    pub side: f64,
}

impl PeriodicBox {
    pub fn new(dim: usize, side: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGeometry("dim must be >= 1".into()));
        }
        if !(side > 0.0) {
            return Err(Error::InvalidGeometry(format!("side {side} must be > 0")));
        }
        Ok(Self { dim, side })
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Wrap a coordinate into [0, L).
    pub fn wrap_coord(&self, x: f64) -> f64 {
        let l = self.side;
        let y = x - l * (x / l).floor();
        // x/l can round so that y == l; fold the tie back to 0
        if y >= l {
            y - l
        } else {
            y
        }
    }

    pub fn wrap(&self, x: &[f64]) -> Point {
        x.iter().map(|&c| self.wrap_coord(c)).collect()
    }

    /// Minimum-image representative of x - y, components in [-L/2, L/2).
    pub fn min_image_diff(&self, x: &[f64], y: &[f64]) -> Point {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        let l = self.side;
        x.iter()
            .zip(y)
            .map(|(&a, &b)| {
                let mut d = a - b;
                d -= l * (d / l).round();
                // round() ties break away from zero; force d into [-L/2, L/2)
                if d >= l / 2.0 {
                    d -= l;
                } else if d < -l / 2.0 {
                    d += l;
                }
                d
            })
            .collect()
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        norm(&self.min_image_diff(x, y))
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A finite simple configuration on the torus.
#[derive(Debug, Clone)]
pub struct Configuration {
    points: Vec<Point>,
    ids: Vec<u64>,
    next_id: u64,
}

impl Configuration {
    pub fn new(bx: &PeriodicBox, points: Vec<Point>) -> Result<Self> {
        for p in &points {
            if p.len() != bx.dim {
                return Err(Error::InvalidGeometry(format!(
                    "point has {} coordinates, box dim is {}",
                    p.len(),
                    bx.dim
                )));
            }
            for &c in p {
                if !(0.0..bx.side).contains(&c) {
                    return Err(Error::OutOfBox(c));
                }
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(Error::DuplicatePoint);
                }
            }
        }
        let n = points.len();
        Ok(Self {
            points,
            ids: (0..n as u64).collect(),
            next_id: n as u64,
        })
    }

    pub fn empty(_bx: &PeriodicBox) -> Self {
        Self {
            points: Vec::new(),
            ids: Vec::new(),
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &Point> {
        self.points.iter()
    }

    /// Whether the position x coincides exactly with a configuration point.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.points.iter().any(|p| p == x)
    }

    /// Insert a point (already wrapped into the box); returns its index.
    pub fn push(&mut self, p: Point) -> usize {
        self.points.push(p);
        self.ids.push(self.next_id);
        self.next_id += 1;
        self.points.len() - 1
    }

    /// Remove the point at index i (swap-remove; indices above i shift).
    pub fn remove(&mut self, i: usize) -> Point {
        self.ids.swap_remove(i);
        self.points.swap_remove(i)
    }

    /// Move the point at index i to a new position, keeping its id.
    pub fn relocate(&mut self, i: usize, p: Point) {
        self.points[i] = p;
    }

    /// The configuration with point i removed and y inserted in its place
    /// (the gamma \ x u y of the jump kernel), as a new value.
    pub fn replace(&self, i: usize, y: Point) -> Self {
        let mut out = self.clone();
        out.points[i] = y;
        out
    }

    /// New configuration with x appended (gamma u x).
    pub fn adjoin(&self, x: Point) -> Self {
        let mut out = self.clone();
        out.push(x);
        out
    }

    /// New configuration with point i dropped (gamma \ x).
    pub fn without(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.remove(i);
        out
    }
}

/// Exact neighbor search: all points of gamma within distance r of x,
/// excluding the point at `exclude` if given. Returns (index, min-image
/// displacement point - x).
pub fn neighbors_within(
    gamma: &Configuration,
    x: &[f64],
    r: f64,
    bx: &PeriodicBox,
    exclude: Option<usize>,
) -> Result<Vec<(usize, Point)>> {
    if r > bx.side / 2.0 {
        return Err(Error::RadiusTooLarge {
            r,
            half: bx.side / 2.0,
        });
    }
    if gamma.len() >= CELL_LIST_THRESHOLD {
        let grid = CellGrid::build(gamma, r, bx);
        return Ok(grid.query(gamma, x, r, bx, exclude));
    }
    Ok(brute_force_neighbors(gamma, x, r, bx, exclude))
}

pub fn brute_force_neighbors(
    gamma: &Configuration,
    x: &[f64],
    r: f64,
    bx: &PeriodicBox,
    exclude: Option<usize>,
) -> Vec<(usize, Point)> {
    let mut out = Vec::new();
    for (i, p) in gamma.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        let d = bx.min_image_diff(p, x);
        if norm(&d) <= r {
            out.push((i, d));
        }
    }
    out
}

const CELL_LIST_THRESHOLD: usize = 64;

/// Cell list over the torus with cell side >= r, so neighbor candidates
/// live in the 3^d surrounding cells.
pub struct CellGrid {
    cells_per_axis: usize,
    cells: Vec<Vec<usize>>,
    dim: usize,
}

impl CellGrid {
    pub fn build(gamma: &Configuration, r: f64, bx: &PeriodicBox) -> Self {
        let m = ((bx.side / r).floor() as usize).max(1);
        let dim = bx.dim;
        let ncells = m.pow(dim as u32);
        let mut cells = vec![Vec::new(); ncells];
        for (i, p) in gamma.iter().enumerate() {
            cells[Self::cell_index_of(p, m, bx)].push(i);
        }
        Self {
            cells_per_axis: m,
            cells,
            dim,
        }
    }

    fn cell_index_of(p: &[f64], m: usize, bx: &PeriodicBox) -> usize {
        let mut idx = 0;
        for &c in p {
            let mut k = (c / bx.side * m as f64).floor() as usize;
            if k >= m {
                k = m - 1;
            }
            idx = idx * m + k;
        }
        idx
    }

    pub fn query(
        &self,
        gamma: &Configuration,
        x: &[f64],
        r: f64,
        bx: &PeriodicBox,
        exclude: Option<usize>,
    ) -> Vec<(usize, Point)> {
        let m = self.cells_per_axis;
        if m < 3 {
            return brute_force_neighbors(gamma, x, r, bx, exclude);
        }
        let mut coords = vec![0usize; self.dim];
        for (k, &c) in x.iter().enumerate() {
            let mut j = (c / bx.side * m as f64).floor() as usize;
            if j >= m {
                j = m - 1;
            }
            coords[k] = j;
        }
        let mut out = Vec::new();
        let mut offs = vec![0i64; self.dim];
        self.visit_cells(&mut offs, 0, &coords, &mut |cell_idx| {
            for &i in &self.cells[cell_idx] {
                if Some(i) == exclude {
                    continue;
                }
                let d = bx.min_image_diff(gamma.point(i), x);
                if norm(&d) <= r {
                    out.push((i, d));
                }
            }
        });
        out.sort_by_key(|(i, _)| *i);
        out
    }

    fn visit_cells(
        &self,
        offs: &mut [i64],
        axis: usize,
        center: &[usize],
        f: &mut impl FnMut(usize),
    ) {
        if axis == offs.len() {
            let m = self.cells_per_axis as i64;
            let mut idx = 0usize;
            for (k, &o) in offs.iter().enumerate() {
                let c = (center[k] as i64 + o).rem_euclid(m) as usize;
                idx = idx * self.cells_per_axis + c;
            }
            f(idx);
            return;
        }
        for o in -1..=1 {
            offs[axis] = o;
            self.visit_cells(offs, axis + 1, center, f);
        }
    }
}
