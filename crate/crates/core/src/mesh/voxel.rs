//! Cell-center occupancy by +x parity ray casting.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::scalar::Scalar;

use super::{validity, TriMesh};

pub const MAX_VOXEL_RES: usize = 512;

/// Boolean occupancy over an axis-aligned frame, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub frame: Aabb<f64>,
    pub dims: [usize; 3],
    bits: Vec<u64>,
}

impl VoxelGrid {
    pub fn empty(frame: Aabb<f64>, dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        VoxelGrid {
            frame,
            dims,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    /// Grid whose cells are set by `f(center)`.
    pub fn from_fn(frame: Aabb<f64>, dims: [usize; 3], f: impl Fn(Vec3<f64>) -> bool) -> Self {
        let mut g = Self::empty(frame, dims);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    if f(g.cell_center(i, j, k)) {
                        g.set(i, j, k, true);
                    }
                }
            }
        }
        g
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        let n = self.index(i, j, k);
        self.bits[n / 64] >> (n % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, on: bool) {
        let n = self.index(i, j, k);
        if on {
            self.bits[n / 64] |= 1 << (n % 64);
        } else {
            self.bits[n / 64] &= !(1 << (n % 64));
        }
    }

    pub fn cell_size(&self) -> [f64; 3] {
        let e = self.frame.extent();
        [0, 1, 2].map(|a| e[a] / self.dims[a] as f64)
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3<f64> {
        let h = self.cell_size();
        let o = self.frame.min;
        Vec3::new(
            o.x + (i as f64 + 0.5) * h[0],
            o.y + (j as f64 + 0.5) * h[1],
            o.z + (k as f64 + 0.5) * h[2],
        )
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn same_frame(&self, other: &VoxelGrid) -> bool {
        self.dims == other.dims && self.frame == other.frame
    }

    /// `(|A ∩ B|, |A ∪ B|)` over packed words.
    pub fn overlap_counts(&self, other: &VoxelGrid) -> (usize, usize) {
        self.bits.iter().zip(&other.bits).fold((0, 0), |(i, u), (a, b)| {
            (i + (a & b).count_ones() as usize, u + (a | b).count_ones() as usize)
        })
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.count() as f64 / self.len() as f64
    }
}

/// Grid dims for `res` cells along the frame's longest extent.
pub fn grid_dims(frame: &Aabb<f64>, res: usize) -> [usize; 3] {
    let e = frame.extent();
    let longest = e.x.max(e.y).max(e.z);
    if longest <= 0.0 {
        return [1, 1, 1];
    }
    let h = longest / res as f64;
    [0, 1, 2].map(|a| ((e[a] / h - 1e-9).ceil() as usize).max(1))
}

struct Tri2 {
    /// Corners projected on (y, z), wound counter-clockwise.
    p: [[f64; 2]; 3],
    x: [f64; 3],
    area2: f64,
}

fn edge(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

/// Top-left fill rule for counter-clockwise winding.
fn top_left(p: [f64; 2], q: [f64; 2]) -> bool {
    q[1] < p[1] || (q[1] == p[1] && q[0] < p[0])
}

impl Tri2 {
    /// x of the ray/triangle crossing at `r` when `r` is covered.
    fn hit(&self, r: [f64; 2]) -> Option<f64> {
        let mut w = [0.0; 3];
        for k in 0..3 {
            let (p, q) = (self.p[(k + 1) % 3], self.p[(k + 2) % 3]);
            let e = edge(p, q, r);
            if e < 0.0 || (e == 0.0 && !top_left(p, q)) {
                return None;
            }
            w[k] = e;
        }
        Some((w[0] * self.x[0] + w[1] * self.x[1] + w[2] * self.x[2]) / self.area2)
    }
}

/// Occupancy of `frame` at `res` cells along its longest extent. A cell is
/// occupied when its center is inside the solid.
pub fn voxelize<T: Scalar>(mesh: &TriMesh<T>, res: usize, frame: &Aabb<T>) -> Result<VoxelGrid> {
    if !(1..=MAX_VOXEL_RES).contains(&res) {
        return Err(Error::InvalidArgument(format!("voxel resolution {res} outside [1, {MAX_VOXEL_RES}]")));
    }
    let frame: Aabb<f64> = frame.cast();
    if frame.is_empty() || !frame.min.is_finite() || !frame.max.is_finite() {
        return Err(Error::InvalidArgument("voxel frame is empty".into()));
    }
    if !validity(mesh).valid_solid {
        return Err(Error::InvalidSolid(format!("mesh `{}` cannot be voxelized", mesh.name)));
    }
    let dims = grid_dims(&frame, res);
    let mut grid = VoxelGrid::empty(frame, dims);
    let h = grid.cell_size();
    let o = frame.min;

    let mut tris = Vec::with_capacity(mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let c = mesh.corners(t).map(|v| v.to_f64());
        let mut p = c.map(|v| [v[1], v[2]]);
        let mut x = c.map(|v| v[0]);
        let mut area2 = edge(p[0], p[1], p[2]);
        if area2 == 0.0 {
            continue;
        }
        if area2 < 0.0 {
            p.swap(1, 2);
            x.swap(1, 2);
            area2 = -area2;
        }
        tris.push(Tri2 { p, x, area2 });
    }

    // Bin triangles by the rays their projected bounds may cover.
    let (ny, nz) = (dims[1], dims[2]);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); ny * nz];
    let span = |lo: f64, hi: f64, o: f64, h: f64, n: usize| -> Option<(usize, usize)> {
        if h <= 0.0 {
            return Some((0, n - 1));
        }
        let a = ((lo - o) / h - 0.5).floor() - 1.0;
        let b = ((hi - o) / h - 0.5).ceil() + 1.0;
        if b < 0.0 || a > (n - 1) as f64 {
            return None;
        }
        Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
    };
    for (ti, t) in tris.iter().enumerate() {
        let ylo = t.p.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let yhi = t.p.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let zlo = t.p.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let zhi = t.p.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let (Some((j0, j1)), Some((k0, k1))) = (span(ylo, yhi, o.y, h[1], ny), span(zlo, zhi, o.z, h[2], nz)) else {
            continue;
        };
        for k in k0..=k1 {
            for j in j0..=j1 {
                buckets[j + ny * k].push(ti as u32);
            }
        }
    }

    let rows: Vec<Vec<bool>> = (0..ny * nz)
        .into_par_iter()
        .map(|r| {
            let (j, k) = (r % ny, r / ny);
            let py = o.y + (j as f64 + 0.5) * h[1];
            let pz = o.z + (k as f64 + 0.5) * h[2];
            let mut hits: Vec<f64> = buckets[r].iter().filter_map(|&ti| tris[ti as usize].hit([py, pz])).collect();
            hits.sort_by(|a, b| a.total_cmp(b));
            (0..dims[0])
                .map(|i| {
                    let px = o.x + (i as f64 + 0.5) * h[0];
                    let beyond = hits.len() - hits.partition_point(|&x| x <= px);
                    beyond % 2 == 1
                })
                .collect()
        })
        .collect();
    for (r, row) in rows.iter().enumerate() {
        let (j, k) = (r % ny, r / ny);
        for (i, &on) in row.iter().enumerate() {
            if on {
                grid.set(i, j, k, true);
            }
        }
    }
    Ok(grid)
}
