//! Chamfer distance, F-score at τ, voxel IoU, box IoU and invalidity ratio.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::mesh::{sample_surface, validity, voxelize, TriMesh, ValidityReport};
use crate::scalar::Scalar;

/// Clouds at or below this size use the double loop under `Strategy::Auto`.
pub const BRUTE_FORCE_MAX: usize = 512;
const LEAF: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Auto,
    BruteForce,
    KdTree,
}

/// Static k-d tree over a point set. Nearest-neighbour queries return the
/// exact minimum squared distance, bit-identical to a linear scan.
pub struct KdTree<'a, T> {
    points: &'a [Vec3<T>],
    order: Vec<u32>,
    nodes: Vec<Node<T>>,
}

enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

impl<'a, T: Scalar> KdTree<'a, T> {
    pub fn new(points: &'a [Vec3<T>]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let pts = self.points;
        let slice = &mut self.order[start..end];
        let bb = Aabb::from_points(slice.iter().map(|&i| &pts[i as usize]));
        let e = bb.extent();
        let axis = if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        };
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            pts[a as usize][axis]
                .partial_cmp(&pts[b as usize][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let value = pts[slice[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Squared distance from `q` to its nearest point.
    pub fn nearest_dist2(&self, q: Vec3<T>) -> T {
        let mut best = T::infinity();
        if !self.nodes.is_empty() {
            self.search(0, q, &mut best);
        }
        best
    }

    fn search(&self, node: usize, q: Vec3<T>, best: &mut T) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = q.dist2(self.points[i as usize]);
                    if d < *best {
                        *best = d;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                // Left holds coordinates <= value, right holds >= value.
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // Points across the plane are at least diff² away in any
                // rounding, so strict pruning keeps the minimum exact.
                if diff * diff <= *best {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn brute_nearest<T: Scalar>(q: Vec3<T>, cloud: &[Vec3<T>]) -> T {
    let mut best = T::infinity();
    for p in cloud {
        let d = q.dist2(*p);
        if d < best {
            best = d;
        }
    }
    best
}

/// Per-point squared nearest distances from `from` into `to`, in order.
pub fn nearest_dist2<T: Scalar>(from: &[Vec3<T>], to: &[Vec3<T>], strategy: Strategy) -> Vec<T> {
    let brute = match strategy {
        Strategy::BruteForce => true,
        Strategy::KdTree => false,
        Strategy::Auto => to.len() <= BRUTE_FORCE_MAX,
    };
    if brute {
        from.par_iter().map(|&q| brute_nearest(q, to)).collect()
    } else {
        let tree = KdTree::new(to);
        from.par_iter().map(|&q| tree.nearest_dist2(q)).collect()
    }
}

fn mean<T: Scalar>(v: &[T]) -> T {
    let mut s = T::zero();
    for x in v {
        s += *x;
    }
    s / T::of_usize(v.len())
}

/// Mean squared nearest distance P→Q plus Q→P.
pub fn chamfer<T: Scalar>(p: &[Vec3<T>], q: &[Vec3<T>]) -> Result<T> {
    chamfer_with(p, q, Strategy::Auto)
}

pub fn chamfer_with<T: Scalar>(p: &[Vec3<T>], q: &[Vec3<T>], strategy: Strategy) -> Result<T> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(mean(&nearest_dist2(p, q, strategy)) + mean(&nearest_dist2(q, p, strategy)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FScore<T> {
    pub f: T,
    pub precision: T,
    pub recall: T,
}

fn harmonic<T: Scalar>(p: T, r: T) -> T {
    if p + r > T::zero() {
        T::of(2.0) * p * r / (p + r)
    } else {
        T::zero()
    }
}

pub fn f_score<T: Scalar>(p: &[Vec3<T>], q: &[Vec3<T>], tau: T) -> Result<FScore<T>> {
    f_score_with(p, q, tau, Strategy::Auto)
}

/// Precision: share of `p` within `tau` of `q`; recall: the converse.
pub fn f_score_with<T: Scalar>(p: &[Vec3<T>], q: &[Vec3<T>], tau: T, strategy: Strategy) -> Result<FScore<T>> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(tau > T::zero()) {
        return Err(Error::InvalidArgument("tau must be positive".into()));
    }
    let t2 = tau * tau;
    let within = |d: &[T]| T::of_usize(d.iter().filter(|&&x| x <= t2).count()) / T::of_usize(d.len());
    let precision = within(&nearest_dist2(p, q, strategy));
    let recall = within(&nearest_dist2(q, p, strategy));
    Ok(FScore {
        f: harmonic(precision, recall),
        precision,
        recall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoxelIou {
    pub iou: f64,
    pub warning: Option<String>,
}

/// `|A ∩ B| / |A ∪ B|` on grids sharing frame and dims.
pub fn voxel_iou(a: &crate::mesh::VoxelGrid, b: &crate::mesh::VoxelGrid) -> Result<VoxelIou> {
    if !a.same_frame(b) {
        return Err(Error::FrameMismatch);
    }
    let (inter, union) = a.overlap_counts(b);
    if union == 0 {
        return Ok(VoxelIou {
            iou: 1.0,
            warning: Some("both grids are empty; IoU defined as 1".into()),
        });
    }
    Ok(VoxelIou {
        iou: inter as f64 / union as f64,
        warning: None,
    })
}

pub fn box_iou<T: Scalar>(a: &Aabb<T>, b: &Aabb<T>) -> T {
    let i = a.intersection(b);
    let vi = if i.is_empty() { T::zero() } else { i.volume() };
    let vu = a.volume() + b.volume() - vi;
    if vu > T::zero() {
        vi / vu
    } else if a == b {
        T::one()
    } else {
        T::zero()
    }
}

/// Share of submissions that are not valid solids.
pub fn invalidity_ratio(reports: &[ValidityReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::EmptyList);
    }
    Ok(reports.iter().filter(|r| !r.valid_solid).count() as f64 / reports.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricConfig {
    pub sample_n: usize,
    pub tau_fraction: f64,
    pub voxel_res: usize,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            sample_n: 8192,
            tau_fraction: 0.01,
            voxel_res: 64,
            seed: 0,
            normalize: true,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_fraction > 0.0 && self.tau_fraction < 1.0) {
            return Err(Error::InvalidArgument("tau_fraction must lie in (0, 1)".into()));
        }
        if self.sample_n < 16 {
            return Err(Error::InvalidArgument("sample_n must be at least 16".into()));
        }
        if !(8..=crate::mesh::MAX_VOXEL_RES).contains(&self.voxel_res) {
            return Err(Error::InvalidArgument("voxel_res must lie in [8, 512]".into()));
        }
        Ok(())
    }
}

pub const NORMALIZATION_NOTE: &str =
    "both clouds translated by the reference bbox center and scaled by 1/(reference bbox diagonal)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricResult {
    pub schema: &'static str,
    /// `None` marks an invalid submission (worst case).
    pub chamfer_sq_normalized: Option<f64>,
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    pub tau: f64,
    pub voxel_iou: f64,
    pub box_iou: f64,
    pub valid_solid: bool,
    pub config: MetricConfig,
    pub normalization: &'static str,
    pub warnings: Vec<String>,
}

/// Cloud metrics in the reference-normalized frame: center at the reference
/// bbox center, reference diagonal scaled to 1.
pub fn normalized_cloud_metrics<T: Scalar>(
    generated: &[Vec3<T>],
    reference: &[Vec3<T>],
    reference_bbox: &Aabb<T>,
    tau_fraction: T,
) -> Result<(T, FScore<T>)> {
    let c = reference_bbox.center();
    let diag = reference_bbox.diagonal();
    if !(diag > T::zero()) {
        return Err(Error::InvalidArgument("reference bbox has zero diagonal".into()));
    }
    let s = T::one() / diag;
    let norm = |v: &[Vec3<T>]| v.iter().map(|p| (*p - c) * s).collect::<Vec<_>>();
    let (p, q) = (norm(generated), norm(reference));
    Ok((chamfer(&p, &q)?, f_score(&p, &q, tau_fraction)?))
}

/// Full metric suite for one generated mesh against a reference. An invalid
/// generated mesh gets worst-case values.
pub fn compare_meshes<T: Scalar>(generated: &TriMesh<T>, reference: &TriMesh<T>, cfg: &MetricConfig) -> Result<MetricResult> {
    cfg.validate()?;
    if !validity(reference).valid_solid {
        return Err(Error::InvalidSolid(format!("reference `{}` is not a valid solid", reference.name)));
    }
    let rb = reference.bbox();
    let diag = rb.diagonal().f64();
    let mut warnings = Vec::new();
    if !validity(generated).valid_solid {
        return Ok(MetricResult {
            schema: "metrics/1",
            chamfer_sq_normalized: None,
            f_score: 0.0,
            precision: 0.0,
            recall: 0.0,
            tau: if cfg.normalize { cfg.tau_fraction } else { cfg.tau_fraction * diag },
            voxel_iou: 0.0,
            box_iou: 0.0,
            valid_solid: false,
            config: *cfg,
            normalization: NORMALIZATION_NOTE,
            warnings: vec!["generated mesh is not a valid solid; worst-case metrics recorded".into()],
        });
    }
    let p = sample_surface(generated, cfg.sample_n, cfg.seed);
    let q = sample_surface(reference, cfg.sample_n, cfg.seed);
    let (cd, fs, tau) = if cfg.normalize {
        let (cd, fs) = normalized_cloud_metrics(&p, &q, &rb, T::of(cfg.tau_fraction))?;
        (cd.f64(), fs, cfg.tau_fraction)
    } else {
        let tau = cfg.tau_fraction * diag;
        (chamfer(&p, &q)?.f64(), f_score(&p, &q, T::of(tau))?, tau)
    };
    let frame = generated.bbox().union(&rb);
    let vg = voxelize(generated, cfg.voxel_res, &frame)?;
    let vr = voxelize(reference, cfg.voxel_res, &frame)?;
    let vi = voxel_iou(&vg, &vr)?;
    warnings.extend(vi.warning);
    Ok(MetricResult {
        schema: "metrics/1",
        chamfer_sq_normalized: Some(cd),
        f_score: fs.f.f64(),
        precision: fs.precision.f64(),
        recall: fs.recall.f64(),
        tau,
        voxel_iou: vi.iou,
        box_iou: box_iou(&generated.bbox(), &rb).f64(),
        valid_solid: true,
        config: *cfg,
        normalization: NORMALIZATION_NOTE,
        warnings,
    })
}
