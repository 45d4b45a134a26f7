//! The fixed 21-camera inspection set and a small deterministic rasterizer.
//!
//! Axes: +x forward, +y right, +z up. Cameras are orthographic and framed on
//! the assembly bounding sphere: the shorter image side spans `2·k·r / zoom`.
//!
//! | view | direction (camera → target) | up |
//! |---|---|---|
//! | front / rear | (−1,0,0) / (1,0,0) | +z |
//! | left / right | (0,1,0) / (0,−1,0) | +z |
//! | top / bottom | (0,0,−1) / (0,0,1) | +x |
//! | iso_front_right | −(1,1,1) | +z |
//! | iso_rear_right | −(−1,1,1) | +z |
//! | iso_rear_left | −(−1,−1,1) | +z |
//! | iso_front_left | −(1,−1,1) | +z |
//! | iso_top_front_right | −(1,1,2) | +z |
//! | iso | −(2,2,1) | +z |
//!
//! Close-ups reuse the direction of their base view with zooms rising
//! linearly from 1.45 (front_close) to 1.80 (iso_close); x-ray views use zoom 1.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doc;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{bounding_sphere, TriMesh};

pub const VIEW_NAMES: [&str; 21] = [
    "front",
    "rear",
    "left",
    "right",
    "top",
    "bottom",
    "iso",
    "iso_front_right",
    "iso_rear_right",
    "iso_rear_left",
    "iso_front_left",
    "iso_top_front_right",
    "front_close",
    "rear_close",
    "left_close",
    "right_close",
    "top_close",
    "iso_close",
    "iso_xray",
    "front_xray",
    "right_xray",
];

pub const VIEWS_MANIFEST_SCHEMA: &str = "views_manifest/1";
pub const VIEWS_MANIFEST_FILE: &str = "manifest.v1";
pub const CLOSEUP_ZOOM_MIN: f64 = 1.45;
pub const CLOSEUP_ZOOM_MAX: f64 = 1.8;

pub fn is_view_name(name: &str) -> bool {
    VIEW_NAMES.contains(&name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewGroup {
    AxisIso,
    Closeup,
    Xray,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub name: String,
    pub direction: [f64; 3],
    pub up: [f64; 3],
    pub zoom: f64,
    pub xray: bool,
    pub group: ViewGroup,
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Direction and up of the twelve base views.
fn base_view(name: &str) -> ([f64; 3], [f64; 3]) {
    const Z: [f64; 3] = [0.0, 0.0, 1.0];
    const X: [f64; 3] = [1.0, 0.0, 0.0];
    let iso = |p: [f64; 3]| unit([-p[0], -p[1], -p[2]]);
    match name {
        "front" => ([-1.0, 0.0, 0.0], Z),
        "rear" => ([1.0, 0.0, 0.0], Z),
        "left" => ([0.0, 1.0, 0.0], Z),
        "right" => ([0.0, -1.0, 0.0], Z),
        "top" => ([0.0, 0.0, -1.0], X),
        "bottom" => ([0.0, 0.0, 1.0], X),
        "iso_front_right" => (iso([1.0, 1.0, 1.0]), Z),
        "iso_rear_right" => (iso([-1.0, 1.0, 1.0]), Z),
        "iso_rear_left" => (iso([-1.0, -1.0, 1.0]), Z),
        "iso_front_left" => (iso([1.0, -1.0, 1.0]), Z),
        "iso_top_front_right" => (iso([1.0, 1.0, 2.0]), Z),
        "iso" => (iso([2.0, 2.0, 1.0]), Z),
        other => unreachable!("`{other}` is not a base view"),
    }
}

/// The 21 calibrated views, in canonical order.
pub fn view_set() -> Vec<ViewSpec> {
    let closeups = ["front", "rear", "left", "right", "top", "iso"];
    VIEW_NAMES
        .iter()
        .map(|&name| {
            let (base, zoom, group, xray) = if let Some(b) = name.strip_suffix("_close") {
                let k = closeups.iter().position(|c| *c == b).expect("close-up base") as f64;
                let step = (CLOSEUP_ZOOM_MAX - CLOSEUP_ZOOM_MIN) / (closeups.len() - 1) as f64;
                (b, CLOSEUP_ZOOM_MIN + k * step, ViewGroup::Closeup, false)
            } else if let Some(b) = name.strip_suffix("_xray") {
                (b, 1.0, ViewGroup::Xray, true)
            } else {
                (name, 1.0, ViewGroup::AxisIso, false)
            };
            let (direction, up) = base_view(base);
            ViewSpec {
                name: name.into(),
                direction,
                up,
                zoom,
                xray,
                group,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    /// Framing constant: the short image side spans `2·k·r`.
    pub k: f64,
    /// Per-body opacity in x-ray views.
    pub alpha: f64,
    pub background: [u8; 3],
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 960,
            height: 720,
            k: 2.5,
            alpha: 0.35,
            background: [255, 255, 255],
        }
    }
}

const PALETTE: [[f64; 3]; 8] = [
    [70.0, 110.0, 190.0],
    [215.0, 120.0, 50.0],
    [80.0, 160.0, 90.0],
    [185.0, 70.0, 80.0],
    [140.0, 100.0, 180.0],
    [150.0, 120.0, 90.0],
    [60.0, 160.0, 170.0],
    [170.0, 170.0, 60.0],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Image {
            width,
            height,
            rgb: fill.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    #[cfg(feature = "png")]
    pub fn to_png(&self) -> Vec<u8> {
        let mut out = std::io::Cursor::new(Vec::new());
        image::RgbImage::from_raw(self.width as u32, self.height as u32, self.rgb.clone())
            .expect("buffer matches dimensions")
            .write_to(&mut out, image::ImageFormat::Png)
            .expect("in-memory png encode");
        out.into_inner()
    }

    /// Bounding box `(x0, y0, x1, y1)` of pixels differing from `bg`.
    pub fn foreground_bbox(&self, bg: [u8; 3]) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.pixel(x, y) != bg {
                    b = Some(match b {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        b
    }

    pub fn count_foreground(&self, bg: [u8; 3]) -> usize {
        self.rgb.chunks(3).filter(|p| *p != bg).count()
    }
}

/// Orthographic camera in world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub center: Vec3<f64>,
    pub forward: Vec3<f64>,
    pub right: Vec3<f64>,
    pub up: Vec3<f64>,
    /// World half-extent along the shorter image side.
    pub half_extent: f64,
}

impl Camera {
    pub fn new(view: &ViewSpec, center: Vec3<f64>, radius: f64, k: f64) -> Self {
        let forward = Vec3::from(view.direction).normalize();
        let right = forward.cross(Vec3::from(view.up)).normalize();
        let up = right.cross(forward);
        Camera {
            center,
            forward,
            right,
            up,
            half_extent: k * radius / view.zoom,
        }
    }
}

struct Projected {
    /// Screen x, screen y, depth.
    p: [[f64; 3]; 3],
    shade: f64,
    body: u32,
}

fn project(mesh: &TriMesh<f64>, cam: &Camera, w: usize, h: usize) -> Vec<Projected> {
    let scale = (w.min(h) as f64 / 2.0) / cam.half_extent;
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let light = (cam.up * 0.35 + cam.right * 0.25 - cam.forward).normalize();
    (0..mesh.triangles.len())
        .map(|t| {
            let c = mesh.corners(t);
            let mut n = (c[1] - c[0]).cross(c[2] - c[0]).normalize();
            if n.dot(cam.forward) > 0.0 {
                n = -n;
            }
            let p = c.map(|v| {
                let d = v - cam.center;
                [cx + d.dot(cam.right) * scale, cy - d.dot(cam.up) * scale, d.dot(cam.forward)]
            });
            Projected {
                p,
                shade: 0.3 + 0.7 * n.dot(light).max(0.0),
                body: mesh.body_id[t],
            }
        })
        .collect()
}

fn edge(a: [f64; 3], b: [f64; 3], x: f64, y: f64) -> f64 {
    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
}

/// Top-left rule for screen-space winding with y down.
fn owns_edge(a: [f64; 3], b: [f64; 3]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

/// Visit covered pixel centers with interpolated depth.
fn raster(t: &Projected, w: usize, h: usize, mut f: impl FnMut(usize, f64)) {
    let mut p = t.p;
    let mut area = edge(p[0], p[1], p[2][0], p[2][1]);
    if area == 0.0 {
        return;
    }
    if area < 0.0 {
        p.swap(1, 2);
        area = -area;
    }
    let xs = p.map(|v| v[0]);
    let ys = p.map(|v| v[1]);
    let lo = |a: [f64; 3]| a.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = |a: [f64; 3]| a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x0 = (lo(xs) - 0.5).ceil().max(0.0) as usize;
    let y0 = (lo(ys) - 0.5).ceil().max(0.0) as usize;
    let x1 = ((hi(xs) - 0.5).floor()).min(w as f64 - 1.0);
    let y1 = ((hi(ys) - 0.5).floor()).min(h as f64 - 1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let own = [owns_edge(p[1], p[2]), owns_edge(p[2], p[0]), owns_edge(p[0], p[1])];
    for y in y0..=y1 as usize {
        let py = y as f64 + 0.5;
        for x in x0..=x1 as usize {
            let px = x as f64 + 0.5;
            let wts = [edge(p[1], p[2], px, py), edge(p[2], p[0], px, py), edge(p[0], p[1], px, py)];
            if (0..3).any(|i| wts[i] < 0.0 || (wts[i] == 0.0 && !own[i])) {
                continue;
            }
            let z = (wts[0] * p[0][2] + wts[1] * p[1][2] + wts[2] * p[2][2]) / area;
            f(y * w + x, z);
        }
    }
}

fn color(body: u32, shade: f64) -> [f64; 3] {
    PALETTE[body as usize % PALETTE.len()].map(|c| c * shade)
}

fn to_u8(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| v.round().clamp(0.0, 255.0) as u8)
}

/// Render one view of a mesh framed on the given bounding sphere.
pub fn render_view(mesh: &TriMesh<f64>, view: &ViewSpec, center: Vec3<f64>, radius: f64, cfg: &RenderConfig) -> Image {
    let (w, h) = (cfg.width, cfg.height);
    let cam = Camera::new(view, center, radius, cfg.k);
    let tris = project(mesh, &cam, w, h);
    let mut img = Image::new(w, h, cfg.background);
    let bg = cfg.background.map(f64::from);
    if !view.xray {
        let mut depth = vec![f64::INFINITY; w * h];
        let mut shade: Vec<Option<(u32, f64)>> = vec![None; w * h];
        for t in &tris {
            raster(t, w, h, |i, z| {
                if z < depth[i] {
                    depth[i] = z;
                    shade[i] = Some((t.body, t.shade));
                }
            });
        }
        for (i, s) in shade.into_iter().enumerate() {
            if let Some((b, sh)) = s {
                img.rgb[3 * i..3 * i + 3].copy_from_slice(&to_u8(color(b, sh)));
            }
        }
        return img;
    }
    // Nearest surface per body, then composite bodies back to front.
    let bodies = mesh.body_count().max(1);
    let mut layers: Vec<Vec<(f64, f64)>> = vec![vec![(f64::INFINITY, 0.0); w * h]; bodies];
    for t in &tris {
        let layer = &mut layers[t.body as usize];
        raster(t, w, h, |i, z| {
            if z < layer[i].0 {
                layer[i] = (z, t.shade);
            }
        });
    }
    let mut stack: Vec<(f64, usize, f64)> = Vec::with_capacity(bodies);
    for i in 0..w * h {
        stack.clear();
        for (b, layer) in layers.iter().enumerate() {
            if layer[i].0.is_finite() {
                stack.push((layer[i].0, b, layer[i].1));
            }
        }
        if stack.is_empty() {
            continue;
        }
        stack.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut c = bg;
        for &(_, b, sh) in &stack {
            let s = color(b as u32, sh);
            for k in 0..3 {
                c[k] = cfg.alpha * s[k] + (1.0 - cfg.alpha) * c[k];
            }
        }
        img.rgb[3 * i..3 * i + 3].copy_from_slice(&to_u8(c));
    }
    img
}

/// Render a set of views in parallel, framed on the mesh's bounding sphere.
pub fn render(mesh: &TriMesh<f64>, views: &[ViewSpec], cfg: &RenderConfig) -> Result<Vec<Image>> {
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let bs = bounding_sphere(mesh);
    let radius = if bs.radius > 0.0 { bs.radius } else { 1.0 };
    Ok(views
        .par_iter()
        .map(|v| render_view(mesh, v, bs.center, radius, cfg))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub name: String,
    pub file: String,
    pub direction: [f64; 3],
    pub up: [f64; 3],
    pub zoom: f64,
    pub xray: bool,
    pub group: ViewGroup,
    /// World half-extent along the shorter image side, mm.
    pub half_extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewsManifest {
    pub schema: String,
    pub width: usize,
    pub height: usize,
    pub projection: String,
    pub k: f64,
    pub alpha: f64,
    pub sphere_center: [f64; 3],
    pub sphere_radius: f64,
    pub zoom_convention: String,
    pub views: Vec<ViewRecord>,
}

/// Render all 21 views into `dir` as `<name>.ppm` plus `manifest.v1`.
pub fn render_bundle(mesh: &TriMesh<f64>, dir: &Path, cfg: &RenderConfig) -> Result<ViewsManifest> {
    let views = view_set();
    let images = render(mesh, &views, cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bs = bounding_sphere(mesh);
    let radius = if bs.radius > 0.0 { bs.radius } else { 1.0 };
    let mut records = Vec::with_capacity(views.len());
    for (v, img) in views.iter().zip(&images) {
        let file = format!("{}.ppm", v.name);
        let path = dir.join(&file);
        fs::write(&path, img.to_ppm()).map_err(|e| Error::io(&path, e))?;
        #[cfg(feature = "png")]
        {
            let png = dir.join(format!("{}.png", v.name));
            fs::write(&png, img.to_png()).map_err(|e| Error::io(&png, e))?;
        }
        records.push(ViewRecord {
            name: v.name.clone(),
            file,
            direction: v.direction,
            up: v.up,
            zoom: v.zoom,
            xray: v.xray,
            group: v.group,
            half_extent: cfg.k * radius / v.zoom,
        });
    }
    let manifest = ViewsManifest {
        schema: VIEWS_MANIFEST_SCHEMA.into(),
        width: cfg.width,
        height: cfg.height,
        projection: "orthographic".into(),
        k: cfg.k,
        alpha: cfg.alpha,
        sphere_center: bs.center.to_f64(),
        sphere_radius: radius,
        zoom_convention: format!(
            "close-up zooms rise linearly from {CLOSEUP_ZOOM_MIN} to {CLOSEUP_ZOOM_MAX} in name order"
        ),
        views: records,
    };
    doc::write_file(&dir.join(VIEWS_MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Read and check an inspection bundle: every view present on disk.
pub fn render_manifest_for_agent(dir: &Path) -> Result<ViewsManifest> {
    let path = dir.join(VIEWS_MANIFEST_FILE);
    let m: ViewsManifest = doc::read_typed(&path)?;
    if m.schema != VIEWS_MANIFEST_SCHEMA {
        return Err(Error::schema("$.schema", format!("expected `{VIEWS_MANIFEST_SCHEMA}`")));
    }
    let names: Vec<&str> = m.views.iter().map(|v| v.name.as_str()).collect();
    if names != VIEW_NAMES {
        return Err(Error::schema("$.views", "view set differs from the canonical 21 views"));
    }
    for v in &m.views {
        let p: PathBuf = dir.join(&v.file);
        if !p.is_file() {
            let msg = format!("view `{}` image is missing", v.name);
            return Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, msg)));
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::box_mesh;

    fn small() -> RenderConfig {
        RenderConfig {
            width: 160,
            height: 120,
            ..Default::default()
        }
    }

    #[test]
    fn view_set_names_zooms_and_axes() {
        let v = view_set();
        assert_eq!(v.len(), 21);
        assert_eq!(v.iter().map(|x| x.name.as_str()).collect::<Vec<_>>(), VIEW_NAMES);
        let front = &v[0];
        assert_eq!((front.direction, front.up), ([-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]));
        for c in v.iter().filter(|x| x.group == ViewGroup::Closeup) {
            assert!((CLOSEUP_ZOOM_MIN..=CLOSEUP_ZOOM_MAX + 1e-12).contains(&c.zoom));
        }
        let iso_close = v.iter().find(|x| x.name == "iso_close").unwrap();
        assert!((iso_close.zoom - 1.8).abs() < 1e-12);
        let ifr = v.iter().find(|x| x.name == "iso_front_right").unwrap();
        assert!(ifr.direction.iter().all(|c| (*c + 1.0 / 3f64.sqrt()).abs() < 1e-15));
        assert_eq!(v.iter().filter(|x| x.xray).count(), 3);
    }

    #[test]
    fn front_view_right_is_plus_y() {
        let cam = Camera::new(&view_set()[0], Vec3::zero(), 1.0, 2.5);
        assert_eq!(cam.right, Vec3::of(0.0, 1.0, 0.0));
        assert_eq!(cam.up, Vec3::of(0.0, 0.0, 1.0));
    }

    #[test]
    fn cube_front_fill_matches_projection() {
        let m = box_mesh::<f64>(Vec3::splat(-0.5), Vec3::splat(0.5));
        let cfg = small();
        let img = &render(&m, &view_set()[..1], &cfg).unwrap()[0];
        let r = bounding_sphere(&m).radius;
        let side = 120.0 / (2.0 * cfg.k * r);
        let frac = img.count_foreground(cfg.background) as f64 / (120.0 * 120.0);
        let expect = (side / 120.0).powi(2);
        assert!((frac - expect).abs() / expect < 0.05, "{frac} vs {expect}");
    }

    #[test]
    fn xray_reveals_inner_body() {
        let outer = box_mesh::<f64>(Vec3::splat(-1.0), Vec3::splat(1.0));
        let inner = box_mesh::<f64>(Vec3::splat(-0.4), Vec3::splat(0.4));
        let m = TriMesh::merge("nested", &[outer, inner]);
        let cfg = small();
        let set = view_set();
        let front = set.iter().find(|v| v.name == "front").unwrap();
        let xray = set.iter().find(|v| v.name == "front_xray").unwrap();
        let imgs = render(&m, &[front.clone(), xray.clone()], &cfg).unwrap();
        assert_eq!(imgs[0].pixel(80, 60), imgs[0].pixel(80 - 10, 60 - 9));
        assert_ne!(imgs[1].pixel(80, 60), imgs[1].pixel(80 - 10, 60 - 9));
    }

    #[test]
    fn zoom_scales_silhouette() {
        let m = box_mesh::<f64>(Vec3::splat(-0.5), Vec3::splat(0.5));
        let cfg = RenderConfig::default();
        let set = view_set();
        let pick = |n: &str| set.iter().find(|v| v.name == n).unwrap().clone();
        let imgs = render(&m, &[pick("front"), pick("front_close")], &cfg).unwrap();
        let width = |img: &Image| {
            let (x0, _, x1, _) = img.foreground_bbox(cfg.background).unwrap();
            (x1 - x0 + 1) as f64
        };
        let ratio = width(&imgs[1]) / width(&imgs[0]);
        assert!((ratio / CLOSEUP_ZOOM_MIN - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn rerender_is_byte_identical() {
        let m = TriMesh::merge(
            "pair",
            &[
                box_mesh::<f64>(Vec3::zero(), Vec3::of(2.0, 1.0, 0.5)),
                crate::mesh::shapes::uv_sphere(Vec3::of(1.0, 0.5, 1.0), 0.4, 12, 8),
            ],
        );
        let a = render(&m, &view_set(), &small()).unwrap();
        let b = render(&m, &view_set(), &small()).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_ppm() == y.to_ppm()));
    }

    #[test]
    fn rotating_mesh_and_cameras_together_keeps_images() {
        use crate::geom::{mat_vec, rotation};
        let m = TriMesh::merge(
            "pair",
            &[
                box_mesh::<f64>(Vec3::zero(), Vec3::of(2.0, 1.0, 0.5)),
                box_mesh::<f64>(Vec3::of(0.5, 0.2, 0.5), Vec3::of(1.0, 0.8, 1.4)),
            ],
        );
        let r = rotation(Vec3::of(0.3, -0.8, 0.5), 1.1);
        let rm = m.transformed(|v| mat_vec(&r, v));
        let cfg = small();
        let (bs, rbs) = (bounding_sphere(&m), bounding_sphere(&rm));
        for v in view_set() {
            let mut rv = v.clone();
            rv.direction = mat_vec(&r, Vec3::from(v.direction)).to_f64();
            rv.up = mat_vec(&r, Vec3::from(v.up)).to_f64();
            let a = render_view(&m, &v, bs.center, bs.radius, &cfg);
            let b = render_view(&rm, &rv, rbs.center, rbs.radius, &cfg);
            let diff = a.rgb.chunks(3).zip(b.rgb.chunks(3)).filter(|(p, q)| p != q).count();
            assert!(diff as f64 <= 0.001 * (cfg.width * cfg.height) as f64, "{}: {diff}", v.name);
        }
    }

    #[test]
    fn bundle_round_trips_and_reports_missing_views() {
        let m = box_mesh::<f64>(Vec3::splat(-0.5), Vec3::splat(0.5));
        let dir = tempfile::tempdir().unwrap();
        let written = render_bundle(&m, dir.path(), &small()).unwrap();
        assert_eq!(render_manifest_for_agent(dir.path()).unwrap(), written);
        let ppm = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "ppm"))
            .count();
        assert_eq!(ppm, 21);
        std::fs::remove_file(dir.path().join("iso_xray.ppm")).unwrap();
        let err = render_manifest_for_agent(dir.path()).unwrap_err().to_string();
        assert!(err.contains("iso_xray"), "{err}");
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let m = TriMesh::<f64>::merge("none", &[]);
        assert!(matches!(render(&m, &view_set(), &small()), Err(Error::EmptyMesh)));
    }
}
