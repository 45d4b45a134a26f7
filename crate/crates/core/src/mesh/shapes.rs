//! Closed convex solids used by fixtures and tests.

use crate::geom::Vec3;
use crate::scalar::Scalar;

use super::TriMesh;

fn build<T: Scalar>(name: &str, pts: Vec<[f64; 3]>, mut tris: Vec<[u32; 3]>, center: [f64; 3]) -> TriMesh<T> {
    // Convex input: wind every triangle so its normal points away from `center`.
    for t in &mut tris {
        let [a, b, c] = t.map(|i| pts[i as usize]);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        let g = [0, 1, 2].map(|k| (a[k] + b[k] + c[k]) / 3.0 - center[k]);
        if n[0] * g[0] + n[1] * g[1] + n[2] * g[2] < 0.0 {
            t.swap(1, 2);
        }
    }
    TriMesh {
        name: name.to_string(),
        vertices: pts.iter().map(|p| Vec3::of(p[0], p[1], p[2])).collect(),
        body_id: vec![0; tris.len()],
        triangles: tris,
        dropped_degenerate: 0,
    }
}

fn quad(out: &mut Vec<[u32; 3]>, a: u32, b: u32, c: u32, d: u32) {
    out.push([a, b, c]);
    out.push([a, c, d]);
}

pub fn box_mesh<T: Scalar>(min: Vec3<T>, max: Vec3<T>) -> TriMesh<T> {
    let (lo, hi) = (min.to_f64(), max.to_f64());
    let pts: Vec<[f64; 3]> = (0..8)
        .map(|i| {
            [
                if i & 1 == 0 { lo[0] } else { hi[0] },
                if i & 2 == 0 { lo[1] } else { hi[1] },
                if i & 4 == 0 { lo[2] } else { hi[2] },
            ]
        })
        .collect();
    let mut tris = Vec::new();
    for [a, b, c, d] in [[0, 1, 3, 2], [4, 5, 7, 6], [0, 1, 5, 4], [2, 3, 7, 6], [0, 2, 6, 4], [1, 3, 7, 5]] {
        quad(&mut tris, a, b, c, d);
    }
    let center = [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k]));
    build("box", pts, tris, center)
}

/// Straight prism of regular `sides`-gon section (circumradius `radius`)
/// running from `a` to `b`.
pub fn prism_between<T: Scalar>(a: [f64; 3], b: [f64; 3], radius: f64, sides: usize) -> TriMesh<T> {
    let sides = sides.max(3);
    let d = Vec3::<f64>::of(b[0] - a[0], b[1] - a[1], b[2] - a[2]).normalize();
    let helper = if d.x.abs() < 0.9 { Vec3::unit(0) } else { Vec3::unit(1) };
    let u = d.cross(helper).normalize();
    let w = d.cross(u);
    let mut pts = Vec::with_capacity(2 * sides);
    for end in [a, b] {
        for k in 0..sides {
            let th = std::f64::consts::TAU * k as f64 / sides as f64;
            let off = u * (radius * th.cos()) + w * (radius * th.sin());
            pts.push([end[0] + off.x, end[1] + off.y, end[2] + off.z]);
        }
    }
    let s = sides as u32;
    let mut tris = Vec::new();
    for k in 0..s {
        let k1 = (k + 1) % s;
        quad(&mut tris, k, k1, s + k1, s + k);
    }
    for k in 1..s - 1 {
        tris.push([0, k, k + 1]);
        tris.push([s, s + k, s + k + 1]);
    }
    let center = [0, 1, 2].map(|k| 0.5 * (a[k] + b[k]));
    build("prism", pts, tris, center)
}

/// Latitude/longitude sphere with `n_lon` segments and `n_lat` bands.
pub fn uv_sphere<T: Scalar>(center: Vec3<T>, radius: f64, n_lon: usize, n_lat: usize) -> TriMesh<T> {
    let (n_lon, n_lat) = (n_lon.max(3), n_lat.max(2));
    let c = center.to_f64();
    let mut pts = vec![[c[0], c[1], c[2] + radius], [c[0], c[1], c[2] - radius]];
    for i in 1..n_lat {
        let phi = std::f64::consts::PI * i as f64 / n_lat as f64;
        for j in 0..n_lon {
            let th = std::f64::consts::TAU * j as f64 / n_lon as f64;
            pts.push([
                c[0] + radius * phi.sin() * th.cos(),
                c[1] + radius * phi.sin() * th.sin(),
                c[2] + radius * phi.cos(),
            ]);
        }
    }
    let ring = |i: usize, j: usize| (2 + (i - 1) * n_lon + j % n_lon) as u32;
    let mut tris = Vec::new();
    for j in 0..n_lon {
        tris.push([0, ring(1, j), ring(1, j + 1)]);
        tris.push([1, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)]);
        for i in 1..n_lat - 1 {
            quad(&mut tris, ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
        }
    }
    build("sphere", pts, tris, c)
}
