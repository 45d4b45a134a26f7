//! STL (binary and ASCII) and OBJ readers, plus a debug OBJ writer.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::TriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Stl,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "stl" => Some(MeshFormat::Stl),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

pub fn load_mesh<T: Scalar>(path: &Path) -> Result<TriMesh<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
    load_mesh_bytes(&bytes, MeshFormat::from_path(path), name)
}

/// Parse mesh bytes. Without a format hint, OBJ is assumed when the data does
/// not look like STL.
pub fn load_mesh_bytes<T: Scalar>(bytes: &[u8], format: Option<MeshFormat>, name: &str) -> Result<TriMesh<T>> {
    let format = format.unwrap_or_else(|| {
        if is_binary_stl(bytes) || starts_with_solid(bytes) {
            MeshFormat::Stl
        } else {
            MeshFormat::Obj
        }
    });
    let (positions, faces, bodies) = match format {
        MeshFormat::Stl => {
            if is_binary_stl(bytes) {
                read_binary_stl(bytes)?
            } else if starts_with_solid(bytes) {
                read_ascii_stl(bytes)?
            } else if bytes.len() >= 84 {
                let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]);
                return Err(Error::parse(
                    0,
                    format!(
                        "binary STL declares {n} triangles but holds {} bytes (expected {})",
                        bytes.len(),
                        84 + 50 * n as u64
                    ),
                ));
            } else {
                return Err(Error::parse(0, "file is too short to be an STL"));
            }
        }
        MeshFormat::Obj => read_obj(bytes)?,
    };
    TriMesh::from_indexed(name, &positions, &faces, &bodies).map_err(|e| match e {
        Error::InvalidArgument(reason) => Error::parse(0, reason),
        other => other,
    })
}

fn starts_with_solid(bytes: &[u8]) -> bool {
    let trimmed = bytes.iter().position(|b| !b.is_ascii_whitespace()).map_or(&[][..], |i| &bytes[i..]);
    trimmed.starts_with(b"solid") && !is_binary_stl(bytes)
}

fn is_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as u64;
    84 + 50 * n == bytes.len() as u64
}

type Raw = (Vec<[f64; 3]>, Vec<[u32; 3]>, Vec<u32>);

fn read_binary_stl(bytes: &[u8]) -> Result<Raw> {
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let mut positions = Vec::with_capacity(3 * n);
    let mut faces = Vec::with_capacity(n);
    for t in 0..n {
        let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
        for k in 0..3 {
            let off = 12 + 12 * k;
            let c = [0, 1, 2].map(|a| {
                let o = off + 4 * a;
                f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]) as f64
            });
            if !c.iter().all(|v| v.is_finite()) {
                return Err(Error::parse(0, format!("triangle {t} has a non-finite coordinate")));
            }
            positions.push(c);
        }
        let base = 3 * t as u32;
        faces.push([base, base + 1, base + 2]);
    }
    Ok((positions, faces, vec![0; n]))
}

fn read_ascii_stl(bytes: &[u8]) -> Result<Raw> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "ASCII STL is not valid UTF-8")
    })?;
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut bodies = Vec::new();
    let mut body = 0u32;
    let mut solids = 0u32;
    let mut corners: Vec<[f64; 3]> = Vec::new();
    let mut in_facet = false;
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let mut tok = line.split_whitespace();
        let Some(head) = tok.next() else { continue };
        match head {
            "solid" => {
                body = solids;
                solids += 1;
            }
            "endsolid" | "outer" | "endloop" => {}
            "facet" => {
                if in_facet {
                    return Err(Error::parse(ln, "facet opened inside a facet"));
                }
                in_facet = true;
                corners.clear();
            }
            "vertex" => {
                if !in_facet {
                    return Err(Error::parse(ln, "vertex outside a facet"));
                }
                let c: Vec<f64> = tok
                    .map(|t| t.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad coordinate `{t}`"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 || !c.iter().all(|v| v.is_finite()) {
                    return Err(Error::parse(ln, "vertex needs three finite coordinates"));
                }
                corners.push([c[0], c[1], c[2]]);
            }
            "endfacet" => {
                if !in_facet || corners.len() != 3 {
                    return Err(Error::parse(ln, "facet must have exactly three vertices"));
                }
                in_facet = false;
                let base = positions.len() as u32;
                positions.extend_from_slice(&corners);
                faces.push([base, base + 1, base + 2]);
                bodies.push(body);
            }
            other => return Err(Error::parse(ln, format!("unexpected keyword `{other}`"))),
        }
    }
    if in_facet {
        return Err(Error::parse(text.lines().count(), "unterminated facet"));
    }
    Ok((positions, faces, bodies))
}

fn read_obj(bytes: &[u8]) -> Result<Raw> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "OBJ is not valid UTF-8")
    })?;
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut faces = Vec::new();
    let mut bodies = Vec::new();
    let mut body = 0u32;
    let mut body_used = false;
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        let Some(head) = tok.next() else { continue };
        match head {
            "v" => {
                let c: Vec<f64> = tok
                    .map(|t| t.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad coordinate `{t}`"))))
                    .collect::<Result<_>>()?;
                if !(3..=4).contains(&c.len()) || !c[..3].iter().all(|v| v.is_finite()) {
                    return Err(Error::parse(ln, "vertex needs three finite coordinates"));
                }
                positions.push([c[0], c[1], c[2]]);
            }
            "f" => {
                let mut idx = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| Error::parse(ln, format!("bad face index `{t}`")))?;
                    let n = positions.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 || resolved >= n {
                        return Err(Error::parse(ln, format!("face index {i} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(Error::parse(ln, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                    bodies.push(body);
                }
                body_used = true;
            }
            "o" | "g" => {
                if body_used {
                    body += 1;
                    body_used = false;
                }
            }
            "vn" | "vt" | "vp" | "s" | "usemtl" | "mtllib" | "l" => {}
            other => return Err(Error::parse(ln, format!("unsupported record `{other}`"))),
        }
    }
    Ok((positions, faces, bodies))
}

/// Debug OBJ dump; one `o` group per body.
pub fn to_obj<T: Scalar>(mesh: &TriMesh<T>) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x.f64(), v.y.f64(), v.z.f64());
    }
    let mut current = None;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let b = mesh.body_id[t];
        if current != Some(b) {
            let _ = writeln!(out, "o body{b}");
            current = Some(b);
        }
        let _ = writeln!(out, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1);
    }
    out
}
