//! Wavefront OBJ subset and `.eseg` edge-label files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, Point3};
use crate::error::{Error, Result};

/// Loads `v x y z` / `f i j k` records (1-based indices). Face vertex order is kept.
pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices: Vec<Point3> = Vec::new();
    // raw 1-based (or negative relative) indices, resolved after all vertices are read
    let mut raw_faces: Vec<(usize, [i64; 3], usize)> = Vec::new();
    let mut skipped: BTreeSet<String> = BTreeSet::new();

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let tag = tokens.next().unwrap_or("");
        match tag {
            "v" => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line: line_no,
                            msg: format!("bad coordinate {t:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if coords.len() != 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "vertex needs three coordinates".into(),
                    });
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            "f" => {
                let idx: Vec<i64> = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        head.parse::<i64>().map_err(|_| Error::Parse {
                            line: line_no,
                            msg: format!("bad face index {t:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(Error::NonTriangleFace {
                        line: line_no,
                        count: idx.len(),
                    });
                }
                raw_faces.push((line_no, [idx[0], idx[1], idx[2]], vertices.len()));
            }
            other => {
                if skipped.insert(other.to_string()) {
                    log::warn!("skipping unsupported OBJ record type {other:?} (line {line_no})");
                }
            }
        }
    }

    if vertices.is_empty() || raw_faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let vertex_count = vertices.len();
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (_line, raw, seen) in raw_faces {
        let mut face = [0usize; 3];
        for k in 0..3 {
            let r = raw[k];
            let resolved = if r > 0 {
                r - 1
            } else if r < 0 {
                seen as i64 + r
            } else {
                -1
            };
            if resolved < 0 || resolved as usize >= vertex_count {
                return Err(Error::VertexIndexOutOfRange {
                    index: r,
                    vertex_count,
                });
            }
            face[k] = resolved as usize;
        }
        faces.push(face);
    }
    Mesh::new(vertices, faces)
}

pub fn write_obj(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 24);
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads one integer class label per line. Blank lines are ignored.
pub fn read_eseg(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let t = l.trim();
            // tolerate "2.0" style labels written by float-based tools
            t.parse::<usize>()
                .ok()
                .or_else(|| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| *v >= 0.0 && v.fract() == 0.0)
                        .map(|v| v as usize)
                })
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    msg: format!("bad label {t:?}"),
                })
        })
        .collect()
}

/// Reads labels and checks them against the mesh edge count.
pub fn read_eseg_for(mesh: &Mesh, path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let labels = read_eseg(path)?;
    if labels.len() != mesh.edge_count() {
        return Err(Error::LabelCountMismatch {
            labels: labels.len(),
            edges: mesh.edge_count(),
        });
    }
    Ok(labels)
}

pub fn write_eseg(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
