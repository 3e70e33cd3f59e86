//! Geometric augmentation: per-axis scaling, vertex sliding, edge flips.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;

use super::LabeledSample;
use crate::error::{Error, Result};
use crate::mesh::{extract_edge_features, Mesh, Point3, DEGENERATE_TOLERANCE};

pub const SCALE_RANGE: (f64, f64) = (0.9, 1.1);
/// Vertices whose largest incident dihedral exceeds this are never slid.
pub const SLIDE_FLATNESS: f64 = 0.49;
pub const SLIDE_STEP: (f64, f64) = (0.2, 0.5);
pub const MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub scale_verts: bool,
    /// Fraction of vertices considered for sliding.
    pub slide_verts: f64,
    /// Fraction of interior edges considered for flipping.
    pub flip_edges: f64,
}

impl AugmentConfig {
    pub fn is_identity(&self) -> bool {
        !self.scale_verts && self.slide_verts == 0.0 && self.flip_edges == 0.0
    }
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn face_normal(v: &[Point3], f: [usize; 3]) -> Point3 {
    cross(sub(v[f[1]], v[f[0]]), sub(v[f[2]], v[f[0]]))
}

/// Every face keeps a non-degenerate area and does not turn over.
fn faces_valid(before: &[Point3], after: &[Point3], faces: &[[usize; 3]]) -> bool {
    faces.iter().all(|&f| {
        let n = face_normal(after, f);
        let area2 = dot(n, n).sqrt();
        let short = (0..3).any(|k| {
            let d = sub(after[f[k]], after[f[(k + 1) % 3]]);
            dot(d, d).sqrt() < DEGENERATE_TOLERANCE
        });
        area2 > 2.0 * DEGENERATE_TOLERANCE && !short && dot(n, face_normal(before, f)) > 0.0
    })
}

fn scale<R: Rng + ?Sized>(v: &mut [Point3], rng: &mut R) {
    let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(SCALE_RANGE.0..SCALE_RANGE.1));
    for p in v {
        for k in 0..3 {
            p[k] *= s[k];
        }
    }
}

fn slide<R: Rng + ?Sized>(
    mesh: &Mesh,
    dihedral: &[f64],
    fraction: f64,
    rng: &mut R,
) -> Vec<Point3> {
    let nv = mesh.vertex_count();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); nv];
    let mut max_dihedral = vec![0.0f64; nv];
    let mut on_boundary = vec![false; nv];
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        nbrs[a].push(b);
        nbrs[b].push(a);
        for x in [a, b] {
            max_dihedral[x] = max_dihedral[x].max(dihedral[e]);
            on_boundary[x] |= mesh.boundary()[e];
        }
    }
    let mut out = mesh.vertices().to_vec();
    let count = ((fraction * nv as f64).round() as usize).min(nv);
    for v in sample(rng, nv, count).into_iter() {
        if on_boundary[v] || max_dihedral[v] >= SLIDE_FLATNESS || nbrs[v].is_empty() {
            continue;
        }
        let to = nbrs[v][rng.random_range(0..nbrs[v].len())];
        let t = rng.random_range(SLIDE_STEP.0..SLIDE_STEP.1);
        let (p, q) = (mesh.vertices()[v], mesh.vertices()[to]);
        out[v] = [
            p[0] + t * (q[0] - p[0]),
            p[1] + t * (q[1] - p[1]),
            p[2] + t * (q[2] - p[2]),
        ];
    }
    out
}

fn key(a: usize, b: usize) -> [usize; 2] {
    [a.min(b), a.max(b)]
}

/// Flips a random subset of interior edges. Returns the new faces and, for
/// each flipped edge, its new vertex pair mapped to the old one.
type FlipOrigins = HashMap<[usize; 2], [usize; 2]>;

fn flip<R: Rng + ?Sized>(
    mesh: &Mesh,
    fraction: f64,
    rng: &mut R,
) -> (Vec<[usize; 3]>, FlipOrigins) {
    let v = mesh.vertices();
    let mut faces = mesh.faces().to_vec();
    let mut edge_faces: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for (f, face) in faces.iter().enumerate() {
        for k in 0..3 {
            edge_faces
                .entry(key(face[k], face[(k + 1) % 3]))
                .or_default()
                .push(f);
        }
    }
    let mut origin: HashMap<[usize; 2], [usize; 2]> = HashMap::new();
    let ne = mesh.edge_count();
    let count = ((fraction * ne as f64).round() as usize).min(ne);
    for e in sample(rng, ne, count).into_iter() {
        let [u, w] = mesh.edges()[e];
        let k = key(u, w);
        let Some(inc) = edge_faces.get(&k).filter(|f| f.len() == 2).cloned() else {
            continue;
        };
        let (f1, f2) = (inc[0], inc[1]);
        // orient so that f1 walks u -> w
        let pos = |f: usize, x: usize| {
            faces[f]
                .iter()
                .position(|&y| y == x)
                .expect("vertex in face")
        };
        let (u, w) = if faces[f1][(pos(f1, u) + 1) % 3] == w {
            (u, w)
        } else {
            (w, u)
        };
        let a = faces[f1][(pos(f1, w) + 1) % 3];
        let b = faces[f2][(pos(f2, u) + 1) % 3];
        if a == b || edge_faces.contains_key(&key(a, b)) {
            continue;
        }
        let (n1, n2) = ([a, u, b], [b, w, a]);
        let before = [face_normal(v, faces[f1]), face_normal(v, faces[f2])];
        let ok = [n1, n2].iter().all(|&f| {
            let n = face_normal(v, f);
            dot(n, n).sqrt() > 2.0 * DEGENERATE_TOLERANCE && before.iter().all(|&m| dot(n, m) > 0.0)
        });
        if !ok {
            continue;
        }
        for (f, new) in [(f1, n1), (f2, n2)] {
            for k in 0..3 {
                let list = edge_faces
                    .get_mut(&key(faces[f][k], faces[f][(k + 1) % 3]))
                    .expect("edge");
                list.retain(|&x| x != f);
            }
            faces[f] = new;
        }
        edge_faces.remove(&k);
        for (f, new) in [(f1, n1), (f2, n2)] {
            for k in 0..3 {
                edge_faces
                    .entry(key(new[k], new[(k + 1) % 3]))
                    .or_default()
                    .push(f);
            }
        }
        let old = origin.remove(&k).unwrap_or(k);
        origin.insert(key(a, b), old);
    }
    (faces, origin)
}

/// One augmented copy of `sample`. Scaling and sliding keep connectivity and
/// labels; flipped edges inherit the label of the edge they replace.
pub fn augment<R: Rng + ?Sized>(
    s: &LabeledSample,
    rng: &mut R,
    cfg: &AugmentConfig,
) -> Result<LabeledSample> {
    if cfg.is_identity() {
        return Ok(s.clone());
    }
    let dihedral: Vec<f64> = if cfg.slide_verts > 0.0 {
        extract_edge_features(&s.mesh)?.values().row(0).to_vec()
    } else {
        Vec::new()
    };
    for _ in 0..MAX_ATTEMPTS {
        let mut verts = if cfg.slide_verts > 0.0 {
            slide(&s.mesh, &dihedral, cfg.slide_verts, rng)
        } else {
            s.mesh.vertices().to_vec()
        };
        if cfg.scale_verts {
            scale(&mut verts, rng);
        }
        if !faces_valid(s.mesh.vertices(), &verts, s.mesh.faces()) {
            continue;
        }
        let moved = s.mesh.with_vertices(verts)?;
        if cfg.flip_edges == 0.0 {
            let out = LabeledSample {
                mesh: moved,
                labels: s.labels.clone(),
                valid_mask: s.valid_mask.clone(),
            };
            if extract_edge_features(&out.mesh).is_err() {
                continue;
            }
            return Ok(out);
        }
        let (faces, origin) = flip(&moved, cfg.flip_edges, rng);
        let Ok(mesh) = Mesh::new(moved.vertices().to_vec(), faces) else {
            continue;
        };
        if extract_edge_features(&mesh).is_err() {
            continue;
        }
        let by_key: HashMap<[usize; 2], usize> = s
            .mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &k)| (k, e))
            .collect();
        let old_ids: Vec<usize> = mesh
            .edges()
            .iter()
            .map(|&k| by_key[origin.get(&k).unwrap_or(&k)])
            .collect();
        return Ok(LabeledSample {
            labels: old_ids.iter().map(|&e| s.labels[e]).collect(),
            valid_mask: old_ids.iter().map(|&e| s.valid_mask[e]).collect(),
            mesh,
        });
    }
    Err(Error::DegenerateAfterAugment(MAX_ATTEMPTS))
}

/// `num_aug` augmented variants of `sample`.
pub fn augment_variants<R: Rng + ?Sized>(
    s: &LabeledSample,
    rng: &mut R,
    cfg: &AugmentConfig,
    num_aug: usize,
) -> Result<Vec<LabeledSample>> {
    (0..num_aug).map(|_| augment(s, rng, cfg)).collect()
}
