//! Similarity-invariant per-edge input features.
//!
//! Channel layout:
//! 0. angle between the unit normals of the two incident faces,
//! 1–2. inner angles at the vertices opposite the edge, ascending,
//! 3–4. edge length over the height of the opposite vertex, ascending.
//!
//! A missing face (boundary edge) contributes 0 for its angle and ratio and
//! the dihedral is 0, so holes show up as an explicit signature.

use super::{Mesh, Point3, MISSING};
use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;

pub const FEATURE_CHANNELS: usize = 5;

/// Edge lengths or face areas below this are rejected as degenerate.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

struct FaceGeom {
    unit_normal: Point3,
    area: f64,
}

fn face_geometry(mesh: &Mesh, f: usize) -> Result<FaceGeom> {
    let [a, b, c] = mesh.faces()[f];
    let v = mesh.vertices();
    let n = cross(sub(v[b], v[a]), sub(v[c], v[a]));
    let len = norm(n);
    let area = 0.5 * len;
    if area.is_nan() || area < DEGENERATE_TOLERANCE {
        return Err(Error::DegenerateGeometry(format!(
            "face {f} has area {area:e}"
        )));
    }
    Ok(FaceGeom {
        unit_normal: [n[0] / len, n[1] / len, n[2] / len],
        area,
    })
}

/// Computes the 5-channel feature map for every edge of `mesh`.
pub fn extract_edge_features(mesh: &Mesh) -> Result<FeatureMap> {
    let faces: Vec<FaceGeom> = (0..mesh.face_count())
        .map(|f| face_geometry(mesh, f))
        .collect::<Result<_>>()?;
    let v = mesh.vertices();
    let e_count = mesh.edge_count();
    let mut out = FeatureMap::zeros(FEATURE_CHANNELS, e_count);

    for e in 0..e_count {
        let [p, q] = mesh.edges()[e];
        let edge_vec = sub(v[q], v[p]);
        let len = norm(edge_vec);
        if len.is_nan() || len < DEGENERATE_TOLERANCE {
            return Err(Error::DegenerateGeometry(format!(
                "edge {e} has length {len:e}"
            )));
        }

        let mut angles = [0.0f64; 2];
        let mut ratios = [0.0f64; 2];
        let inc = mesh.edge_faces()[e];
        for (side, &f) in inc.iter().enumerate() {
            if f == MISSING {
                continue;
            }
            let o = *mesh.faces()[f]
                .iter()
                .find(|&&x| x != p && x != q)
                .expect("triangle has an opposite vertex");
            let (a, b) = (sub(v[p], v[o]), sub(v[q], v[o]));
            let cos = (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0);
            angles[side] = cos.acos();
            // height = 2 * area / len  =>  len / height = len^2 / (2 * area)
            ratios[side] = len * len / (2.0 * faces[f].area);
        }
        let dihedral = if inc[1] == MISSING {
            0.0
        } else {
            let d = dot(faces[inc[0]].unit_normal, faces[inc[1]].unit_normal);
            d.clamp(-1.0, 1.0).acos()
        };
        angles.sort_by(f64::total_cmp);
        ratios.sort_by(f64::total_cmp);

        out.set(0, e, dihedral);
        out.set(1, e, angles[0]);
        out.set(2, e, angles[1]);
        out.set(3, e, ratios[0]);
        out.set(4, e, ratios[1]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tetra(scale: f64) -> Mesh {
        let s = scale / 2f64.sqrt();
        Mesh::new(
            vec![
                [scale, 0.0, -s],
                [-scale, 0.0, -s],
                [0.0, scale, s],
                [0.0, -scale, s],
            ],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn regular_tetrahedron_matches_analytic_values() {
        // analytic: outward normals of a regular tetrahedron have dot -1/3,
        // equilateral inner angle pi/3, side / height = 2 / sqrt(3)
        let fm = extract_edge_features(&tetra(0.5)).unwrap();
        let dihedral = (-1.0f64 / 3.0).acos();
        let ratio = 2.0 / 3f64.sqrt();
        for e in 0..6 {
            assert!((fm.get(0, e) - dihedral).abs() < 1e-12);
            assert!((fm.get(0, e) - 1.910633).abs() < 1e-6);
            assert!((fm.get(1, e) - PI / 3.0).abs() < 1e-12);
            assert!((fm.get(2, e) - PI / 3.0).abs() < 1e-12);
            assert!((fm.get(3, e) - ratio).abs() < 1e-12);
            assert!((fm.get(4, e) - 1.154701).abs() < 1e-6);
        }
    }

    #[test]
    fn single_triangle_pads_missing_side_with_zero() {
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let fm = extract_edge_features(&m).unwrap();
        for e in 0..3 {
            assert_eq!(fm.get(0, e), 0.0);
            assert_eq!(fm.get(1, e), 0.0);
            assert!(fm.get(2, e) > 0.0);
            assert_eq!(fm.get(3, e), 0.0);
            assert!(fm.get(4, e) > 0.0);
        }
        // hypotenuse (1,2): opposite angle pi/2, ratio sqrt2 / (1/sqrt2) = 2
        assert!((fm.get(2, 1) - PI / 2.0).abs() < 1e-12);
        assert!((fm.get(4, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_faces_are_rejected() {
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(
            extract_edge_features(&m),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn scaled_and_moved_tetrahedron_has_same_features() {
        let a = extract_edge_features(&tetra(1.0)).unwrap();
        let m = tetra(7.0);
        let moved: Vec<Point3> = m
            .vertices()
            .iter()
            .map(|p| [p[1] + 3.0, -p[0] - 1.0, p[2] + 0.5])
            .collect();
        let b = extract_edge_features(&m.with_vertices(moved).unwrap()).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-6);
    }
}
