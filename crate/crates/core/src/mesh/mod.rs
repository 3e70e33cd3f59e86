//! Triangle meshes with canonical edge connectivity.
//!
//! Edges are numbered in order of first appearance while walking faces in
//! order, visiting `(v0,v1)`, `(v1,v2)`, `(v2,v0)` within each face. Every
//! edge carries a 4-slot neighbor tuple: slots 0 and 1 are the other two edges
//! of the first incident face (counter-clockwise, starting after the edge),
//! slots 2 and 3 the same for the second incident face. Boundary edges have
//! [`MISSING`] in slots 2 and 3.

mod features;
mod obj;

use std::collections::HashMap;

pub use features::{extract_edge_features, DEGENERATE_TOLERANCE, FEATURE_CHANNELS};
pub use obj::{load_obj, parse_obj, read_eseg, read_eseg_for, write_eseg, write_obj};

use crate::error::{Error, Result};

/// Sentinel for an absent neighbor or face.
pub const MISSING: usize = usize::MAX;

pub type Point3 = [f64; 3];

/// Edge adjacency derived from a face list.
#[derive(Debug, Clone, PartialEq)]
pub struct Connectivity {
    /// Sorted vertex pair per edge.
    pub edges: Vec<[usize; 2]>,
    pub edge_neighbors: Vec<[usize; 4]>,
    /// `sides[e][s]` is the slot that `e` occupies in the neighbor list of
    /// `edge_neighbors[e][s]`.
    pub sides: Vec<[usize; 4]>,
    pub boundary: Vec<bool>,
    /// Incident faces in discovery order; second is [`MISSING`] on boundary edges.
    pub edge_faces: Vec<[usize; 2]>,
}

/// Builds canonical edges and 4-neighbor adjacency for a triangle list.
pub fn build_connectivity(faces: &[[usize; 3]], vertex_count: usize) -> Result<Connectivity> {
    let mut key_to_edge: HashMap<[usize; 2], usize> = HashMap::with_capacity(faces.len() * 2);
    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(faces.len() * 3 / 2 + 2);
    let mut edge_faces: Vec<[usize; 2]> = Vec::with_capacity(faces.len() * 3 / 2 + 2);
    // face -> its three edge ids, in (v0v1, v1v2, v2v0) order
    let mut face_edges: Vec<[usize; 3]> = Vec::with_capacity(faces.len());
    let mut face_keys: HashMap<[usize; 3], usize> = HashMap::with_capacity(faces.len());

    for (fi, face) in faces.iter().enumerate() {
        for &v in face {
            if v >= vertex_count {
                return Err(Error::VertexIndexOutOfRange {
                    index: v as i64,
                    vertex_count,
                });
            }
        }
        if face[0] == face[1] || face[1] == face[2] || face[2] == face[0] {
            return Err(Error::DegenerateFace(fi));
        }
        let mut sorted = *face;
        sorted.sort_unstable();
        if let Some(&other) = face_keys.get(&sorted) {
            return Err(Error::DuplicateFace(other, fi));
        }
        face_keys.insert(sorted, fi);

        let mut fe = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (face[k], face[(k + 1) % 3]);
            let key = if a < b { [a, b] } else { [b, a] };
            let id = match key_to_edge.get(&key) {
                Some(&id) => {
                    let slot = &mut edge_faces[id];
                    if slot[1] != MISSING {
                        return Err(Error::NonManifoldEdge(key[0], key[1]));
                    }
                    slot[1] = fi;
                    id
                }
                None => {
                    let id = edges.len();
                    key_to_edge.insert(key, id);
                    edges.push(key);
                    edge_faces.push([fi, MISSING]);
                    id
                }
            };
            fe[k] = id;
        }
        face_edges.push(fe);
    }

    let edge_count = edges.len();
    let mut edge_neighbors = vec![[MISSING; 4]; edge_count];
    let mut boundary = vec![false; edge_count];
    for e in 0..edge_count {
        for (side, &f) in edge_faces[e].iter().enumerate() {
            if f == MISSING {
                boundary[e] = true;
                continue;
            }
            let fe = &face_edges[f];
            let k = fe
                .iter()
                .position(|&x| x == e)
                .expect("edge belongs to its face");
            edge_neighbors[e][2 * side] = fe[(k + 1) % 3];
            edge_neighbors[e][2 * side + 1] = fe[(k + 2) % 3];
        }
    }

    let mut sides = vec![[MISSING; 4]; edge_count];
    for e in 0..edge_count {
        for s in 0..4 {
            let n = edge_neighbors[e][s];
            if n == MISSING {
                continue;
            }
            sides[e][s] = edge_neighbors[n]
                .iter()
                .position(|&x| x == e)
                .expect("neighbor relation is symmetric");
        }
    }

    Ok(Connectivity {
        edges,
        edge_neighbors,
        sides,
        boundary,
        edge_faces,
    })
}

/// An immutable triangle mesh together with its edge connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    conn: Connectivity,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let conn = build_connectivity(&faces, vertices.len())?;
        Ok(Self {
            vertices,
            faces,
            conn,
        })
    }

    /// Same connectivity, moved vertices.
    pub fn with_vertices(&self, vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
            conn: self.conn.clone(),
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.conn.edges
    }

    pub fn edge_neighbors(&self) -> &[[usize; 4]] {
        &self.conn.edge_neighbors
    }

    pub fn sides(&self) -> &[[usize; 4]] {
        &self.conn.sides
    }

    pub fn boundary(&self) -> &[bool] {
        &self.conn.boundary
    }

    pub fn edge_faces(&self) -> &[[usize; 2]] {
        &self.conn.edge_faces
    }

    pub fn connectivity(&self) -> &Connectivity {
        &self.conn
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.conn.edges.len()
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.conn.boundary.iter().filter(|&&b| b).count()
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_edge_count() == 0
    }

    /// Number of boundary loops (holes).
    pub fn hole_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertex_count()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut on_boundary = vec![false; self.vertex_count()];
        for (e, &[a, b]) in self.conn.edges.iter().enumerate() {
            if self.conn.boundary[e] {
                on_boundary[a] = true;
                on_boundary[b] = true;
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        (0..self.vertex_count())
            .filter(|&v| on_boundary[v] && find(&mut parent, v) == v)
            .count()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point3 {
        let [a, b] = self.conn.edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        [
            0.5 * (p[0] + q[0]),
            0.5 * (p[1] + q[1]),
            0.5 * (p[2] + q[2]),
        ]
    }

    pub fn edge_midpoints(&self) -> Vec<Point3> {
        (0..self.edge_count())
            .map(|e| self.edge_midpoint(e))
            .collect()
    }

    /// Euler characteristic `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.face_count() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tetrahedron() -> Mesh {
        let s = 1.0 / 2f64.sqrt();
        Mesh::new(
            vec![
                [1.0, 0.0, -s],
                [-1.0, 0.0, -s],
                [0.0, 1.0, s],
                [0.0, -1.0, s],
            ],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn tetrahedron_is_closed_with_full_neighborhoods() {
        let m = tetrahedron();
        assert_eq!(
            (m.vertex_count(), m.face_count(), m.edge_count()),
            (4, 4, 6)
        );
        assert_eq!(m.euler_characteristic(), 2);
        assert_eq!(3 * m.face_count(), 2 * m.edge_count());
        for nb in m.edge_neighbors() {
            assert!(nb.iter().all(|&n| n != MISSING));
            let mut s = nb.to_vec();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 4);
        }
        assert!(m.is_closed());
        assert_eq!(m.hole_count(), 0);
    }

    #[test]
    fn single_triangle_is_all_boundary() {
        let m = Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(m.edge_count(), 3);
        assert_eq!(m.edges(), &[[0, 1], [1, 2], [0, 2]]);
        assert_eq!(m.edge_neighbors()[0], [1, 2, MISSING, MISSING]);
        assert_eq!(m.edge_neighbors()[1], [2, 0, MISSING, MISSING]);
        assert_eq!(m.edge_neighbors()[2], [0, 1, MISSING, MISSING]);
        assert!(m.boundary().iter().all(|&b| b));
        assert_eq!(m.hole_count(), 1);
    }

    #[test]
    fn two_triangles_sharing_an_edge() {
        // Hand-drawn oracle:
        //   3 --- 2
        //   | \ F1|
        //   |F0 \ |
        //   0 --- 1
        // F0 = (0,1,3): edges e0=(0,1) e1=(1,3) e2=(0,3)
        // F1 = (1,2,3): edges (1,2)=e3 (2,3)=e4 (3,1)=e1
        let m = Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
            vec![[0, 1, 3], [1, 2, 3]],
        )
        .unwrap();
        assert_eq!(m.edges(), &[[0, 1], [1, 3], [0, 3], [1, 2], [2, 3]]);
        // shared edge e1: in F0 at k=1 -> (e2, e0); in F1 at k=2 -> (e3, e4)
        assert_eq!(m.edge_neighbors()[1], [2, 0, 3, 4]);
        assert!(!m.boundary()[1]);
        for e in [0, 2, 3, 4] {
            let nb = m.edge_neighbors()[e];
            assert!(m.boundary()[e]);
            assert_eq!(&nb[2..], &[MISSING, MISSING]);
            assert!(nb[..2].iter().all(|&n| n != MISSING));
        }
        assert_eq!(m.edge_neighbors()[0], [1, 2, MISSING, MISSING]);
        assert_eq!(m.edge_neighbors()[4], [1, 3, MISSING, MISSING]);
        // sides: e1 sits in slot 0 of e0's list
        assert_eq!(m.sides()[1][1], 0);
    }

    #[test]
    fn rejects_bad_faces() {
        let v = vec![[0.0; 3]; 4];
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 1, 1]]),
            Err(Error::DegenerateFace(0))
        ));
        assert!(matches!(
            Mesh::new(v.clone(), vec![[0, 1, 2], [0, 1, 3], [1, 0, 3], [0, 1, 2]]),
            Err(Error::DuplicateFace(..)) | Err(Error::NonManifoldEdge(..))
        ));
        // three faces around one edge
        let v5 = vec![[0.0; 3]; 5];
        assert!(matches!(
            Mesh::new(v5, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]),
            Err(Error::NonManifoldEdge(0, 1))
        ));
        assert!(matches!(
            Mesh::new(v, vec![[0, 1, 7]]),
            Err(Error::VertexIndexOutOfRange { index: 7, .. })
        ));
        assert!(matches!(Mesh::new(vec![], vec![]), Err(Error::EmptyMesh)));
    }

    #[test]
    fn neighbor_relation_is_symmetric_and_sides_consistent() {
        let m = tetrahedron();
        for e in 0..m.edge_count() {
            for s in 0..4 {
                let n = m.edge_neighbors()[e][s];
                let back = m.sides()[e][s];
                assert_eq!(m.edge_neighbors()[n][back], e);
            }
        }
    }
}
