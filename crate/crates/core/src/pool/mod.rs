//! Edge-collapse pooling driven by feature magnitude, and its inverse.
//!
//! A pooling pass ranks edges once by the L2 norm of their incoming
//! features and walks that frozen order, collapsing every edge that is legal
//! at the time it is reached until the edge budget is met. Collapsing an
//! interior edge `(u, v)` removes its two triangles; in each of them the two
//! side edges fuse, so five edges become two. Which pre-pool edges ended up in
//! which surviving edge is recorded in a sparse averaging matrix that pools
//! features forward and routes them back on unpooling.
//!
//! An edge is collapsible when
//! - it and its four neighbors are interior (holes are never touched),
//! - it was not produced by a fusion earlier in the same pass,
//! - its endpoints are not both on a boundary,
//! - it passes the link condition: the endpoint 1-rings share exactly the two
//!   opposite vertices, and the faces `(u,a,b)` / `(v,a,b)` do not both exist.

mod sparse;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub use sparse::{sparse_apply, SparseMatrix};

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::mesh::{Mesh, Point3};

/// Edge ids ordered by ascending feature L2 norm; ties by lower id.
pub fn collapse_priority(x: &FeatureMap) -> Vec<usize> {
    let norms = x.edge_norms();
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    order
}

/// Everything needed to undo one pooling pass.
#[derive(Debug, Clone)]
pub struct PoolHistory {
    pre_pool_edge_count: usize,
    /// pooled × pre-pool averaging weights
    groups: SparseMatrix,
    /// pre-pool edge -> pooled edge
    membership: Vec<usize>,
    pre_pool_mesh: Arc<Mesh>,
    collapsed: Vec<(usize, f64)>,
}

impl PoolHistory {
    /// History of a pass that collapsed nothing.
    pub fn identity(mesh: Arc<Mesh>) -> Self {
        let n = mesh.edge_count();
        Self {
            pre_pool_edge_count: n,
            groups: SparseMatrix::identity(n),
            membership: (0..n).collect(),
            pre_pool_mesh: mesh,
            collapsed: Vec::new(),
        }
    }

    pub fn pre_pool_edge_count(&self) -> usize {
        self.pre_pool_edge_count
    }

    pub fn pooled_edge_count(&self) -> usize {
        self.groups.rows()
    }

    pub fn groups(&self) -> &SparseMatrix {
        &self.groups
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn pre_pool_mesh(&self) -> &Arc<Mesh> {
        &self.pre_pool_mesh
    }

    /// Collapsed pre-pool edge ids with their priority (feature norm), in collapse order.
    pub fn collapsed(&self) -> &[(usize, f64)] {
        &self.collapsed
    }
}

#[derive(Debug, Clone)]
pub struct PoolOutput {
    pub mesh: Mesh,
    pub features: FeatureMap,
    pub history: PoolHistory,
}

struct Collapser {
    pos: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vert_faces: Vec<Vec<usize>>,
    vert_nbrs: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    edge_key: HashMap<[usize; 2], usize>,
    rep_key: Vec<[usize; 2]>,
    rep_alive: Vec<bool>,
    rep_boundary: Vec<bool>,
    members: Vec<Vec<usize>>,
    dirty: Vec<bool>,
    edge_count: usize,
}

fn key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn remove_item(v: &mut Vec<usize>, x: usize) {
    if let Some(i) = v.iter().position(|&y| y == x) {
        v.swap_remove(i);
    }
}

impl Collapser {
    fn new(mesh: &Mesh) -> Self {
        let nv = mesh.vertex_count();
        let ne = mesh.edge_count();
        let mut vert_faces = vec![Vec::new(); nv];
        for (f, face) in mesh.faces().iter().enumerate() {
            for &v in face {
                vert_faces[v].push(f);
            }
        }
        let mut vert_nbrs = vec![Vec::new(); nv];
        let mut boundary_vertex = vec![false; nv];
        let mut edge_key = HashMap::with_capacity(ne);
        for (e, &[a, b]) in mesh.edges().iter().enumerate() {
            vert_nbrs[a].push(b);
            vert_nbrs[b].push(a);
            edge_key.insert([a, b], e);
            if mesh.boundary()[e] {
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
            }
        }
        Self {
            pos: mesh.vertices().to_vec(),
            faces: mesh.faces().to_vec(),
            face_alive: vec![true; mesh.face_count()],
            vert_faces,
            vert_nbrs,
            boundary_vertex,
            edge_key,
            rep_key: mesh.edges().to_vec(),
            rep_alive: vec![true; ne],
            rep_boundary: mesh.boundary().to_vec(),
            members: (0..ne).map(|e| vec![e]).collect(),
            dirty: vec![false; ne],
            edge_count: ne,
        }
    }

    fn rep(&self, a: usize, b: usize) -> usize {
        self.edge_key[&key(a, b)]
    }

    fn has_face(&self, a: usize, b: usize, c: usize) -> bool {
        self.vert_faces[a].iter().any(|&f| {
            let face = &self.faces[f];
            face.contains(&b) && face.contains(&c)
        })
    }

    /// Returns the two incident faces (ascending) and their opposite vertices
    /// when the collapse of `e` is legal.
    fn collapsible(&self, e: usize) -> Option<([usize; 2], [usize; 2])> {
        if !self.rep_alive[e] || self.dirty[e] || self.rep_boundary[e] {
            return None;
        }
        let [u, v] = self.rep_key[e];
        if self.boundary_vertex[u] && self.boundary_vertex[v] {
            return None;
        }
        let mut inc: Vec<usize> = self.vert_faces[u]
            .iter()
            .copied()
            .filter(|&f| self.faces[f].contains(&v))
            .collect();
        if inc.len() != 2 {
            return None;
        }
        inc.sort_unstable();
        let opposite = |f: usize| {
            *self.faces[f]
                .iter()
                .find(|&&x| x != u && x != v)
                .expect("triangle")
        };
        let (a, b) = (opposite(inc[0]), opposite(inc[1]));
        for (x, y) in [(u, a), (v, a), (u, b), (v, b)] {
            if self.rep_boundary[self.rep(x, y)] {
                return None;
            }
        }
        let common = self.vert_nbrs[u]
            .iter()
            .filter(|x| self.vert_nbrs[v].contains(x))
            .count();
        if common != 2 {
            return None;
        }
        if self.has_face(u, a, b) && self.has_face(v, a, b) {
            return None;
        }
        Some(([inc[0], inc[1]], [a, b]))
    }

    fn collapse(&mut self, e: usize, inc: [usize; 2], opp: [usize; 2]) {
        let [u, v] = self.rep_key[e];
        let [a, b] = opp;
        let (r_ua, r_va) = (self.rep(u, a), self.rep(v, a));
        let (r_ub, r_vb) = (self.rep(u, b), self.rep(v, b));

        let moved = std::mem::take(&mut self.members[r_va]);
        self.members[r_ua].extend(moved);
        let moved = std::mem::take(&mut self.members[e]);
        self.members[r_ua].extend(moved);
        let moved = std::mem::take(&mut self.members[r_vb]);
        self.members[r_ub].extend(moved);
        for r in [e, r_va, r_vb] {
            self.rep_alive[r] = false;
        }
        self.dirty[r_ua] = true;
        self.dirty[r_ub] = true;
        for k in [key(u, v), key(v, a), key(v, b)] {
            self.edge_key.remove(&k);
        }

        for f in inc {
            self.face_alive[f] = false;
            for x in self.faces[f] {
                remove_item(&mut self.vert_faces[x], f);
            }
        }
        for f in std::mem::take(&mut self.vert_faces[v]) {
            for x in self.faces[f].iter_mut() {
                if *x == v {
                    *x = u;
                }
            }
            self.vert_faces[u].push(f);
        }

        for x in std::mem::take(&mut self.vert_nbrs[v]) {
            if x == u || x == a || x == b {
                remove_item(&mut self.vert_nbrs[x], v);
                continue;
            }
            let r = self.edge_key.remove(&key(v, x)).expect("edge to neighbor");
            self.edge_key.insert(key(u, x), r);
            self.rep_key[r] = key(u, x);
            for y in self.vert_nbrs[x].iter_mut() {
                if *y == v {
                    *y = u;
                }
            }
            self.vert_nbrs[u].push(x);
        }

        self.boundary_vertex[u] |= self.boundary_vertex[v];
        let (p, q) = (self.pos[u], self.pos[v]);
        self.pos[u] = [
            0.5 * (p[0] + q[0]),
            0.5 * (p[1] + q[1]),
            0.5 * (p[2] + q[2]),
        ];
        self.edge_count -= 3;
    }
}

/// Pools `mesh` and its features down to at most `target_edges` edges.
///
/// Each collapse removes exactly three edges, so the pass stops at the first
/// edge count `<= target_edges`; the count equals the target whenever the
/// difference is a multiple of three.
pub fn mesh_pool(mesh: &Mesh, x: &FeatureMap, target_edges: usize) -> Result<PoolOutput> {
    mesh_pool_shared(Arc::new(mesh.clone()), x, target_edges)
}

/// Same as [`mesh_pool`] but reuses an already shared mesh for the history snapshot.
pub fn mesh_pool_shared(
    mesh: Arc<Mesh>,
    x: &FeatureMap,
    target_edges: usize,
) -> Result<PoolOutput> {
    let current = mesh.edge_count();
    if x.edge_count() != current {
        return Err(Error::EdgeCountMismatch {
            expected: current,
            got: x.edge_count(),
        });
    }
    if target_edges >= current {
        return Err(Error::TargetNotBelowCurrent {
            target: target_edges,
            current,
        });
    }
    let norms = x.edge_norms();
    let order = collapse_priority(x);
    let mut state = Collapser::new(&mesh);
    let mut collapsed = Vec::new();
    for e in order {
        if state.edge_count <= target_edges {
            break;
        }
        if let Some((inc, opp)) = state.collapsible(e) {
            state.collapse(e, inc, opp);
            collapsed.push((e, norms[e]));
        }
    }
    if state.edge_count > target_edges {
        return Err(Error::PoolTargetUnreachable {
            target: target_edges,
            achieved: state.edge_count,
        });
    }

    let mut new_index = vec![usize::MAX; state.pos.len()];
    let mut old_of_new = Vec::new();
    for (v, idx) in new_index.iter_mut().enumerate() {
        if !state.vert_faces[v].is_empty() {
            *idx = old_of_new.len();
            old_of_new.push(v);
        }
    }
    let vertices: Vec<Point3> = old_of_new.iter().map(|&v| state.pos[v]).collect();
    let faces: Vec<[usize; 3]> = state
        .faces
        .iter()
        .zip(&state.face_alive)
        .filter(|(_, &alive)| alive)
        .map(|(f, _)| [new_index[f[0]], new_index[f[1]], new_index[f[2]]])
        .collect();
    let pooled = Mesh::new(vertices, faces)?;
    debug_assert_eq!(pooled.edge_count(), state.edge_count);

    let mut membership = vec![usize::MAX; current];
    let mut triplets = Vec::with_capacity(current);
    for (row, &[p, q]) in pooled.edges().iter().enumerate() {
        let r = state.rep(old_of_new[p], old_of_new[q]);
        let group = &state.members[r];
        let w = 1.0 / group.len() as f64;
        for &m in group {
            membership[m] = row;
            triplets.push((row, m, w));
        }
    }
    debug_assert!(membership.iter().all(|&m| m != usize::MAX));
    let groups = SparseMatrix::from_triplets(pooled.edge_count(), current, triplets)?;
    let features = groups.apply(x)?;
    Ok(PoolOutput {
        mesh: pooled,
        features,
        history: PoolHistory {
            pre_pool_edge_count: current,
            groups,
            membership,
            pre_pool_mesh: mesh,
            collapsed,
        },
    })
}

/// Gradient of pooling: routes the pooled gradient back through the averaging weights.
pub fn pool_backward(upstream: &FeatureMap, h: &PoolHistory) -> Result<FeatureMap> {
    h.groups.apply_transpose(upstream)
}

/// Expands pooled features back to the pre-pool edges: every member of a
/// group receives the group's value.
pub fn mesh_unpool(x: &FeatureMap, h: &PoolHistory) -> Result<FeatureMap> {
    if x.edge_count() != h.pooled_edge_count() {
        return Err(Error::HistoryMismatch {
            expected: h.pooled_edge_count(),
            got: x.edge_count(),
        });
    }
    let xv = x.values();
    let mut out = FeatureMap::zeros(x.channels(), h.pre_pool_edge_count);
    let mut ov = out.values_mut();
    for (c, &g) in h.membership.iter().enumerate() {
        ov.column_mut(c).assign(&xv.column(g));
    }
    Ok(out)
}

/// Gradient of unpooling: sums member gradients per group.
pub fn unpool_backward(upstream: &FeatureMap, h: &PoolHistory) -> Result<FeatureMap> {
    if upstream.edge_count() != h.pre_pool_edge_count {
        return Err(Error::HistoryMismatch {
            expected: h.pre_pool_edge_count,
            got: upstream.edge_count(),
        });
    }
    let uv = upstream.values();
    let mut out = FeatureMap::zeros(upstream.channels(), h.pooled_edge_count());
    let mut ov = out.values_mut();
    for (c, &g) in h.membership.iter().enumerate() {
        let mut col = ov.column_mut(g);
        col += &uv.column(c);
    }
    Ok(out)
}

/// Dense vs sparse storage of one merge matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryReport {
    pub edge_count: usize,
    pub dense_elements: usize,
    pub sparse_nonzeros: usize,
}

impl MemoryReport {
    /// `dense / sparse`, undefined when the history holds no entries.
    pub fn ratio(&self) -> Option<f64> {
        (self.sparse_nonzeros > 0).then(|| self.dense_elements as f64 / self.sparse_nonzeros as f64)
    }
}

impl fmt::Display for MemoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t",
            self.edge_count, self.dense_elements, self.sparse_nonzeros
        )?;
        match self.ratio() {
            Some(r) => write!(f, "{r:.4}"),
            None => write!(f, "n/a"),
        }
    }
}

pub fn pool_memory_report(edge_count: usize, history: &PoolHistory) -> MemoryReport {
    MemoryReport {
        edge_count,
        dense_elements: history.groups.rows() * history.groups.cols(),
        sparse_nonzeros: history.groups.nnz(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::icosphere;

    #[test]
    fn priority_orders_by_norm_then_id() {
        let x = FeatureMap::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(collapse_priority(&x), vec![0, 1]);
        let x = FeatureMap::from_vec(1, 3, vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(collapse_priority(&x), vec![1, 2, 0]);
        // columns (3,4) and (5,0) both have norm 5
        let x = FeatureMap::from_vec(2, 2, vec![3.0, 5.0, 4.0, 0.0]).unwrap();
        assert_eq!(collapse_priority(&x), vec![0, 1]);
    }

    #[test]
    fn equal_target_is_rejected() {
        let m = icosphere(1);
        let x = FeatureMap::zeros(1, m.edge_count());
        assert!(matches!(
            mesh_pool(&m, &x, m.edge_count()),
            Err(Error::TargetNotBelowCurrent { .. })
        ));
    }

    #[test]
    fn tetrahedron_cannot_be_pooled() {
        let s = 1.0 / 2f64.sqrt();
        let m = Mesh::new(
            vec![
                [1.0, 0.0, -s],
                [-1.0, 0.0, -s],
                [0.0, 1.0, s],
                [0.0, -1.0, s],
            ],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
        )
        .unwrap();
        let x = FeatureMap::from_vec(1, 6, (0..6).map(f64::from).collect()).unwrap();
        assert!(matches!(
            mesh_pool(&m, &x, 3),
            Err(Error::PoolTargetUnreachable {
                target: 3,
                achieved: 6
            })
        ));
    }

    #[test]
    fn identity_history_unpools_to_input() {
        let m = Arc::new(icosphere(1));
        let h = PoolHistory::identity(m.clone());
        let x = FeatureMap::from_vec(1, 120, (0..120).map(f64::from).collect()).unwrap();
        assert_eq!(mesh_unpool(&x, &h).unwrap(), x);
        let r = pool_memory_report(120, &h);
        assert_eq!(r.sparse_nonzeros, 120);
    }

    #[test]
    fn memory_report_arithmetic() {
        let r = MemoryReport {
            edge_count: 120,
            dense_elements: 90 * 120,
            sparse_nonzeros: 120,
        };
        assert_eq!(r.dense_elements, 10800);
        assert_eq!(r.ratio(), Some(90.0));
        let empty = MemoryReport {
            edge_count: 0,
            dense_elements: 0,
            sparse_nonzeros: 0,
        };
        assert_eq!(empty.ratio(), None);
        assert!(empty.to_string().ends_with("n/a"));
    }
}
