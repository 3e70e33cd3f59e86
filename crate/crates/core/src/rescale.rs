//! Label transfer between resolutions through exact nearest-neighbor search
//! on edge midpoints.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point3};

const LEAF: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    axis: usize,
    left: usize,
    right: usize,
}

/// Balanced 3-d tree with median splits, axis cycling x, y, z.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    nodes: Vec<Node>,
    root: usize,
}

fn dist2(a: &Point3, b: &Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

impl KdTree {
    pub fn build(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinitePoint(i));
        }
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut tree = Self {
            nodes: Vec::with_capacity(points.len()),
            points,
            root: LEAF,
        };
        tree.root = tree.build_rec(&mut idx, 0);
        Ok(tree)
    }

    fn build_rec(&mut self, idx: &mut [usize], depth: usize) -> usize {
        if idx.is_empty() {
            return LEAF;
        }
        let axis = depth % 3;
        let mid = idx.len() / 2;
        let pts = &self.points;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let point = idx[mid];
        let (lo, rest) = idx.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_rec(lo, depth + 1);
        let right = self.build_rec(hi, depth + 1);
        self.nodes.push(Node {
            point,
            axis,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn depth(&self) -> usize {
        fn rec(t: &KdTree, n: usize) -> usize {
            if n == LEAF {
                0
            } else {
                1 + rec(t, t.nodes[n].left).max(rec(t, t.nodes[n].right))
            }
        }
        rec(self, self.root)
    }

    /// Index and squared distance of the nearest point; equal distances
    /// resolve to the lower index.
    pub fn nearest(&self, q: &Point3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, q, &mut best);
        best
    }

    fn search(&self, n: usize, q: &Point3, best: &mut (usize, f64)) {
        if n == LEAF {
            return;
        }
        let node = &self.nodes[n];
        let d = dist2(q, &self.points[node.point]);
        if d < best.1 || (d == best.1 && node.point < best.0) {
            *best = (node.point, d);
        }
        let diff = q[node.axis] - self.points[node.point][node.axis];
        let (near, far) = if diff <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, q, best);
        // `<=` keeps equidistant points on the far side reachable for the tie rule.
        if diff * diff <= best.1 {
            self.search(far, q, best);
        }
    }
}

/// Labels for every edge of `high`, copied from the `low` edge with the
/// nearest midpoint.
pub fn rescale_labels(low: &Mesh, low_labels: &[usize], high: &Mesh) -> Result<Vec<usize>> {
    if low_labels.is_empty() {
        return Err(Error::EmptySource);
    }
    if low_labels.len() != low.edge_count() {
        return Err(Error::LabelCountMismatch {
            labels: low_labels.len(),
            edges: low.edge_count(),
        });
    }
    let tree = KdTree::build(low.edge_midpoints())?;
    Ok(high
        .edge_midpoints()
        .iter()
        .map(|m| low_labels[tree.nearest(m).0])
        .collect())
}
