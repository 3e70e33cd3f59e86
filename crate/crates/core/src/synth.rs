//! Deterministic synthetic vessel meshes with four edge classes.
//!
//! The surface is a tube of revolution: a wide inlet segment, a short conical
//! junction band where the radius drops, and a narrow outlet vessel. A
//! hemispherical dome ("aneurysm") is raised on one of the straight segments.
//! Ends are either left open (boundary loops) or closed with a fan cap.
//!
//! Class ids follow the order of the four-class weighting scheme:
//! aneurysm, inlet, junction (bifurcation), vessel.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point3};
use crate::train::LabeledSample;

pub mod class {
    pub const ANEURYSM: usize = 0;
    pub const INLET: usize = 1;
    pub const JUNCTION: usize = 2;
    pub const VESSEL: usize = 3;
    pub const COUNT: usize = 4;
    pub const NAMES: [&str; COUNT] = ["aneurysm", "inlet", "junction", "vessel"];
}

/// Unit icosphere after `level` midpoint subdivisions (E = 30·4^level).
pub fn icosphere(level: u32) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let normalize = |p: Point3| {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [p[0] / n, p[1] / n, p[2] / n]
    };
    for v in verts.iter_mut() {
        *v = normalize(*v);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<[usize; 2], usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Point3>| {
            let k = if a < b { [a, b] } else { [b, a] };
            *cache.entry(k).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(verts, faces).expect("icosphere is a valid mesh")
}

/// Jittered cylinder with `around` vertices per ring, open or capped.
pub fn cylinder(around: usize, rings: usize, open: bool, jitter: f64, seed: u64) -> Result<Mesh> {
    if around < 3 || rings < 2 {
        return Err(Error::SpecInfeasible(
            "cylinder needs 3 vertices around and 2 rings".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid { around };
    let mut vertices: Vec<Point3> = Vec::with_capacity(rings * around + 2);
    for j in 0..rings {
        for k in 0..around {
            let theta = 2.0 * PI * (k as f64 + rng.random_range(-jitter..=jitter)) / around as f64;
            let r = 1.0 + rng.random_range(-jitter..=jitter) * 0.2;
            let z = (j as f64 + rng.random_range(-jitter..=jitter)) * 2.0 * PI / around as f64;
            vertices.push([r * theta.cos(), r * theta.sin(), z]);
        }
    }
    let mut faces = Vec::with_capacity(2 * rings * around + 2 * around);
    for j in 0..rings - 1 {
        for k in 0..around {
            let (a, b) = (grid.id(j, k), grid.id(j, k + 1));
            let (c, d) = (grid.id(j + 1, k + 1), grid.id(j + 1, k));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    if !open {
        let top_z = vertices[grid.id(rings - 1, 0)][2];
        let (bottom, top) = (vertices.len(), vertices.len() + 1);
        vertices.push([0.0, 0.0, -0.5]);
        vertices.push([0.0, 0.0, top_z + 0.5]);
        for k in 0..around {
            faces.push([bottom, grid.id(0, k + 1), grid.id(0, k)]);
            faces.push([top, grid.id(rings - 1, k), grid.id(rings - 1, k + 1)]);
        }
    }
    Mesh::new(vertices, faces)
}

/// A random closed or open test surface with between 120 and `max_edges` edges:
/// a jittered icosphere or a jittered cylinder.
pub fn random_surface(seed: u64, max_edges: usize) -> Mesh {
    let max_edges = max_edges.max(120);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b5e_55ed);
    match rng.random_range(0..3) {
        0 => {
            let levels = (1..=4).filter(|&l| 30 * 4usize.pow(l) <= max_edges).count() as u32;
            let m = icosphere(rng.random_range(1..=levels.max(1)));
            let verts = m
                .vertices()
                .iter()
                .map(|p| {
                    let s = 1.0 + rng.random_range(-0.05..0.05);
                    [p[0] * s, p[1] * s, p[2] * s]
                })
                .collect();
            m.with_vertices(verts).expect("jittered icosphere")
        }
        kind => {
            let open = kind == 1;
            let around = rng.random_range(6..=20usize);
            // open: E = 3·n·rings − 2n; closed adds 2n spokes
            let per_ring = 3 * around;
            let min_rings = (120 + 2 * around).div_ceil(per_ring).max(3);
            let max_rings =
                ((max_edges + 2 * around) / per_ring - usize::from(!open)).max(min_rings);
            let rings = rng.random_range(min_rings..=max_rings);
            cylinder(around, rings, open, 0.1, rng.random()).expect("valid cylinder")
        }
    }
}

/// Geometry parameters of one synthetic vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub inlet_radius: f64,
    pub vessel_radius: f64,
    pub inlet_length: f64,
    /// Axial length of the conical junction between inlet and vessel.
    pub branch_length: f64,
    pub vessel_length: f64,
    /// Base radius of the dome, measured along the surface.
    pub bump_radius: f64,
    /// Dome height as a fraction of its base radius.
    pub bump_height: f64,
    /// Axial position of the dome center as a fraction of total length.
    pub bump_offset: f64,
    pub target_edges: usize,
    /// Vertices around the tube.
    pub around: usize,
    pub open_ends: bool,
    /// Positional noise as a fraction of the local grid spacing.
    pub jitter: f64,
    /// Largest random shift, in ring spacings, of each junction label
    /// boundary away from the geometric transition.
    pub band_jitter: f64,
}

impl SynthSpec {
    /// Draws a random but valid geometry from `seed`.
    pub fn sample(seed: u64, target_edges: usize, open_ends: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        let inlet_radius = rng.random_range(1.6..2.0);
        let vessel_radius = rng.random_range(0.8..1.0);
        let inlet_length = rng.random_range(7.0..9.0);
        let vessel_length = rng.random_range(7.0..9.0);
        let branch_length = rng.random_range(0.9..1.1);
        let total = inlet_length + branch_length + vessel_length;
        let on_inlet = rng.random_bool(0.5);
        let (bump_radius, center) = if on_inlet {
            let r = rng.random_range(1.4..1.7);
            (r, rng.random_range(r + 1.5..inlet_length - r - 1.5))
        } else {
            let r = rng.random_range(1.1..1.4);
            let start = inlet_length + branch_length;
            (r, rng.random_range(start + r + 1.5..total - r - 1.5))
        };
        Self {
            seed,
            inlet_radius,
            vessel_radius,
            inlet_length,
            branch_length,
            vessel_length,
            bump_radius,
            bump_height: rng.random_range(0.8..1.0),
            bump_offset: center / total,
            target_edges,
            around: (target_edges as f64 / 96.0).round().clamp(6.0, 24.0) as usize,
            open_ends,
            jitter: 0.03,
            band_jitter: 0.4,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            self.inlet_radius,
            self.vessel_radius,
            self.inlet_length,
            self.branch_length,
            self.vessel_length,
            self.bump_radius,
            self.bump_height,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::SpecInfeasible("dimensions must be positive".into()));
        }
        if self.target_edges < 200 {
            return Err(Error::SpecInfeasible(format!(
                "target edge count {} below 200",
                self.target_edges
            )));
        }
        if self.around < 6 {
            return Err(Error::SpecInfeasible(
                "need at least 6 vertices around".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.bump_offset)
            || !(0.0..0.5).contains(&self.jitter)
            || !(0.0..=1.0).contains(&self.band_jitter)
        {
            return Err(Error::SpecInfeasible(
                "offset or jitter out of range".into(),
            ));
        }
        Ok(())
    }
}

struct Grid {
    around: usize,
}

impl Grid {
    fn id(&self, ring: usize, k: usize) -> usize {
        ring * self.around + (k % self.around)
    }
}

/// Builds the mesh and per-edge labels for `spec`.
pub fn generate(spec: &SynthSpec) -> Result<LabeledSample> {
    spec.validate()?;
    let n = spec.around;
    let rings = if spec.open_ends {
        (spec.target_edges + 2 * n) as f64 / (3 * n) as f64
    } else {
        spec.target_edges as f64 / (3 * n) as f64
    }
    .round() as usize;
    if rings < 6 {
        return Err(Error::SpecInfeasible(
            "too few rings for the requested edge count".into(),
        ));
    }
    let grid = Grid { around: n };
    let total = spec.inlet_length + spec.branch_length + spec.vessel_length;
    let dz = total / (rings - 1) as f64;
    let i1 = (spec.inlet_length / dz).round() as usize;
    let i2 = i1 + ((spec.branch_length / dz).round() as usize).max(1);
    if i1 < 2 || i2 + 2 >= rings {
        return Err(Error::SpecInfeasible(
            "junction band does not fit in the tube".into(),
        ));
    }

    // The radius eases from inlet to vessel over the labeled band plus one
    // ring on either side, so the band edges carry no sharp crease.
    let (t0, t1) = (i1 as f64 - 1.0, i2 as f64 + 1.0);
    let radius_at = |j: usize| -> f64 {
        let t = ((j as f64 - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let s = t * t * (3.0 - 2.0 * t);
        spec.inlet_radius + s * (spec.vessel_radius - spec.inlet_radius)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bump_theta = rng.random_range(0.0..2.0 * PI);
    let bump_z = spec.bump_offset * total;
    let bump_j = (bump_z / dz).round() as usize;
    let bump_ring_reach = (spec.bump_radius / dz).ceil() as usize + 1;
    if bump_j + bump_ring_reach >= rings || bump_j < bump_ring_reach {
        return Err(Error::SpecInfeasible(
            "dome does not fit along the tube".into(),
        ));
    }
    let on_inlet = bump_j <= i1;
    let seg_lo = if on_inlet { 0 } else { i2 };
    let seg_hi = if on_inlet { i1 } else { rings - 1 };
    if bump_j < seg_lo + bump_ring_reach || bump_j + bump_ring_reach > seg_hi {
        return Err(Error::SpecInfeasible(
            "dome overlaps the junction band or an end".into(),
        ));
    }

    let mut vertices: Vec<Point3> = Vec::with_capacity(rings * n + 2);
    let mut in_bump = Vec::with_capacity(rings * n + 2);
    let mut ring_of = Vec::with_capacity(rings * n + 2);
    for j in 0..rings {
        let r = radius_at(j);
        for k in 0..n {
            let jt = spec.jitter;
            let theta = 2.0 * PI * (k as f64 + rng.random_range(-jt..jt)) / n as f64;
            let z = (j as f64 + rng.random_range(-jt..jt)) * dz;
            let mut dtheta = (theta - bump_theta).rem_euclid(2.0 * PI);
            if dtheta > PI {
                dtheta -= 2.0 * PI;
            }
            let s = ((r * dtheta).powi(2) + (j as f64 * dz - bump_z).powi(2)).sqrt();
            let inside = s < spec.bump_radius;
            let lift = if inside {
                spec.bump_height * spec.bump_radius * (1.0 - (s / spec.bump_radius).powi(2)).sqrt()
            } else {
                0.0
            };
            let rr = (r + lift) * (1.0 + rng.random_range(-jt..jt) * 0.1);
            vertices.push([rr * theta.cos(), rr * theta.sin(), z]);
            in_bump.push(inside);
            ring_of.push(j as isize);
        }
    }

    let mut faces: Vec<[usize; 3]> = Vec::with_capacity(2 * rings * n + 2 * n);
    for j in 0..rings - 1 {
        for k in 0..n {
            let (a, b) = (grid.id(j, k), grid.id(j, k + 1));
            let (c, d) = (grid.id(j + 1, k + 1), grid.id(j + 1, k));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    if !spec.open_ends {
        let cap = 0.5 * dz;
        let bottom = vertices.len();
        vertices.push([0.0, 0.0, -cap]);
        in_bump.push(false);
        ring_of.push(-1);
        let top = vertices.len();
        vertices.push([0.0, 0.0, (rings - 1) as f64 * dz + cap]);
        in_bump.push(false);
        ring_of.push(rings as isize);
        for k in 0..n {
            faces.push([bottom, grid.id(0, k + 1), grid.id(0, k)]);
            faces.push([top, grid.id(rings - 1, k), grid.id(rings - 1, k + 1)]);
        }
    }

    let mesh = Mesh::new(vertices, faces)?;
    let bj = spec.band_jitter;
    let band_lo = i1 as f64
        + if bj > 0.0 {
            rng.random_range(-bj..=bj)
        } else {
            0.0
        };
    let band_hi = i2 as f64
        + if bj > 0.0 {
            rng.random_range(-bj..=bj)
        } else {
            0.0
        };
    let labels: Vec<usize> = mesh
        .edges()
        .iter()
        .map(|&[p, q]| {
            let mid = 0.5 * (ring_of[p] + ring_of[q]) as f64;
            if in_bump[p] && in_bump[q] {
                class::ANEURYSM
            } else if (band_lo..=band_hi).contains(&mid) {
                class::JUNCTION
            } else if mid < band_lo {
                class::INLET
            } else {
                class::VESSEL
            }
        })
        .collect();
    LabeledSample::new(mesh, labels, class::COUNT)
}

/// Per-class edge counts.
pub fn class_histogram(labels: &[usize], num_classes: usize) -> Vec<usize> {
    let mut h = vec![0; num_classes];
    for &l in labels {
        h[l] += 1;
    }
    h
}
