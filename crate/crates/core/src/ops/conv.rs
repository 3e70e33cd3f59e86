//! Symmetric edge convolution.
//!
//! For an edge with value `e` and neighbor values `(a, b, c, d)` the kernel
//! sees the five terms `(e, |a-c|, a+c, |b-d|, b+d)`, which are unchanged
//! when the two incident faces swap roles. Missing neighbors read as zero.

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::mesh::{Mesh, MISSING};

/// Number of symmetric terms each kernel tap sees.
pub const KERNEL_DEPTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvKernel {
    /// `out × in × 5`
    pub weights: Array3<f64>,
    pub bias: Array1<f64>,
}

impl ConvKernel {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            weights: Array3::zeros((out_channels, in_channels, KERNEL_DEPTH)),
            bias: Array1::zeros(out_channels),
        }
    }

    /// Gaussian weights with standard deviation `gain`, zero bias.
    pub fn normal<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let dist = Normal::new(0.0, gain).expect("finite positive gain");
        let weights = Array3::from_shape_fn((out_channels, in_channels, KERNEL_DEPTH), |_| {
            dist.sample(rng)
        });
        Self {
            weights,
            bias: Array1::zeros(out_channels),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dim().1
    }

    pub fn out_channels(&self) -> usize {
        self.weights.dim().0
    }

    fn weight_matrix(&self) -> Array2<f64> {
        let (o, i, k) = self.weights.dim();
        self.weights
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((o, i * k))
            .expect("contiguous weights")
    }
}

/// Saved activations needed by [`mesh_conv_backward`].
#[derive(Debug, Clone)]
pub struct ConvCache {
    input: FeatureMap,
    /// `(in*5) × E` gathered symmetric terms.
    gathered: Array2<f64>,
    neighbors: Vec<[usize; 4]>,
}

fn gather(x: &FeatureMap, neighbors: &[[usize; 4]]) -> Array2<f64> {
    let (channels, edges) = (x.channels(), x.edge_count());
    let xv = x.values();
    let mut g = Array2::<f64>::zeros((channels * KERNEL_DEPTH, edges));
    for c in 0..channels {
        let row = xv.row(c);
        let row = row.as_slice().expect("standard layout");
        for (e, nb) in neighbors.iter().enumerate() {
            let at = |n: usize| if n == MISSING { 0.0 } else { row[n] };
            let (a, b, cc, d) = (at(nb[0]), at(nb[1]), at(nb[2]), at(nb[3]));
            let base = c * KERNEL_DEPTH;
            g[(base, e)] = row[e];
            g[(base + 1, e)] = (a - cc).abs();
            g[(base + 2, e)] = a + cc;
            g[(base + 3, e)] = (b - d).abs();
            g[(base + 4, e)] = b + d;
        }
    }
    g
}

fn check_inputs(x: &FeatureMap, mesh: &Mesh, k: &ConvKernel) -> Result<()> {
    if x.channels() != k.in_channels() {
        return Err(Error::ChannelMismatch {
            expected: k.in_channels(),
            got: x.channels(),
        });
    }
    if x.edge_count() != mesh.edge_count() {
        return Err(Error::EdgeCountMismatch {
            expected: mesh.edge_count(),
            got: x.edge_count(),
        });
    }
    Ok(())
}

/// Forward pass that also returns the cache for the backward pass.
pub fn mesh_conv_forward_cached(
    x: &FeatureMap,
    mesh: &Mesh,
    k: &ConvKernel,
) -> Result<(FeatureMap, ConvCache)> {
    check_inputs(x, mesh, k)?;
    let gathered = gather(x, mesh.edge_neighbors());
    let mut y = k.weight_matrix().dot(&gathered);
    y += &k.bias.view().insert_axis(Axis(1));
    Ok((
        FeatureMap::from_array(y),
        ConvCache {
            input: x.clone(),
            gathered,
            neighbors: mesh.edge_neighbors().to_vec(),
        },
    ))
}

pub fn mesh_conv_forward(x: &FeatureMap, mesh: &Mesh, k: &ConvKernel) -> Result<FeatureMap> {
    check_inputs(x, mesh, k)?;
    let gathered = gather(x, mesh.edge_neighbors());
    let mut y = k.weight_matrix().dot(&gathered);
    y += &k.bias.view().insert_axis(Axis(1));
    Ok(FeatureMap::from_array(y))
}

fn sign(u: f64) -> f64 {
    // d|u|/du at u = 0 is taken as 0
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Returns the gradients with respect to the input and to the kernel.
pub fn mesh_conv_backward(
    upstream: &FeatureMap,
    cache: &ConvCache,
    k: &ConvKernel,
) -> Result<(FeatureMap, ConvKernel)> {
    let edges = cache.input.edge_count();
    upstream.check_shape(k.out_channels(), edges)?;
    let dy = upstream.array();

    let dw = dy.dot(&cache.gathered.t());
    let (o, i, kd) = k.weights.dim();
    let grad_k = ConvKernel {
        weights: dw
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((o, i, kd))
            .expect("weight shape"),
        bias: dy.sum_axis(Axis(1)),
    };

    let dg = k.weight_matrix().t().dot(dy);
    let xv = cache.input.values();
    let mut dx = Array2::<f64>::zeros((i, edges));
    for c in 0..i {
        let row = xv.row(c);
        let base = c * KERNEL_DEPTH;
        for (e, nb) in cache.neighbors.iter().enumerate() {
            dx[(c, e)] += dg[(base, e)];
            let at = |n: usize| if n == MISSING { 0.0 } else { row[n] };
            for (pair, slot) in [(0usize, 1usize), (1, 3)] {
                let (p, q) = (nb[pair], nb[pair + 2]);
                let s = sign(at(p) - at(q));
                let g_abs = dg[(base + slot, e)];
                let g_sum = dg[(base + slot + 1, e)];
                if p != MISSING {
                    dx[(c, p)] += s * g_abs + g_sum;
                }
                if q != MISSING {
                    dx[(c, q)] += -s * g_abs + g_sum;
                }
            }
        }
    }
    Ok((FeatureMap::from_array(dx), grad_k))
}

/// Per-edge linear map (`1×1` convolution), used for the classifier head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `out × in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            weights: Array2::zeros((out_channels, in_channels)),
            bias: Array1::zeros(out_channels),
        }
    }

    pub fn normal<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let dist = Normal::new(0.0, gain).expect("finite positive gain");
        Self {
            weights: Array2::from_shape_fn((out_channels, in_channels), |_| dist.sample(rng)),
            bias: Array1::zeros(out_channels),
        }
    }

    pub fn forward(&self, x: &FeatureMap) -> Result<FeatureMap> {
        if x.channels() != self.weights.ncols() {
            return Err(Error::ChannelMismatch {
                expected: self.weights.ncols(),
                got: x.channels(),
            });
        }
        let mut y = self.weights.dot(x.array());
        y += &self.bias.view().insert_axis(Axis(1));
        Ok(FeatureMap::from_array(y))
    }

    pub fn backward(
        &self,
        upstream: &FeatureMap,
        input: &FeatureMap,
    ) -> Result<(FeatureMap, Linear)> {
        upstream.check_shape(self.weights.nrows(), input.edge_count())?;
        let dy = upstream.array();
        let grad = Linear {
            weights: dy.dot(&input.array().t()).as_standard_layout().into_owned(),
            bias: dy.sum_axis(Axis(1)),
        };
        Ok((FeatureMap::from_array(self.weights.t().dot(dy)), grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip() -> Mesh {
        // two triangles sharing edge 1
        Mesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
            vec![[0, 1, 3], [1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn identity_slot_copies_input() {
        let m = strip();
        let x = FeatureMap::from_vec(1, 5, vec![0.5, -1.0, 2.0, 3.5, 7.0]).unwrap();
        let mut k = ConvKernel::zeros(1, 1);
        k.weights[(0, 0, 0)] = 1.0;
        let y = mesh_conv_forward(&x, &m, &k).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_kernel_hand_value() {
        // shared edge 1 has neighbors (a,b,c,d) = (e2, e0, e3, e4)
        let m = strip();
        assert_eq!(m.edge_neighbors()[1], [2, 0, 3, 4]);
        // e=5, a=2, b=1, c=4, d=3
        let x = FeatureMap::from_vec(1, 5, vec![1.0, 5.0, 2.0, 4.0, 3.0]).unwrap();
        let mut k = ConvKernel::zeros(1, 1);
        k.weights.fill(1.0);
        let y = mesh_conv_forward(&x, &m, &k).unwrap();
        assert_eq!(y.get(0, 1), 19.0);
    }

    #[test]
    fn channel_and_edge_mismatch() {
        let m = strip();
        let k = ConvKernel::zeros(2, 1);
        let x = FeatureMap::zeros(1, 5);
        assert!(matches!(
            mesh_conv_forward(&x, &m, &k),
            Err(Error::ChannelMismatch {
                expected: 2,
                got: 1
            })
        ));
        let x = FeatureMap::zeros(2, 4);
        assert!(matches!(
            mesh_conv_forward(&x, &m, &k),
            Err(Error::EdgeCountMismatch {
                expected: 5,
                got: 4
            })
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = strip();
        let x = FeatureMap::from_vec(1, 5, vec![1.0, 5.0, 2.0, 4.0, 3.0]).unwrap();
        let mut k = ConvKernel::zeros(1, 2);
        k.weights.fill(0.3);
        let (_, cache) = mesh_conv_forward_cached(&x, &m, &k).unwrap();
        let (dx, dk) = mesh_conv_backward(&FeatureMap::zeros(2, 5), &cache, &k).unwrap();
        assert!(dx.values().iter().all(|&v| v == 0.0));
        assert!(dk.weights.iter().all(|&v| v == 0.0));
        assert!(dk.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tie_in_absolute_term_has_zero_subgradient() {
        // a == c on the shared edge: only the |a-c| weight is active
        let m = strip();
        let x = FeatureMap::from_vec(1, 5, vec![0.0, 0.0, 2.0, 2.0, 0.0]).unwrap();
        let mut k = ConvKernel::zeros(1, 1);
        k.weights[(0, 0, 1)] = 1.0;
        let (_, cache) = mesh_conv_forward_cached(&x, &m, &k).unwrap();
        let mut up = FeatureMap::zeros(1, 5);
        up.set(0, 1, 1.0);
        let (dx, _) = mesh_conv_backward(&up, &cache, &k).unwrap();
        assert_eq!(dx.get(0, 2), 0.0);
        assert_eq!(dx.get(0, 3), 0.0);
    }
}
