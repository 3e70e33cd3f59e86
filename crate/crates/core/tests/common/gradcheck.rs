//! Central finite differences against every analytic backward pass.

use super::{pick_coords, probe, random_features, rng, worst_fd_error};
use medmesh::mesh::extract_edge_features;
use medmesh::net::{MeshUNet, NetworkConfig, ParamSet};
use medmesh::ops::{
    concat_backward, concat_channels, mesh_conv_backward, mesh_conv_forward,
    mesh_conv_forward_cached, norm_backward, norm_forward, relu_backward, relu_forward, ConvKernel,
    Linear, Norm, NormMode,
};
use medmesh::pool::{mesh_pool, mesh_unpool, pool_backward, unpool_backward};
use medmesh::synth::{icosphere, random_surface};
use medmesh::train::{weighted_cross_entropy, weighted_cross_entropy_grad};
use medmesh::FeatureMap;
use rand::Rng;

pub const OP_TOL: f64 = 1e-4;
pub const NET_TOL: f64 = 1e-3;
const H: f64 = 1e-6;
const FLOOR: f64 = 1e-7;
/// Gradients of the network are O(0.01..100); entries far below that (such
/// as biases feeding a normalization, which are exactly zero) are compared
/// in absolute terms.
const NET_FLOOR: f64 = 1e-3;

fn fm_like(x: &FeatureMap, data: &[f64]) -> FeatureMap {
    FeatureMap::from_vec(x.channels(), x.edge_count(), data.to_vec()).unwrap()
}

fn flat(x: &FeatureMap) -> Vec<f64> {
    x.values().iter().copied().collect()
}

pub fn conv_errors() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut r = rng(1);
    for seed in 0..3 {
        let mesh = random_surface(seed, 400);
        let e = mesh.edge_count();
        let x = random_features(&mut r, 3, e);
        let k = ConvKernel::normal(3, 4, 0.5, &mut r);
        let probe_w = random_features(&mut r, 4, e);
        let (_, cache) = mesh_conv_forward_cached(&x, &mesh, &k).unwrap();
        let (dx, dk) = mesh_conv_backward(&probe_w, &cache, &k).unwrap();

        let coords = pick_coords(&mut r, 3 * e, 60);
        let err = worst_fd_error(&flat(&x), &flat(&dx), &coords, H, FLOOR, |v| {
            probe(
                &mesh_conv_forward(&fm_like(&x, v), &mesh, &k).unwrap(),
                &probe_w,
            )
        });
        out.push(("conv dx".into(), err));

        let w0: Vec<f64> = k.tensors().concat();
        let g0: Vec<f64> = dk.tensors().concat();
        let coords = pick_coords(&mut r, w0.len(), 40);
        let err = worst_fd_error(&w0, &g0, &coords, H, FLOOR, |v| {
            let mut kk = k.clone();
            let mut off = 0;
            for t in kk.tensors_mut() {
                let n = t.len();
                t.copy_from_slice(&v[off..off + n]);
                off += n;
            }
            probe(&mesh_conv_forward(&x, &mesh, &kk).unwrap(), &probe_w)
        });
        out.push(("conv dW".into(), err));
    }
    out
}

pub fn norm_errors() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut r = rng(2);
    let x = random_features(&mut r, 3, 50);
    let mut norm = Norm::new(3);
    for c in 0..3 {
        norm.gamma[c] = r.random_range(0.5..1.5);
        norm.beta[c] = r.random_range(-0.5..0.5);
        norm.running_mean[c] = r.random_range(-0.2..0.2);
        norm.running_var[c] = r.random_range(0.5..2.0);
    }
    let probe_w = random_features(&mut r, 3, 50);
    for mode in [NormMode::Sample, NormMode::Running] {
        let (_, cache) = norm_forward(&x, &norm, mode).unwrap();
        let (dx, dn) = norm_backward(&probe_w, &cache, &norm).unwrap();
        let coords: Vec<usize> = (0..150).collect();
        let err = worst_fd_error(&flat(&x), &flat(&dx), &coords, H, FLOOR, |v| {
            probe(
                &norm_forward(&fm_like(&x, v), &norm, mode).unwrap().0,
                &probe_w,
            )
        });
        out.push((format!("{mode:?} dx"), err));
        let p0: Vec<f64> = norm.tensors().concat();
        let g0: Vec<f64> = dn.tensors().concat();
        let err = worst_fd_error(&p0, &g0, &(0..6).collect::<Vec<_>>(), H, FLOOR, |v| {
            let mut nn = norm.clone();
            nn.gamma.as_slice_mut().unwrap().copy_from_slice(&v[..3]);
            nn.beta.as_slice_mut().unwrap().copy_from_slice(&v[3..]);
            probe(&norm_forward(&x, &nn, mode).unwrap().0, &probe_w)
        });
        out.push((format!("{mode:?} dgamma/dbeta"), err));
    }
    out
}

pub fn relu_linear_concat_errors() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut r = rng(3);
    let x = random_features(&mut r, 4, 30);
    let probe_w = random_features(&mut r, 4, 30);
    let y = relu_forward(&x);
    let dx = relu_backward(&probe_w, &y).unwrap();
    let coords: Vec<usize> = (0..120).collect();
    let err = worst_fd_error(&flat(&x), &flat(&dx), &coords, H, FLOOR, |v| {
        probe(&relu_forward(&fm_like(&x, v)), &probe_w)
    });
    out.push(("relu".into(), err));

    let lin = Linear::normal(4, 3, 0.7, &mut r);
    let probe3 = random_features(&mut r, 3, 30);
    let (dx, dl) = lin.backward(&probe3, &x).unwrap();
    let err = worst_fd_error(&flat(&x), &flat(&dx), &coords, H, FLOOR, |v| {
        probe(&lin.forward(&fm_like(&x, v)).unwrap(), &probe3)
    });
    out.push(("linear dx".into(), err));
    let p0: Vec<f64> = lin.tensors().concat();
    let g0: Vec<f64> = dl.tensors().concat();
    let err = worst_fd_error(
        &p0,
        &g0,
        &(0..p0.len()).collect::<Vec<_>>(),
        H,
        FLOOR,
        |v| {
            let mut l = lin.clone();
            l.weights.as_slice_mut().unwrap().copy_from_slice(&v[..12]);
            l.bias.as_slice_mut().unwrap().copy_from_slice(&v[12..]);
            probe(&l.forward(&x).unwrap(), &probe3)
        },
    );
    out.push(("linear dW".into(), err));

    let b = random_features(&mut r, 2, 30);
    let probe6 = random_features(&mut r, 6, 30);
    let (da, _) = concat_backward(&probe6, 4).unwrap();
    let err = worst_fd_error(&flat(&x), &flat(&da), &coords, H, FLOOR, |v| {
        probe(&concat_channels(&fm_like(&x, v), &b).unwrap(), &probe6)
    });
    out.push(("concat".into(), err));
    out
}

pub fn pool_unpool_errors() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut r = rng(4);
    let mesh = random_surface(7, 600);
    let e = mesh.edge_count();
    let x = random_features(&mut r, 3, e);
    let pooled = mesh_pool(&mesh, &x, e * 3 / 4).unwrap();
    let h = pooled.history;
    let probe_p = random_features(&mut r, 3, h.pooled_edge_count());
    let dx = pool_backward(&probe_p, &h).unwrap();
    let coords = pick_coords(&mut r, 3 * e, 80);
    // Small steps keep the collapse order fixed, so pooling is locally linear.
    let err = worst_fd_error(&flat(&x), &flat(&dx), &coords, H, FLOOR, |v| {
        probe(
            &mesh_pool(&mesh, &fm_like(&x, v), e * 3 / 4)
                .unwrap()
                .features,
            &probe_p,
        )
    });
    out.push(("pool".into(), err));

    let xp = pooled.features;
    let probe_u = random_features(&mut r, 3, e);
    let dxp = unpool_backward(&probe_u, &h).unwrap();
    let coords: Vec<usize> = (0..xp.values().len()).collect();
    let err = worst_fd_error(&flat(&xp), &flat(&dxp), &coords, H, FLOOR, |v| {
        probe(&mesh_unpool(&fm_like(&xp, v), &h).unwrap(), &probe_u)
    });
    out.push(("unpool".into(), err));
    out
}

pub fn cross_entropy_errors() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut r = rng(5);
    let logits = random_features(&mut r, 4, 25);
    let labels: Vec<usize> = (0..25).map(|_| r.random_range(0..4)).collect();
    let mask: Vec<bool> = (0..25).map(|i| i % 7 != 3).collect();
    let w = [0.3, 0.2, 0.3, 0.2];
    let norm: f64 = labels
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| w[l])
        .sum();
    let g = weighted_cross_entropy_grad(&logits, &labels, &mask, &w, norm).unwrap();
    let coords: Vec<usize> = (0..100).collect();
    let err = worst_fd_error(&flat(&logits), &flat(&g), &coords, H, FLOOR, |v| {
        weighted_cross_entropy(&fm_like(&logits, v), &labels, &mask, &w).unwrap()
    });
    out.push(("cross-entropy".into(), err));
    out
}

fn tiny_config() -> NetworkConfig {
    NetworkConfig {
        arch: "meshunet".into(),
        ncf: vec![4, 8],
        pool_res: vec![90],
        ninput_edges: 120,
        res_blocks: 1,
        init_type: "normal".into(),
        init_gain: 0.5,
        num_classes: 4,
    }
}

/// End-to-end check of every parameter tensor and of the input features.
pub fn meshunet_worst_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    // Radial jitter breaks the icosphere's symmetry, whose identical edges
    // leave normalized channels with near-zero variance.
    let ico = icosphere(1);
    let verts = ico
        .vertices()
        .iter()
        .map(|p| {
            let s = 1.0 + r.random_range(-0.03..0.03);
            [p[0] * s, p[1] * s, p[2] * s]
        })
        .collect();
    let mesh = ico.with_vertices(verts).unwrap();
    let x = extract_edge_features(&mesh).unwrap();
    let mut net = MeshUNet::new(&tiny_config(), seed).unwrap();
    net.set_input_stats(vec![0.5, 1.0, 1.0, 0.5, 0.5], vec![0.3, 0.2, 0.2, 0.2, 0.2])
        .unwrap();
    let probe_w = random_features(&mut r, 4, 120);
    let (_, cache) = net.forward(&mesh, &x, NormMode::Sample).unwrap();
    let mut grads = net.zero_grads();
    let dx = net.backward(&probe_w, &cache, &mut grads).unwrap();

    let eval = |n: &MeshUNet, x: &FeatureMap| {
        probe(&n.forward(&mesh, x, NormMode::Sample).unwrap().0, &probe_w)
    };
    let mut worst = 0.0f64;
    let params = net
        .layers
        .tensors()
        .iter()
        .map(|t| t.to_vec())
        .collect::<Vec<_>>();
    let grad_t = grads
        .tensors()
        .iter()
        .map(|t| t.to_vec())
        .collect::<Vec<_>>();
    for (ti, (p0, g0)) in params.iter().zip(&grad_t).enumerate() {
        let coords = pick_coords(&mut r, p0.len(), 4);
        let err = worst_fd_error(p0, g0, &coords, H, NET_FLOOR, |v| {
            let mut n = net.clone();
            n.layers.tensors_mut()[ti].copy_from_slice(v);
            eval(&n, &x)
        });
        worst = worst.max(err);
    }
    let coords = pick_coords(&mut r, 5 * 120, 40);
    let err = worst_fd_error(&flat(&x), &flat(&dx), &coords, H, NET_FLOOR, |v| {
        eval(&net, &fm_like(&x, v))
    });
    worst.max(err)
}
