//! MeshUNet: residual mesh-conv encoder with pooling, mirrored decoder with
//! unpooling and skip concatenation, per-edge classifier head.
//!
//! Samples with fewer than `ninput_edges` edges are padded implicitly: the
//! missing edges never enter a convolution or normalization, they only count
//! against the pooling budget and show up as zero logits in the output.

mod checkpoint;
mod params;

use std::sync::Arc;

use ndarray::s;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use params::ParamSet;

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::mesh::{Mesh, FEATURE_CHANNELS};
use crate::ops::{
    concat_backward, concat_channels, mesh_conv_backward, mesh_conv_forward_cached, norm_backward,
    norm_forward, relu_backward, relu_forward, ConvCache, ConvKernel, Linear, Norm, NormCache,
    NormMode,
};
use crate::pool::{mesh_pool_shared, mesh_unpool, pool_backward, unpool_backward, PoolHistory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub arch: String,
    pub ncf: Vec<usize>,
    pub pool_res: Vec<usize>,
    pub ninput_edges: usize,
    pub res_blocks: usize,
    pub init_type: String,
    pub init_gain: f64,
    pub num_classes: usize,
}

impl NetworkConfig {
    /// Best-model parameters for the four-class aneurysm task.
    pub fn table1() -> Self {
        Self {
            arch: "meshunet".into(),
            ncf: vec![32, 64, 128, 256],
            pool_res: vec![9000, 4000, 2500],
            ninput_edges: 19200,
            res_blocks: 3,
            init_type: "normal".into(),
            init_gain: 0.02,
            num_classes: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.arch != "meshunet" {
            return bad(format!("unsupported arch {:?}", self.arch));
        }
        if self.ncf.is_empty() || self.ncf.contains(&0) {
            return bad("ncf entries must be positive".into());
        }
        if self.pool_res.len() + 1 != self.ncf.len() {
            return bad(format!(
                "{} pooling resolutions for {} conv stages",
                self.pool_res.len(),
                self.ncf.len()
            ));
        }
        if self.pool_res.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!(
                "pool_res {:?} not strictly decreasing",
                self.pool_res
            ));
        }
        if self
            .pool_res
            .first()
            .is_some_and(|&p| p >= self.ninput_edges)
        {
            return bad(format!(
                "pool_res[0] = {} not below ninput_edges = {}",
                self.pool_res[0], self.ninput_edges
            ));
        }
        if self.ninput_edges == 0 || self.num_classes == 0 {
            return bad("ninput_edges and num_classes must be positive".into());
        }
        if !matches!(self.init_type.as_str(), "normal" | "xavier" | "kaiming") {
            return bad(format!("unsupported init_type {:?}", self.init_type));
        }
        if !(self.init_gain > 0.0 && self.init_gain.is_finite()) {
            return bad(format!("init_gain {} must be positive", self.init_gain));
        }
        Ok(())
    }

    fn init_std(&self, fan_in: usize, fan_out: usize) -> f64 {
        match self.init_type.as_str() {
            "xavier" => self.init_gain * (2.0 / (fan_in + fan_out) as f64).sqrt(),
            "kaiming" => (2.0 / fan_in as f64).sqrt(),
            _ => self.init_gain,
        }
    }
}

/// conv -> norm -> relu
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub conv: ConvKernel,
    pub norm: Norm,
}

/// conv -> norm -> relu -> conv -> norm, identity shortcut, relu
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResBlock {
    pub conv1: ConvKernel,
    pub norm1: Norm,
    pub conv2: ConvKernel,
    pub norm2: Norm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderStage {
    pub entry: ConvBlock,
    pub res: Vec<ResBlock>,
}

/// Brings level `i + 1` features back to level `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderStage {
    pub up: ConvBlock,
    pub merge: ConvBlock,
    pub res: Vec<ResBlock>,
}

/// All trainable tensors plus normalization running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layers {
    pub encoders: Vec<EncoderStage>,
    /// `decoders[i]` maps level `i + 1` to level `i`.
    pub decoders: Vec<DecoderStage>,
    pub head: Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshUNet {
    config: NetworkConfig,
    /// Per-channel statistics used to standardize raw edge features.
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    pub layers: Layers,
}

struct Init<'a, R: Rng> {
    cfg: &'a NetworkConfig,
    rng: &'a mut R,
}

impl<R: Rng> Init<'_, R> {
    fn conv(&mut self, i: usize, o: usize) -> ConvKernel {
        let std = self.cfg.init_std(i * crate::ops::KERNEL_DEPTH, o);
        ConvKernel::normal(i, o, std, self.rng)
    }

    fn block(&mut self, i: usize, o: usize) -> ConvBlock {
        ConvBlock {
            conv: self.conv(i, o),
            norm: Norm::new(o),
        }
    }

    fn res(&mut self, c: usize) -> Vec<ResBlock> {
        (0..self.cfg.res_blocks)
            .map(|_| ResBlock {
                conv1: self.conv(c, c),
                norm1: Norm::new(c),
                conv2: self.conv(c, c),
                norm2: Norm::new(c),
            })
            .collect()
    }
}

/// Builds a freshly initialized network.
pub fn build_meshunet<R: Rng>(cfg: &NetworkConfig, rng: &mut R) -> Result<MeshUNet> {
    cfg.validate()?;
    let ncf = &cfg.ncf;
    let mut init = Init { cfg, rng };
    let mut encoders = Vec::with_capacity(ncf.len());
    let mut in_ch = FEATURE_CHANNELS;
    for &c in ncf {
        encoders.push(EncoderStage {
            entry: init.block(in_ch, c),
            res: init.res(c),
        });
        in_ch = c;
    }
    let mut decoders = Vec::with_capacity(ncf.len() - 1);
    for i in 0..ncf.len() - 1 {
        decoders.push(DecoderStage {
            up: init.block(ncf[i + 1], ncf[i]),
            merge: init.block(2 * ncf[i], ncf[i]),
            res: init.res(ncf[i]),
        });
    }
    let head_std = cfg.init_std(ncf[0], cfg.num_classes);
    let head = Linear::normal(ncf[0], cfg.num_classes, head_std, init.rng);
    Ok(MeshUNet {
        config: cfg.clone(),
        input_mean: vec![0.0; FEATURE_CHANNELS],
        input_std: vec![1.0; FEATURE_CHANNELS],
        layers: Layers {
            encoders,
            decoders,
            head,
        },
    })
}

struct BlockCache {
    conv: ConvCache,
    norm: NormCache,
    out: FeatureMap,
}

struct ResCache {
    conv1: ConvCache,
    norm1: NormCache,
    act1: FeatureMap,
    conv2: ConvCache,
    norm2: NormCache,
    out: FeatureMap,
}

struct EncoderCache {
    entry: BlockCache,
    res: Vec<ResCache>,
}

struct DecoderCache {
    up: BlockCache,
    merge: BlockCache,
    res: Vec<ResCache>,
}

/// Activations of one forward pass, consumed by [`MeshUNet::backward`].
pub struct SampleCache {
    real_edges: usize,
    encoders: Vec<EncoderCache>,
    pools: Vec<PoolHistory>,
    /// indexed like `Layers::decoders`
    decoders: Vec<DecoderCache>,
    head_input: FeatureMap,
}

impl SampleCache {
    pub fn pool_histories(&self) -> &[PoolHistory] {
        &self.pools
    }
}

fn block_forward(
    b: &ConvBlock,
    x: &FeatureMap,
    mesh: &Mesh,
    mode: NormMode,
) -> Result<(FeatureMap, BlockCache)> {
    let (z, conv) = mesh_conv_forward_cached(x, mesh, &b.conv)?;
    let (y, norm) = norm_forward(&z, &b.norm, mode)?;
    let out = relu_forward(&y);
    Ok((out.clone(), BlockCache { conv, norm, out }))
}

fn block_backward(
    b: &ConvBlock,
    dy: &FeatureMap,
    c: &BlockCache,
    g: &mut ConvBlock,
) -> Result<FeatureMap> {
    let d = relu_backward(dy, &c.out)?;
    let (d, gn) = norm_backward(&d, &c.norm, &b.norm)?;
    let (dx, gc) = mesh_conv_backward(&d, &c.conv, &b.conv)?;
    g.norm.add_assign(&gn);
    g.conv.add_assign(&gc);
    Ok(dx)
}

fn res_forward(
    b: &ResBlock,
    x: &FeatureMap,
    mesh: &Mesh,
    mode: NormMode,
) -> Result<(FeatureMap, ResCache)> {
    let (z1, conv1) = mesh_conv_forward_cached(x, mesh, &b.conv1)?;
    let (y1, norm1) = norm_forward(&z1, &b.norm1, mode)?;
    let act1 = relu_forward(&y1);
    let (z2, conv2) = mesh_conv_forward_cached(&act1, mesh, &b.conv2)?;
    let (y2, norm2) = norm_forward(&z2, &b.norm2, mode)?;
    let out = relu_forward(&FeatureMap::from_array(y2.array() + x.array()));
    Ok((
        out.clone(),
        ResCache {
            conv1,
            norm1,
            act1,
            conv2,
            norm2,
            out,
        },
    ))
}

fn res_backward(
    b: &ResBlock,
    dy: &FeatureMap,
    c: &ResCache,
    g: &mut ResBlock,
) -> Result<FeatureMap> {
    let ds = relu_backward(dy, &c.out)?;
    let (d, gn2) = norm_backward(&ds, &c.norm2, &b.norm2)?;
    let (d, gc2) = mesh_conv_backward(&d, &c.conv2, &b.conv2)?;
    let d = relu_backward(&d, &c.act1)?;
    let (d, gn1) = norm_backward(&d, &c.norm1, &b.norm1)?;
    let (dx, gc1) = mesh_conv_backward(&d, &c.conv1, &b.conv1)?;
    g.norm2.add_assign(&gn2);
    g.conv2.add_assign(&gc2);
    g.norm1.add_assign(&gn1);
    g.conv1.add_assign(&gc1);
    Ok(FeatureMap::from_array(dx.into_array() + ds.array()))
}

fn res_chain_backward(
    blocks: &[ResBlock],
    mut d: FeatureMap,
    caches: &[ResCache],
    g: &mut [ResBlock],
) -> Result<FeatureMap> {
    for ((b, c), gb) in blocks.iter().zip(caches).zip(g.iter_mut()).rev() {
        d = res_backward(b, &d, c, gb)?;
    }
    Ok(d)
}

impl MeshUNet {
    /// Builds with a ChaCha RNG seeded from `seed`.
    pub fn new(cfg: &NetworkConfig, seed: u64) -> Result<Self> {
        build_meshunet(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_stats(&self) -> (&[f64], &[f64]) {
        (&self.input_mean, &self.input_std)
    }

    pub fn set_input_stats(&mut self, mean: Vec<f64>, std: Vec<f64>) -> Result<()> {
        if mean.len() != FEATURE_CHANNELS || std.len() != FEATURE_CHANNELS {
            return Err(Error::ChannelMismatch {
                expected: FEATURE_CHANNELS,
                got: mean.len().min(std.len()),
            });
        }
        self.input_std = std
            .into_iter()
            .map(|s| if s > 1e-12 { s } else { 1.0 })
            .collect();
        self.input_mean = mean;
        Ok(())
    }

    /// Number of pooling layers (and of unpooling layers).
    pub fn pool_count(&self) -> usize {
        self.config.pool_res.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.tensors().iter().map(|t| t.len()).sum()
    }

    fn standardize(&self, x: &FeatureMap) -> FeatureMap {
        let mut v = x.array().clone();
        for (c, mut row) in v.rows_mut().into_iter().enumerate() {
            let (m, s) = (self.input_mean[c], self.input_std[c]);
            row.mapv_inplace(|a| (a - m) / s);
        }
        FeatureMap::from_array(v)
    }

    /// Logits `num_classes × ninput_edges`; columns past the mesh's edge
    /// count are padding and hold zeros.
    pub fn forward(
        &self,
        mesh: &Mesh,
        features: &FeatureMap,
        mode: NormMode,
    ) -> Result<(FeatureMap, SampleCache)> {
        let cfg = &self.config;
        let real = mesh.edge_count();
        if real > cfg.ninput_edges {
            return Err(Error::EdgeCountMismatch {
                expected: cfg.ninput_edges,
                got: real,
            });
        }
        features.check_shape(FEATURE_CHANNELS, real)?;
        let n_pad = cfg.ninput_edges - real;
        let levels = cfg.ncf.len();

        let mut h = self.standardize(features);
        let mut mesh_cur = Arc::new(mesh.clone());
        let mut encoders = Vec::with_capacity(levels);
        let mut skips = Vec::with_capacity(levels - 1);
        let mut pools = Vec::with_capacity(levels - 1);
        for (i, stage) in self.layers.encoders.iter().enumerate() {
            let (x, entry) = block_forward(&stage.entry, &h, &mesh_cur, mode)?;
            h = x;
            let mut res = Vec::with_capacity(stage.res.len());
            for b in &stage.res {
                let (x, c) = res_forward(b, &h, &mesh_cur, mode)?;
                h = x;
                res.push(c);
            }
            encoders.push(EncoderCache { entry, res });
            if i + 1 < levels {
                let target = cfg.pool_res[i]
                    .checked_sub(n_pad)
                    .filter(|&t| t > 0)
                    .ok_or(Error::PoolTargetUnreachable {
                        target: cfg.pool_res[i],
                        achieved: cfg.ninput_edges,
                    })?;
                let out = mesh_pool_shared(mesh_cur, &h, target)?;
                skips.push(h);
                h = out.features;
                mesh_cur = Arc::new(out.mesh);
                pools.push(out.history);
            }
        }

        let mut decoders: Vec<Option<DecoderCache>> = (0..levels - 1).map(|_| None).collect();
        for i in (0..levels - 1).rev() {
            let stage = &self.layers.decoders[i];
            let (u, up) = block_forward(&stage.up, &h, &mesh_cur, mode)?;
            let u = mesh_unpool(&u, &pools[i])?;
            mesh_cur = pools[i].pre_pool_mesh().clone();
            let cat = concat_channels(&u, &skips[i])?;
            let (x, merge) = block_forward(&stage.merge, &cat, &mesh_cur, mode)?;
            h = x;
            let mut res = Vec::with_capacity(stage.res.len());
            for b in &stage.res {
                let (x, c) = res_forward(b, &h, &mesh_cur, mode)?;
                h = x;
                res.push(c);
            }
            decoders[i] = Some(DecoderCache { up, merge, res });
        }

        let logits_real = self.layers.head.forward(&h)?;
        let mut logits = FeatureMap::zeros(cfg.num_classes, cfg.ninput_edges);
        logits
            .values_mut()
            .slice_mut(s![.., ..real])
            .assign(&logits_real.values());
        Ok((
            logits,
            SampleCache {
                real_edges: real,
                encoders,
                pools,
                decoders: decoders
                    .into_iter()
                    .map(|d| d.expect("every level decoded"))
                    .collect(),
                head_input: h,
            },
        ))
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the raw input features.
    pub fn backward(
        &self,
        dlogits: &FeatureMap,
        cache: &SampleCache,
        grads: &mut Layers,
    ) -> Result<FeatureMap> {
        let cfg = &self.config;
        dlogits.check_shape(cfg.num_classes, cfg.ninput_edges)?;
        let levels = cfg.ncf.len();
        let d_real = FeatureMap::from_array(
            dlogits
                .values()
                .slice(s![.., ..cache.real_edges])
                .to_owned(),
        );
        let (mut d, gh) = self.layers.head.backward(&d_real, &cache.head_input)?;
        grads.head.add_assign(&gh);

        let mut dskips = Vec::with_capacity(levels - 1);
        for i in 0..levels - 1 {
            let (stage, c, g) = (
                &self.layers.decoders[i],
                &cache.decoders[i],
                &mut grads.decoders[i],
            );
            d = res_chain_backward(&stage.res, d, &c.res, &mut g.res)?;
            d = block_backward(&stage.merge, &d, &c.merge, &mut g.merge)?;
            let (du, dskip) = concat_backward(&d, cfg.ncf[i])?;
            dskips.push(dskip);
            let du = unpool_backward(&du, &cache.pools[i])?;
            d = block_backward(&stage.up, &du, &c.up, &mut g.up)?;
        }

        for i in (0..levels).rev() {
            if i + 1 < levels {
                let dp = pool_backward(&d, &cache.pools[i])?;
                d = FeatureMap::from_array(dp.into_array() + dskips[i].array());
            }
            let (stage, c, g) = (
                &self.layers.encoders[i],
                &cache.encoders[i],
                &mut grads.encoders[i],
            );
            d = res_chain_backward(&stage.res, d, &c.res, &mut g.res)?;
            d = block_backward(&stage.entry, &d, &c.entry, &mut g.entry)?;
        }

        let mut dx = d.into_array();
        for (c, mut row) in dx.rows_mut().into_iter().enumerate() {
            let s = self.input_std[c];
            row.mapv_inplace(|a| a / s);
        }
        Ok(FeatureMap::from_array(dx))
    }

    /// Folds the per-sample statistics of a training pass into the running averages.
    pub fn update_running_stats(&mut self, cache: &SampleCache) {
        fn block(b: &mut ConvBlock, c: &BlockCache) {
            b.norm.update_running(&c.norm.mean, &c.norm.var);
        }
        fn res(bs: &mut [ResBlock], cs: &[ResCache]) {
            for (b, c) in bs.iter_mut().zip(cs) {
                b.norm1.update_running(&c.norm1.mean, &c.norm1.var);
                b.norm2.update_running(&c.norm2.mean, &c.norm2.var);
            }
        }
        for (s, c) in self.layers.encoders.iter_mut().zip(&cache.encoders) {
            block(&mut s.entry, &c.entry);
            res(&mut s.res, &c.res);
        }
        for (s, c) in self.layers.decoders.iter_mut().zip(&cache.decoders) {
            block(&mut s.up, &c.up);
            block(&mut s.merge, &c.merge);
            res(&mut s.res, &c.res);
        }
    }

    /// Arg-max class per real edge (ties resolve to the lower class).
    pub fn predict(
        &self,
        mesh: &Mesh,
        features: &FeatureMap,
        mode: NormMode,
    ) -> Result<Vec<usize>> {
        let (logits, _) = self.forward(mesh, features, mode)?;
        Ok(argmax_edges(&logits, mesh.edge_count()))
    }

    /// Zero-valued gradient accumulator with this network's shapes.
    pub fn zero_grads(&self) -> Layers {
        self.layers.zeros_like()
    }
}

/// Arg-max over channels for the first `edges` columns.
pub fn argmax_edges(logits: &FeatureMap, edges: usize) -> Vec<usize> {
    (0..edges)
        .map(|e| {
            let col = logits.edge(e);
            let mut best = 0;
            for c in 1..col.len() {
                if col[c] > col[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
