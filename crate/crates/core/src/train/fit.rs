//! The training loop.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::{augment_variants, AugmentConfig};
use super::{
    adam_step, lr_lambda, weighted_cross_entropy_grad, weighted_cross_entropy_parts, AdamState,
    LabeledSample,
};
use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::mesh::{extract_edge_features, Mesh, FEATURE_CHANNELS};
use crate::metrics::{confusion, ConfusionMatrix, MetricsReport};
use crate::net::{MeshUNet, ParamSet};
use crate::ops::NormMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub lr_policy: String,
    pub beta1: f64,
    pub num_aug: usize,
    pub flip_edges: f64,
    pub scale_verts: bool,
    pub slide_verts: f64,
    pub weighted_loss: Vec<f64>,
    pub epochs: usize,
    pub decay_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 3,
            lr: 0.001,
            lr_policy: "lambda".into(),
            beta1: 0.9,
            num_aug: 20,
            flip_edges: 0.0,
            scale_verts: true,
            slide_verts: 0.4,
            weighted_loss: vec![0.3, 0.2, 0.3, 0.2],
            epochs: 100,
            decay_epochs: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if !matches!(self.lr_policy.as_str(), "lambda" | "fixed") {
            return bad(format!("unsupported lr_policy {:?}", self.lr_policy));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad(format!("beta1 {} outside [0, 1)", self.beta1));
        }
        for (name, v) in [
            ("flip_edges", self.flip_edges),
            ("slide_verts", self.slide_verts),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if self.weighted_loss.len() != num_classes {
            return bad(format!(
                "{} class weights for {num_classes} classes",
                self.weighted_loss.len()
            ));
        }
        if self
            .weighted_loss
            .iter()
            .any(|w| !(*w > 0.0 && w.is_finite()))
        {
            return bad("class weights must be positive".into());
        }
        if self.epochs + self.decay_epochs == 0 {
            return bad("no epochs to run".into());
        }
        Ok(())
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            scale_verts: self.scale_verts,
            slide_verts: self.slide_verts,
            flip_edges: self.flip_edges,
        }
    }

    pub fn total_epochs(&self) -> usize {
        self.epochs + self.decay_epochs
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_policy.as_str() {
            "fixed" => self.lr,
            _ => lr_lambda(epoch, self.lr, self.epochs, self.decay_epochs),
        }
    }
}

/// A sample together with its extracted input features.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mesh: Mesh,
    pub features: FeatureMap,
    pub labels: Vec<usize>,
    pub mask: Vec<bool>,
}

impl Prepared {
    pub fn new(s: &LabeledSample) -> Result<Self> {
        Ok(Self {
            features: extract_edge_features(&s.mesh)?,
            mesh: s.mesh.clone(),
            labels: s.labels.clone(),
            mask: s.valid_mask.clone(),
        })
    }
}

/// Per-channel mean and standard deviation over all edges of `samples`.
pub fn feature_stats<'a>(
    samples: impl IntoIterator<Item = &'a FeatureMap>,
) -> (Vec<f64>, Vec<f64>) {
    let mut sum = [0.0; FEATURE_CHANNELS];
    let mut sq = [0.0; FEATURE_CHANNELS];
    let mut n = 0usize;
    for x in samples {
        for (c, row) in x.values().rows().into_iter().enumerate() {
            sum[c] += row.sum();
            sq[c] += row.iter().map(|v| v * v).sum::<f64>();
        }
        n += x.edge_count();
    }
    let n = n.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| (q / n - m * m).max(0.0).sqrt())
        .collect();
    (mean, std)
}

/// Confusion matrix of `net` over `samples`.
pub fn evaluate(net: &MeshUNet, samples: &[Prepared], mode: NormMode) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(net.config().num_classes);
    for s in samples {
        let pred = net.predict(&s.mesh, &s.features, mode)?;
        cm.merge(&confusion(
            &pred,
            &s.labels,
            &s.mask,
            net.config().num_classes,
        )?)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val: MetricsReport,
}

impl EpochRecord {
    /// `epoch=<n> loss=<f> val_miou=<f> iou_c0=<f> ...`
    pub fn log_line(&self) -> String {
        let mut s = format!(
            "epoch={} loss={} val_miou={}",
            self.epoch, self.loss, self.val.iou.mean
        );
        for (c, v) in self.val.iou.per_class.iter().enumerate() {
            match v {
                Some(v) => s.push_str(&format!(" iou_c{c}={v}")),
                None => s.push_str(&format!(" iou_c{c}=undefined")),
            }
        }
        s
    }
}

pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation mean IoU.
    pub best: MeshUNet,
    pub best_epoch: usize,
    pub last: MeshUNet,
    pub history: Vec<EpochRecord>,
}

pub type BestCallback<'a> = dyn FnMut(&MeshUNet) -> Result<()> + 'a;

pub struct TrainOptions<'a> {
    /// Normalization mode used for validation passes.
    pub eval_mode: NormMode,
    /// Receives one log line per epoch.
    pub log: Option<&'a mut dyn Write>,
    /// Called with the new best model whenever validation improves.
    pub on_best: Option<&'a mut BestCallback<'a>>,
}

impl Default for TrainOptions<'_> {
    fn default() -> Self {
        Self {
            eval_mode: NormMode::Running,
            log: None,
            on_best: None,
        }
    }
}

/// Trains `net` on `train`, selecting the best epoch on `val`.
pub fn train_loop(
    train: &[LabeledSample],
    val: &[LabeledSample],
    mut net: MeshUNet,
    cfg: &TrainConfig,
    mut opts: TrainOptions<'_>,
) -> Result<TrainOutcome> {
    let num_classes = net.config().num_classes;
    cfg.validate(num_classes)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidConfig(
            "train and validation splits must be non-empty".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let aug = cfg.augment_config();
    let mut variants: Vec<Vec<Prepared>> = Vec::with_capacity(train.len());
    for s in train {
        let copies = if cfg.num_aug == 0 || aug.is_identity() {
            vec![s.clone()]
        } else {
            augment_variants(s, &mut rng, &aug, cfg.num_aug)?
        };
        variants.push(copies.iter().map(Prepared::new).collect::<Result<_>>()?);
    }
    let val: Vec<Prepared> = val.iter().map(Prepared::new).collect::<Result<_>>()?;
    let (mean, std) = feature_stats(variants.iter().flatten().map(|p| &p.features));
    net.set_input_stats(mean, std)?;

    let weights = &cfg.weighted_loss;
    let mut adam = AdamState::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.total_epochs());
    let mut best: Option<(f64, usize, MeshUNet)> = None;

    for epoch in 0..cfg.total_epochs() {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let picks: Vec<&Prepared> = order
            .iter()
            .map(|&i| &variants[i][rng.random_range(0..variants[i].len())])
            .collect();
        let (mut epoch_nll, mut epoch_w) = (0.0, 0.0);
        for (b, batch) in picks.chunks(cfg.batch_size).enumerate() {
            let normalizer: f64 = batch
                .iter()
                .flat_map(|s| {
                    s.labels
                        .iter()
                        .zip(&s.mask)
                        .filter(|(_, &m)| m)
                        .map(|(&l, _)| weights[l])
                })
                .sum();
            if normalizer <= 0.0 {
                continue;
            }
            let mut grads = net.zero_grads();
            let mut batch_nll = 0.0;
            let mut caches = Vec::with_capacity(batch.len());
            for s in batch {
                let (logits, cache) = net.forward(&s.mesh, &s.features, NormMode::Sample)?;
                batch_nll += weighted_cross_entropy_parts(&logits, &s.labels, &s.mask, weights)?
                    .weighted_nll;
                let dlogits =
                    weighted_cross_entropy_grad(&logits, &s.labels, &s.mask, weights, normalizer)?;
                net.backward(&dlogits, &cache, &mut grads)?;
                caches.push(cache);
            }
            let loss = batch_nll / normalizer;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b,
                    value: loss,
                });
            }
            for c in &caches {
                net.update_running_stats(c);
            }
            {
                let g = grads.tensors();
                let mut p = net.layers.tensors_mut();
                adam_step(&mut p, &g, &mut adam, lr, cfg.beta1)?;
            }
            epoch_nll += batch_nll;
            epoch_w += normalizer;
        }

        let cm = evaluate(&net, &val, opts.eval_mode)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            loss: epoch_nll / epoch_w,
            val: MetricsReport::from_confusion(&cm)?,
        };
        let line = record.log_line();
        log::info!("{line}");
        if let Some(w) = opts.log.as_mut() {
            writeln!(w, "{line}").map_err(|e| Error::io("<training log>", e))?;
        }
        let improved = best
            .as_ref()
            .is_none_or(|(m, _, _)| record.val.iou.mean > *m);
        if improved {
            if let Some(cb) = opts.on_best.as_mut() {
                cb(&net)?;
            }
            best = Some((record.val.iou.mean, epoch + 1, net.clone()));
        }
        history.push(record);
    }

    let (_, best_epoch, best) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        best,
        best_epoch,
        last: net,
        history,
    })
}
