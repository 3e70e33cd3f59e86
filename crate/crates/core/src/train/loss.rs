//! Class-weighted cross-entropy over edges.

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;

/// Weighted sums of one sample, kept separate so a batch can be normalized
/// by its total applied weight.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    /// `Σ mask · w_y · (−log p_y)`
    pub weighted_nll: f64,
    /// `Σ mask · w_y`
    pub weight_sum: f64,
}

fn validate(logits: &FeatureMap, labels: &[usize], mask: &[bool], weights: &[f64]) -> Result<()> {
    let classes = logits.channels();
    if weights.len() != classes {
        return Err(Error::ShapeMismatch(format!(
            "{} class weights for {classes} classes",
            weights.len()
        )));
    }
    if labels.len() > logits.edge_count() || mask.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels, {} mask entries, {} edges",
            labels.len(),
            mask.len(),
            logits.edge_count()
        )));
    }
    for (&l, &m) in labels.iter().zip(mask) {
        if m && l >= classes {
            return Err(Error::LabelOutOfRange {
                label: l,
                num_classes: classes,
            });
        }
    }
    Ok(())
}

fn log_softmax_at(logits: &FeatureMap, e: usize, out: &mut [f64]) {
    let col = logits.edge(e);
    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + col.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for (o, v) in out.iter_mut().zip(col.iter()) {
        *o = v - lse;
    }
}

/// Unnormalized sums for one sample. Edges past `labels.len()` are ignored.
pub fn weighted_cross_entropy_parts(
    logits: &FeatureMap,
    labels: &[usize],
    mask: &[bool],
    weights: &[f64],
) -> Result<LossParts> {
    validate(logits, labels, mask, weights)?;
    let mut buf = vec![0.0; logits.channels()];
    let mut parts = LossParts::default();
    for (e, (&l, &m)) in labels.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        log_softmax_at(logits, e, &mut buf);
        parts.weighted_nll -= weights[l] * buf[l];
        parts.weight_sum += weights[l];
    }
    Ok(parts)
}

/// Weighted mean of the per-edge negative log-likelihood.
pub fn weighted_cross_entropy(
    logits: &FeatureMap,
    labels: &[usize],
    mask: &[bool],
    weights: &[f64],
) -> Result<f64> {
    let p = weighted_cross_entropy_parts(logits, labels, mask, weights)?;
    if p.weight_sum <= 0.0 {
        return Err(Error::EmptyMask);
    }
    Ok(p.weighted_nll / p.weight_sum)
}

/// Gradient of `weighted_nll / normalizer` with respect to the logits.
pub fn weighted_cross_entropy_grad(
    logits: &FeatureMap,
    labels: &[usize],
    mask: &[bool],
    weights: &[f64],
    normalizer: f64,
) -> Result<FeatureMap> {
    validate(logits, labels, mask, weights)?;
    if normalizer <= 0.0 {
        return Err(Error::EmptyMask);
    }
    let classes = logits.channels();
    let mut grad = FeatureMap::zeros(classes, logits.edge_count());
    let mut buf = vec![0.0; classes];
    for (e, (&l, &m)) in labels.iter().zip(mask).enumerate() {
        if !m {
            continue;
        }
        log_softmax_at(logits, e, &mut buf);
        let scale = weights[l] / normalizer;
        for (c, lp) in buf.iter().enumerate().take(classes) {
            let p = lp.exp();
            let onehot = if c == l { 1.0 } else { 0.0 };
            grad.set(c, e, scale * (p - onehot));
        }
    }
    Ok(grad)
}
