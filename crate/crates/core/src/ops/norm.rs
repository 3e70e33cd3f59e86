//! Per-sample channel normalization over edges, with learned scale/shift.
//!
//! Training statistics come from the sample itself; running averages of
//! those statistics are kept for inference.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;

pub const NORM_EPS: f64 = 1e-5;
pub const NORM_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Normalize with the statistics of the current sample.
    Sample,
    /// Normalize with running statistics.
    Running,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct NormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    mode: NormMode,
    /// per-channel sample mean / biased variance, for running-stat updates
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl Norm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
        }
    }

    /// Zero-valued instance with matching shapes, used as a gradient accumulator.
    pub fn zeros(channels: usize) -> Self {
        Self {
            gamma: Array1::zeros(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::zeros(channels),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn update_running(&mut self, mean: &Array1<f64>, var: &Array1<f64>) {
        self.running_mean = &self.running_mean * (1.0 - NORM_MOMENTUM) + mean * NORM_MOMENTUM;
        self.running_var = &self.running_var * (1.0 - NORM_MOMENTUM) + var * NORM_MOMENTUM;
    }
}

pub fn norm_forward(
    x: &FeatureMap,
    norm: &Norm,
    mode: NormMode,
) -> Result<(FeatureMap, NormCache)> {
    let channels = norm.channels();
    if x.channels() != channels {
        return Err(Error::ChannelMismatch {
            expected: channels,
            got: x.channels(),
        });
    }
    if x.edge_count() == 0 {
        return Err(Error::ShapeMismatch("normalization over zero edges".into()));
    }
    let xv = x.array();
    let n = x.edge_count() as f64;
    let mean = xv.sum_axis(Axis(1)) / n;
    let centered = xv - &mean.view().insert_axis(Axis(1));
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / n;

    let (use_mean, use_var) = match mode {
        NormMode::Sample => (mean.clone(), var.clone()),
        NormMode::Running => (norm.running_mean.clone(), norm.running_var.clone()),
    };
    let inv_std = use_var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
    let xhat = (xv - &use_mean.view().insert_axis(Axis(1))) * inv_std.view().insert_axis(Axis(1));
    let y = &xhat * &norm.gamma.view().insert_axis(Axis(1)) + norm.beta.view().insert_axis(Axis(1));
    Ok((
        FeatureMap::from_array(y),
        NormCache {
            xhat,
            inv_std,
            mode,
            mean,
            var,
        },
    ))
}

/// Returns the input gradient and a [`Norm`] holding `dgamma`/`dbeta`.
pub fn norm_backward(
    upstream: &FeatureMap,
    cache: &NormCache,
    norm: &Norm,
) -> Result<(FeatureMap, Norm)> {
    let (channels, edges) = cache.xhat.dim();
    upstream.check_shape(channels, edges)?;
    let dy = upstream.array();
    let dgamma = (dy * &cache.xhat).sum_axis(Axis(1));
    let dbeta = dy.sum_axis(Axis(1));
    let dxhat = dy * &norm.gamma.view().insert_axis(Axis(1));
    let dx = match cache.mode {
        NormMode::Running => dxhat * cache.inv_std.view().insert_axis(Axis(1)),
        NormMode::Sample => {
            let n = edges as f64;
            let sum_dxhat = dxhat.sum_axis(Axis(1));
            let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(1));
            let mut dx = dxhat * n;
            dx -= &sum_dxhat.view().insert_axis(Axis(1));
            dx -= &(&cache.xhat * &sum_dxhat_xhat.view().insert_axis(Axis(1)));
            dx * (&cache.inv_std / n).view().insert_axis(Axis(1))
        }
    };
    let mut grad = Norm::zeros(channels);
    grad.gamma = dgamma;
    grad.beta = dbeta;
    Ok((FeatureMap::from_array(dx), grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let x = FeatureMap::from_vec(2, 4, vec![3.0, 3.0, 3.0, 3.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, cache) = norm_forward(&x, &Norm::new(2), NormMode::Sample).unwrap();
        for e in 0..4 {
            assert_eq!(y.get(0, e), 0.0);
        }
        let row: f64 = (0..4).map(|e| y.get(1, e)).sum();
        assert!(row.abs() < 1e-12);
        assert_eq!(cache.mean[1], 2.5);
        assert_eq!(cache.var[1], 1.25);
    }

    #[test]
    fn running_mode_uses_running_stats() {
        let mut n = Norm::new(1);
        n.running_mean[0] = 1.0;
        n.running_var[0] = 4.0 - NORM_EPS;
        let x = FeatureMap::from_vec(1, 2, vec![3.0, 5.0]).unwrap();
        let (y, _) = norm_forward(&x, &n, NormMode::Running).unwrap();
        assert!((y.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((y.get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn channel_mismatch() {
        let x = FeatureMap::zeros(3, 4);
        assert!(matches!(
            norm_forward(&x, &Norm::new(2), NormMode::Sample),
            Err(Error::ChannelMismatch { .. })
        ));
    }
}
