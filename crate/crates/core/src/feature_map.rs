//! Per-edge feature storage shared by every layer.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `channels × edges` block of real values.
///
/// Gradients with respect to activations use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    values: Array2<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, edge_count: usize) -> Self {
        Self {
            values: Array2::zeros((channels, edge_count)),
        }
    }

    pub fn from_array(values: Array2<f64>) -> Self {
        Self { values }
    }

    /// Builds a map from channel-major data (`channels` rows of `edge_count` values).
    pub fn from_vec(channels: usize, edge_count: usize, data: Vec<f64>) -> Result<Self> {
        let values = Array2::from_shape_vec((channels, edge_count), data)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(Self { values })
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn values_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.values.view_mut()
    }

    pub fn array(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_array(self) -> Array2<f64> {
        self.values
    }

    pub fn get(&self, channel: usize, edge: usize) -> f64 {
        self.values[(channel, edge)]
    }

    pub fn set(&mut self, channel: usize, edge: usize, value: f64) {
        self.values[(channel, edge)] = value;
    }

    /// Feature vector of one edge across all channels.
    pub fn edge(&self, edge: usize) -> ArrayView1<'_, f64> {
        self.values.column(edge)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> f64 {
        assert_eq!(self.values.dim(), other.values.dim());
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean norm of each edge's feature vector.
    pub fn edge_norms(&self) -> Vec<f64> {
        self.values
            .map_axis(Axis(0), |col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
            .to_vec()
    }

    pub(crate) fn check_shape(&self, channels: usize, edge_count: usize) -> Result<()> {
        if self.channels() != channels || self.edge_count() != edge_count {
            return Err(Error::ShapeMismatch(format!(
                "expected {channels}x{edge_count}, got {}x{}",
                self.channels(),
                self.edge_count()
            )));
        }
        Ok(())
    }
}
