//! Differentiable layers with explicit forward and backward passes.

mod conv;
mod norm;

pub use conv::{
    mesh_conv_backward, mesh_conv_forward, mesh_conv_forward_cached, ConvCache, ConvKernel, Linear,
    KERNEL_DEPTH,
};
pub use norm::{norm_backward, norm_forward, Norm, NormCache, NormMode, NORM_EPS, NORM_MOMENTUM};

use ndarray::{concatenate, s, Axis};

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;

pub fn relu_forward(x: &FeatureMap) -> FeatureMap {
    FeatureMap::from_array(x.array().mapv(|v| v.max(0.0)))
}

/// `output` is the forward result; the gradient passes where it is positive.
pub fn relu_backward(upstream: &FeatureMap, output: &FeatureMap) -> Result<FeatureMap> {
    upstream.check_shape(output.channels(), output.edge_count())?;
    let mut g = upstream.array().clone();
    g.zip_mut_with(output.array(), |d, &y| {
        if y <= 0.0 {
            *d = 0.0
        }
    });
    Ok(FeatureMap::from_array(g))
}

/// Stacks channels of `a` followed by channels of `b`.
pub fn concat_channels(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
    if a.edge_count() != b.edge_count() {
        return Err(Error::EdgeCountMismatch {
            expected: a.edge_count(),
            got: b.edge_count(),
        });
    }
    let out = concatenate(Axis(0), &[a.values(), b.values()]).expect("edge counts agree");
    Ok(FeatureMap::from_array(out))
}

/// Splits a gradient of a concatenation at channel `a_channels`.
pub fn concat_backward(
    upstream: &FeatureMap,
    a_channels: usize,
) -> Result<(FeatureMap, FeatureMap)> {
    if a_channels > upstream.channels() {
        return Err(Error::ShapeMismatch(format!(
            "split at {a_channels} beyond {} channels",
            upstream.channels()
        )));
    }
    let v = upstream.values();
    Ok((
        FeatureMap::from_array(v.slice(s![..a_channels, ..]).to_owned()),
        FeatureMap::from_array(v.slice(s![a_channels.., ..]).to_owned()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        let x = FeatureMap::from_vec(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        let y = relu_forward(&x);
        assert_eq!(y.values().as_slice().unwrap(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(
            &FeatureMap::from_vec(1, 3, vec![1.0, 1.0, 1.0]).unwrap(),
            &y,
        )
        .unwrap();
        assert_eq!(g.values().as_slice().unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn concat_shapes() {
        let a = FeatureMap::zeros(2, 4);
        let b = FeatureMap::from_vec(3, 4, (0..12).map(f64::from).collect()).unwrap();
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.channels(), 5);
        assert_eq!(c.get(2, 0), 0.0);
        assert_eq!(c.get(4, 3), 11.0);
        let empty = FeatureMap::zeros(0, 4);
        assert_eq!(concat_channels(&b, &empty).unwrap(), b);
        let (ga, gb) = concat_backward(&c, 2).unwrap();
        assert_eq!(ga, a);
        assert_eq!(gb, b);
        assert!(matches!(
            concat_channels(&a, &FeatureMap::zeros(1, 3)),
            Err(Error::EdgeCountMismatch { .. })
        ));
    }
}
