//! Flat views over trainable tensors, in a fixed traversal order.

use ndarray::{Array, Dimension};

use super::{ConvBlock, DecoderStage, EncoderStage, Layers, ResBlock};
use crate::ops::{ConvKernel, Linear, Norm};

pub trait ParamSet: Sized {
    fn push_tensors<'a>(&'a self, out: &mut Vec<&'a [f64]>);
    fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>);
    /// Same shapes, all trainable entries zero.
    fn zeros_like(&self) -> Self;

    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        self.push_tensors(&mut v);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        self.push_tensors_mut(&mut v);
        v
    }

    /// `self += other`, tensor by tensor.
    fn add_assign(&mut self, other: &Self) {
        for (d, s) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in d.iter_mut().zip(s) {
                *a += b;
            }
        }
    }
}

fn slice<D: Dimension>(a: &Array<f64, D>) -> &[f64] {
    a.as_slice()
        .expect("parameters are kept in standard layout")
}

fn slice_mut<D: Dimension>(a: &mut Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut()
        .expect("parameters are kept in standard layout")
}

impl ParamSet for ConvKernel {
    fn push_tensors<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        out.push(slice(&self.weights));
        out.push(slice(&self.bias));
    }

    fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(slice_mut(&mut self.weights));
        out.push(slice_mut(&mut self.bias));
    }

    fn zeros_like(&self) -> Self {
        ConvKernel::zeros(self.in_channels(), self.out_channels())
    }
}

impl ParamSet for Linear {
    fn push_tensors<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        out.push(slice(&self.weights));
        out.push(slice(&self.bias));
    }

    fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(slice_mut(&mut self.weights));
        out.push(slice_mut(&mut self.bias));
    }

    fn zeros_like(&self) -> Self {
        Linear::zeros(self.weights.ncols(), self.weights.nrows())
    }
}

/// Only `gamma` and `beta` are trainable; running statistics are not exposed.
impl ParamSet for Norm {
    fn push_tensors<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        out.push(slice(&self.gamma));
        out.push(slice(&self.beta));
    }

    fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(slice_mut(&mut self.gamma));
        out.push(slice_mut(&mut self.beta));
    }

    fn zeros_like(&self) -> Self {
        Norm::zeros(self.channels())
    }
}

impl<T: ParamSet> ParamSet for Vec<T> {
    fn push_tensors<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        for t in self {
            t.push_tensors(out);
        }
    }

    fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        for t in self {
            t.push_tensors_mut(out);
        }
    }

    fn zeros_like(&self) -> Self {
        self.iter().map(T::zeros_like).collect()
    }
}

macro_rules! composite {
    ($ty:ident { $($field:ident),+ }) => {
        impl ParamSet for $ty {
            fn push_tensors<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
                $(self.$field.push_tensors(out);)+
            }

            fn push_tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
                $(self.$field.push_tensors_mut(out);)+
            }

            fn zeros_like(&self) -> Self {
                $ty { $($field: self.$field.zeros_like()),+ }
            }
        }
    };
}

composite!(ConvBlock { conv, norm });
composite!(ResBlock {
    conv1,
    norm1,
    conv2,
    norm2
});
composite!(EncoderStage { entry, res });
composite!(DecoderStage { up, merge, res });
composite!(Layers {
    encoders,
    decoders,
    head
});

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_and_zero() {
        let mut k = ConvKernel::zeros(2, 3);
        k.weights.fill(1.0);
        let z = k.zeros_like();
        assert!(z.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
        let mut acc = z.clone();
        acc.add_assign(&k);
        acc.add_assign(&k);
        assert!(acc.weights.iter().all(|&v| v == 2.0));
        assert_eq!(k.tensors().len(), 2);
        assert_eq!(k.tensors()[0].len(), 30);
    }
}
