//! Minimal dense-tensor engine with reverse-mode differentiation.
//!
//! `FieldTensor` is a row-major n-dimensional array of floats; `Graph` is a
//! single-owner tape that records forward operations and replays them in
//! reverse, in fixed topological order, to accumulate gradients.

pub mod graph;
pub mod ops;
pub mod rng;
pub mod scalar;

pub use graph::{Gradients, Graph, NodeId};
pub use ops::Padding;
pub use rng::Rng;
pub use scalar::Scalar;

use crate::error::{Error, Result};

/// Dense row-major tensor of 32-bit floats (64-bit in oracle builds).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTensor<F: Scalar = f32> {
    shape: Vec<usize>,
    data: Vec<F>,
    requires_grad: bool,
}

impl<F: Scalar> FieldTensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Dim(format!("zero-sized dimension in {shape:?}")));
        }
        if numel != data.len() {
            return Err(Error::Dim(format!(
                "shape {shape:?} expects {numel} elements, got {}",
                data.len()
            )));
        }
        Ok(FieldTensor { shape, data, requires_grad: false })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        FieldTensor { shape, data: vec![F::zero(); numel], requires_grad: false }
    }

    pub fn full(shape: Vec<usize>, value: F) -> Self {
        let numel: usize = shape.iter().product();
        FieldTensor { shape, data: vec![value; numel], requires_grad: false }
    }

    /// 0-dimensional tensor holding one value.
    pub fn scalar(value: F) -> Self {
        FieldTensor { shape: vec![], data: vec![value], requires_grad: false }
    }

    /// Fill a tensor with i.i.d. standard normal draws from `rng`.
    pub fn gaussian(shape: Vec<usize>, rng: &mut Rng) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| F::from_f64(rng.next_gaussian())).collect();
        FieldTensor { shape, data, requires_grad: false }
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a scalar tensor.
    pub fn item(&self) -> Result<F> {
        if !self.is_scalar() {
            return Err(Error::Contract(format!(
                "item() on non-scalar tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    /// Interpret as [C, H, W].
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            [c, h, w] => Ok((*c, *h, *w)),
            s => Err(Error::Dim(format!("expected 3-d tensor, got {s:?}"))),
        }
    }

    pub fn dims1(&self) -> Result<usize> {
        match self.shape.as_slice() {
            [n] => Ok(*n),
            s => Err(Error::Dim(format!("expected 1-d tensor, got {s:?}"))),
        }
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [a, b] => Ok((*a, *b)),
            s => Err(Error::Dim(format!("expected 2-d tensor, got {s:?}"))),
        }
    }

    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape.as_slice() {
            [a, b, c, d] => Ok((*a, *b, *c, *d)),
            s => Err(Error::Dim(format!("expected 4-d tensor, got {s:?}"))),
        }
    }

    /// Value at [c, y, x] of a 3-d tensor. Test/diagnostic helper.
    pub fn at3(&self, c: usize, y: usize, x: usize) -> F {
        let (_, h, w) = (self.shape[0], self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x]
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        for &v in &self.data {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite value in {context}")));
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        FieldTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            requires_grad: false,
        }
    }

    /// Lossless precision conversion (used to hand f32 states to the f64
    /// oracle path).
    pub fn cast<G: Scalar>(&self) -> FieldTensor<G> {
        FieldTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| G::from_f64(v.to_f64())).collect(),
            requires_grad: self.requires_grad,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_data_agreement_enforced() {
        assert!(FieldTensor::<f32>::new(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(FieldTensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(FieldTensor::<f32>::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn scalar_roundtrip() {
        let t = FieldTensor::scalar(3.5f32);
        assert!(t.is_scalar());
        assert_eq!(t.item().unwrap(), 3.5);
        assert_eq!(t.numel(), 1);
    }

    #[test]
    fn finite_check_flags_nan() {
        let t = FieldTensor::new(vec![2], vec![1.0f32, f32::NAN]).unwrap();
        assert!(t.check_finite("test").is_err());
    }

    #[test]
    fn cast_is_lossless_f32_to_f64() {
        let t = FieldTensor::new(vec![3], vec![0.1f32, -2.5, 7.25]).unwrap();
        let d: FieldTensor<f64> = t.cast();
        for (a, b) in t.data().iter().zip(d.data()) {
            assert_eq!(*a as f64, *b);
        }
    }
}
