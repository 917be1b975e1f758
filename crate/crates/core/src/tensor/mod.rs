//! Dense tensor storage and the reverse-mode differentiation tape.
//!
//! [`Tensor`] is plain row-major f64 storage with an optional gradient
//! buffer; all differentiable computation happens on a [`Tape`], which is
//! rebuilt per forward pass (define-by-run) and consumed by
//! [`Tape::backward`]. All arithmetic is 64-bit.

mod check;
pub(crate) mod kernels;
mod tape;

pub use check::{grad_check, grad_check_multi, DEFAULT_STEP};
pub use tape::{Gradients, MatrixOp, Tape, Var};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::SplitMix64;

/// Initialization schemes for [`Tensor::new`]. The seeded variants are
/// deterministic given their seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    Uniform { lo: f64, hi: f64, seed: u64 },
    Glorot { seed: u64 },
}

/// Dense row-major array of f64 values with an optional same-shape gradient
/// buffer. Values are kept finite by construction; tape operations reject
/// NaN/Inf outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidShape(String::from("empty shape")));
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape(format!("zero dimension in {shape:?}")));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    /// Build a tensor from an initialization scheme. Dimensions must all be
    /// at least 1 (unsigned dimensions make negative sizes unrepresentable).
    pub fn new(shape: &[usize], init: Init) -> Result<Self> {
        let n = check_shape(shape)?;
        match init {
            Init::Zeros => Ok(Tensor {
                shape: shape.to_vec(),
                data: vec![0.0; n],
                grad: None,
            }),
            Init::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::NonFinite(String::from("constant fill")));
                }
                Ok(Tensor {
                    shape: shape.to_vec(),
                    data: vec![c; n],
                    grad: None,
                })
            }
            Init::Uniform { lo, hi, seed } => {
                let mut rng = SplitMix64::new(seed);
                Self::uniform_with(shape, lo, hi, &mut rng)
            }
            Init::Glorot { seed } => {
                let mut rng = SplitMix64::new(seed);
                Self::glorot_with(shape, &mut rng)
            }
        }
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Tensor::new(shape, Init::Zeros)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} wants {n} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(String::from("tensor data")));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    /// Uniform init driven by an external generator, for callers that
    /// thread one stream through many tensors.
    pub fn uniform_with(shape: &[usize], lo: f64, hi: f64, rng: &mut SplitMix64) -> Result<Self> {
        let n = check_shape(shape)?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter(format!("uniform bounds [{lo}, {hi})")));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(|_| rng.uniform(lo, hi)).collect(),
            grad: None,
        })
    }

    /// Glorot-uniform init: entries drawn in +-sqrt(6 / (fan_in + fan_out)).
    /// Defined for 2-D tensors, where fan_in/fan_out are the two dimensions.
    pub fn glorot_with(shape: &[usize], rng: &mut SplitMix64) -> Result<Self> {
        if shape.len() != 2 {
            return Err(Error::InvalidShape(format!(
                "glorot needs a 2-D shape, got {shape:?}"
            )));
        }
        let limit = math::sqrt(6.0 / (shape[0] + shape[1]) as f64);
        Self::uniform_with(shape, -limit, limit, rng)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Accumulate a gradient contribution into the grad buffer (+=).
    pub fn accumulate_grad(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "grad length {} vs tensor {}",
                g.len(),
                self.data.len()
            )));
        }
        let grad = self.grad.get_or_insert_with(|| vec![0.0; self.data.len()]);
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
        Ok(())
    }

    pub fn is_2d(&self) -> bool {
        self.shape.len() == 2
    }

    /// Rows of a 2-D tensor (1 for vectors treated as a single row).
    pub fn rows(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[0]
        } else {
            1
        }
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            self.numel()
        }
    }

    /// Entry of a 2-D tensor.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(self.is_2d());
        self.data[r * self.shape[1] + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_fill() {
        let t = Tensor::new(&[2, 2], Init::Zeros).unwrap();
        assert_eq!(t.data(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_fill() {
        let t = Tensor::new(&[1, 3], Init::Constant(1.5)).unwrap();
        assert_eq!(t.data(), &[1.5, 1.5, 1.5]);
        assert_eq!(t.shape(), &[1, 3]);
    }

    #[test]
    fn glorot_respects_bound() {
        // fan_in + fan_out = 8, so every entry lies within +-sqrt(6/8).
        let limit = (6.0f64 / 8.0).sqrt();
        let t = Tensor::new(&[4, 4], Init::Glorot { seed: 7 }).unwrap();
        assert!(t.data().iter().all(|v| v.abs() <= limit));
        // Deterministic per seed.
        let u = Tensor::new(&[4, 4], Init::Glorot { seed: 7 }).unwrap();
        assert_eq!(t, u);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            Tensor::new(&[0, 3], Init::Zeros),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(Tensor::new(&[], Init::Zeros), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn from_vec_validates() {
        assert!(Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0]).is_err());
        assert!(Tensor::from_vec(&[1, 2], vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn grad_accumulates() {
        let mut t = Tensor::zeros(&[1, 2]).unwrap();
        t.accumulate_grad(&[1.0, 2.0]).unwrap();
        t.accumulate_grad(&[1.0, 2.0]).unwrap();
        assert_eq!(t.grad().unwrap(), &[2.0, 4.0]);
    }
}
