//! Finite-difference gradient checking.
//!
//! The function under test is a tape-building closure, so the analytic
//! gradient comes from one reverse sweep and the numeric gradient from
//! central differences (f(x + h e_i) - f(x - h e_i)) / 2h, one fresh
//! forward pass per perturbed coordinate.

use alloc::format;
use alloc::vec::Vec;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

const REL_ERR_FLOOR: f64 = 1e-8;

/// Max relative error between analytic and central-difference gradients of
/// a scalar-valued function of one tensor. The relative error of a
/// coordinate uses the denominator max(|analytic|, |numeric|, 1e-8).
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_multi(|tape, vars| f(tape, vars[0]), core::slice::from_ref(x), h)
}

/// [`grad_check`] over several input tensors; returns the max relative
/// error across all coordinates of all inputs.
pub fn grad_check_multi<F>(f: F, xs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidParameter(format!("step {h} must be > 0")));
    }

    // Analytic pass.
    let mut tape = Tape::new();
    let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x)).collect::<Result<_>>()?;
    let loss = f(&mut tape, &vars)?;
    if tape.data(loss)?.len() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "grad_check needs a scalar function, got {:?}",
            tape.shape(loss)?
        )));
    }
    let grads = tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(xs)
        .map(|(&v, x)| {
            Ok(grads
                .grad(v)?
                .map(|g| g.to_vec())
                .unwrap_or_else(|| alloc::vec![0.0; x.numel()]))
        })
        .collect::<Result<_>>()?;

    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x)).collect::<Result<_>>()?;
        let loss = f(&mut tape, &vars)?;
        Ok(tape.data(loss)?[0])
    };

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = xs.to_vec();
    for (ti, x) in xs.iter().enumerate() {
        for j in 0..x.numel() {
            let orig = x.data()[j];
            work[ti].data_mut()[j] = orig + h;
            let fp = eval(&work)?;
            work[ti].data_mut()[j] = orig - h;
            let fm = eval(&work)?;
            work[ti].data_mut()[j] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            if !numeric.is_finite() {
                return Err(Error::NonFinite(format!(
                    "numeric gradient at input {ti}, coordinate {j}"
                )));
            }
            let a = analytic[ti][j];
            let denom = a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_tight() {
        // f = sum(x^2): central differences are near-exact for quadratics.
        let x = Tensor::from_vec(&[1, 3], alloc::vec![1.0, 2.0, 3.0]).unwrap();
        let err = grad_check(
            |tape, v| {
                let sq = tape.mul(v, v)?;
                tape.sum_all(sq)
            },
            &x,
            DEFAULT_STEP,
        )
        .unwrap();
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn softmax_row_sums_are_constant() {
        // f = sum(softmax_rows(x)) is constant, so both gradients vanish;
        // the relative error is rounding noise over the 1e-8 floor.
        let x = Tensor::from_vec(&[2, 3], alloc::vec![0.3, -1.0, 0.7, 2.0, 0.1, -0.4]).unwrap();
        let err = grad_check(
            |tape, v| {
                let p = tape.softmax_rows(v)?;
                tape.sum_all(p)
            },
            &x,
            DEFAULT_STEP,
        )
        .unwrap();
        assert!(err < 1e-2, "max rel err {err}");
    }

    #[test]
    fn softmax_weighted_sum() {
        // A non-trivial softmax path: weight the probabilities.
        let x = Tensor::from_vec(&[2, 3], alloc::vec![0.3, -1.0, 0.7, 2.0, 0.1, -0.4]).unwrap();
        let err = grad_check(
            |tape, v| {
                let p = tape.softmax_rows(v)?;
                let w = tape.constant_from(&[2, 3], alloc::vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5])?;
                let wp = tape.mul(p, w)?;
                tape.sum_all(wp)
            },
            &x,
            DEFAULT_STEP,
        )
        .unwrap();
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn standardize_rows_gradients() {
        let x = Tensor::from_vec(&[2, 4], alloc::vec![0.5, -1.2, 2.0, 0.3, 1.1, 0.0, -0.7, 0.9])
            .unwrap();
        let gamma = Tensor::from_vec(&[1, 4], alloc::vec![1.2, 0.8, -0.5, 1.0]).unwrap();
        let beta = Tensor::from_vec(&[1, 4], alloc::vec![0.1, -0.2, 0.3, 0.0]).unwrap();
        let w = alloc::vec![0.7, -1.0, 0.4, 2.0, -0.3, 1.5, 0.2, -0.8];
        let err = grad_check_multi(
            |tape, vars| {
                let norm = tape.standardize_rows(vars[0], vars[1], vars[2], 1e-5)?;
                let wv = tape.constant_from(&[2, 4], w.clone())?;
                let weighted = tape.mul(norm, wv)?;
                tape.sum_all(weighted)
            },
            &[x, gamma, beta],
            DEFAULT_STEP,
        )
        .unwrap();
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn cross_entropy_gradients() {
        let logits =
            Tensor::from_vec(&[3, 2], alloc::vec![0.4, -0.9, 1.3, 0.2, -0.5, 0.8]).unwrap();
        let err = grad_check(
            |tape, v| tape.cross_entropy(v, &[0, 1, 1], &[0, 2]),
            &logits,
            DEFAULT_STEP,
        )
        .unwrap();
        assert!(err < 1e-6, "max rel err {err}");
    }

    #[test]
    fn rejects_bad_step() {
        let x = Tensor::from_vec(&[1, 1], alloc::vec![1.0]).unwrap();
        assert!(grad_check(|tape, v| tape.sum_all(v), &x, 0.0).is_err());
    }
}
