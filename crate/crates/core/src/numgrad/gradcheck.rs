//! Central finite-difference gradient checking.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Maximum over coordinates of `|analytic - numeric| / max(1, |analytic|)`
/// where `numeric` is the central difference with step `eps`.
pub fn finite_difference_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    finite_difference_check_many(|tape, xs| f(tape, xs[0]), std::slice::from_ref(x), eps)
}

/// As [`finite_difference_check`], jointly over several input tensors.
pub fn finite_difference_check_many<F>(f: F, xs: &[Tensor], eps: f64) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps {eps} must be > 0")));
    }
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = xs.iter().map(|x| tape.param(x)).collect();
        let out = f(&tape, &vars)?;
        check_finite(out.item())?;
        let grads = tape.backward(out)?;
        vars.iter().map(|v| grads.wrt(*v)).collect()
    };

    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|x| tape.constant(x)).collect();
        let v = f(&tape, &vars)?.item();
        check_finite(v)
    };

    let mut worst = 0.0_f64;
    let mut probe = xs.to_vec();
    for (t, grad) in analytic.iter().enumerate() {
        for j in 0..xs[t].numel() {
            let orig = xs[t].data()[j];
            probe[t].data_mut()[j] = orig + eps;
            let up = eval(&probe)?;
            probe[t].data_mut()[j] = orig - eps;
            let down = eval(&probe)?;
            probe[t].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("objective evaluated to {v}")))
    }
}
