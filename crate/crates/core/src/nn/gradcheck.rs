//! Central finite-difference verification of analytic gradients.
//!
//! Errors are reported as `|a - n| / max(|a|, |n|, REL_FLOOR)`: relative for
//! gradients of ordinary size, absolute below the floor where central
//! differences at `eps = 1e-5` are dominated by rounding.

use alloc::string::String;
use alloc::vec::Vec;

use super::layers::{Param, Parameters};
use super::matrix::Matrix;

pub const REL_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / denom
}

fn set_element<M: Parameters + ?Sized>(model: &mut M, tensor: usize, elem: usize, value: f64) {
    let mut idx = 0;
    model.visit_params("", &mut |_, p: &mut Param| {
        if idx == tensor {
            p.value.data_mut()[elem] = value;
        }
        idx += 1;
    });
}

/// Compares every parameter gradient of `model` against central differences.
///
/// `loss(model, accumulate)` must return the scalar loss and, when
/// `accumulate` is true, add the analytic gradients into the parameters'
/// `grad` buffers. Returns the maximum error over all parameter entries.
pub fn check_params<M, F>(model: &mut M, eps: f64, mut loss: F) -> f64
where
    M: Parameters + ?Sized,
    F: FnMut(&mut M, bool) -> f64,
{
    check_named_params(model, eps, |m, accumulate, _| loss(m, accumulate))
}

/// Like [`check_params`], but the numeric pass tells `loss` which tensor is
/// being perturbed (the analytic pass receives an empty name). Lets a caller
/// compare a tensor against the objective it actually descends, which for
/// parameters behind a gradient reversal is not the reported loss.
pub fn check_named_params<M, F>(model: &mut M, eps: f64, mut loss: F) -> f64
where
    M: Parameters + ?Sized,
    F: FnMut(&mut M, bool, &str) -> f64,
{
    model.zero_grad();
    loss(model, true, "");
    let mut snapshot: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    model.visit_params("", &mut |name, p| {
        snapshot.push((String::from(name), p.value.data().to_vec(), p.grad.data().to_vec()))
    });

    let mut worst = 0.0f64;
    for (t, (name, values, grads)) in snapshot.iter().enumerate() {
        for (e, (&v, &g)) in values.iter().zip(grads).enumerate() {
            set_element(model, t, e, v + eps);
            let plus = loss(model, false, name);
            set_element(model, t, e, v - eps);
            let minus = loss(model, false, name);
            set_element(model, t, e, v);
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(g, numeric));
        }
    }
    model.zero_grad();
    worst
}

/// Same check for the gradient with respect to an input matrix. `f` returns
/// the loss and the analytic `dL/dx`.
pub fn check_input_gradient<F>(x: &Matrix, eps: f64, mut f: F) -> f64
where
    F: FnMut(&Matrix) -> (f64, Matrix),
{
    let (_, analytic) = f(x);
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for i in 0..x.data().len() {
        let v = x.data()[i];
        probe.data_mut()[i] = v + eps;
        let plus = f(&probe).0;
        probe.data_mut()[i] = v - eps;
        let minus = f(&probe).0;
        probe.data_mut()[i] = v;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    worst
}
