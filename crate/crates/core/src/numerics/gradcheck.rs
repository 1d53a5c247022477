//! Central-difference verification of analytic gradients.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{Gradients, Scalar, Tape, Tensor, Var};

/// Central-difference estimate `(f(θ + h·eᵢ) − f(θ − h·eᵢ)) / 2h` for every coordinate.
pub fn central_differences<T, F>(
    params: &BTreeMap<String, Tensor<T>>,
    step: T,
    f: F,
) -> Result<BTreeMap<String, Tensor<T>>>
where
    T: Scalar,
    F: Fn(&BTreeMap<String, Tensor<T>>) -> Result<T>,
{
    let mut probe = params.clone();
    let mut out = BTreeMap::new();
    let names: Vec<String> = params.keys().cloned().collect();
    let two_h = step + step;
    for name in names {
        let n = params[&name].len();
        let mut grad = Tensor::zeros(params[&name].shape());
        for i in 0..n {
            let orig = params[&name].data()[i];
            probe.get_mut(&name).unwrap().data_mut()[i] = orig + step;
            let up = finite(f(&probe)?)?;
            probe.get_mut(&name).unwrap().data_mut()[i] = orig - step;
            let down = finite(f(&probe)?)?;
            probe.get_mut(&name).unwrap().data_mut()[i] = orig;
            grad.data_mut()[i] = (up - down) / two_h;
        }
        out.insert(name, grad);
    }
    Ok(out)
}

fn finite<T: Scalar>(v: T) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("non-finite loss {v} during finite differences")))
    }
}

/// `max |a − n| / max(|a|, |n|, 1e-8)` over all coordinates present in both maps.
pub fn max_relative_error<T: Scalar>(
    analytic: &BTreeMap<String, Tensor<T>>,
    numeric: &BTreeMap<String, Tensor<T>>,
) -> Result<T> {
    let floor = T::lit(1e-8);
    let mut worst = T::zero();
    for (name, a) in analytic {
        let n = numeric
            .get(name)
            .ok_or_else(|| Error::dim("max_relative_error", format!("missing gradient {name}")))?;
        a.expect_same_shape(n, "max_relative_error")?;
        for (&x, &y) in a.data().iter().zip(n.data()) {
            let denom = x.abs().max(y.abs()).max(floor);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    Ok(worst)
}

/// Compares the tape's gradients of `loss_fn` against central differences.
///
/// `loss_fn` records a scalar loss on the given tape from the parameter map;
/// the same closure is used for the analytic and numeric routes.
pub fn finite_diff_check<T, F>(params: &BTreeMap<String, Tensor<T>>, step: T, loss_fn: F) -> Result<T>
where
    T: Scalar,
    F: for<'t> Fn(&mut Tape<'t, T>, &'t BTreeMap<String, Tensor<T>>) -> Result<Var>,
{
    if !(step >= T::lit(1e-7) && step <= T::lit(1e-3)) {
        return Err(Error::Parameter(format!("finite-difference step {step} outside [1e-7, 1e-3]")));
    }
    let analytic = analytic_gradients(params, &loss_fn)?;
    let numeric = central_differences(params, step, |p| {
        let mut tape = Tape::new();
        let loss = loss_fn(&mut tape, p)?;
        tape.value(loss).item()
    })?;
    max_relative_error(&analytic.into_map(), &numeric)
}

fn analytic_gradients<T, F>(params: &BTreeMap<String, Tensor<T>>, loss_fn: &F) -> Result<Gradients<T>>
where
    T: Scalar,
    F: for<'t> Fn(&mut Tape<'t, T>, &'t BTreeMap<String, Tensor<T>>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, params)?;
    tape.backward(loss)
}
