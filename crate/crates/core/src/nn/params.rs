use crate::error::{Error, Result};

/// A named, read-only view of one parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub data: &'a [f64],
}

/// Uniform access to every learnable tensor of a model, in a fixed canonical
/// order. `tensors` and `tensors_mut` must enumerate the same tensors in the
/// same order with the same lengths.
pub trait ParamSet {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

pub fn param_count<P: ParamSet>(params: &P) -> usize {
    params.tensors().iter().map(|t| t.data.len()).sum()
}

/// A copy of `params` with every coordinate set to zero; the natural gradient
/// accumulator for a model.
pub fn zeroed<P: ParamSet + Clone>(params: &P) -> P {
    let mut z = params.clone();
    for t in z.tensors_mut() {
        t.fill(0.0);
    }
    z
}

/// Fails on the first non-finite coordinate, naming the tensor path and index.
pub fn check_finite<P: ParamSet>(params: &P, what: &str) -> Result<()> {
    for t in params.tensors() {
        if let Some(i) = t.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite {what} at {}[{i}] = {}",
                t.name, t.data[i]
            )));
        }
    }
    Ok(())
}
