use super::{ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Compares taped gradients of a scalar loss against central finite
/// differences over every parameter entry.
///
/// Returns `max |analytic − numeric| / max(1, |analytic|, |numeric|)`.
/// The store's gradients are left zeroed.
pub fn gradient_check<F>(forward: F, store: &mut ParamStore<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&Tape<f64>, &ParamStore<f64>) -> Result<Var>,
{
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(Error::Check(format!("eps {eps} outside [1e-6, 1e-4]")));
    }
    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let tape = Tape::new();
        let loss = forward(&tape, store)?;
        let v = tape.value(loss);
        if v.len() != 1 {
            return Err(Error::Check("loss is not a scalar".into()));
        }
        let v = v.item();
        if !v.is_finite() {
            return Err(Error::Check(format!("non-finite loss {v}")));
        }
        Ok(v)
    };

    store.zero_grad();
    {
        let tape = Tape::new();
        let loss = forward(&tape, store)?;
        if !tape.value(loss).item().is_finite() {
            return Err(Error::Check("non-finite loss".into()));
        }
        tape.backward(loss, store)?;
    }
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    store.zero_grad();

    let mut worst = 0.0f64;
    let ids: Vec<_> = store.ids().collect();
    for (pi, id) in ids.into_iter().enumerate() {
        for k in 0..store.value(id).len() {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + eps;
            let plus = eval(store);
            store.value_mut(id).data_mut()[k] = orig - eps;
            let minus = eval(store);
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let a = analytic[pi][k];
            let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
