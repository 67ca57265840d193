use crate::error::{Error, Result};
use crate::numkernel::{ParamStore, Real, Tensor};

/// First and second moments for every parameter of a store, in store order.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        let zeros = || store.iter().map(|p| Tensor::zeros(p.value.shape())).collect::<Vec<_>>();
        AdamState {
            m: zeros(),
            v: zeros(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(store: &mut ParamStore<T>, max_norm: f64) -> f64 {
    let norm = store.grad_norm().to_f64_lossy();
    if norm > max_norm {
        let scale = T::lit(max_norm / norm);
        for p in store.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g = *g * scale);
        }
    }
    norm
}

/// One bias-corrected Adam step at learning rate `lr`, then zeroes the
/// gradients. Nothing is modified if any gradient is non-finite.
pub fn adam_update<T: Real>(store: &mut ParamStore<T>, state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if state.m.len() != store.len() {
        return Err(Error::Usage(format!(
            "optimizer state tracks {} parameters, store has {}",
            state.m.len(),
            store.len()
        )));
    }
    if let Some(p) = store.iter().find(|p| !p.grad.all_finite()) {
        return Err(Error::NonFiniteGradient(p.name.clone()));
    }
    state.t += 1;
    let (b1, b2) = (T::lit(state.beta1), T::lit(state.beta2));
    let one = T::one();
    let c1 = T::lit(1.0 - state.beta1.powi(state.t as i32));
    let c2 = T::lit(1.0 - state.beta2.powi(state.t as i32));
    let (lr, eps) = (T::lit(lr), T::lit(state.eps));
    for ((p, m), v) in store.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let grad = p.grad.data();
        let value = p.value.data_mut();
        for (((w, &g), m), v) in value.iter_mut().zip(grad).zip(m.data_mut()).zip(v.data_mut()) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    store.zero_grad();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(w: f64, g: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::scalar(w));
        s.get_mut(id).grad = Tensor::scalar(g);
        s
    }

    #[test]
    fn first_step_is_lr_over_one_plus_eps() {
        let mut s = scalar_store(0.0, 1.0);
        let mut st = AdamState::new(&s);
        adam_update(&mut s, &mut st, 0.01).unwrap();
        let w = s.iter().next().unwrap().value.item();
        assert!((w + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(s.iter().next().unwrap().grad.item(), 0.0);
    }

    #[test]
    fn zero_gradient_or_zero_lr_leaves_weights() {
        let mut s = scalar_store(-0.75, 0.0);
        let mut st = AdamState::new(&s);
        adam_update(&mut s, &mut st, 0.01).unwrap();
        assert_eq!(s.iter().next().unwrap().value.item(), -0.75);
        let mut s = scalar_store(0.3, 2.0);
        adam_update(&mut s, &mut st, 0.0).unwrap();
        assert_eq!(s.iter().next().unwrap().value.item().to_bits(), 0.3f64.to_bits());
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut s = scalar_store(0.0, f64::NAN);
        let mut st = AdamState::new(&s);
        match adam_update(&mut s, &mut st, 0.01) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "w"),
            other => panic!("{other:?}"),
        }
        assert_eq!(st.t, 0);
    }

    #[test]
    fn clipping_caps_the_global_norm() {
        let mut s = ParamStore::<f64>::new();
        let a = s.add("a", Tensor::vector(vec![0.0, 0.0]));
        s.get_mut(a).grad = Tensor::vector(vec![30.0, 40.0]);
        assert_eq!(clip_grad_norm(&mut s, 5.0), 50.0);
        assert!((s.grad_norm() - 5.0).abs() < 1e-12);
        assert_eq!(clip_grad_norm(&mut s, 10.0), s.grad_norm());
    }
}
