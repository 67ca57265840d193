use crate::error::Result;
use crate::numkernel::{ParamId, ParamStore, Real, Tape, Tensor, Var};

pub const DEFAULT_LN_EPS: f64 = 1e-5;

/// Gain and bias of one normalized pre-activation.
#[derive(Clone, Copy, Debug)]
pub struct LayerNormParams {
    pub gain: ParamId,
    pub bias: ParamId,
    pub eps: f64,
}

impl LayerNormParams {
    pub fn new<T: Real>(store: &mut ParamStore<T>, prefix: &str, n: usize) -> Self {
        LayerNormParams {
            gain: store.add(format!("{prefix}.gain"), Tensor::full(&[n], T::one())),
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[n])),
            eps: DEFAULT_LN_EPS,
        }
    }

    pub fn apply<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        tape.layer_norm(
            x,
            tape.param(store, self.gain),
            tape.param(store, self.bias),
            T::lit(self.eps),
        )
    }
}

/// Normalizes one vector outside of any tape.
pub fn layer_norm<T: Real>(h: &[T], gain: &[T], bias: &[T], eps: T) -> Result<Vec<T>> {
    let tape = Tape::new();
    let x = tape.constant(Tensor::vector(h.to_vec()));
    let g = tape.constant(Tensor::vector(gain.to_vec()));
    let b = tape.constant(Tensor::vector(bias.to_vec()));
    let y = tape.layer_norm(x, g, b, eps)?;
    Ok(tape.value(y).into_data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_vector_maps_to_zero() {
        let out = layer_norm(&[3.0f64; 3], &[1.0; 3], &[0.0; 3], 1e-5).unwrap();
        assert!(out.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn normalized_input_is_a_fixed_point() {
        let out = layer_norm(&[1.0f64, -1.0], &[1.0; 2], &[0.0; 2], 0.0).unwrap();
        assert_eq!(out, vec![1.0, -1.0]);
    }

    #[test]
    fn gain_and_bias_apply_after_normalizing() {
        let out = layer_norm(&[1.0f64, -1.0], &[2.0, 3.0], &[0.5, 0.0], 0.0).unwrap();
        assert_eq!(out, vec![2.5, -3.0]);
    }
}
