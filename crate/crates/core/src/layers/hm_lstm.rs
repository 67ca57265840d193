//! Hierarchical multiscale LSTM.
//!
//! Each layer keeps `(h, c)` and a binary boundary `z`. With `z_below` the
//! boundary just emitted by the layer underneath (always 1 for the first
//! layer) and `z_own` this layer's boundary from the previous step:
//!
//! | z_own | z_below | operation | c'              | h'            |
//! |-------|---------|-----------|-----------------|---------------|
//! | 1     | any     | FLUSH     | i ⊙ g           | o ⊙ tanh(c')  |
//! | 0     | 1       | UPDATE    | f ⊙ c + i ⊙ g   | o ⊙ tanh(c')  |
//! | 0     | 0       | COPY      | c               | h             |
//!
//! Gate pre-activations sum a bottom-up term (scaled by `z_below`), a
//! recurrent term and, below the top layer, a top-down term from the
//! layer above (scaled by `z_own`). The last pre-activation row is the
//! boundary logit; the boundary is `1[hard_sigmoid(logit) > 0.5]` with a
//! straight-through gradient. The output module gates every layer's state
//! into one representation: `ReLU(Σ_l σ(w_l · [h_1; …; h_L]) · W_l h_l)`.

use rand::Rng;

use super::layer_norm::LayerNormParams;
use crate::error::{Error, Result};
use crate::numkernel::{ParamId, ParamStore, Real, Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub struct HmLstmLayer {
    /// (4·N_H + 1) × n_in
    pub w_bottom: ParamId,
    /// (4·N_H + 1) × N_H
    pub w_recurrent: ParamId,
    /// (4·N_H + 1) × N_H, absent on the top layer.
    pub w_top_down: Option<ParamId>,
    /// 4·N_H + 1
    pub bias: ParamId,
    /// Normalizers for the f, i, o and g pre-activations.
    pub ln: Option<[LayerNormParams; 4]>,
    pub n_in: usize,
}

#[derive(Clone, Debug)]
pub struct HmLstmCellParams {
    pub layers: Vec<HmLstmLayer>,
    /// L × (L·N_H): one output-gate weight row per layer.
    pub w_gate: ParamId,
    /// N_H × N_H per layer.
    pub w_out: Vec<ParamId>,
    pub n_h: usize,
}

/// Per-layer `h` (B × N_H), `c` (B × N_H) and boundary `z` (B × 1).
#[derive(Clone, Debug)]
pub struct HmState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
    pub z: Vec<Var>,
}

impl HmLstmCellParams {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        n_layers: usize,
        n_e: usize,
        n_h: usize,
        layer_norm: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if n_layers < 2 {
            return Err(Error::Config("hm_lstm needs at least 2 layers".into()));
        }
        let rows = 4 * n_h + 1;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let n_in = if l == 0 { n_e } else { n_h };
            let p = format!("hm.{l}");
            let w_bottom = store.add_scaled_uniform(format!("{p}.w_bottom"), rows, n_in, rng);
            let w_recurrent = store.add_scaled_uniform(format!("{p}.w_recurrent"), rows, n_h, rng);
            let w_top_down =
                (l + 1 < n_layers).then(|| store.add_scaled_uniform(format!("{p}.w_top_down"), rows, n_h, rng));
            let bias = store.add(format!("{p}.bias"), Tensor::zeros(&[rows]));
            let ln = layer_norm.then(|| {
                ["f", "i", "o", "g"].map(|g| LayerNormParams::new(store, &format!("{p}.ln_{g}"), n_h))
            });
            layers.push(HmLstmLayer {
                w_bottom,
                w_recurrent,
                w_top_down,
                bias,
                ln,
                n_in,
            });
        }
        let w_gate = store.add_scaled_uniform("hm.out.w_gate", n_layers, n_layers * n_h, rng);
        let w_out = (0..n_layers)
            .map(|l| store.add_scaled_uniform(format!("hm.out.{l}.w"), n_h, n_h, rng))
            .collect();
        Ok(HmLstmCellParams {
            layers,
            w_gate,
            w_out,
            n_h,
        })
    }

    pub fn zero_state<T: Real>(&self, tape: &Tape<T>, batch: usize) -> HmState {
        let n = self.layers.len();
        let zeros = |cols| tape.constant(Tensor::zeros(&[batch, cols]));
        HmState {
            h: (0..n).map(|_| zeros(self.n_h)).collect(),
            c: (0..n).map(|_| zeros(self.n_h)).collect(),
            z: (0..n).map(|_| zeros(1)).collect(),
        }
    }

    /// Advances every layer by one step. `forced` pins each layer's new
    /// boundary to a constant, which removes the straight-through path.
    pub fn step<T: Real>(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        e: Var,
        state: &HmState,
        forced: Option<&[bool]>,
    ) -> Result<HmState> {
        let n_layers = self.layers.len();
        if let Some(f) = forced {
            if f.len() != n_layers {
                return Err(Error::Config(format!("forced boundaries for {} layers, model has {n_layers}", f.len())));
            }
        }
        let batch = tape.shape(e)[0];
        let nh = self.n_h;
        let mut next = HmState {
            h: Vec::with_capacity(n_layers),
            c: Vec::with_capacity(n_layers),
            z: Vec::with_capacity(n_layers),
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let z_own = state.z[l];
            let (bottom, z_below) = if l == 0 {
                (e, None)
            } else {
                (next.h[l - 1], Some(next.z[l - 1]))
            };
            let mut s = tape.matmul_nt(bottom, tape.param(store, layer.w_bottom))?;
            if let Some(zb) = z_below {
                s = tape.mul_col(s, zb)?;
            }
            s = tape.add(s, tape.matmul_nt(state.h[l], tape.param(store, layer.w_recurrent))?)?;
            if let Some(td) = layer.w_top_down {
                let top = tape.matmul_nt(state.h[l + 1], tape.param(store, td))?;
                s = tape.add(s, tape.mul_col(top, z_own)?)?;
            }
            s = tape.add_row(s, tape.param(store, layer.bias))?;

            let gate = |k: usize| -> Result<Var> {
                let pre = tape.slice_cols(s, k * nh, (k + 1) * nh)?;
                match &layer.ln {
                    Some(ln) => ln[k].apply(tape, store, pre),
                    None => Ok(pre),
                }
            };
            let f = tape.sigmoid(gate(0)?)?;
            let i = tape.sigmoid(gate(1)?)?;
            let o = tape.sigmoid(gate(2)?)?;
            let g = tape.tanh(gate(3)?)?;
            let z_new = match forced {
                Some(fz) => tape.constant(Tensor::full(&[batch, 1], if fz[l] { T::one() } else { T::zero() })),
                None => tape.boundary(tape.slice_cols(s, 4 * nh, 4 * nh + 1)?)?,
            };

            let ig = tape.mul(i, g)?;
            let c_update = tape.add(tape.mul(f, state.c[l])?, ig)?;
            let c_not_flushed = match z_below {
                None => c_update,
                Some(zb) => tape.select_rows(zb, c_update, state.c[l])?,
            };
            let c_new = tape.select_rows(z_own, ig, c_not_flushed)?;
            let h_cand = tape.mul(o, tape.tanh(c_new)?)?;
            let h_new = match z_below {
                None => h_cand,
                Some(zb) => {
                    let h_not_flushed = tape.select_rows(zb, h_cand, state.h[l])?;
                    tape.select_rows(z_own, h_cand, h_not_flushed)?
                }
            };
            next.h.push(h_new);
            next.c.push(c_new);
            next.z.push(z_new);
        }
        Ok(next)
    }

    /// Gated combination of every layer's state (B × N_H).
    pub fn output<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, state: &HmState) -> Result<Var> {
        let all = tape.concat_cols(&state.h)?;
        let gates = tape.sigmoid(tape.matmul_nt(all, tape.param(store, self.w_gate))?)?;
        let mut acc = None;
        for (l, &w) in self.w_out.iter().enumerate() {
            let proj = tape.matmul_nt(state.h[l], tape.param(store, w))?;
            let term = tape.mul_col(proj, tape.slice_cols(gates, l, l + 1)?)?;
            acc = Some(match acc {
                None => term,
                Some(a) => tape.add(a, term)?,
            });
        }
        tape.relu(acc.expect("at least two layers"))
    }
}
