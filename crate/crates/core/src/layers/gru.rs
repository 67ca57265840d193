use rand::Rng;

use super::layer_norm::LayerNormParams;
use crate::error::Result;
use crate::numkernel::{ParamId, ParamStore, Real, Tape, Var};

/// One GRU layer without bias vectors:
///
/// ```text
/// r  = σ(W_r_e e + W_r_h h)
/// h̃ = tanh(W_h_e e + W_h_h (r ⊙ h))
/// z  = σ(W_z_e e + W_z_h h)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
///
/// With layer normalization each pre-activation sum is normalized
/// (own gain and bias per gate) before its nonlinearity.
#[derive(Clone, Debug)]
pub struct GruCellParams {
    pub w_r_e: ParamId,
    pub w_h_e: ParamId,
    pub w_z_e: ParamId,
    pub w_r_h: ParamId,
    pub w_h_h: ParamId,
    pub w_z_h: ParamId,
    /// Normalizers for the r, z and h̃ pre-activations.
    pub ln: Option<[LayerNormParams; 3]>,
    pub n_in: usize,
    pub n_h: usize,
}

/// Input-side products `W_*_e · e` for every row of an input batch.
#[derive(Clone, Copy, Debug)]
pub struct GruInputProjection {
    pub r: Var,
    pub z: Var,
    pub h: Var,
}

impl GruCellParams {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        prefix: &str,
        n_in: usize,
        n_h: usize,
        layer_norm: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let mut m = |name: &str, cols: usize| store.add_scaled_uniform(format!("{prefix}.{name}"), n_h, cols, rng);
        let (w_r_e, w_h_e, w_z_e) = (m("w_r_e", n_in), m("w_h_e", n_in), m("w_z_e", n_in));
        let (w_r_h, w_h_h, w_z_h) = (m("w_r_h", n_h), m("w_h_h", n_h), m("w_z_h", n_h));
        let ln = layer_norm.then(|| {
            [
                LayerNormParams::new(store, &format!("{prefix}.ln_r"), n_h),
                LayerNormParams::new(store, &format!("{prefix}.ln_z"), n_h),
                LayerNormParams::new(store, &format!("{prefix}.ln_h"), n_h),
            ]
        });
        GruCellParams {
            w_r_e,
            w_h_e,
            w_z_e,
            w_r_h,
            w_h_h,
            w_z_h,
            ln,
            n_in,
            n_h,
        }
    }

    pub fn project_inputs<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, e: Var) -> Result<GruInputProjection> {
        Ok(GruInputProjection {
            r: tape.matmul_nt(e, tape.param(store, self.w_r_e))?,
            z: tape.matmul_nt(e, tape.param(store, self.w_z_e))?,
            h: tape.matmul_nt(e, tape.param(store, self.w_h_e))?,
        })
    }

    /// Advances the state given precomputed input projections.
    pub fn step_projected<T: Real>(
        &self,
        tape: &Tape<T>,
        store: &ParamStore<T>,
        x: GruInputProjection,
        h_prev: Var,
    ) -> Result<Var> {
        let norm = |k: usize, v: Var| match &self.ln {
            Some(ln) => ln[k].apply(tape, store, v),
            None => Ok(v),
        };
        let a_r = tape.add(x.r, tape.matmul_nt(h_prev, tape.param(store, self.w_r_h))?)?;
        let r = tape.sigmoid(norm(0, a_r)?)?;
        let a_z = tape.add(x.z, tape.matmul_nt(h_prev, tape.param(store, self.w_z_h))?)?;
        let z = tape.sigmoid(norm(1, a_z)?)?;
        let rh = tape.mul(r, h_prev)?;
        let a_h = tape.add(x.h, tape.matmul_nt(rh, tape.param(store, self.w_h_h))?)?;
        let cand = tape.tanh(norm(2, a_h)?)?;
        // (1 − z) ⊙ h + z ⊙ h̃  ==  h + z ⊙ (h̃ − h)
        tape.add(h_prev, tape.mul(z, tape.sub(cand, h_prev)?)?)
    }

    /// One step on a batch of input rows `e` (B × n_in) and states (B × N_H).
    pub fn step<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, e: Var, h_prev: Var) -> Result<Var> {
        let x = self.project_inputs(tape, store, e)?;
        self.step_projected(tape, store, x, h_prev)
    }
}
