use rand::Rng;

use super::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numkernel::{ParamId, ParamStore, Real, Tape, Var};

/// Output module producing unnormalized next-item scores.
#[derive(Clone, Copy, Debug)]
pub enum OutputProjection {
    /// `o = W_O h` with its own N_O × N_H matrix.
    Owned(ParamId),
    /// `o = W_Iᵀ h`, reusing the embedding table.
    Tied(ParamId),
}

impl OutputProjection {
    pub fn owned<T: Real>(store: &mut ParamStore<T>, n_o: usize, n_h: usize, rng: &mut impl Rng) -> Self {
        OutputProjection::Owned(store.add_scaled_uniform("output", n_o, n_h, rng))
    }

    pub fn tied(embedding: &EmbeddingTable, n_h: usize) -> Result<Self> {
        if embedding.n_e != n_h {
            return Err(Error::Config(format!(
                "tied output needs n_e == n_h (got {} and {n_h})",
                embedding.n_e
            )));
        }
        Ok(OutputProjection::Tied(embedding.weight))
    }

    pub fn weight(&self) -> ParamId {
        match *self {
            OutputProjection::Owned(w) | OutputProjection::Tied(w) => w,
        }
    }

    /// Logits (B × N_O) for a batch of representations (B × N_H). Both
    /// weights are stored item-major, so either mode is `h · Wᵀ`.
    pub fn logits<T: Real>(&self, tape: &Tape<T>, store: &ParamStore<T>, h: Var) -> Result<Var> {
        tape.matmul_nt(h, tape.param(store, self.weight()))
    }
}
