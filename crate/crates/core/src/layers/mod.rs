//! Model components: item embedding, GRU and HM-LSTM recurrences, layer
//! normalization, and the (optionally tied) output projection, assembled
//! into a next-item [`Model`].

mod embedding;
mod gru;
mod hm_lstm;
mod layer_norm;
mod model;
mod output;

use serde::{Deserialize, Serialize};

pub use embedding::EmbeddingTable;
pub use gru::GruCellParams;
pub use hm_lstm::{HmLstmCellParams, HmLstmLayer, HmState};
pub use layer_norm::{layer_norm, LayerNormParams, DEFAULT_LN_EPS};
pub use model::{Model, Recurrence};
pub use output::OutputProjection;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Gru,
    HmLstm,
    /// No recurrence: the representation is the current item's embedding.
    /// This is the co-event factorization model.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub cell: CellKind,
    pub layers: usize,
    pub layer_norm: bool,
    pub tied_output: bool,
    /// Embedding size.
    pub n_e: usize,
    /// Hidden size.
    pub n_h: usize,
    /// Vocabulary size.
    pub n_o: usize,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_e == 0 || self.n_h == 0 || self.n_o == 0 || self.layers == 0 {
            return Err(Error::Config(format!("sizes must be positive: {self:?}")));
        }
        match self.cell {
            CellKind::HmLstm if self.layers < 2 => {
                return Err(Error::Config("hm_lstm needs at least 2 layers".into()))
            }
            CellKind::Identity if self.n_e != self.n_h => {
                return Err(Error::Config("identity recurrence needs n_e == n_h".into()))
            }
            CellKind::Identity if self.layer_norm => {
                return Err(Error::Config("identity recurrence has no layer norm".into()))
            }
            _ => {}
        }
        if self.tied_output && self.n_e != self.n_h {
            return Err(Error::Config(format!(
                "tied output needs n_e == n_h (got {} and {})",
                self.n_e, self.n_h
            )));
        }
        Ok(())
    }
}
