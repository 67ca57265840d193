use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{CellKind, ModelConfig};

/// Every trainable or fittable model the toolkit knows, by its public name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "pop")]
    Pop,
    #[serde(rename = "item_knn")]
    ItemKnn,
    #[serde(rename = "coevent_mf")]
    CoeventMf,
    #[serde(rename = "coevent_mf+re")]
    CoeventMfRe,
    #[serde(rename = "gru")]
    Gru,
    #[serde(rename = "gru+re")]
    GruRe,
    #[serde(rename = "gru+ln")]
    GruLn,
    #[serde(rename = "gru+re+ln")]
    GruReLn,
    #[serde(rename = "stacked_gru+re+ln")]
    StackedGruReLn,
    #[serde(rename = "hm_lstm+re+ln")]
    HmLstmReLn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::Pop,
        ModelKind::ItemKnn,
        ModelKind::CoeventMf,
        ModelKind::CoeventMfRe,
        ModelKind::Gru,
        ModelKind::GruRe,
        ModelKind::GruLn,
        ModelKind::GruReLn,
        ModelKind::StackedGruReLn,
        ModelKind::HmLstmReLn,
    ];

    /// The eight parametric models, in parameter-table order.
    pub const PARAMETRIC: [ModelKind; 8] = [
        ModelKind::CoeventMf,
        ModelKind::CoeventMfRe,
        ModelKind::Gru,
        ModelKind::GruRe,
        ModelKind::GruLn,
        ModelKind::GruReLn,
        ModelKind::StackedGruReLn,
        ModelKind::HmLstmReLn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Pop => "pop",
            ModelKind::ItemKnn => "item_knn",
            ModelKind::CoeventMf => "coevent_mf",
            ModelKind::CoeventMfRe => "coevent_mf+re",
            ModelKind::Gru => "gru",
            ModelKind::GruRe => "gru+re",
            ModelKind::GruLn => "gru+ln",
            ModelKind::GruReLn => "gru+re+ln",
            ModelKind::StackedGruReLn => "stacked_gru+re+ln",
            ModelKind::HmLstmReLn => "hm_lstm+re+ln",
        }
    }

    pub fn is_baseline_fit(self) -> bool {
        matches!(self, ModelKind::Pop | ModelKind::ItemKnn)
    }

    /// Architecture of a trainable kind; `None` for fitted baselines.
    pub fn model_config(self, n_o: usize, n_e: usize, n_h: usize) -> Option<ModelConfig> {
        let (cell, layers, layer_norm, tied_output) = match self {
            ModelKind::Pop | ModelKind::ItemKnn => return None,
            ModelKind::CoeventMf => (CellKind::Identity, 1, false, false),
            ModelKind::CoeventMfRe => (CellKind::Identity, 1, false, true),
            ModelKind::Gru => (CellKind::Gru, 1, false, false),
            ModelKind::GruRe => (CellKind::Gru, 1, false, true),
            ModelKind::GruLn => (CellKind::Gru, 1, true, false),
            ModelKind::GruReLn => (CellKind::Gru, 1, true, true),
            ModelKind::StackedGruReLn => (CellKind::Gru, 2, true, true),
            ModelKind::HmLstmReLn => (CellKind::HmLstm, 2, true, true),
        };
        Some(ModelConfig {
            cell,
            layers,
            layer_norm,
            tied_output,
            n_e,
            n_h,
            n_o,
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown model `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("lstm".parse::<ModelKind>().is_err());
    }
}
