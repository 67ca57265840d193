use crate::kind::ModelKind;

/// Closed-form parameter count of a model kind.
///
/// Embedding `N_O·N_E`; each GRU layer `3·(N_H·n_in + N_H²)` plus
/// `3·2·N_H` with layer norm; each HM-LSTM layer `(4N_H+1)` rows over the
/// bottom-up, recurrent and (below the top) top-down inputs plus a bias,
/// `4·2·N_H` with layer norm, and an output module of `L·L·N_H + L·N_H²`;
/// output projection `N_O·N_H` unless tied. Fitted baselines have none.
pub fn count_params(kind: ModelKind, n_o: usize, n_e: usize, n_h: usize) -> usize {
    let Some(cfg) = kind.model_config(n_o, n_e, n_h) else {
        return 0;
    };
    let embedding = n_o * n_e;
    let output = if cfg.tied_output { 0 } else { n_o * n_h };
    let ln = |gates: usize| if cfg.layer_norm { gates * 2 * n_h } else { 0 };
    let n_in = |l: usize| if l == 0 { n_e } else { n_h };
    let recurrence: usize = match cfg.cell {
        crate::layers::CellKind::Identity => 0,
        crate::layers::CellKind::Gru => (0..cfg.layers).map(|l| 3 * (n_h * n_in(l) + n_h * n_h) + ln(3)).sum(),
        crate::layers::CellKind::HmLstm => {
            let rows = 4 * n_h + 1;
            let layers: usize = (0..cfg.layers)
                .map(|l| {
                    let top_down = if l + 1 < cfg.layers { rows * n_h } else { 0 };
                    rows * n_in(l) + rows * n_h + top_down + rows + ln(4)
                })
                .sum();
            layers + cfg.layers * cfg.layers * n_h + cfg.layers * n_h * n_h
        }
    };
    embedding + recurrence + output
}
