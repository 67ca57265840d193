use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::embedding::EmbeddingTable;
use super::gru::GruCellParams;
use super::hm_lstm::HmLstmCellParams;
use super::output::OutputProjection;
use super::{CellKind, ModelConfig};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::numkernel::{ParamStore, Real, Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub enum Recurrence {
    Identity,
    Gru(Vec<GruCellParams>),
    HmLstm(HmLstmCellParams),
}

/// Embedding → recurrence → projection next-item model with its weights.
#[derive(Clone, Debug)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub store: ParamStore<T>,
    pub embedding: EmbeddingTable,
    pub recurrence: Recurrence,
    pub output: OutputProjection,
}

/// Loss of one batch plus the number of predicted events it covers.
pub struct BatchLoss {
    pub loss: Var,
    pub events: usize,
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let embedding = EmbeddingTable::new(&mut store, config.n_o, config.n_e, &mut rng);
        let recurrence = match config.cell {
            CellKind::Identity => Recurrence::Identity,
            CellKind::Gru => Recurrence::Gru(
                (0..config.layers)
                    .map(|l| {
                        let n_in = if l == 0 { config.n_e } else { config.n_h };
                        GruCellParams::new(&mut store, &format!("gru.{l}"), n_in, config.n_h, config.layer_norm, &mut rng)
                    })
                    .collect(),
            ),
            CellKind::HmLstm => Recurrence::HmLstm(HmLstmCellParams::new(
                &mut store,
                config.layers,
                config.n_e,
                config.n_h,
                config.layer_norm,
                &mut rng,
            )?),
        };
        let output = if config.tied_output {
            OutputProjection::tied(&embedding, config.n_h)?
        } else {
            OutputProjection::owned(&mut store, config.n_o, config.n_h, &mut rng)
        };
        Ok(Model {
            config,
            store,
            embedding,
            recurrence,
            output,
        })
    }

    pub fn num_params(&self) -> usize {
        self.store.num_scalars()
    }

    /// Top-layer representations for `steps` time steps of a batch of
    /// `batch` sequences. `inputs` is time-major (`inputs[t * batch + b]`);
    /// the result has the same row order. `boundaries`, when given, pins
    /// HM-LSTM boundaries per step and layer.
    pub fn representations(
        &self,
        tape: &Tape<T>,
        inputs: &[usize],
        batch: usize,
        boundaries: Option<&[Vec<bool>]>,
    ) -> Result<Var> {
        if inputs.is_empty() || inputs.len() % batch != 0 {
            return Err(Error::Usage(format!("{} inputs do not fill batches of {batch}", inputs.len())));
        }
        let steps = inputs.len() / batch;
        let e_all = self.embedding.lookup(tape, &self.store, inputs)?;
        let store = &self.store;
        match &self.recurrence {
            Recurrence::Identity => Ok(e_all),
            Recurrence::Gru(layers) => {
                let mut input = e_all;
                for cell in layers {
                    let x_all = cell.project_inputs(tape, store, input)?;
                    let mut h = tape.constant(Tensor::zeros(&[batch, cell.n_h]));
                    let mut hs = Vec::with_capacity(steps);
                    for t in 0..steps {
                        let (lo, hi) = (t * batch, (t + 1) * batch);
                        let x = super::gru::GruInputProjection {
                            r: tape.slice_rows(x_all.r, lo, hi)?,
                            z: tape.slice_rows(x_all.z, lo, hi)?,
                            h: tape.slice_rows(x_all.h, lo, hi)?,
                        };
                        h = cell.step_projected(tape, store, x, h)?;
                        hs.push(h);
                    }
                    input = tape.concat_rows(&hs)?;
                }
                Ok(input)
            }
            Recurrence::HmLstm(cell) => {
                if let Some(b) = boundaries {
                    if b.len() < steps {
                        return Err(Error::Usage("boundary schedule shorter than sequence".into()));
                    }
                }
                let mut state = cell.zero_state(tape, batch);
                let mut outs = Vec::with_capacity(steps);
                for t in 0..steps {
                    let e = tape.slice_rows(e_all, t * batch, (t + 1) * batch)?;
                    let forced = boundaries.map(|b| b[t].as_slice());
                    state = cell.step(tape, store, e, &state, forced)?;
                    outs.push(cell.output(tape, store, &state)?);
                }
                tape.concat_rows(&outs)
            }
        }
    }

    /// Summed next-item NLL over every unmasked prediction of the batch.
    pub fn batch_loss(&self, tape: &Tape<T>, batch: &Batch) -> Result<BatchLoss> {
        self.batch_loss_with(tape, batch, None)
    }

    pub fn batch_loss_with(
        &self,
        tape: &Tape<T>,
        batch: &Batch,
        boundaries: Option<&[Vec<bool>]>,
    ) -> Result<BatchLoss> {
        let (rows, targets) = batch.prediction_rows();
        if rows.is_empty() {
            return Err(Error::DegenerateBatch);
        }
        let h_all = self.representations(tape, &batch.time_major_inputs(), batch.size(), boundaries)?;
        let h = tape.gather_rows(h_all, &rows)?;
        let logits = self.output.logits(tape, &self.store, h)?;
        let weights = vec![T::one(); rows.len()];
        Ok(BatchLoss {
            loss: tape.softmax_nll(logits, &targets, &weights)?,
            events: rows.len(),
        })
    }

    /// Next-item logits after every prefix of every sequence. For each
    /// sequence the result holds `len − 1` rows (one per prefix that has a
    /// successor), concatenated in sequence order.
    pub fn prefix_logits(&self, seqs: &[&[usize]]) -> Result<Tensor<T>> {
        let batch = Batch::from_sequences(seqs)?;
        let tape = Tape::new();
        let h_all = self.representations(&tape, &batch.time_major_inputs(), batch.size(), None)?;
        let (rows, _) = batch.prediction_rows_by_sequence();
        let h = tape.gather_rows(h_all, &rows)?;
        let logits = self.output.logits(&tape, &self.store, h)?;
        Ok(tape.value(logits))
    }
}
