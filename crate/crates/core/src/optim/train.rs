use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{adam_update, clip_grad_norm, lr_at, AdamState, LrSchedule};
use crate::data::{make_batches, SessionDataset};
use crate::error::{Error, Result};
use crate::layers::Model;
use crate::numkernel::{Real, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Not fixed by the reference setup; chosen per experiment.
    pub epochs: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 10,
            seed: 0,
            schedule: LrSchedule::default(),
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        self.schedule.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub lr: f64,
    pub loss_sum: f64,
    pub loss_mean: f64,
    pub events: usize,
    /// Seconds since training started.
    pub wall_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record") + "\n")
            .collect()
    }

    /// Event-weighted mean loss per epoch.
    pub fn epoch_means(&self) -> Vec<f64> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for r in &self.records {
            if out.len() <= r.epoch {
                out.resize(r.epoch + 1, (0.0, 0));
            }
            out[r.epoch].0 += r.loss_sum;
            out[r.epoch].1 += r.events;
        }
        out.into_iter().map(|(s, n)| s / n.max(1) as f64).collect()
    }
}

pub fn train<T: Real>(model: &mut Model<T>, data: &SessionDataset, cfg: &TrainConfig) -> Result<TrainLog> {
    train_with(model, data, cfg, |_, _, _| Ok(()))
}

/// Trains for `cfg.epochs` epochs, calling `on_epoch(epoch, model, log)`
/// after each one.
pub fn train_with<T, F>(model: &mut Model<T>, data: &SessionDataset, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainLog>
where
    T: Real,
    F: FnMut(usize, &Model<T>, &TrainLog) -> Result<()>,
{
    cfg.validate()?;
    if data.sequences.iter().all(|s| s.len() < 2) {
        return Err(Error::Config("training data has no sequence of length ≥ 2".into()));
    }
    let mut adam = AdamState::new(&model.store);
    let mut log = TrainLog::default();
    let started = Instant::now();
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        let batches = make_batches(data, cfg.batch_size, cfg.seed.wrapping_add(epoch as u64), true)?;
        for batch in &batches {
            let tape = Tape::new();
            let out = model.batch_loss(&tape, batch)?;
            let loss_sum = tape.value(out.loss).item().to_f64_lossy();
            tape.backward(out.loss, &mut model.store)?;
            if let Some(max) = cfg.clip_norm {
                clip_grad_norm(&mut model.store, max);
            }
            let lr = lr_at(step, &cfg.schedule);
            adam_update(&mut model.store, &mut adam, lr)?;
            log.records.push(StepRecord {
                step,
                epoch,
                lr,
                loss_sum,
                loss_mean: loss_sum / out.events as f64,
                events: out.events,
                wall_time: started.elapsed().as_secs_f64(),
            });
            step += 1;
        }
        let means = log.epoch_means();
        log::info!("epoch {epoch}: mean loss {:.5}", means[epoch]);
        on_epoch(epoch, model, &log)?;
    }
    Ok(log)
}
