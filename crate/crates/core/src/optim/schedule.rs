use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial decay from `start_lr` to `end_lr` over `decay_steps`
/// optimizer steps, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrSchedule {
    pub start_lr: f64,
    pub end_lr: f64,
    pub power: f64,
    pub decay_steps: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            start_lr: 0.01,
            end_lr: 0.001,
            power: 0.5,
            decay_steps: 50_000,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.start_lr >= self.end_lr && self.end_lr > 0.0 && self.power > 0.0 && self.decay_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid learning-rate schedule {self:?}")))
        }
    }
}

pub fn lr_at(step: u64, s: &LrSchedule) -> f64 {
    if step >= s.decay_steps {
        return s.end_lr;
    }
    // end + (start − end)·w, written as a blend so step 0 gives start exactly
    let w = (1.0 - step as f64 / s.decay_steps as f64).powf(s.power);
    s.start_lr * w + s.end_lr * (1.0 - w)
}
