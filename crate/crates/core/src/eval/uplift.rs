use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative improvement in percent with a bootstrap 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Uplift {
    pub uplift: f64,
    pub lo: f64,
    pub hi: f64,
    pub resamples: usize,
}

/// Per-sequence point totals: `(sum of values, number of points)`.
pub type SequenceTotals = Vec<(f64, usize)>;

pub fn sequence_totals(points: &[Vec<f64>]) -> SequenceTotals {
    points.iter().map(|p| (p.iter().sum(), p.len())).collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn ratio(model: &SequenceTotals, base: &SequenceTotals, pick: impl Iterator<Item = usize>) -> Option<f64> {
    let (mut m, mut b, mut n) = (0.0, 0.0, 0usize);
    for i in pick {
        m += model[i].0;
        b += base[i].0;
        n += model[i].1;
    }
    let (rm, rb) = (m / n as f64, b / n as f64);
    (n > 0 && rb > 0.0).then(|| (rm - rb) / rb * 100.0)
}

/// Uplift of `model` over `base`, with the 2.5/97.5 percentiles of
/// `resamples` bootstrap replicates that resample whole sequences.
/// Replicates whose baseline recall is zero are skipped.
pub fn uplift_ci(model: &SequenceTotals, base: &SequenceTotals, resamples: usize, seed: u64) -> Result<Uplift> {
    if model.len() != base.len() || model.iter().zip(base).any(|(m, b)| m.1 != b.1) {
        return Err(Error::Config("uplift needs both reports over the same evaluation points".into()));
    }
    if resamples == 0 {
        return Err(Error::Config("resamples must be positive".into()));
    }
    let n = model.len();
    let uplift = ratio(model, base, 0..n).ok_or(Error::UndefinedUplift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reps: Vec<f64> = (0..resamples)
        .filter_map(|_| {
            let pick: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            ratio(model, base, pick.into_iter())
        })
        .collect();
    if reps.is_empty() {
        return Err(Error::UndefinedUplift);
    }
    reps.sort_unstable_by(f64::total_cmp);
    Ok(Uplift {
        uplift,
        lo: percentile(&reps, 0.025),
        hi: percentile(&reps, 0.975),
        resamples: reps.len(),
    })
}
