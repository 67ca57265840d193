use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SessionDataset;
use crate::error::{Error, Result};

/// Sequences sorted within windows of this many batches, to keep padding low
/// while preserving most of the shuffle.
const BUCKET_WINDOW: usize = 32;

/// Padded block of sequences. Row `b` holds `lengths[b]` real items followed
/// by padding; `mask[b][t]` is true iff `t < lengths[b]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
    pub lengths: Vec<usize>,
    /// Position of each row in the source dataset.
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn from_sequences(seqs: &[&[usize]]) -> Result<Self> {
        Self::from_sequences_padded(seqs, 0)
    }

    /// Like [`Batch::from_sequences`], filling padding with `pad`.
    pub fn from_sequences_padded(seqs: &[&[usize]], pad: usize) -> Result<Self> {
        if seqs.is_empty() {
            return Err(Error::Usage("empty batch".into()));
        }
        let t_max = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        if t_max < 2 {
            return Err(Error::DegenerateBatch);
        }
        let mut items = Vec::with_capacity(seqs.len());
        let mut mask = Vec::with_capacity(seqs.len());
        for s in seqs {
            let mut row = s.to_vec();
            row.resize(t_max, pad);
            items.push(row);
            mask.push((0..t_max).map(|t| t < s.len()).collect());
        }
        Ok(Batch {
            items,
            mask,
            lengths: seqs.iter().map(|s| s.len()).collect(),
            indices: (0..seqs.len()).collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.items.len()
    }

    pub fn max_len(&self) -> usize {
        self.items.first().map_or(0, Vec::len)
    }

    /// Number of input steps: every position except the last can predict.
    pub fn steps(&self) -> usize {
        self.max_len().saturating_sub(1)
    }

    /// Inputs for steps `0..T−1`, time-major: entry `t * B + b` is
    /// `items[b][t]`.
    pub fn time_major_inputs(&self) -> Vec<usize> {
        let b = self.size();
        let mut out = Vec::with_capacity(self.steps() * b);
        for t in 0..self.steps() {
            out.extend(self.items.iter().map(|row| row[t]));
        }
        debug_assert_eq!(out.len(), self.steps() * b);
        out
    }

    /// Time-major rows (into the `steps × B` representation block) that have
    /// a real next item, with those next items as targets.
    pub fn prediction_rows(&self) -> (Vec<usize>, Vec<usize>) {
        let b = self.size();
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for t in 0..self.steps() {
            for (i, row) in self.items.iter().enumerate() {
                if t + 1 < self.lengths[i] {
                    rows.push(t * b + i);
                    targets.push(row[t + 1]);
                }
            }
        }
        (rows, targets)
    }

    /// Same rows as [`Batch::prediction_rows`], grouped by sequence and
    /// ordered by position within each sequence.
    pub fn prediction_rows_by_sequence(&self) -> (Vec<usize>, Vec<usize>) {
        let b = self.size();
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (i, row) in self.items.iter().enumerate() {
            for t in 0..self.lengths[i].saturating_sub(1) {
                rows.push(t * b + i);
                targets.push(row[t + 1]);
            }
        }
        (rows, targets)
    }

    pub fn num_predictions(&self) -> usize {
        self.lengths.iter().map(|&l| l.saturating_sub(1)).sum()
    }
}

/// Splits a dataset into padded batches. With `shuffle` the sequence order
/// is permuted by `seed`; either way sequences are sorted by length inside
/// windows of consecutive batches. With `shuffle` the full batches of each
/// window are then permuted too. The final partial batch is kept, last.
pub fn make_batches(ds: &SessionDataset, batch_size: usize, seed: u64, shuffle: bool) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..ds.len()).filter(|&i| ds.sequences[i].len() >= 2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if shuffle {
        order.shuffle(&mut rng);
    }
    let window = batch_size * BUCKET_WINDOW;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for chunk in order.chunks_mut(window) {
        chunk.sort_by_key(|&i| ds.sequences[i].len());
        let mut window_groups: Vec<Vec<usize>> = chunk.chunks(batch_size).map(<[usize]>::to_vec).collect();
        if shuffle {
            let full = window_groups.iter().take_while(|g| g.len() == batch_size).count();
            window_groups[..full].shuffle(&mut rng);
        }
        groups.extend(window_groups);
    }
    // A short window group can only be the very last one.
    groups
        .into_iter()
        .map(|g| {
            let seqs: Vec<&[usize]> = g.iter().map(|&i| ds.sequences[i].as_slice()).collect();
            let mut batch = Batch::from_sequences(&seqs)?;
            batch.indices = g;
            Ok(batch)
        })
        .collect()
}
