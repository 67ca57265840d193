use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Event, SessionDataset, Split, Vocabulary};
use crate::error::{Error, Result};

const WEEK_MS: i64 = 7 * 24 * 3600 * 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Final week → test, the week before → validation, the rest → train.
    /// Sessions straddling a week boundary are dropped.
    YoochooseLike,
    /// Seeded hash of the session id: 80/10/10, sequences cut to their
    /// last `max_len` items.
    InternalLike,
}

#[derive(Clone, Debug)]
pub struct PreprocessOptions {
    pub policy: SplitPolicy,
    pub seed: u64,
    /// Keep only the last `max_len` items of each sequence.
    pub max_len: Option<usize>,
}

impl PreprocessOptions {
    pub fn yoochoose() -> Self {
        PreprocessOptions {
            policy: SplitPolicy::YoochooseLike,
            seed: 0,
            max_len: None,
        }
    }

    pub fn internal(seed: u64) -> Self {
        PreprocessOptions {
            policy: SplitPolicy::InternalLike,
            seed,
            max_len: Some(40),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Preprocessed {
    pub train: SessionDataset,
    pub valid: SessionDataset,
    pub test: SessionDataset,
    pub vocab: Vocabulary,
}

impl Preprocessed {
    pub fn split(&self, split: Split) -> &SessionDataset {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

/// Stable 80/10/10 assignment from a seeded SHA-256 of the session id.
pub fn assign_by_hash(session_id: &str, seed: u64) -> Split {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(session_id.as_bytes());
    let digest = h.finalize();
    let bucket = u64::from_le_bytes(digest[..8].try_into().unwrap()) % 10;
    match bucket {
        0..=7 => Split::Train,
        8 => Split::Valid,
        _ => Split::Test,
    }
}

struct RawSession {
    id: String,
    first: i64,
    last: i64,
    items: Vec<String>,
}

fn group(events: &[Event]) -> Vec<RawSession> {
    let mut out: Vec<RawSession> = Vec::new();
    let mut slot = std::collections::HashMap::new();
    for e in events {
        let idx = *slot.entry(e.session_id.as_str()).or_insert_with(|| {
            out.push(RawSession {
                id: e.session_id.clone(),
                first: e.timestamp,
                last: e.timestamp,
                items: Vec::new(),
            });
            out.len() - 1
        });
        let s = &mut out[idx];
        s.first = s.first.min(e.timestamp);
        s.last = s.last.max(e.timestamp);
        s.items.push(e.item_id.clone());
    }
    out
}

/// Splits sessions, drops single-click sessions, builds the vocabulary on
/// the training split and removes unseen items from validation and test.
pub fn preprocess(events: &[Event], opts: &PreprocessOptions) -> Result<Preprocessed> {
    if events.is_empty() {
        return Err(Error::Config("no events to preprocess".into()));
    }
    let mut sessions = group(events);
    sessions.retain(|s| s.items.len() >= 2);
    if let Some(max_len) = opts.max_len {
        for s in &mut sessions {
            let cut = s.items.len().saturating_sub(max_len);
            s.items.drain(..cut);
        }
    }

    let mut assigned: [Vec<RawSession>; 3] = Default::default();
    match opts.policy {
        SplitPolicy::YoochooseLike => {
            let t_max = sessions.iter().map(|s| s.last).max().unwrap_or(0);
            let test_start = t_max - WEEK_MS;
            let valid_start = t_max - 2 * WEEK_MS;
            for s in sessions {
                let slot = if s.first >= test_start {
                    Some(2)
                } else if s.first >= valid_start && s.last < test_start {
                    Some(1)
                } else if s.last < valid_start {
                    Some(0)
                } else {
                    None
                };
                if let Some(k) = slot {
                    assigned[k].push(s);
                }
            }
        }
        SplitPolicy::InternalLike => {
            for s in sessions {
                let k = match assign_by_hash(&s.id, opts.seed) {
                    Split::Train => 0,
                    Split::Valid => 1,
                    Split::Test => 2,
                };
                assigned[k].push(s);
            }
        }
    }
    let [train_raw, valid_raw, test_raw] = assigned;
    if train_raw.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }

    let mut vocab = Vocabulary::new();
    let mut train = SessionDataset::new(Split::Train, Vec::new());
    train.session_ids.clear();
    for s in &train_raw {
        train.sequences.push(s.items.iter().map(|i| vocab.insert(i)).collect());
        train.session_ids.push(s.id.clone());
    }

    let restrict = |raw: &[RawSession], split: Split| {
        let mut ds = SessionDataset::new(split, Vec::new());
        ds.session_ids.clear();
        for s in raw {
            let seq: Vec<usize> = s.items.iter().filter_map(|i| vocab.get(i)).collect();
            if seq.len() >= 2 {
                ds.sequences.push(seq);
                ds.session_ids.push(s.id.clone());
            }
        }
        ds
    };
    let valid = restrict(&valid_raw, Split::Valid);
    let test = restrict(&test_raw, Split::Test);

    let provenance = format!("{:?} seed={} max_len={:?}", opts.policy, opts.seed, opts.max_len);
    let mut out = Preprocessed {
        train,
        valid,
        test,
        vocab,
    };
    for ds in [&mut out.train, &mut out.valid, &mut out.test] {
        ds.provenance = provenance.clone();
    }
    Ok(out)
}
