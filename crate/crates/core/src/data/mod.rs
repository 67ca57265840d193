//! Session logs in, index sequences out: ingestion, splitting,
//! vocabulary, batching, statistics and synthetic Markov data.

mod batch;
mod cache;
mod ingest;
mod preprocess;
mod stats;
mod synth;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use batch::{make_batches, Batch};
pub use cache::{read_dataset_cache, write_dataset_cache};
pub use ingest::{ingest, Event, IngestOptions};
pub use preprocess::{assign_by_hash, preprocess, PreprocessOptions, Preprocessed, SplitPolicy};
pub use stats::{stats, DatasetStats};
pub use synth::{synth_generate, Sampler, SynthConfig, SynthOrder, SyntheticData, TransitionStructure};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Item id ↔ dense index map, built from the training split.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        let mut v = Vocabulary::new();
        for id in ids {
            if v.index.contains_key(&id) {
                return Err(Error::Config(format!("duplicate item id `{id}` in vocabulary")));
            }
            v.insert(&id);
        }
        Ok(v)
    }

    /// Vocabulary whose ids are the decimal indices `0..n`.
    pub fn identity(n: usize) -> Self {
        Self::from_ids((0..n).map(|i| i.to_string()).collect()).expect("distinct ids")
    }

    pub fn insert(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), self.ids.len() - 1);
        self.ids.len() - 1
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Ordered item-index sequences of one split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionDataset {
    pub split: Split,
    pub sequences: Vec<Vec<usize>>,
    pub session_ids: Vec<String>,
    pub provenance: String,
}

impl SessionDataset {
    pub fn new(split: Split, sequences: Vec<Vec<usize>>) -> Self {
        let session_ids = (0..sequences.len()).map(|i| i.to_string()).collect();
        SessionDataset {
            split,
            sequences,
            session_ids,
            provenance: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn num_events(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    pub fn max_item(&self) -> Option<usize> {
        self.sequences.iter().flatten().copied().max()
    }
}
