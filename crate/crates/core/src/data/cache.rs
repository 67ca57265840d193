use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Preprocessed, SessionDataset, Split, Vocabulary};
use crate::container::{read_container, write_container, PayloadReader};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SEQRDATA";

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    vocabulary: Vec<String>,
    splits: Vec<SplitHeader>,
}

#[derive(Serialize, Deserialize)]
struct SplitHeader {
    split: Split,
    provenance: String,
    session_ids: Vec<String>,
}

/// Writes the three splits and the vocabulary. Sequences go to the payload
/// as `u32` length followed by `u32` item indices.
pub fn write_dataset_cache(path: impl AsRef<Path>, data: &Preprocessed) -> Result<()> {
    let sets = [&data.train, &data.valid, &data.test];
    let header = CacheHeader {
        vocabulary: data.vocab.ids().to_vec(),
        splits: sets
            .iter()
            .map(|ds| SplitHeader {
                split: ds.split,
                provenance: ds.provenance.clone(),
                session_ids: ds.session_ids.clone(),
            })
            .collect(),
    };
    let mut payload = Vec::new();
    for ds in sets {
        for seq in &ds.sequences {
            let len = u32::try_from(seq.len()).map_err(|_| Error::Config("sequence too long to cache".into()))?;
            payload.extend_from_slice(&len.to_le_bytes());
            for &i in seq {
                let i = u32::try_from(i).map_err(|_| Error::Config("item index exceeds u32".into()))?;
                payload.extend_from_slice(&i.to_le_bytes());
            }
        }
    }
    write_container(path.as_ref(), MAGIC, &header, &payload)
}

pub fn read_dataset_cache(path: impl AsRef<Path>) -> Result<Preprocessed> {
    let path = path.as_ref();
    let (header, payload): (CacheHeader, Vec<u8>) = read_container(path, MAGIC)?;
    let vocab = Vocabulary::from_ids(header.vocabulary)?;
    let mut reader = PayloadReader { bytes: &payload, path };
    let mut sets = Vec::new();
    for sh in header.splits {
        let mut sequences = Vec::with_capacity(sh.session_ids.len());
        for _ in 0..sh.session_ids.len() {
            let len = reader.u32()? as usize;
            let seq = (0..len)
                .map(|_| {
                    let i = reader.u32()? as usize;
                    if i >= vocab.len() {
                        return Err(Error::Vocabulary { index: i, size: vocab.len() });
                    }
                    Ok(i)
                })
                .collect::<Result<Vec<_>>>()?;
            sequences.push(seq);
        }
        sets.push(SessionDataset {
            split: sh.split,
            sequences,
            session_ids: sh.session_ids,
            provenance: sh.provenance,
        });
    }
    reader.finish()?;
    let [train, valid, test]: [SessionDataset; 3] = sets.try_into().map_err(|_| Error::Format {
        path: path.display().to_string(),
        message: "expected three splits".into(),
    })?;
    Ok(Preprocessed { train, valid, test, vocab })
}
