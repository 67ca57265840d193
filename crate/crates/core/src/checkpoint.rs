//! One container format for trained networks and fitted baselines, tagged by
//! model kind. Network tensors are stored by name and shape in their native
//! precision, so a write/read round trip is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{ItemKnnModel, PopModel};
use crate::container::{read_container, write_container, PayloadReader};
use crate::error::{Error, Result};
use crate::eval::Recommender;
use crate::layers::{Model, ModelConfig};
use crate::numkernel::Real;
use crate::ModelKind;

const MAGIC: &[u8; 8] = b"SEQRCKPT";

/// Anything `cmd_eval` can score with.
#[derive(Clone, Debug)]
pub enum Fitted {
    F64(Model<f64>),
    F32(Model<f32>),
    Pop(PopModel),
    ItemKnn(ItemKnnModel),
}

impl Fitted {
    pub fn as_recommender(&self) -> &dyn Recommender {
        match self {
            Fitted::F64(m) => m,
            Fitted::F32(m) => m,
            Fitted::Pop(m) => m,
            Fitted::ItemKnn(m) => m,
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Fitted::F64(m) => m.num_params(),
            Fitted::F32(m) => m.num_params(),
            Fitted::Pop(_) | Fitted::ItemKnn(_) => 0,
        }
    }
}

impl From<Model<f64>> for Fitted {
    fn from(m: Model<f64>) -> Self {
        Fitted::F64(m)
    }
}

impl From<Model<f32>> for Fitted {
    fn from(m: Model<f32>) -> Self {
        Fitted::F32(m)
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub kind: ModelKind,
    /// Training epoch the weights come from, if trained.
    pub epoch: Option<usize>,
    pub fitted: Fitted,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    dtype: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    tensors: Vec<TensorEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    n_items: Option<usize>,
}

fn model_payload<T: Real>(m: &Model<T>) -> (Vec<TensorEntry>, Vec<u8>) {
    let mut payload = Vec::new();
    let entries = m
        .store
        .iter()
        .map(|p| {
            payload.extend(T::to_le_bytes_vec(p.value.data()));
            TensorEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            }
        })
        .collect();
    (entries, payload)
}

fn load_model<T: Real>(h: &Header, reader: &mut PayloadReader, path: &Path) -> Result<Model<T>> {
    let bad = |message: String| Error::Format {
        path: path.display().to_string(),
        message,
    };
    let config = h.config.clone().ok_or_else(|| bad("network checkpoint without config".into()))?;
    let mut model = Model::<T>::new(config, 0)?;
    if h.tensors.len() != model.store.len() {
        return Err(bad(format!("{} tensors stored, model has {}", h.tensors.len(), model.store.len())));
    }
    for entry in &h.tensors {
        let id = model.store.find(&entry.name).ok_or_else(|| bad(format!("unknown tensor `{}`", entry.name)))?;
        let value = model.store.value_mut(id);
        if value.shape() != entry.shape.as_slice() {
            return Err(bad(format!("tensor `{}` has shape {:?}, expected {:?}", entry.name, entry.shape, value.shape())));
        }
        let bytes = reader.take(value.len() * std::mem::size_of::<T>())?;
        value.data_mut().copy_from_slice(&T::from_le_bytes_slice(bytes));
    }
    Ok(model)
}

impl Checkpoint {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header = Header {
            kind: self.kind,
            epoch: self.epoch,
            dtype: None,
            config: None,
            tensors: Vec::new(),
            n_items: None,
        };
        let mut payload = Vec::new();
        match &self.fitted {
            Fitted::F64(m) => {
                (header.tensors, payload) = model_payload(m);
                header.dtype = Some(f64::DTYPE.into());
                header.config = Some(m.config.clone());
            }
            Fitted::F32(m) => {
                (header.tensors, payload) = model_payload(m);
                header.dtype = Some(f32::DTYPE.into());
                header.config = Some(m.config.clone());
            }
            Fitted::Pop(m) => {
                header.n_items = Some(m.counts.len());
                m.counts.iter().for_each(|c| payload.extend(c.to_le_bytes()));
            }
            Fitted::ItemKnn(m) => {
                header.n_items = Some(m.freq.len());
                m.freq.iter().for_each(|c| payload.extend(c.to_le_bytes()));
                for row in &m.neighbours {
                    payload.extend((row.len() as u64).to_le_bytes());
                    for &(j, c) in row {
                        payload.extend((j as u64).to_le_bytes());
                        payload.extend(c.to_le_bytes());
                    }
                }
            }
        }
        write_container(path.as_ref(), MAGIC, &header, &payload)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (h, payload): (Header, Vec<u8>) = read_container(path, MAGIC)?;
        let mut reader = PayloadReader { bytes: &payload, path };
        let bad = |message: &str| Error::Format {
            path: path.display().to_string(),
            message: message.into(),
        };
        let fitted = match h.kind {
            ModelKind::Pop | ModelKind::ItemKnn => {
                let n = h.n_items.ok_or_else(|| bad("baseline checkpoint without n_items"))?;
                let counts = (0..n).map(|_| reader.u64()).collect::<Result<Vec<_>>>()?;
                if h.kind == ModelKind::Pop {
                    Fitted::Pop(PopModel::from_counts(counts))
                } else {
                    let mut neighbours = Vec::with_capacity(n);
                    for _ in 0..n {
                        let len = reader.u64()? as usize;
                        let row = (0..len)
                            .map(|_| {
                                let j = reader.u64()? as usize;
                                if j >= n {
                                    return Err(Error::Vocabulary { index: j, size: n });
                                }
                                Ok((j, reader.u64()?))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        neighbours.push(row);
                    }
                    Fitted::ItemKnn(ItemKnnModel {
                        pop: PopModel::from_counts(counts.clone()),
                        freq: counts,
                        neighbours,
                    })
                }
            }
            _ => match h.dtype.as_deref() {
                Some("f64") => Fitted::F64(load_model(&h, &mut reader, path)?),
                Some("f32") => Fitted::F32(load_model(&h, &mut reader, path)?),
                other => return Err(bad(&format!("unsupported dtype {other:?}"))),
            },
        };
        reader.finish()?;
        Ok(Checkpoint {
            kind: h.kind,
            epoch: h.epoch,
            fitted,
        })
    }
}
