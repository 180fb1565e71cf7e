//! Model/optimizer persistence.
//!
//! Container layout: 8-byte magic, little-endian u64 header length, JSON
//! header, then every tensor concatenated as little-endian f32. Offsets in
//! the header are in f32 elements from the start of the payload. Loading a
//! saved container restores parameters bit-identically.

use crate::error::{Error, Result};
use crate::nn::ParamBag;
use crate::tensor::{Real, Tensor};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 8] = b"LFSRCKP1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the payload, in f32 elements.
    pub offset: u64,
}

/// Training progress needed for bit-exact resume: the RNG is restored from
/// its seed plus stream position, the optimizer from its saved moments and
/// step count.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub step: u64,
    pub rng_seed: u64,
    /// ChaCha word position, split as (low, high) halves of the u128.
    pub rng_word_pos: (u64, u64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    /// Which model family the parameters belong to (e.g. "ato", "reg").
    pub kind: String,
    pub config: serde_json::Value,
    pub train: Option<TrainState>,
    pub tensors: Vec<TensorEntry>,
}

/// Everything read back from a container: header plus named f32 tensors.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub tensors: HashMap<String, Tensor<f32>>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Result<&Tensor<f32>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Other(format!("checkpoint is missing tensor {name:?}")))
    }

    /// Copy named tensors into a parameter bag, casting to its sample type.
    /// Every bag parameter must be present with the exact shape.
    pub fn load_into<T: Real, B: ParamBag<T>>(&self, bag: &mut B) -> Result<()> {
        for (name, param) in bag.params_mut() {
            let stored = self
                .tensors
                .get(&name)
                .ok_or_else(|| Error::Other(format!("checkpoint is missing tensor {name:?}")))?;
            if stored.shape() != param.shape() {
                return Err(Error::TensorShapeDisagreement {
                    name,
                    header: stored.shape().to_vec(),
                    model: param.shape().to_vec(),
                });
            }
            for (dst, src) in param.data_mut().iter_mut().zip(stored.data()) {
                *dst = T::from_f64(*src as f64);
            }
        }
        Ok(())
    }
}

/// Serialize a container. `tensors` carries model parameters and any
/// optimizer state, in a caller-chosen stable order.
pub fn save_checkpoint<T: Real>(
    path: &Path,
    kind: &str,
    config: serde_json::Value,
    train: Option<TrainState>,
    tensors: &[(String, &Tensor<T>)],
) -> Result<()> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, t) in tensors {
        entries.push(TensorEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.numel() as u64;
    }
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        kind: kind.into(),
        config,
        train,
        tensors: entries,
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::json("encoding checkpoint header", e))?;

    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        }
    }
    let ctx = || format!("writing {}", path.display());
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = std::io::BufWriter::new(&mut file);
    w.write_all(MAGIC).map_err(|e| Error::io(ctx(), e))?;
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())
        .map_err(|e| Error::io(ctx(), e))?;
    w.write_all(&header_bytes).map_err(|e| Error::io(ctx(), e))?;
    for (_, t) in tensors {
        let mut buf = Vec::with_capacity(t.numel() * 4);
        for v in t.data() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(|e| Error::io(ctx(), e))?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ctx = || format!("reading {}", path.display());
    let bytes = std::fs::read(path).map_err(|e| Error::io(ctx(), e))?;
    let need = |n: u64| -> Result<()> {
        if (bytes.len() as u64) < n {
            return Err(Error::ContainerTruncated {
                needed: n,
                actual: bytes.len() as u64,
            });
        }
        Ok(())
    };
    need(16)?;
    if &bytes[..8] != MAGIC {
        return Err(Error::Other(format!(
            "{} is not a checkpoint container",
            path.display()
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    need(16 + header_len)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&bytes[16..16 + header_len as usize])
            .map_err(|e| Error::json("decoding checkpoint header", e))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::BadVersion {
            got: header.format_version,
            supported: FORMAT_VERSION,
        });
    }
    let payload = &bytes[16 + header_len as usize..];
    let payload_elems = (payload.len() / 4) as u64;

    let mut tensors = HashMap::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let numel: usize = entry.shape.iter().product();
        if numel == 0 || entry.shape.is_empty() {
            return Err(Error::TensorShapeDisagreement {
                name: entry.name.clone(),
                header: entry.shape.clone(),
                model: vec![],
            });
        }
        let end = entry.offset + numel as u64;
        if end > payload_elems {
            return Err(Error::ContainerTruncated {
                needed: 16 + header_len + end * 4,
                actual: bytes.len() as u64,
            });
        }
        let start = entry.offset as usize * 4;
        let mut data = Vec::with_capacity(numel);
        for i in 0..numel {
            let b = &payload[start + i * 4..start + i * 4 + 4];
            data.push(f32::from_le_bytes(b.try_into().unwrap()));
        }
        tensors.insert(entry.name.clone(), Tensor::from_vec(&entry.shape, data));
    }
    Ok(Checkpoint { header, tensors })
}

fn expect_kind(header: &CheckpointHeader, want: &str) -> Result<()> {
    if header.kind != want {
        return Err(Error::ConfigMismatch {
            field: "kind".into(),
            model: header.kind.clone(),
            input: want.into(),
        });
    }
    Ok(())
}

fn model_config<C: serde::de::DeserializeOwned>(header: &CheckpointHeader) -> Result<C> {
    let value = header
        .config
        .get("model")
        .ok_or_else(|| Error::Other("checkpoint header has no model config".into()))?;
    serde_json::from_value(value.clone())
        .map_err(|e| Error::json("decoding model config from checkpoint", e))
}

/// Rebuild an All-to-One model from a trainer-written container.
pub fn load_ato_model(path: &Path) -> Result<(crate::ato::AtoModel<f32>, Checkpoint)> {
    let ckpt = load_checkpoint(path)?;
    expect_kind(&ckpt.header, "ato")?;
    let config: crate::ato::AtoConfig = model_config(&ckpt.header)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut model = crate::ato::AtoModel::<f32>::init(config, &mut rng)?;
    ckpt.load_into(&mut model)?;
    Ok((model, ckpt))
}

/// Rebuild a structural-consistency model from a trainer-written container.
pub fn load_reg_model(path: &Path) -> Result<(crate::regnet::RegModel<f32>, Checkpoint)> {
    let ckpt = load_checkpoint(path)?;
    expect_kind(&ckpt.header, "reg")?;
    let config: crate::regnet::RegConfig = model_config(&ckpt.header)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut model = crate::regnet::RegModel::<f32>::init(config, &mut rng)?;
    ckpt.load_into(&mut model)?;
    Ok((model, ckpt))
}

/// Save a parameter bag (model only, no optimizer state).
pub fn save_model<T: Real, B: ParamBag<T>>(
    path: &Path,
    kind: &str,
    config: serde_json::Value,
    bag: &B,
) -> Result<()> {
    let params = bag.params();
    let named: Vec<(String, &Tensor<T>)> = params;
    save_checkpoint(path, kind, config, None, &named)
}
