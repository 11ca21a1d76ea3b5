//! Checkpoint format: a JSON manifest (layer names and extents, model
//! config, seed, epoch, optimizer hyperparameters) followed by the raw
//! little-endian IEEE-754 payload of the parameter vector and, when
//! present, the optimizer moment vectors. Round-trips are bit-exact.

use crate::harness::config::HarnessError;
use crate::model::ModelConfig;
use crate::optim::AdamState;
use crate::params::{LayerEntry, SeparatorParams};
use crate::real::Real;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"GRDSTEER";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    model: ModelConfig,
    layers: Vec<(String, usize)>,
    seed: u64,
    epoch: usize,
    has_optimizer: bool,
    adam: Option<AdamMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdamMeta {
    step_count: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    clip_norm: f64,
}

#[derive(Debug)]
pub struct Checkpoint<T: Real> {
    pub model: ModelConfig,
    pub params: SeparatorParams<T>,
    pub adam: Option<AdamState<T>>,
    pub seed: u64,
    pub epoch: usize,
}

pub fn save_checkpoint<T: Real>(
    path: &Path,
    model: &ModelConfig,
    params: &SeparatorParams<T>,
    adam: Option<&AdamState<T>>,
    seed: u64,
    epoch: usize,
) -> Result<(), HarnessError> {
    let manifest = Manifest {
        model: model.clone(),
        layers: params
            .manifest
            .iter()
            .map(|e| (e.name.clone(), e.extent))
            .collect(),
        seed,
        epoch,
        has_optimizer: adam.is_some(),
        adam: adam.map(|a| AdamMeta {
            step_count: a.step_count,
            lr: a.lr.as_f64(),
            beta1: a.beta1.as_f64(),
            beta2: a.beta2.as_f64(),
            eps: a.eps.as_f64(),
            clip_norm: a.clip_norm.as_f64(),
        }),
    };
    let json = serde_json::to_vec(&manifest)
        .map_err(|e| HarnessError::Config(format!("checkpoint manifest: {e}")))?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(json.len() as u64).to_le_bytes())?;
    file.write_all(&json)?;
    write_payload(&mut file, &params.values)?;
    if let Some(a) = adam {
        write_payload(&mut file, &a.m)?;
        write_payload(&mut file, &a.v)?;
    }
    Ok(())
}

fn write_payload<T: Real>(file: &mut std::fs::File, values: &[T]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    file.write_all(&buf)
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>, HarnessError> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HarnessError::Config(format!(
            "{}: not a gradsteer checkpoint",
            path.display()
        )));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)?;
    let json_len = u64::from_le_bytes(len_bytes) as usize;
    let mut json = vec![0u8; json_len];
    file.read_exact(&mut json)?;
    let manifest: Manifest = serde_json::from_slice(&json)
        .map_err(|e| HarnessError::Config(format!("checkpoint manifest: {e}")))?;

    let total: usize = manifest.layers.iter().map(|(_, n)| n).sum();
    let values = read_payload::<T>(&mut file, total)?;
    let mut offset = 0;
    let layer_manifest = manifest
        .layers
        .iter()
        .map(|(name, extent)| {
            let e = LayerEntry { name: name.clone(), offset, extent: *extent };
            offset += extent;
            e
        })
        .collect();
    let params = SeparatorParams { values, manifest: layer_manifest };

    let adam = if manifest.has_optimizer {
        let meta = manifest
            .adam
            .ok_or_else(|| HarnessError::Config("optimizer payload without metadata".into()))?;
        let m = read_payload::<T>(&mut file, total)?;
        let v = read_payload::<T>(&mut file, total)?;
        Some(AdamState {
            m,
            v,
            step_count: meta.step_count,
            lr: T::from_f64c(meta.lr),
            beta1: T::from_f64c(meta.beta1),
            beta2: T::from_f64c(meta.beta2),
            eps: T::from_f64c(meta.eps),
            clip_norm: T::from_f64c(meta.clip_norm),
        })
    } else {
        None
    };

    Ok(Checkpoint {
        model: manifest.model,
        params,
        adam,
        seed: manifest.seed,
        epoch: manifest.epoch,
    })
}

fn read_payload<T: Real>(file: &mut std::fs::File, n: usize) -> Result<Vec<T>, HarnessError> {
    let mut buf = vec![0u8; n * 8];
    file.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| T::from_f64c(f64::from_le_bytes(c.try_into().unwrap())))
        .collect())
}
