//! Binary checkpoint container.
//!
//! Layout: magic "3MTI", format-version u32 LE, header-length u64 LE, JSON
//! header, raw little-endian parameter blob. One container holds one or
//! more component sections ("codec", "unet", "lora", ...), each with its
//! own config snapshot and tensor index.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::param::Module;
use crate::nn::scalar::{Dtype, Scalar};

const MAGIC: &[u8; 4] = b"3MTI";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorMeta {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
    pub len_bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentSection {
    pub tag: String,
    pub config: serde_json::Value,
    pub tensors: Vec<TensorMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub seed: u64,
    pub step: u64,
    pub config_hash: String,
    pub components: Vec<ComponentSection>,
}

pub struct CheckpointWriter {
    header: CheckpointHeader,
    blob: Vec<u8>,
}

impl CheckpointWriter {
    pub fn new(seed: u64, step: u64, config_hash: &str) -> Self {
        CheckpointWriter {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                seed,
                step,
                config_hash: config_hash.to_string(),
                components: Vec::new(),
            },
            blob: Vec::new(),
        }
    }

    /// Add every parameter of `model` whose name passes `filter` under the
    /// given component tag.
    pub fn add_component<S: Scalar, M: Module<S> + ?Sized>(
        &mut self,
        tag: &str,
        config: serde_json::Value,
        model: &M,
        filter: impl Fn(&str) -> bool,
    ) {
        let mut tensors = Vec::new();
        let blob = &mut self.blob;
        model.visit_params(&mut |p| {
            if !filter(&p.name) {
                return;
            }
            let offset = blob.len() as u64;
            for v in p.value.iter() {
                v.write_le(blob);
            }
            tensors.push(TensorMeta {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                dtype: S::DTYPE.name().to_string(),
                offset,
                len_bytes: (p.len() * S::DTYPE.size_bytes()) as u64,
            });
        });
        self.header.components.push(ComponentSection {
            tag: tag.to_string(),
            config,
            tensors,
        });
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let header_json = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(16 + header_json.len() + self.blob.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_json);
        out.extend_from_slice(&self.blob);
        fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

pub struct Checkpoint {
    pub header: CheckpointHeader,
    blob: Vec<u8>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        if data.len() < 16 || &data[..4] != MAGIC {
            return Err(Error::Checkpoint(format!(
                "{} is not a checkpoint container (bad magic)",
                path.display()
            )));
        }
        let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let header_len = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
        if data.len() < 16 + header_len {
            return Err(Error::Checkpoint("truncated header".to_string()));
        }
        let header: CheckpointHeader = serde_json::from_slice(&data[16..16 + header_len])?;
        let blob = data[16 + header_len..].to_vec();
        Ok(Checkpoint { header, blob })
    }

    pub fn section(&self, tag: &str) -> Result<&ComponentSection> {
        self.header
            .components
            .iter()
            .find(|c| c.tag == tag)
            .ok_or_else(|| Error::Checkpoint(format!("no component '{tag}' in container")))
    }

    pub fn has_section(&self, tag: &str) -> bool {
        self.header.components.iter().any(|c| c.tag == tag)
    }

    pub fn component_config<T: for<'de> Deserialize<'de>>(&self, tag: &str) -> Result<T> {
        Ok(serde_json::from_value(self.section(tag)?.config.clone())?)
    }

    /// Copy a section's tensors into matching parameters of `model`.
    /// Every selected model parameter must be present with the exact shape.
    pub fn load_into<S: Scalar, M: Module<S> + ?Sized>(
        &self,
        tag: &str,
        model: &mut M,
        filter: impl Fn(&str) -> bool,
    ) -> Result<()> {
        let section = self.section(tag)?;
        let index: std::collections::HashMap<&str, &TensorMeta> =
            section.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        let mut err: Option<Error> = None;
        let blob = &self.blob;
        model.visit_params_mut(&mut |p| {
            if err.is_some() || !filter(&p.name) {
                return;
            }
            let Some(meta) = index.get(p.name.as_str()) else {
                err = Some(Error::ConfigMismatch(format!(
                    "parameter {} missing from component '{tag}'",
                    p.name
                )));
                return;
            };
            if meta.shape != p.value.shape() {
                err = Some(Error::ConfigMismatch(format!(
                    "parameter {}: checkpoint shape {:?} vs model shape {:?}",
                    p.name,
                    meta.shape,
                    p.value.shape()
                )));
                return;
            }
            if meta.dtype != S::DTYPE.name() {
                err = Some(Error::ConfigMismatch(format!(
                    "parameter {}: dtype {} vs model {}",
                    p.name,
                    meta.dtype,
                    S::DTYPE.name()
                )));
                return;
            }
            let start = meta.offset as usize;
            let end = start + meta.len_bytes as usize;
            if end > blob.len() {
                err = Some(Error::Checkpoint(format!("tensor {} extends past blob", p.name)));
                return;
            }
            let bytes = &blob[start..end];
            let step = S::DTYPE.size_bytes();
            for (i, v) in p.value.iter_mut().enumerate() {
                *v = S::read_le(&bytes[i * step..]);
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}
