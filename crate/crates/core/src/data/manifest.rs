//! JSON-lines manifests. Paths are stored relative to the manifest file.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::warp::WarpParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One prepared training/evaluation sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub lr_thermal_path: String,
    pub rgb_ref_path: String,
    pub gt_thermal_path: String,
    pub warp: WarpParams,
    pub split: Split,
    pub seed: u64,
}

/// One raw HR capture pair, before degradation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    pub rgb_path: String,
    pub thermal_path: String,
    pub split: Split,
    pub seed: u64,
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

pub fn resolve(manifest_path: &Path, rel: &str) -> PathBuf {
    manifest_dir(manifest_path).join(rel)
}

/// Write records as JSON lines and validate that every referenced file
/// exists. The failed ids are reported together.
pub fn build_manifest(records: &[PairRecord], out_path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut missing = Vec::new();
    for r in records {
        for rel in [&r.lr_thermal_path, &r.rgb_ref_path, &r.gt_thermal_path] {
            if !resolve(out_path, rel).is_file() {
                missing.push(r.id.clone());
                break;
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::ManifestValidation { ids: missing });
    }
    let mut f = fs::File::create(out_path).map_err(|e| Error::io(out_path.display().to_string(), e))?;
    for r in records {
        let line = serde_json::to_string(r)?;
        writeln!(f, "{line}").map_err(|e| Error::io(out_path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Vec<PairRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<PairRecord>(line)?);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut missing = Vec::new();
    for r in &records {
        for rel in [&r.lr_thermal_path, &r.rgb_ref_path, &r.gt_thermal_path] {
            if !resolve(path, rel).is_file() {
                missing.push(r.id.clone());
                break;
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::ManifestValidation { ids: missing });
    }
    Ok(records)
}

pub fn build_source_manifest(records: &[SourceRecord], out_path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut f = fs::File::create(out_path).map_err(|e| Error::io(out_path.display().to_string(), e))?;
    for r in records {
        let line = serde_json::to_string(r)?;
        writeln!(f, "{line}").map_err(|e| Error::io(out_path.display().to_string(), e))?;
    }
    Ok(())
}

pub fn load_source_manifest(path: &Path) -> Result<Vec<SourceRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<SourceRecord>(line)?);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut missing = Vec::new();
    for r in &records {
        for rel in [&r.rgb_path, &r.thermal_path] {
            if !resolve(path, rel).is_file() {
                missing.push(r.id.clone());
                break;
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::ManifestValidation { ids: missing });
    }
    Ok(records)
}
