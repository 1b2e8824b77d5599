//! Calibration-free RGB-guided thermal super-resolution, desk scale.
//!
//! The crate provides the full pipeline: paired-data generation and
//! degradation with misalignment augmentation, a small latent codec with
//! zero-initialized encoder skips, a one-step denoising UNet whose
//! self-attention runs over the fused RGB+thermal token sequence, LoRA
//! adaptation, image-quality metrics, and the training/evaluation harness.

pub mod data;
pub mod error;
pub mod imgproc;
pub mod lora;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};
