//! Minimal layered network stack: explicit forward/backward per layer,
//! deterministic for a fixed seed and any worker count.

use std::sync::Once;

static MALLOC_TUNE: Once = Once::new();

/// Raise glibc's mmap/trim thresholds so the multi-megabyte per-step
/// buffers (im2col columns, attention weights) are recycled from free
/// lists instead of being unmapped and page-faulted back in every call.
pub fn tune_allocator() {
    MALLOC_TUNE.call_once(|| unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 64 * 1024 * 1024);
        libc::mallopt(-1 /* M_TRIM_THRESHOLD */, 512 * 1024 * 1024);
    });
}

pub mod act;
pub mod adam;
pub mod attention;
pub mod conv;
pub mod gradcheck;
pub mod init;
pub mod linear;
pub mod norm;
pub mod param;
pub mod rng;
pub mod scalar;
pub mod upsample;

pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use attention::Attention;
pub use conv::Conv2d;
pub use linear::Linear;
pub use norm::{GroupNorm, LayerNorm};
pub use param::{count_params, param_checksum, zero_grads, Module, Param};
pub use rng::{derive_rng, derive_seed, rng_from_seed, Rng};
pub use scalar::{Dtype, Scalar};
