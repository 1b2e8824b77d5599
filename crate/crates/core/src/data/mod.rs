//! Paired-dataset construction: degradation, reference preparation,
//! misalignment warps, synthetic scenes, and manifest I/O.
//!
//! Every operation is pure given (inputs, seed); per-record randomness is
//! derived as hash(global_seed, record_id), so records can be processed in
//! any order, in parallel, with identical results.

pub mod degrade;
pub mod io;
pub mod manifest;
pub mod toyscene;
pub mod warp;

pub use degrade::{degrade_thermal, prepare_gt_thermal, prepare_reference, DegradeConfig};
pub use io::{load_rgb_png, load_thermal_png, save_rgb_png, save_thermal_png};
pub use manifest::{
    build_manifest, build_source_manifest, load_manifest, load_source_manifest, PairRecord,
    Split, SourceRecord,
};
pub use toyscene::generate_toy_scene;
pub use warp::{
    apply_warp, apply_warp_plane, compose_warps, invert_warp, sample_warp, WarpComponents,
    WarpParams, WarpRanges,
};
