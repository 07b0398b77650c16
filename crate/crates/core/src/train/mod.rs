//! Mini-batch SGD on coefficient patches.

mod config;
mod data;
mod log;
mod schedule;
mod trainer;

pub use config::TrainConfig;
pub use data::{
    augment, draw_transform, sample_patch_batch, transform_volume, EncodedSubset, PairedSlices, PatchBatch, PatchDraw,
};
pub use log::{LogRecord, TrainLog};
pub use schedule::{clip_gradients, clip_values, lr_at, lr_at_progress};
pub use trainer::{load_checkpoint, mean_report, TrainState, Trainer};
