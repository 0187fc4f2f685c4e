//! The conditional DDPM around the denoiser: variance schedule, forward
//! noising, the training objective and loop, ancestral sampling, and the
//! checkpoint container.

mod checkpoint;
mod loss;
mod sample;
mod schedule;
mod train;

pub use checkpoint::{Checkpoint, ReturnScale};
pub use loss::{
    denoising_loss, denoising_loss_with, draw_assignments, loss_for_predictions, q_sample,
    NoiseAssignment,
};
pub use sample::{ancestral_sample, SampleSet};
pub use schedule::{build_schedule, NoiseSchedule};
pub use train::{train, TrainConfig, TrainReport};
