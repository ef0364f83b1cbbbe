//! Sun point tracker: synthetic sky frames, the objectness and iterative
//! refinement losses, and an MLP that walks a point onto the sun.

mod loss;
mod model;
mod scene;
mod train;

pub use loss::{combined_loss, objectness_loss, refinement_loss, LossConfig};
pub use model::{extract_features, track_step, TrackEstimate, FEATURE_LEN, WINDOW};
pub use scene::{
    render_frame, sun_pixel, Blob, Cloud, Frame, PixelPoint, SceneConfig, SkyCamera, SkyScene,
};
pub use train::{
    evaluate_hit_rate, eval_frames, start_points, train_tracker, EvalCase, EvalKind,
    TrackerEpoch, TrainConfig,
};

use thiserror::Error;

use crate::neural::NeuralError;

#[derive(Debug, Error, PartialEq)]
pub enum TrackerError {
    #[error("step {step} out of range for a scene of {len} steps")]
    StepOutOfRange { step: usize, len: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid loss config: {0}")]
    LossConfig(String),
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("invalid training config: {0}")]
    TrainConfig(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}
