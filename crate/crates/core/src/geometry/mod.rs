//! Core types: image tracks, the time-shift model, the linearized
//! correspondence, two-view models and their residuals, and pose recovery
//! from a fundamental matrix.

mod model;
mod pose;
mod residual;
mod time;
mod trajectory;

use thiserror::Error;

pub(crate) use model::rank2_projection as model_rank2;
pub use model::{ModelKind, TwoViewModel};
pub use pose::{
    decompose_f, essential_from_pose, fundamental_from_calib, rotation_error, translation_error,
    triangulate, CameraCalib,
};
pub use residual::{
    epipolar_residual, homography_residual, sampson_distance, symmetric_transfer_error, ModelScorer,
};
pub use time::{linearize, linearize_tracks, time_map, LinearizedCorrespondence, TimeModel};
pub use trajectory::{ImageSample, Trajectory};

/// 2D image point in pixels.
pub type Point2 = nalgebra::Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("sample at frame {frame} is invalid: {reason}")]
    InvalidSample { frame: i64, reason: &'static str },
    #[error("trajectory frames must be strictly increasing (frame {frame} after {previous})")]
    NonIncreasingFrames { previous: i64, frame: i64 },
    #[error("invalid time model: {0}")]
    InvalidTimeModel(&'static str),
    #[error("interpolation distance must be non-zero")]
    ZeroInterpolationDistance,
    #[error("frame {frame} is missing or not contiguous with frame {anchor}")]
    MissingFrame { anchor: i64, frame: i64 },
    #[error("model matrix is zero or not finite")]
    InvalidModel,
    #[error("epipolar constraint has a vanishing gradient")]
    DegenerateGradient,
    #[error("homography is not invertible")]
    SingularModel,
    #[error("transferred point lies at infinity")]
    PointAtInfinity,
    #[error("no pose candidate places a strict majority of probes in front of both cameras")]
    CheiralityAmbiguous,
    #[error("at least one probe correspondence is required")]
    NoProbes,
    #[error("vector has zero length")]
    ZeroVector,
    #[error("invalid camera calibration: {0}")]
    InvalidCalibration(&'static str),
}
