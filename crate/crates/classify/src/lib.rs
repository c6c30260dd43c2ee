//! Classification of bosonic states from phase-space images.
//!
//! A convolutional network maps a unit-max normalized Husimi image to one of
//! the state families. The crate covers dataset synthesis, training with
//! augmentation, evaluation metrics and Grad-CAM attribution maps.

pub mod dataset;
pub mod gradcam;
pub mod metrics;
pub mod model;
pub mod train;

pub use dataset::{generate_dataset, Dataset, DatasetConfig, LabeledSample, CLASS_NAMES};
pub use gradcam::{grad_cam, GradCam};
pub use metrics::{evaluate, roc_auc, Metrics};
pub use model::{build_classifier, classifier_specs, predict, ClassifierConfig};
pub use train::{train_classifier, EpochStats, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}: {msg}")]
    Diverged { epoch: usize, msg: String },
    #[error(transparent)]
    Nn(#[from] qst_nn::NnError),
    #[error(transparent)]
    Core(#[from] qst_core::QstError),
}

pub type Result<T> = std::result::Result<T, ClassifyError>;
