//! The learned detector: dataset sampling and augmentation, preprocessing,
//! the convolutional network with class and position heads, training,
//! inference and activation maps.

mod data;
mod infer;
mod model;
mod sampler;
mod train;

pub use data::{augment, augment_with, preprocess, resample, AugmentDraws, STD_FLOOR};
pub use infer::{activation_layers, activation_map, infer, infer_with};
pub use model::{Cnn, CnnConfig, CnnOutput, ModelWeights, FORMAT_VERSION};
pub use sampler::{
    sample_dataset, sample_item, sample_scenario, DatasetItem, SamplerConfig, DEFAULT_TRACE_COUNT,
};
pub use train::{
    argmax, is_validation, log_to_csv, train, train_with_progress, EpochLog, LabelledTrace,
    TrainOutcome,
};
