//! Model assembly, training and persistence.

mod checkpoint;
mod config;
mod gcn_model;
mod network;
mod train;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint, CHECKPOINT_HEADER,
};
pub use config::{ModelConfig, Stacking, CONFIG_KEYS};
pub use gcn_model::{GcnConfig, GcnModel, GcnPass};
pub use network::{init_model, param_count, ForwardPass, Layer, LayerForward, Model};
pub use train::{
    accuracy, argmax, evaluate, fit, layer_report, train, train_traced, Classifier, EpochRecord,
    FitOptions, PhatSample, TrainReport, MAX_TRACED_NODES,
};
