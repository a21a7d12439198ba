//! 1D convolutional autoencoder: configuration, training, inference, and a
//! versioned on-disk format. The encoder half is what every explainer and
//! the latent outlier detector consume.

pub mod config;
pub mod model;
pub mod search;
pub mod train;

pub use config::{AEConfig, ConvBlock, OptimizerKind, TrainSettings};
pub use model::{
    encoder_only, load_model, save_model, AEModel, NormParams, Normalization, MODEL_FORMAT_VERSION,
    MODEL_MAGIC,
};
pub use search::{random_search, SearchEntry, SearchResult};
pub use train::{stratified_split, train, Split, TrainReport};
