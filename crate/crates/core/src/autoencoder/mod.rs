//! Complete-shape autoencoder producing 128-D global feature vectors, its
//! training loop, and offline GFV dataset export.

mod gfv;
mod model;
mod train;

pub use gfv::{export_gfv_dataset, Completion, GfvDataset, GfvRecord};
pub use model::{stack, AeArchitecture, AeModel, EncoderTape, Gfv, LATENT_DIM};
pub use train::{smooth, train_ae, AeTrainConfig, AeTrainOutcome};
