//! Grassmann averaging for dimensionality reduction: a streaming principal
//! subspace estimator, a learnable averaging-and-projection layer, an
//! eigendecomposition oracle and a small autoencoder built on the layer.

mod autoencoder;
mod avg_layer;
mod pca;
mod streaming;

pub use autoencoder::{
    autoencoder_train, pca_reconstruction_error, AutoencoderConfig, AutoencoderOutcome, AutoencoderSpec, Bottleneck,
};
pub use avg_layer::{
    align_basis, canonical_basis, center_rows, grassmann_avg_layer, weighted_block_average, AvgLayerOutput,
    BlockAverage, GrassmannAvgLayer, LayerFit,
};
pub use pca::{column_means, pca_oracle, pca_with_spectrum, sample_covariance, MIN_EIGEN_GAP};
pub use streaming::{stream_principal_subspace, stream_rows, StreamingSubspace, SubspaceEstimate};
