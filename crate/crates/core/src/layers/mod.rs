//! wFM network layers: learnable temporal wFM "convolutions", covariance
//! descriptors, the isometry-invariant distance layer, a dense softmax head,
//! finite-difference gradients and SGD training of the SPD-TCN.

mod descriptor;
mod finite_diff;
mod head;
mod invariant;
mod nonexpansive;
pub mod tcn;
mod temporal;
mod weights;

pub use descriptor::{covariance_descriptor, DEFAULT_COVARIANCE_EPS};
pub use finite_diff::{finite_diff_grad, finite_diff_partials, DEFAULT_FD_STEP};
pub use head::{
    cross_entropy, fc_softmax, head_gradient, loss_total, softmax, ClassifierHead, HeadGradient, PROB_FLOOR,
};
pub use invariant::{invariant_final_layer, invariant_final_layer_from, InvariantOutput};
pub use nonexpansive::{nonexpansive_check, tile, ContractionReport, TRIVIAL_MARGIN};
pub use tcn::{
    evaluate, train_classifier, ForwardTrace, LabeledSequence, Sgd, SgdConfig, SpdTcn, SpdTcnSpec, TrainOutcome,
};
pub use temporal::{temporal_channel_forward, temporal_wfm_forward, TemporalWfmSpec};
pub use weights::{logit, sigmoid, weight_map, weight_penalty, WfmLayerParams};
