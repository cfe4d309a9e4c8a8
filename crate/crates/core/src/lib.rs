//! Multilinear (HOSVD) models of structured GAN latent datasets.
//!
//! A dataset of latent codes indexed by person, expression, expression
//! intensity and rotation is arranged as an order-5 tensor, mean-centered
//! and factorized with the higher-order SVD. The fitted model reconstructs
//! latents from per-axis parameters, recovers parameters for novel latents
//! (as four vectors or as one full-rank parameter tensor), and yields global
//! edit directions for the six basic emotions and for yaw.

pub mod cli;
pub mod container;
pub mod dataset;
pub mod decomposition;
pub mod directions;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod recovery;
pub mod tensor;

pub use container::{read_container, write_container, Precision, Record, RecordKind};
pub use dataset::{
    generate_synthetic, load_bu3dfe_layout, AxisLabels, LatentBatch, LatentDataset, LatentLayout,
    SyntheticSpec, SyntheticTruth,
};
pub use decomposition::{hosvd, mean_center, HosvdResult};
pub use directions::{apply_edit, DirectionKind, EditRequest, SemanticDirection};
pub use error::{Error, ErrorCategory, Result};
pub use model::{TensorModel, TruncatedModel};
pub use pipeline::{fit, Fit};
pub use recovery::{ParamForm, Params, RecoveredParams, Recoverer, RecoveryConfig};
pub use tensor::{DenseTensor, Matrix};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
