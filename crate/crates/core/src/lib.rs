//! Analysis and synthesis toolkit for multiplexed image stacks: pairwise
//! channel similarity, similarity-guided channel clustering and subset
//! selection, and small conditional models that reconstruct held-out
//! channels from a selected subset.
//!
//! All numeric kernels are generic over [`Scalar`] (`f32` or `f64`).
//! Pixel containers on disk are always `f32`; analysis defaults to `f64`
//! via the aliases below.

pub mod cluster;
pub mod error;
pub mod metrics;
pub mod predictor;
pub mod rng;
pub mod scalar;
pub mod ssim;
pub mod stacks;

pub use cluster::{ChannelSelection, ClusterAssignment, Dendrogram, DistanceMatrix, Linkage};
pub use error::{Error, Result};
pub use metrics::{ExperimentParams, ExperimentTable, LossReport, RegressionFit};
pub use predictor::{LinearModel, Mlp, PatchDataset, PatchGeometry, TrainConfig, TrainedModel};
pub use scalar::Scalar;
pub use ssim::{SimilarityKind, SimilarityMatrix, SsimConstants, SsimExponents, WindowSpec};
pub use stacks::{ChannelStack, SplitResult, SyntheticSpec};

/// Scalar used for pixel storage and container I/O.
pub type StorageScalar = f32;
/// Scalar the analysis pipelines run in by default.
pub type AnalysisScalar = f64;

/// Stack as stored on disk.
pub type StorageStack = ChannelStack<StorageScalar>;
/// Stack in analysis precision.
pub type AnalysisStack = ChannelStack<AnalysisScalar>;
