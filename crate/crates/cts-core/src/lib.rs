//! Correlation tensor spectra for temporal transaction networks.
//!
//! The pipeline: parse a transaction ledger into weekly weighted directed
//! networks, embed each week with node2vec, form windowed correlation
//! tensors between the embedding components of nodes active in every week,
//! decompose them with a two-stage SVD, and compare the resulting spectra
//! against reshuffled and Gaussian random-matrix nulls, price series, and
//! planted ground truth.
//!
//! All randomness derives from explicit seeds; with deterministic training
//! enabled (the default) every stage is byte-stable across runs and thread
//! counts.

pub mod analysis;
pub mod constants;
pub mod embed;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod nullmodels;
pub mod rng;
pub mod special;
pub mod spectra;
pub mod synth;
pub mod tensor;

pub use analysis::{
    driver_set, flow_stats, lagged_correlation, pearson, rolling_correlation, DriverReport,
    LagCorrelation, RollingCorrelation,
};
pub use embed::{embed_ensemble, embed_series, embed_week, EmbeddingSeries, Node2VecParams};
pub use error::{CoreError, Result};
pub use ingest::{
    load_prices, load_transactions, network_stats, regular_nodes, weekly_mean_price, PriceSeries,
    RegularNodeIndex, TransactionRecord, WeeklyNetwork,
};
pub use nullmodels::{
    gaussian_double_svd, quarter_circle_ks, sample_gaussian_tensor, AnalyticSpectrum,
    GaussianTensor, GaussianTensorSpec,
};
pub use spectra::{
    double_svd, double_svd_dense, largest_singular_vectors, slice_svd, spectra_timeseries,
    SingularVectorField, SliceSvd, SpectraRow, TensorSpectrum,
};
pub use synth::{GroundTruth, SynthOutput, SynthSpec};
pub use tensor::{correlation_tensor, reshuffled_tensor, CorrelationTensor, WindowSpec};
