//! Texture image retrieval with multiscale local extrema descriptors.
//!
//! Each image is reduced to its strict local maxima and minima on the
//! grayscale view. Overlapping blocks are summarized by 20-dimensional
//! vectors of color, spatial and gradient statistics of those extrema, and the
//! block vectors are embedded into one 20x20 covariance matrix per scale.
//! Images are compared with the affine-invariant Riemannian distance between
//! covariance matrices, summed over scales.
//!
//! The pipeline stages live in their own modules:
//!
//! - [`imaging`]: decoding, grayscale, Sobel gradient magnitude, bicubic resampling
//! - [`extrema`]: sliding-window local extrema detection
//! - [`descriptor`]: block grid, per-block vectors, covariance embedding
//! - [`metric`]: Riemannian distance on SPD matrices
//! - [`retrieval`]: dataset scanning, index building and persistence, ARR evaluation

pub mod cli;
pub mod descriptor;
mod error;
pub mod extrema;
pub mod imaging;
pub mod metric;
pub mod retrieval;

pub use descriptor::{
    compute_descriptor, embed_covariance, extract_sled, partition_blocks, Block, BlockGrid,
    CovarianceDescriptor, MultiscaleDescriptor, PipelineConfig, SledVector, SLED_DIM,
};
pub use error::{Error, Result};
pub use extrema::{detect_local_extrema, ExtremaSet};
pub use imaging::{
    load_image, resample_bicubic, sobel_gradient_magnitude, to_grayscale, GradientImage,
    GrayImage, RgbImage,
};
pub use metric::{multiscale_distance, riemannian_distance, SpdMatrix};
pub use retrieval::{
    build_index, evaluate_arr, load_index, query, save_index, scan_dataset, ArrReport,
    DatasetManifest, DescriptorIndex, IndexEntry, Labeling, RankedResult,
};
