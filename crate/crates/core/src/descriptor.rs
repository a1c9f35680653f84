//! Block partitioning, per-block local extrema vectors and covariance embedding.
//!
//! A block vector has 20 components, `[maxima half | minima half]`. Each half
//! is laid out as
//!
//! ```text
//! [mean R, mean G, mean B, var R, var G, var B, mean dist, var dist, mean grad, var grad]
//! ```
//!
//! where `dist` is the Euclidean distance of an extremum to the block center
//! and `grad` the Sobel gradient magnitude at the extremum. All variances are
//! population variances. A half whose extrema subset is empty is all zeros.

use nalgebra::DMatrix;

use crate::extrema::{detect_local_extrema, ExtremaSet, Point};
use crate::imaging::{resample_bicubic, sobel_gradient_magnitude, to_grayscale, GradientImage, RgbImage};
use crate::metric::SpdMatrix;
use crate::{Error, Result};

pub const SLED_DIM: usize = 20;
const HALF_DIM: usize = SLED_DIM / 2;

/// Parameters of the descriptor pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Extrema detection window (odd, >= 3).
    pub window: usize,
    /// Block side length in pixels.
    pub block_size: usize,
    /// Fraction of overlap between consecutive blocks, in `[0, 1)`.
    pub overlap: f64,
    /// Resampling factors, one covariance matrix each.
    pub scales: Vec<f64>,
    /// Diagonal regularization multiplier.
    pub epsilon_scale: f64,
    pub strict_extrema: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 3,
            block_size: 32,
            overlap: 0.5,
            scales: vec![2.0 / 3.0, 1.0, 1.5],
            epsilon_scale: 1e-6,
            strict_extrema: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.block_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "block size must be >= 2, got {}",
                self.block_size
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidParameter(format!(
                "overlap must be in [0, 1), got {}",
                self.overlap
            )));
        }
        if self.scales.is_empty() {
            return Err(Error::InvalidParameter("at least one scale is required".into()));
        }
        if let Some(s) = self.scales.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidParameter(format!("scales must be positive, got {s}")));
        }
        if !(self.epsilon_scale.is_finite() && self.epsilon_scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon scale must be non-negative, got {}",
                self.epsilon_scale
            )));
        }
        Ok(())
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Block {
    pub fn contains(&self, p: Point) -> bool {
        (self.x0..self.x1).contains(&p.x) && (self.y0..self.y1).contains(&p.y)
    }

    /// Geometric center of the (possibly clipped) block in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.x0 + self.x1 - 1) as f64 / 2.0,
            (self.y0 + self.y1 - 1) as f64 / 2.0,
        )
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    pub block_size: usize,
    pub step: usize,
    /// Row-major.
    pub blocks: Vec<Block>,
}

/// Distance between consecutive block origins.
pub fn block_step(block_size: usize, overlap: f64) -> usize {
    ((block_size as f64 * (1.0 - overlap)).round() as usize).max(1)
}

/// Overlapping block grid with origins at every multiple of the step below
/// each image dimension. Blocks reaching past the image are clipped.
pub fn partition_blocks(width: usize, height: usize, block_size: usize, overlap: f64) -> Result<BlockGrid> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("image dimensions must be positive".into()));
    }
    if block_size < 2 {
        return Err(Error::InvalidParameter(format!("block size must be >= 2, got {block_size}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap must be in [0, 1), got {overlap}")));
    }
    let step = block_step(block_size, overlap);
    let blocks = (0..height)
        .step_by(step)
        .flat_map(|y0| {
            (0..width).step_by(step).map(move |x0| Block {
                x0,
                y0,
                x1: (x0 + block_size).min(width),
                y1: (y0 + block_size).min(height),
            })
        })
        .collect();
    Ok(BlockGrid {
        block_size,
        step,
        blocks,
    })
}

/// Per-block feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SledVector(pub [f64; SLED_DIM]);

impl SledVector {
    pub fn maxima_half(&self) -> &[f64] {
        &self.0[..HALF_DIM]
    }

    pub fn minima_half(&self) -> &[f64] {
        &self.0[HALF_DIM..]
    }
}

fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

fn half_features(points: &[Point], block: &Block, rgb: &RgbImage, grad: &GradientImage) -> [f64; HALF_DIM] {
    let mut half = [0.0; HALF_DIM];
    if points.is_empty() {
        return half;
    }
    let (cx, cy) = block.center();
    let mut samples = Vec::with_capacity(points.len());
    for c in 0..3 {
        let plane = rgb.channel(c);
        samples.clear();
        samples.extend(points.iter().map(|p| plane[p.y * rgb.width() + p.x]));
        (half[c], half[3 + c]) = mean_and_variance(&samples);
    }
    samples.clear();
    samples.extend(points.iter().map(|p| (p.x as f64 - cx).hypot(p.y as f64 - cy)));
    (half[6], half[7]) = mean_and_variance(&samples);
    samples.clear();
    samples.extend(points.iter().map(|p| grad.get(p.x, p.y)));
    (half[8], half[9]) = mean_and_variance(&samples);
    half
}

/// Feature vector of one block from the extrema falling inside it.
pub fn extract_sled(block: &Block, extrema: &ExtremaSet, rgb: &RgbImage, grad: &GradientImage) -> SledVector {
    let inside = |set: &[Point]| -> Vec<Point> {
        // Sorted row-major, so the rows of the block form a contiguous run.
        let start = set.partition_point(|p| p.y < block.y0);
        let end = set.partition_point(|p| p.y < block.y1);
        set[start..end].iter().copied().filter(|p| block.contains(*p)).collect()
    };
    let inside_sorted = |set: &[Point]| -> Vec<Point> {
        if set.windows(2).all(|w| w[0].y <= w[1].y) {
            inside(set)
        } else {
            set.iter().copied().filter(|p| block.contains(*p)).collect()
        }
    };
    let maxima = inside_sorted(&extrema.maxima);
    let minima = inside_sorted(&extrema.minima);
    let mut v = [0.0; SLED_DIM];
    v[..HALF_DIM].copy_from_slice(&half_features(&maxima, block, rgb, grad));
    v[HALF_DIM..].copy_from_slice(&half_features(&minima, block, rgb, grad));
    SledVector(v)
}

/// Regularized covariance embedding of a set of block vectors.
#[derive(Debug, Clone)]
pub struct CovarianceDescriptor {
    matrix: SpdMatrix,
    regularization: Option<f64>,
}

/// Equality is over the matrix only; the regularization amount is not part
/// of the persisted form.
impl PartialEq for CovarianceDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl CovarianceDescriptor {
    /// Wraps an already regularized matrix, e.g. one read back from disk.
    pub fn from_matrix(matrix: SpdMatrix) -> Self {
        Self {
            matrix,
            regularization: None,
        }
    }

    pub fn matrix(&self) -> &SpdMatrix {
        &self.matrix
    }

    /// The `epsilon` added to the diagonal, when known.
    pub fn regularization(&self) -> Option<f64> {
        self.regularization
    }

    /// Number of independent entries (upper triangle).
    pub fn parameter_count(&self) -> usize {
        let d = self.matrix.dim();
        d * (d + 1) / 2
    }
}

/// Biased covariance of the vectors around their mean, without regularization.
pub fn covariance_matrix(vectors: &[SledVector]) -> Result<DMatrix<f64>> {
    if vectors.len() < 2 {
        return Err(Error::Degenerate(format!(
            "covariance embedding needs at least 2 vectors, got {}",
            vectors.len()
        )));
    }
    let n = vectors.len();
    let data = DMatrix::from_fn(n, SLED_DIM, |i, j| vectors[i].0[j]);
    let mean = data.row_mean();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let mut cov = centered.tr_mul(&centered) / n as f64;
    // Mirror the upper triangle so the result is exactly symmetric.
    for i in 0..SLED_DIM {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok(cov)
}

/// Covariance embedding with `epsilon * I` added, where
/// `epsilon = epsilon_scale * trace / 20`, or `epsilon_scale` for a zero trace.
pub fn embed_covariance(vectors: &[SledVector], epsilon_scale: f64) -> Result<CovarianceDescriptor> {
    let mut cov = covariance_matrix(vectors)?;
    let trace = cov.trace();
    let eps = if trace > 0.0 {
        epsilon_scale * trace / SLED_DIM as f64
    } else {
        epsilon_scale
    };
    for i in 0..SLED_DIM {
        cov[(i, i)] += eps;
    }
    Ok(CovarianceDescriptor {
        matrix: SpdMatrix::new(cov)?,
        regularization: Some(eps),
    })
}

/// One covariance matrix per scale, in the configured scale order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleDescriptor {
    pub scales: Vec<f64>,
    pub matrices: Vec<CovarianceDescriptor>,
}

impl MultiscaleDescriptor {
    pub fn parameter_count(&self) -> usize {
        self.matrices.iter().map(CovarianceDescriptor::parameter_count).sum()
    }
}

/// Intermediate products of the pipeline at a single scale.
#[derive(Debug, Clone)]
pub struct ScaleAnalysis {
    pub scale: f64,
    pub extrema: ExtremaSet,
    pub grid: BlockGrid,
    pub vectors: Vec<SledVector>,
    pub covariance: CovarianceDescriptor,
}

/// Runs resample, grayscale, Sobel, extrema, blocks and embedding at one scale.
pub fn analyze_scale(img: &RgbImage, scale: f64, cfg: &PipelineConfig) -> Result<ScaleAnalysis> {
    let resampled;
    let img = if scale == 1.0 {
        img
    } else {
        resampled = resample_bicubic(img, scale)?;
        &resampled
    };
    let gray = to_grayscale(img);
    let grad = sobel_gradient_magnitude(&gray);
    let extrema = detect_local_extrema(&gray, cfg.window, cfg.strict_extrema)?;
    let grid = partition_blocks(img.width(), img.height(), cfg.block_size, cfg.overlap)?;
    if grid.blocks.len() < 2 {
        return Err(Error::Degenerate(format!(
            "image of {}x{} at scale {scale} yields {} block(s), need at least 2",
            img.width(),
            img.height(),
            grid.blocks.len()
        )));
    }
    let vectors: Vec<SledVector> = grid
        .blocks
        .iter()
        .map(|b| extract_sled(b, &extrema, img, &grad))
        .collect();
    let covariance = embed_covariance(&vectors, cfg.epsilon_scale)?;
    Ok(ScaleAnalysis {
        scale,
        extrema,
        grid,
        vectors,
        covariance,
    })
}

/// Multiscale descriptor of an image.
pub fn compute_descriptor(img: &RgbImage, cfg: &PipelineConfig) -> Result<MultiscaleDescriptor> {
    cfg.validate()?;
    let matrices = cfg
        .scales
        .iter()
        .map(|&s| analyze_scale(img, s, cfg).map(|a| a.covariance))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiscaleDescriptor {
        scales: cfg.scales.clone(),
        matrices,
    })
}
