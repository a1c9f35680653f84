//! Raster containers, decoding and the preprocessing transforms.
//!
//! All intensities are `f64` in `[0, 255]` and are never re-quantized after
//! grayscale conversion or resampling.

use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

/// Color image with three planes stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    channels: [Vec<f64>; 3],
}

impl RgbImage {
    /// Builds an image from three row-major planes.
    ///
    /// Fails when a dimension is zero, when a plane has the wrong length, or
    /// when an intensity falls outside `[0, 255]`.
    pub fn from_planes(width: usize, height: usize, channels: [Vec<f64>; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let len = width * height;
        for plane in &channels {
            if plane.len() != len {
                return Err(Error::InvalidParameter(format!(
                    "plane has {} samples, expected {len}",
                    plane.len()
                )));
            }
            if plane.iter().any(|v| !(0.0..=255.0).contains(v)) {
                return Err(Error::InvalidParameter(
                    "intensity outside [0, 255]".to_string(),
                ));
            }
        }
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    /// Builds an image from interleaved 8-bit RGB samples.
    pub fn from_rgb8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidParameter(format!(
                "expected {} RGB bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        let mut channels = [
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
        ];
        for px in data.chunks_exact(3) {
            for (c, plane) in channels.iter_mut().enumerate() {
                plane.push(f64::from(px[c]));
            }
        }
        Self::from_planes(width, height, channels)
    }

    /// Builds an image whose pixels are produced by `f(x, y) -> [r, g, b]`.
    /// Values are clamped into `[0, 255]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut channels = [
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
        ];
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for (plane, v) in channels.iter_mut().zip(px) {
                    plane.push(v.clamp(0.0, 255.0));
                }
            }
        }
        Self::from_planes(width, height, channels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Plane for channel 0 (red), 1 (green) or 2 (blue).
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width + x;
        [self.channels[0][i], self.channels[1][i], self.channels[2][i]]
    }

    /// Encodes the image as binary PPM (P6, maxval 255), rounding to the
    /// nearest integer.
    pub fn write_ppm(&self, mut out: impl Write) -> std::io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.width * self.height * 3);
        for i in 0..self.width * self.height {
            for plane in &self.channels {
                buf.push(plane[i].round().clamp(0.0, 255.0) as u8);
            }
        }
        out.write_all(&buf)
    }

    pub fn save_ppm(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_ppm(&mut out)?;
        out.flush()
    }
}

/// Single-plane real-valued raster shared by the grayscale and gradient views.
macro_rules! plane_image {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            width: usize,
            height: usize,
            data: Vec<f64>,
        }

        impl $name {
            pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
                if width == 0 || height == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "image dimensions must be positive, got {width}x{height}"
                    )));
                }
                if data.len() != width * height {
                    return Err(Error::InvalidParameter(format!(
                        "plane has {} samples, expected {}",
                        data.len(),
                        width * height
                    )));
                }
                Ok(Self { width, height, data })
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn data(&self) -> &[f64] {
                &self.data
            }

            #[inline]
            pub fn get(&self, x: usize, y: usize) -> f64 {
                self.data[y * self.width + x]
            }
        }
    };
}

plane_image!(
    /// Luminance plane, values in `[0, 255]`.
    GrayImage
);
plane_image!(
    /// Sobel gradient magnitudes, all values `>= 0`.
    GradientImage
);

/// Decodes a PPM/PGM (binary) or 8-bit PNG file into an [`RgbImage`].
/// Grayscale inputs are replicated into three identical channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let decode_err = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let reader = image::ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    if reader.format().is_none() {
        return Err(decode_err("unsupported image format".to_string()));
    }
    let decoded = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if w == 0 || h == 0 {
        return Err(decode_err("zero-sized image".to_string()));
    }
    RgbImage::from_rgb8(w, h, rgb.as_raw()).map_err(|e| decode_err(e.to_string()))
}

pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// ITU-R BT.601 luminance, kept real-valued.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let [r, g, b] = &img.channels;
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            (LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b).clamp(0.0, 255.0)
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Gradient magnitude `sqrt(Gx^2 + Gy^2)` with the 3x3 Sobel kernels.
///
/// Borders are replicate-padded so the output has the input's dimensions.
pub fn sobel_gradient_magnitude(img: &GrayImage) -> GradientImage {
    let (w, h) = (img.width, img.height);
    let at = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        img.data[yc * w + xc]
    };
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            data.push(gx.hypot(gy));
        }
    }
    GradientImage {
        width: w,
        height: h,
        data,
    }
}

const CUBIC_A: f64 = -0.5;

/// Cubic convolution kernel (Keys, a = -0.5).
fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 1.0 {
        ((CUBIC_A + 2.0) * ax - (CUBIC_A + 3.0)) * ax * ax + 1.0
    } else if ax < 2.0 {
        ((CUBIC_A * ax - 5.0 * CUBIC_A) * ax + 8.0 * CUBIC_A) * ax - 4.0 * CUBIC_A
    } else {
        0.0
    }
}

/// Output length `ceil(scale * len)`. A relative slack of 1e-9 keeps products
/// such as `0.7 * 10` from rounding up past the exact integer.
pub fn scaled_len(len: usize, scale: f64) -> usize {
    let exact = scale * len as f64;
    (exact - exact * 1e-9).ceil().max(0.0) as usize
}

/// Sparse interpolation weights for one output sample.
struct Taps {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

/// Interpolation taps along one axis. Out-of-range source indices are
/// mirrored back into the image.
fn axis_taps(in_len: usize, out_len: usize, scale: f64) -> Vec<Taps> {
    let antialias = scale < 1.0;
    let kernel_scale = if antialias { scale } else { 1.0 };
    let support = 4.0 / kernel_scale;
    let n_taps = support.ceil() as isize + 2;
    let mirror = |j: isize| -> usize {
        let period = 2 * in_len as isize;
        let m = j.rem_euclid(period);
        if m < in_len as isize {
            m as usize
        } else {
            (period - 1 - m) as usize
        }
    };

    (0..out_len)
        .map(|u| {
            // Source coordinate of the output sample center (1-based pixel grid).
            let center = (u as f64 + 1.0) / scale + 0.5 * (1.0 - 1.0 / scale);
            let left = (center - support / 2.0).floor() as isize;
            let mut indices = Vec::with_capacity(n_taps as usize);
            let mut weights = Vec::with_capacity(n_taps as usize);
            for p in 0..n_taps {
                let j = left + p;
                let wgt = kernel_scale * cubic(kernel_scale * (center - j as f64));
                if wgt != 0.0 {
                    indices.push(mirror(j - 1));
                    weights.push(wgt);
                }
            }
            let total: f64 = weights.iter().sum();
            for wgt in &mut weights {
                *wgt /= total;
            }
            Taps { indices, weights }
        })
        .collect()
}

/// Bicubic resampling to `ceil(scale * width) x ceil(scale * height)`.
///
/// Downscaling stretches the kernel by `1 / scale` for antialiasing. Results
/// are clamped into `[0, 255]` but not rounded.
pub fn resample_bicubic(img: &RgbImage, scale: f64) -> Result<RgbImage> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidScale { scale });
    }
    let out_w = scaled_len(img.width, scale);
    let out_h = scaled_len(img.height, scale);
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidScale { scale });
    }
    let col_taps = axis_taps(img.width, out_w, scale);
    let row_taps = axis_taps(img.height, out_h, scale);

    let channels = img.channels.clone().map(|plane| {
        // Horizontal pass: height x out_w
        let mut tmp = vec![0.0; img.height * out_w];
        for y in 0..img.height {
            let row = &plane[y * img.width..(y + 1) * img.width];
            for (x, taps) in col_taps.iter().enumerate() {
                tmp[y * out_w + x] = taps
                    .indices
                    .iter()
                    .zip(&taps.weights)
                    .map(|(&i, &wgt)| row[i] * wgt)
                    .sum();
            }
        }
        // Vertical pass: out_h x out_w
        let mut out = vec![0.0; out_h * out_w];
        for (y, taps) in row_taps.iter().enumerate() {
            for x in 0..out_w {
                let v: f64 = taps
                    .indices
                    .iter()
                    .zip(&taps.weights)
                    .map(|(&i, &wgt)| tmp[i * out_w + x] * wgt)
                    .sum();
                out[y * out_w + x] = v.clamp(0.0, 255.0);
            }
        }
        out
    });
    Ok(RgbImage {
        width: out_w,
        height: out_h,
        channels,
    })
}
