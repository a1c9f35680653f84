//! Brute-force oracles and fixture generators shared by the integration tests.
//!
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::path::Path;

use msled::extrema::Point;
use msled::{Block, ExtremaSet, GradientImage, GrayImage, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_gray(w: usize, h: usize, levels: u32, rng: &mut impl Rng) -> GrayImage {
    // Few levels so ties (plateaus) actually occur.
    let data = (0..w * h).map(|_| f64::from(rng.gen_range(0..levels)) * 17.0).collect();
    GrayImage::new(w, h, data).unwrap()
}

/// Every pixel whose full window fits is compared against each other window pixel.
pub fn extrema_oracle(gray: &GrayImage, w: usize, strict: bool) -> ExtremaSet {
    let r = (w / 2) as isize;
    let (width, height) = (gray.width() as isize, gray.height() as isize);
    let mut out = ExtremaSet::default();
    for y in 0..height {
        for x in 0..width {
            if x - r < 0 || y - r < 0 || x + r >= width || y + r >= height {
                continue;
            }
            let c = gray.get(x as usize, y as usize);
            let mut others = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx != 0 || dy != 0 {
                        others.push(gray.get((x + dx) as usize, (y + dy) as usize));
                    }
                }
            }
            let (is_max, is_min) = if strict {
                (others.iter().all(|&v| c > v), others.iter().all(|&v| c < v))
            } else {
                (others.iter().all(|&v| c >= v), others.iter().all(|&v| c <= v))
            };
            let p = Point {
                x: x as usize,
                y: y as usize,
            };
            if is_max {
                out.maxima.push(p);
            }
            if is_min {
                out.minima.push(p);
            }
        }
    }
    out
}

/// Sum / sum-of-squares statistics of one extrema subset.
fn half_oracle(points: &[Point], block: &Block, rgb: &RgbImage, grad: &GradientImage) -> [f64; 10] {
    let inside: Vec<&Point> = points
        .iter()
        .filter(|p| p.x >= block.x0 && p.x < block.x1 && p.y >= block.y0 && p.y < block.y1)
        .collect();
    if inside.is_empty() {
        return [0.0; 10];
    }
    let n = inside.len() as f64;
    let cx = (block.x0 + block.x1 - 1) as f64 / 2.0;
    let cy = (block.y0 + block.y1 - 1) as f64 / 2.0;
    let mut sums = [0.0f64; 5];
    let mut sq = [0.0f64; 5];
    for p in &inside {
        let [r, g, b] = rgb.pixel(p.x, p.y);
        let d = ((p.x as f64 - cx).powi(2) + (p.y as f64 - cy).powi(2)).sqrt();
        let vals = [r, g, b, d, grad.get(p.x, p.y)];
        for k in 0..5 {
            sums[k] += vals[k];
            sq[k] += vals[k] * vals[k];
        }
    }
    let mean = |k: usize| sums[k] / n;
    let var = |k: usize| (sq[k] / n - mean(k) * mean(k)).max(0.0);
    [mean(0), mean(1), mean(2), var(0), var(1), var(2), mean(3), var(3), mean(4), var(4)]
}

pub fn sled_oracle(block: &Block, extrema: &ExtremaSet, rgb: &RgbImage, grad: &GradientImage) -> [f64; 20] {
    let mut out = [0.0; 20];
    out[..10].copy_from_slice(&half_oracle(&extrema.maxima, block, rgb, grad));
    out[10..].copy_from_slice(&half_oracle(&extrema.minima, block, rgb, grad));
    out
}

/// Two-pass biased covariance with plain loops.
pub fn covariance_oracle(vectors: &[[f64; 20]]) -> Vec<Vec<f64>> {
    let n = vectors.len() as f64;
    let mut mean = [0.0; 20];
    for v in vectors {
        for i in 0..20 {
            mean[i] += v[i] / n;
        }
    }
    let mut c = vec![vec![0.0; 20]; 20];
    for v in vectors {
        for i in 0..20 {
            for j in 0..20 {
                c[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]) / n;
            }
        }
    }
    c
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    det
}

/// Roots of `det(B - lambda A)` found by scanning a log-spaced grid for sign
/// changes and bisecting each bracket.
pub fn generalized_eigenvalues_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let f = |lambda: f64| -> f64 {
        let m = (0..n)
            .map(|i| (0..n).map(|j| b[i][j] - lambda * a[i][j]).collect())
            .collect();
        determinant(m)
    };
    let (lo_exp, hi_exp, steps) = (-6.0f64, 6.0f64, 60_000);
    let grid = |k: usize| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / steps as f64);
    let mut roots = Vec::new();
    let mut prev_x = grid(0);
    let mut prev_f = f(prev_x);
    for k in 1..=steps {
        let x = grid(k);
        let fx = f(x);
        if fx == 0.0 {
            roots.push(x);
        } else if prev_f.signum() != fx.signum() && prev_f != 0.0 {
            let (mut lo, mut hi, mut flo) = (prev_x, x, prev_f);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_f = fx;
    }
    roots
}

pub fn riemannian_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let lambdas = generalized_eigenvalues_oracle(a, b);
    assert_eq!(lambdas.len(), a.len(), "oracle missed a root: {lambdas:?}");
    lambdas.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt()
}

/// Random SPD matrix `M M^T + shift I` with Gaussian-ish entries.
pub fn random_spd(dim: usize, shift: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let m: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    let dot: f64 = (0..dim).map(|k| m[i][k] * m[j][k]).sum();
                    dot + if i == j { shift } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

pub fn to_dmatrix(m: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.len(), m.len(), |i, j| m[i][j])
}

/// Oriented sinusoidal grating with a per-channel tint and additive uniform
/// noise in `[-noise, noise]`.
pub fn grating(size: usize, period: f64, angle_deg: f64, phase: f64, noise: f64, rng: &mut impl Rng) -> RgbImage {
    let theta = angle_deg.to_radians();
    let (c, s) = (theta.cos(), theta.sin());
    let tint = [1.0, 0.85, 0.7];
    let noise_field: Vec<f64> = (0..size * size).map(|_| rng.gen_range(-noise..=noise)).collect();
    RgbImage::from_fn(size, size, |x, y| {
        let u = x as f64 * c + y as f64 * s;
        let v = 128.0 + 90.0 * (2.0 * PI * u / period + phase).sin() + noise_field[y * size + x];
        tint.map(|t| t * v)
    })
    .unwrap()
}

pub const GRATING_PERIODS: [f64; 4] = [3.0, 4.0, 5.0, 7.0];
pub const GRATING_ANGLES: [f64; 2] = [0.0, 45.0];
pub const GRATING_NOISE: f64 = 10.0;

/// 8 classes (4 periods x 2 orientations) x `per_class` images. Images of a
/// class share the grating and differ only by their noise field.
pub fn grating_corpus(per_class: usize, size: usize, seed: u64) -> Vec<(String, RgbImage)> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for &period in &GRATING_PERIODS {
        for &angle in &GRATING_ANGLES {
            let label = format!("p{period}_a{angle}");
            for _ in 0..per_class {
                out.push((label.clone(), grating(size, period, angle, 0.0, GRATING_NOISE, &mut rng)));
            }
        }
    }
    out
}

/// Writes images as `root/<label>/<nn>.ppm`.
pub fn write_corpus(root: &Path, images: &[(String, RgbImage)]) {
    for (i, (label, img)) in images.iter().enumerate() {
        let dir = root.join(label);
        std::fs::create_dir_all(&dir).unwrap();
        img.save_ppm(dir.join(format!("{i:04}.ppm"))).unwrap();
    }
}

/// ARR computed by fully sorting every row of an explicit distance matrix.
pub fn arr_from_matrix(labels: &[String], ids: &[u64], dist: &[Vec<f64>], k: usize) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for q in 0..n {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| dist[q][a].partial_cmp(&dist[q][b]).unwrap().then(ids[a].cmp(&ids[b])));
        let relevant = labels.iter().filter(|l| *l == &labels[q]).count();
        let hits = order[..k].iter().filter(|&&i| labels[i] == labels[q]).count();
        total += hits as f64 / relevant as f64;
    }
    total / n as f64
}
