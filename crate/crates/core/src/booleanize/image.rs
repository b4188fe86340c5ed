use serde::{Deserialize, Serialize};

use crate::bits::BitSample;
use crate::dataset::ImageSet;
use crate::error::{Error, Result};

/// Square correlation kernel, row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub name: String,
    pub size: usize,
    pub weights: Vec<f32>,
}

impl Kernel {
    pub fn new(name: &str, size: usize, weights: Vec<f32>) -> Result<Self> {
        if size.is_multiple_of(2) || weights.len() != size * size {
            return Err(Error::InvalidArgument(format!(
                "kernel `{name}` must be odd-sized and square, got size {size} with {} weights",
                weights.len()
            )));
        }
        Ok(Self {
            name: name.to_owned(),
            size,
            weights,
        })
    }

    pub fn identity() -> Self {
        Self::new("raw", 1, vec![1.0]).unwrap()
    }

    /// Zero-padded, same-size correlation of a `rows x cols` image.
    pub fn apply(&self, image: &[u8], rows: usize, cols: usize, out: &mut Vec<f32>) {
        out.clear();
        out.resize(rows * cols, 0.0);
        let r = (self.size / 2) as isize;
        for y in 0..rows as isize {
            for x in 0..cols as isize {
                let mut acc = 0.0f32;
                for ky in -r..=r {
                    let yy = y + ky;
                    if yy < 0 || yy >= rows as isize {
                        continue;
                    }
                    for kx in -r..=r {
                        let xx = x + kx;
                        if xx < 0 || xx >= cols as isize {
                            continue;
                        }
                        let w = self.weights[((ky + r) as usize) * self.size + (kx + r) as usize];
                        acc += w * f32::from(image[yy as usize * cols + xx as usize]);
                    }
                }
                out[y as usize * cols + x as usize] = acc;
            }
        }
    }
}

/// Zero-sum Laplacian-of-Gaussian sampled on a `size x size` grid.
fn laplacian_of_gaussian(size: usize, sigma: f64) -> Vec<f32> {
    let r = (size / 2) as isize;
    let s2 = sigma * sigma;
    let mut w: Vec<f64> = Vec::with_capacity(size * size);
    for y in -r..=r {
        for x in -r..=r {
            let d = (x * x + y * y) as f64 / (2.0 * s2);
            // Negated so a bright blob on a dark background responds positively.
            w.push((1.0 - d) * (-d).exp());
        }
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|v| ((v - mean) * 16.0) as f32).collect()
}

/// Raw map, Sobel x/y (3x3) and Laplacian-of-Gaussian edge detectors at
/// 5x5 and 7x7, in that order.
pub fn default_kernels() -> Vec<Kernel> {
    vec![
        Kernel::identity(),
        Kernel::new("sobel_x", 3, vec![-1., 0., 1., -2., 0., 2., -1., 0., 1.]).unwrap(),
        Kernel::new("sobel_y", 3, vec![-1., -2., -1., 0., 0., 0., 1., 2., 1.]).unwrap(),
        Kernel::new("log_5", 5, laplacian_of_gaussian(5, 1.0)).unwrap(),
        Kernel::new("log_7", 7, laplacian_of_gaussian(7, 1.4)).unwrap(),
    ]
}

/// Convolution feature maps thermometer-encoded against per-map thresholds
/// taken from the pooled value histogram of the fit set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageBooleanizer {
    rows: usize,
    cols: usize,
    kernels: Vec<Kernel>,
    /// `thresholds[m]` holds `bits_per_map` non-decreasing cut points.
    thresholds: Vec<Vec<f32>>,
}

impl ImageBooleanizer {
    /// Thresholds sit at the `k / (bits_per_map + 1)` quantiles of each map's
    /// pooled values. A threshold that would repeat the previous one moves up
    /// to the next larger observed value when there is one.
    pub fn fit(images: &ImageSet, kernels: Vec<Kernel>, bits_per_map: usize) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Empty("image set".into()));
        }
        if kernels.is_empty() {
            return Err(Error::InvalidArgument("at least one kernel is required".into()));
        }
        if bits_per_map == 0 {
            return Err(Error::InvalidArgument("bits per map must be at least 1".into()));
        }
        let (rows, cols) = (images.rows, images.cols);
        let mut thresholds = Vec::with_capacity(kernels.len());
        let mut pooled: Vec<f32> = Vec::with_capacity(images.len() * rows * cols);
        let mut map = Vec::new();
        for kernel in &kernels {
            pooled.clear();
            for i in 0..images.len() {
                kernel.apply(images.image(i), rows, cols, &mut map);
                pooled.extend_from_slice(&map);
            }
            pooled.sort_unstable_by(f32::total_cmp);
            thresholds.push(quantile_thresholds(&pooled, bits_per_map));
        }
        Ok(Self {
            rows,
            cols,
            kernels,
            thresholds,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn thresholds(&self) -> &[Vec<f32>] {
        &self.thresholds
    }

    pub fn bits_per_map(&self) -> usize {
        self.thresholds.first().map_or(0, Vec::len)
    }

    pub fn feature_count(&self) -> usize {
        self.kernels.len() * self.rows * self.cols * self.bits_per_map()
    }

    /// Bit `((map * pixels) + pixel) * bits_per_map + t` is set iff the
    /// convolved value exceeds threshold `t` of that map.
    pub fn transform(&self, image: &[u8]) -> Result<BitSample> {
        let pixels = self.rows * self.cols;
        if image.len() != pixels {
            return Err(Error::WidthMismatch {
                expected: pixels,
                actual: image.len(),
            });
        }
        let bits = self.bits_per_map();
        let mut sample = BitSample::zeros(self.feature_count());
        let mut map = Vec::new();
        for (m, (kernel, cuts)) in self.kernels.iter().zip(&self.thresholds).enumerate() {
            kernel.apply(image, self.rows, self.cols, &mut map);
            for (p, &v) in map.iter().enumerate() {
                let base = (m * pixels + p) * bits;
                for (t, &cut) in cuts.iter().enumerate() {
                    if v > cut {
                        sample.set(base + t, true);
                    } else {
                        break;
                    }
                }
            }
        }
        Ok(sample)
    }
}

fn quantile_thresholds(sorted: &[f32], bits: usize) -> Vec<f32> {
    let n = sorted.len();
    let mut cuts: Vec<f32> = Vec::with_capacity(bits);
    for k in 1..=bits {
        let idx = (k * (n - 1)) / (bits + 1);
        let mut t = sorted[idx];
        if let Some(&prev) = cuts.last() {
            if t <= prev {
                let next = sorted.partition_point(|&v| v <= prev);
                t = sorted.get(next).copied().unwrap_or(prev);
            }
        }
        cuts.push(t);
    }
    cuts
}
