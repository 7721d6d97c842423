//! Grayscale image input, binarization, and bit-packed binary output.
//!
//! Images come in as PGM (P2/P5), get quantized to two levels with an
//! optional dither, and leave as ±1 spin fields. Dark pixels map to +1,
//! light pixels to −1.

mod hilbert;
mod pnm;

pub use pnm::{read_pbm, read_pgm, write_pbm};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("maxval {0} outside [1, 65535]")]
    MaxvalOutOfRange(u32),
    #[error("sample {value} at index {index} exceeds maxval {maxval}")]
    SampleOutOfRange {
        index: usize,
        value: u32,
        maxval: u16,
    },
    #[error("empty image")]
    EmptyImage,
    #[error("spin value {0} is not +1 or -1")]
    InvalidSpin(i8),
}

/// A grayscale image with samples in `[0, maxval]`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    maxval: u16,
    samples: Vec<u16>,
}

impl GrayImage {
    pub fn new(
        width: usize,
        height: usize,
        maxval: u16,
        samples: Vec<u16>,
    ) -> Result<Self, ImageError> {
        if maxval == 0 {
            return Err(ImageError::MaxvalOutOfRange(0));
        }
        if samples.len() != width * height {
            return Err(ImageError::TruncatedPayload {
                expected: width * height,
                found: samples.len(),
            });
        }
        if let Some(idx) = samples.iter().position(|&s| s > maxval) {
            return Err(ImageError::SampleOutOfRange {
                index: idx,
                value: samples[idx] as u32,
                maxval,
            });
        }
        Ok(Self {
            width,
            height,
            maxval,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn maxval(&self) -> u16 {
        self.maxval
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }
}

/// A bilevel image of ±1 spins, row-major. +1 is black (ink), −1 is white.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    spins: Vec<i8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, spins: Vec<i8>) -> Result<Self, ImageError> {
        if spins.len() != width * height {
            return Err(ImageError::TruncatedPayload {
                expected: width * height,
                found: spins.len(),
            });
        }
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(ImageError::InvalidSpin(bad));
        }
        Ok(Self {
            width,
            height,
            spins,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Spin at zero-based pixel position.
    pub fn spin_at(&self, x: usize, y: usize) -> i8 {
        self.spins[y * self.width + x]
    }
}

/// Binarization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dither {
    /// Hilbert-curve traversal with an exponentially weighted error queue.
    Riemersma,
    /// Floyd–Steinberg error diffusion in raster order.
    Floyd,
    /// Plain threshold, no error diffusion.
    None,
}

impl std::str::FromStr for Dither {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "riemersma" => Ok(Dither::Riemersma),
            "floyd" => Ok(Dither::Floyd),
            "none" => Ok(Dither::None),
            other => Err(format!(
                "unknown dither `{other}` (expected riemersma, floyd or none)"
            )),
        }
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Length of the Riemersma error queue.
const RIEMERSMA_QUEUE: usize = 16;
/// Ratio between the oldest and the newest queue weight.
const RIEMERSMA_RATIO: f64 = 1.0 / 16.0;

/// Quantizes a grayscale image to ±1 spins. Dark pixels (luminance below
/// `threshold` × maxval) become +1; exact-threshold pixels map to −1.
///
/// The result is deterministic: identical inputs give identical outputs on
/// every platform.
pub fn binarize(
    img: &GrayImage,
    method: Dither,
    threshold: f64,
) -> Result<BinaryImage, ImageError> {
    if img.width == 0 || img.height == 0 {
        return Err(ImageError::EmptyImage);
    }
    let maxval = img.maxval as f64;
    let values: Vec<f64> = img.samples.iter().map(|&s| s as f64 / maxval).collect();
    let spins = match method {
        Dither::None => values
            .iter()
            .map(|&v| if v < threshold { 1 } else { -1 })
            .collect(),
        Dither::Floyd => floyd_steinberg(values, img.width, img.height, threshold),
        Dither::Riemersma => riemersma(&values, img.width, img.height, threshold),
    };
    BinaryImage::new(img.width, img.height, spins)
}

/// Quantizes one luminance value: returns (spin, rendered luminance).
#[inline]
fn quantize(v: f64, threshold: f64) -> (i8, f64) {
    if v < threshold {
        (1, 0.0)
    } else {
        (-1, 1.0)
    }
}

fn floyd_steinberg(mut buf: Vec<f64>, width: usize, height: usize, threshold: f64) -> Vec<i8> {
    let mut spins = vec![0i8; width * height];
    for y in 0..height {
        let mut emitted = 0.0f64;
        let mut kept_in_row = 0.0f64;
        let mut sent_down = 0.0f64;
        let mut clipped = 0.0f64;
        for x in 0..width {
            let idx = y * width + x;
            let old = buf[idx];
            let (spin, rendered) = quantize(old, threshold);
            spins[idx] = spin;
            let err = old - rendered;
            emitted += err;
            // right, below-left, below, below-right
            const KERNEL: [(i64, i64, f64); 4] = [
                (1, 0, 7.0 / 16.0),
                (-1, 1, 3.0 / 16.0),
                (0, 1, 5.0 / 16.0),
                (1, 1, 1.0 / 16.0),
            ];
            for &(dx, dy, weight) in KERNEL.iter() {
                let part = err * weight;
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx < 0 || nx >= width as i64 || ny >= height as i64 {
                    clipped += part;
                    continue;
                }
                buf[ny as usize * width + nx as usize] += part;
                if dy == 0 {
                    kept_in_row += part;
                } else {
                    sent_down += part;
                }
            }
        }
        // every unit of emitted error must land somewhere: further along this
        // row, on the next row, or off the image
        debug_assert!(
            (emitted - kept_in_row - sent_down - clipped).abs() <= 1e-9 * (1.0 + emitted.abs()),
            "row {y}: error bookkeeping broken"
        );
    }
    spins
}

fn riemersma(values: &[f64], width: usize, height: usize, threshold: f64) -> Vec<i8> {
    // exponential weights, newest error weighted 1, oldest RIEMERSMA_RATIO
    let decay = RIEMERSMA_RATIO.powf(1.0 / (RIEMERSMA_QUEUE as f64 - 1.0));
    let mut weights = [0.0f64; RIEMERSMA_QUEUE];
    for (age, w) in weights.iter_mut().enumerate() {
        *w = decay.powi(age as i32);
    }

    let side = hilbert::covering_side(width.max(height));
    let mut queue = [0.0f64; RIEMERSMA_QUEUE]; // queue[0] is the newest error
    let mut spins = vec![0i8; width * height];
    for d in 0..side * side {
        let (x, y) = hilbert::d2xy(side, d);
        if x >= width || y >= height {
            continue;
        }
        let idx = y * width + x;
        let v = values[idx];
        let correction: f64 = queue.iter().zip(weights.iter()).map(|(e, w)| e * w).sum();
        let (spin, rendered) = quantize(v + correction, threshold);
        spins[idx] = spin;
        queue.copy_within(0..RIEMERSMA_QUEUE - 1, 1);
        queue[0] = v - rendered;
    }
    spins
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(width: usize, height: usize, maxval: u16, sample: u16) -> GrayImage {
        GrayImage::new(width, height, maxval, vec![sample; width * height]).unwrap()
    }

    #[test]
    fn threshold_tie_maps_to_light() {
        // mid-gray exactly at the default threshold
        let img = uniform(4, 4, 200, 100);
        let out = binarize(&img, Dither::None, 0.5).unwrap();
        assert!(out.spins().iter().all(|&s| s == -1));
    }

    #[test]
    fn all_black_is_all_plus_one_under_every_method() {
        for method in [Dither::None, Dither::Floyd, Dither::Riemersma] {
            let img = uniform(8, 8, 255, 0);
            let out = binarize(&img, method, 0.5).unwrap();
            assert!(out.spins().iter().all(|&s| s == 1), "{method:?}");
        }
    }

    #[test]
    fn plain_threshold_darker_than_threshold_is_black() {
        let img = uniform(5, 3, 255, 100);
        let out = binarize(&img, Dither::None, 0.5).unwrap();
        assert!(out.spins().iter().all(|&s| s == 1));
    }

    #[test]
    fn floyd_on_half_gray_balances_and_alternates() {
        let img = uniform(16, 16, 200, 100); // exactly 0.5
        let out = binarize(&img, Dither::Floyd, 0.5).unwrap();
        let mean: f64 =
            out.spins().iter().map(|&s| s as f64).sum::<f64>() / out.spins().len() as f64;
        assert!(mean.abs() <= 0.1, "mean spin {mean}");
        // alternating local texture: most horizontal neighbors disagree
        let mut disagree = 0usize;
        let mut total = 0usize;
        for y in 0..16 {
            for x in 0..15 {
                total += 1;
                if out.spin_at(x, y) != out.spin_at(x + 1, y) {
                    disagree += 1;
                }
            }
        }
        assert!(
            disagree as f64 / total as f64 > 0.6,
            "disagreement {disagree}/{total}"
        );
    }

    #[test]
    fn riemersma_on_half_gray_balances() {
        let img = uniform(16, 16, 200, 100);
        let out = binarize(&img, Dither::Riemersma, 0.5).unwrap();
        let mean: f64 =
            out.spins().iter().map(|&s| s as f64).sum::<f64>() / out.spins().len() as f64;
        assert!(mean.abs() <= 0.2, "mean spin {mean}");
    }

    #[test]
    fn binarize_is_deterministic() {
        let samples: Vec<u16> = (0..64u16).map(|i| (i * 4) % 256).collect();
        let img = GrayImage::new(8, 8, 255, samples).unwrap();
        for method in [Dither::None, Dither::Floyd, Dither::Riemersma] {
            let a = binarize(&img, method, 0.5).unwrap();
            let b = binarize(&img, method, 0.5).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dithers_preserve_mean_darkness_on_gradient() {
        // mean output ink fraction should track mean input darkness
        let samples: Vec<u16> = (0..32 * 32u32).map(|i| (i % 256) as u16).collect();
        let img = GrayImage::new(32, 32, 255, samples).unwrap();
        let darkness: f64 = img
            .samples()
            .iter()
            .map(|&s| 1.0 - s as f64 / 255.0)
            .sum::<f64>()
            / 1024.0;
        for method in [Dither::Floyd, Dither::Riemersma] {
            let out = binarize(&img, method, 0.5).unwrap();
            let ink = out.spins().iter().filter(|&&s| s == 1).count() as f64 / 1024.0;
            assert!(
                (ink - darkness).abs() < 0.08,
                "{method:?}: ink {ink} vs darkness {darkness}"
            );
        }
    }

    #[test]
    fn empty_image_rejected() {
        let img = GrayImage::new(0, 0, 255, vec![]).unwrap();
        assert!(matches!(
            binarize(&img, Dither::None, 0.5),
            Err(ImageError::EmptyImage)
        ));
    }
}
