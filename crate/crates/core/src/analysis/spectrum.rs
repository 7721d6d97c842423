//! Radially binned Fourier amplitude spectra of spin fields.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::imageio::BinaryImage;
use crate::patchset::PatchSet;

/// Amplitude against integer frequency magnitude, with the log-log slope
/// fitted over the central decade.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumCurve {
    /// Annulus centers |f| in index units.
    pub freq: Vec<f64>,
    /// Mean |F| over the cells of each annulus.
    pub amplitude: Vec<f64>,
    /// Log-log regression slope over the central decade of frequencies.
    pub slope: f64,
    /// Frequency range the slope was fitted on.
    pub slope_range: (f64, f64),
}

impl SpectrumCurve {
    /// CSV with the header `f,amplitude`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("f,amplitude\n");
        for (f, a) in self.freq.iter().zip(self.amplitude.iter()) {
            out.push_str(&format!("{f},{a}\n"));
        }
        out
    }
}

const MIN_SIDE: usize = 8;

/// Unnormalized 2-D DFT of a real square field; returns |F| per cell.
fn amplitude_grid(side: usize, values: &[f64]) -> Vec<f64> {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(side);
    let mut grid: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    // rows
    for row in grid.chunks_exact_mut(side) {
        fft.process(row);
    }
    // columns
    let mut col = vec![Complex::new(0.0, 0.0); side];
    for x in 0..side {
        for y in 0..side {
            col[y] = grid[y * side + x];
        }
        fft.process(&mut col);
        for y in 0..side {
            grid[y * side + x] = col[y];
        }
    }
    grid.into_iter().map(|c| c.norm()).collect()
}

/// Signed frequency index of DFT bin k on a ring of n samples.
fn signed_freq(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

fn radial_curve(side: usize, mean_amp: &[f64]) -> SpectrumCurve {
    let mut sums: Vec<f64> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for ky in 0..side {
        for kx in 0..side {
            if kx == 0 && ky == 0 {
                continue; // zero frequency excluded
            }
            let fx = signed_freq(kx, side) as f64;
            let fy = signed_freq(ky, side) as f64;
            let f = (fx * fx + fy * fy).sqrt();
            let bin = f.round() as usize;
            if bin >= sums.len() {
                sums.resize(bin + 1, 0.0);
                counts.resize(bin + 1, 0);
            }
            sums[bin] += mean_amp[ky * side + kx];
            counts[bin] += 1;
        }
    }
    let mut freq = Vec::new();
    let mut amplitude = Vec::new();
    for (bin, (&s, &c)) in sums.iter().zip(counts.iter()).enumerate() {
        if bin == 0 || c == 0 {
            continue;
        }
        freq.push(bin as f64);
        amplitude.push(s / c as f64);
    }

    // central decade: a factor-10 window centered at the geometric mean of
    // the resolved range [1, side/2]
    let f_nyquist = (side / 2) as f64;
    let center = f_nyquist.sqrt();
    let lo = (center / 10f64.sqrt()).max(1.0);
    let hi = (center * 10f64.sqrt()).min(f_nyquist);
    let pts: Vec<(f64, f64)> = freq
        .iter()
        .zip(amplitude.iter())
        .filter(|&(&f, &a)| f >= lo && f <= hi && a > 0.0)
        .map(|(&f, &a)| (f.ln(), a.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        f64::NAN
    };
    SpectrumCurve {
        freq,
        amplitude,
        slope,
        slope_range: (lo, hi),
    }
}

/// Spectrum of a real square field given row-major.
pub fn spectrum_of_field(side: usize, values: &[f64]) -> Result<SpectrumCurve, AnalysisError> {
    if side < MIN_SIDE || values.len() != side * side {
        return Err(AnalysisError::BadSpectrumInput {
            width: side,
            height: values.len() / side.max(1),
        });
    }
    let amp = amplitude_grid(side, values);
    Ok(radial_curve(side, &amp))
}

/// Per-patch amplitudes averaged over the whole set, then radially binned.
pub fn spectrum_of_patches(ps: &PatchSet) -> Result<SpectrumCurve, AnalysisError> {
    let side = ps.side();
    if side < MIN_SIDE {
        return Err(AnalysisError::BadSpectrumInput {
            width: side,
            height: side,
        });
    }
    let mut mean = vec![0.0f64; side * side];
    for patch in ps.patches() {
        let values: Vec<f64> = patch.spins().iter().map(|&s| s as f64).collect();
        let amp = amplitude_grid(side, &values);
        for (acc, a) in mean.iter_mut().zip(amp) {
            *acc += a;
        }
    }
    let b = ps.len() as f64;
    for v in mean.iter_mut() {
        *v /= b;
    }
    Ok(radial_curve(side, &mean))
}

/// Spectrum of a single square binary image.
pub fn spectrum_of_image(img: &BinaryImage) -> Result<SpectrumCurve, AnalysisError> {
    if img.width() != img.height() || img.width() < MIN_SIDE {
        return Err(AnalysisError::BadSpectrumInput {
            width: img.width(),
            height: img.height(),
        });
    }
    let values: Vec<f64> = img.spins().iter().map(|&s| s as f64).collect();
    spectrum_of_field(img.width(), &values)
}

/// Builds a real field whose DFT amplitude is exactly `c/|f|` with random
/// phases. Exposed for tests and synthetic benchmarks.
pub fn synthetic_inverse_frequency_field(side: usize, c: f64, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_pcg::Pcg64::seed_from_u64(seed);
    let mut spectrum = vec![Complex::new(0.0, 0.0); side * side];
    for ky in 0..side {
        for kx in 0..side {
            if kx == 0 && ky == 0 {
                continue;
            }
            // fill each Hermitian pair once
            let cx = (side - kx) % side;
            let cy = (side - ky) % side;
            let here = ky * side + kx;
            let conj = cy * side + cx;
            if conj < here {
                continue;
            }
            let fx = signed_freq(kx, side) as f64;
            let fy = signed_freq(ky, side) as f64;
            let mag = c / (fx * fx + fy * fy).sqrt();
            if conj == here {
                // self-conjugate cells must be real
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                spectrum[here] = Complex::new(sign * mag, 0.0);
            } else {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let v = Complex::from_polar(mag, phase);
                spectrum[here] = v;
                spectrum[conj] = v.conj();
            }
        }
    }
    // inverse 2-D transform
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(side);
    for row in spectrum.chunks_exact_mut(side) {
        ifft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); side];
    for x in 0..side {
        for y in 0..side {
            col[y] = spectrum[y * side + x];
        }
        ifft.process(&mut col);
        for y in 0..side {
            spectrum[y * side + x] = col[y];
        }
    }
    let scale = 1.0 / (side * side) as f64;
    spectrum.into_iter().map(|v| v.re * scale).collect()
}
