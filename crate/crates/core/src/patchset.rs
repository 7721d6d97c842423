//! Square spin patches, their on-disk format, and empirical moments.
//!
//! Patch coordinates are (x, y) with x rightward, y downward and the origin
//! (1, 1) at the upper-left pixel. Site index `(y-1)*L + (x-1)` is row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageio::BinaryImage;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("image {width}x{height} is smaller than the patch side {side}")]
    ImageSmallerThanPatch {
        width: usize,
        height: usize,
        side: usize,
    },
    #[error("patch set is empty")]
    EmptyPatchSet,
    #[error("spin value {0} is not +1 or -1")]
    InvalidSpin(i8),
    #[error("patch has {found} spins, expected {expected}")]
    WrongPatchSize { expected: usize, found: usize },
    #[error("patch sides differ: {0} vs {1}")]
    MixedSides(usize, usize),
    #[error("bad magic: expected {MAGIC:?}")]
    BadMagic,
    #[error("length mismatch: header promises {expected} bytes of patches, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("zero patch side or patch count in header")]
    ZeroDimension,
    #[error("moment vectors have inconsistent dimensions")]
    DimensionMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Magic bytes of the patch file format.
pub const MAGIC: &[u8; 8] = b"BMPATCH1";

/// Zero-based row-major site index of lattice coordinate (x, y), both 1-based.
#[inline]
pub fn site_index(side: usize, x: usize, y: usize) -> usize {
    debug_assert!(x >= 1 && x <= side && y >= 1 && y <= side);
    (y - 1) * side + (x - 1)
}

/// One L×L patch of ±1 spins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinPatch {
    side: usize,
    spins: Vec<i8>,
}

impl SpinPatch {
    pub fn new(side: usize, spins: Vec<i8>) -> Result<Self, PatchError> {
        if spins.len() != side * side {
            return Err(PatchError::WrongPatchSize {
                expected: side * side,
                found: spins.len(),
            });
        }
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(PatchError::InvalidSpin(bad));
        }
        Ok(Self { side, spins })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Spin at lattice coordinate (x, y), 1-based from the upper left.
    pub fn spin(&self, x: usize, y: usize) -> i8 {
        self.spins[site_index(self.side, x, y)]
    }
}

/// A collection of equally sized patches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSet {
    side: usize,
    patches: Vec<SpinPatch>,
}

impl PatchSet {
    pub fn new(patches: Vec<SpinPatch>) -> Result<Self, PatchError> {
        let side = patches.first().ok_or(PatchError::EmptyPatchSet)?.side;
        if let Some(p) = patches.iter().find(|p| p.side != side) {
            return Err(PatchError::MixedSides(side, p.side));
        }
        Ok(Self { side, patches })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of patches B.
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[SpinPatch] {
        &self.patches
    }

    /// Concatenates another set of the same side onto this one.
    pub fn extend(&mut self, other: PatchSet) -> Result<(), PatchError> {
        if other.side != self.side {
            return Err(PatchError::MixedSides(self.side, other.side));
        }
        self.patches.extend(other.patches);
        Ok(())
    }
}

/// First and second empirical moments of a patch set: magnetizations μ_i and
/// the connected correlation matrix Γ_ij (row-major N×N).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawMoments")]
pub struct EmpiricalMoments {
    /// Lattice side; 0 when the moments do not come from square patches.
    #[serde(rename = "l")]
    pub(crate) side: usize,
    pub(crate) b: u64,
    pub(crate) mu: Vec<f64>,
    pub(crate) gamma: Vec<f64>,
}

/// Serialization shadow of [`EmpiricalMoments`]; deserialization revalidates
/// the dimensions.
#[derive(Deserialize)]
struct RawMoments {
    l: usize,
    b: u64,
    mu: Vec<f64>,
    gamma: Vec<f64>,
}

impl TryFrom<RawMoments> for EmpiricalMoments {
    type Error = PatchError;

    fn try_from(raw: RawMoments) -> Result<Self, Self::Error> {
        EmpiricalMoments::from_parts(raw.l, raw.b, raw.mu, raw.gamma)
    }
}

impl EmpiricalMoments {
    /// Assembles moments from raw parts, checking dimensions and symmetry.
    pub fn from_parts(
        side: usize,
        b: u64,
        mu: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self, PatchError> {
        let n = mu.len();
        if gamma.len() != n * n || (side > 0 && side * side != n) || b == 0 {
            return Err(PatchError::DimensionMismatch);
        }
        Ok(Self { side, b, mu, gamma })
    }

    /// Lattice side, or 0 for non-lattice systems.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Sample count B.
    pub fn sample_count(&self) -> u64 {
        self.b
    }

    /// Number of sites N.
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_at(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.n() + j]
    }
}

/// Cuts a binary image into non-overlapping L×L patches in raster order.
/// Partial tiles at the right and bottom edges are discarded.
pub fn patchify(img: &BinaryImage, side: usize) -> Result<PatchSet, PatchError> {
    if side == 0 || img.width() < side || img.height() < side {
        return Err(PatchError::ImageSmallerThanPatch {
            width: img.width(),
            height: img.height(),
            side,
        });
    }
    let across = img.width() / side;
    let down = img.height() / side;
    let mut patches = Vec::with_capacity(across * down);
    for py in 0..down {
        for px in 0..across {
            let mut spins = Vec::with_capacity(side * side);
            for dy in 0..side {
                let y = py * side + dy;
                let x0 = px * side;
                spins.extend_from_slice(&img.spins()[y * img.width() + x0..][..side]);
            }
            patches.push(SpinPatch::new(side, spins)?);
        }
    }
    PatchSet::new(patches)
}

/// Per-site bit columns over the sample axis: bit μ of column i is set when
/// sample μ has spin +1 at site i. Spin sums then reduce to popcounts, so the
/// accumulation is exact integer arithmetic and independent of evaluation
/// order.
fn site_bit_columns(n: usize, samples: &[&[i8]]) -> Vec<Vec<u64>> {
    let b = samples.len();
    let words = b.div_ceil(64);
    let mut columns = vec![vec![0u64; words]; n];
    for (mu, sample) in samples.iter().enumerate() {
        debug_assert_eq!(sample.len(), n);
        for (i, &s) in sample.iter().enumerate() {
            if s == 1 {
                columns[i][mu / 64] |= 1u64 << (mu % 64);
            }
        }
    }
    columns
}

/// Exact moment accumulation over spin samples of dimension `n`.
pub(crate) fn moments_from_samples(
    side: usize,
    n: usize,
    samples: &[&[i8]],
) -> Result<EmpiricalMoments, PatchError> {
    if samples.is_empty() {
        return Err(PatchError::EmptyPatchSet);
    }
    let b = samples.len();
    let columns = site_bit_columns(n, samples);
    let b_f = b as f64;
    let mu: Vec<f64> = columns
        .iter()
        .map(|col| {
            let ones: u64 = col.iter().map(|w| w.count_ones() as u64).sum();
            (2 * ones as i64 - b as i64) as f64 / b_f
        })
        .collect();

    let gamma: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let columns = &columns;
            let mu = &mu;
            (0..n).map(move |j| {
                if i == j {
                    return 1.0 - mu[i] * mu[i];
                }
                let disagree: u64 = columns[i]
                    .iter()
                    .zip(columns[j].iter())
                    .map(|(a, c)| (a ^ c).count_ones() as u64)
                    .sum();
                let pair_sum = b as i64 - 2 * disagree as i64;
                pair_sum as f64 / b_f - mu[i] * mu[j]
            })
        })
        .collect();

    EmpiricalMoments::from_parts(side, b as u64, mu, gamma)
}

/// Computes μ_i = ⟨S_i⟩ and Γ_ij = ⟨S_iS_j⟩ − μ_iμ_j over all patches.
///
/// Sums are exact integer counts, so the result does not depend on patch
/// order or on how the reduction is parallelized.
pub fn compute_moments(ps: &PatchSet) -> Result<EmpiricalMoments, PatchError> {
    let samples: Vec<&[i8]> = ps.patches().iter().map(|p| p.spins()).collect();
    moments_from_samples(ps.side(), ps.side() * ps.side(), &samples)
}

fn patch_record_len(side: usize) -> usize {
    (side * side).div_ceil(8)
}

/// Serializes a patch set: magic, little-endian u32 side, little-endian u64
/// count, then one bit-packed record per patch (bit 1 = spin +1, row-major,
/// most significant bit first).
pub fn patchset_to_bytes(ps: &PatchSet) -> Vec<u8> {
    let record = patch_record_len(ps.side());
    let mut out = Vec::with_capacity(20 + record * ps.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(ps.side() as u32).to_le_bytes());
    out.extend_from_slice(&(ps.len() as u64).to_le_bytes());
    for patch in ps.patches() {
        let mut rec = vec![0u8; record];
        for (k, &s) in patch.spins().iter().enumerate() {
            if s == 1 {
                rec[k / 8] |= 0x80 >> (k % 8);
            }
        }
        out.extend_from_slice(&rec);
    }
    out
}

pub fn patchset_from_bytes(bytes: &[u8]) -> Result<PatchSet, PatchError> {
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(PatchError::BadMagic);
    }
    let side = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    if side == 0 || count == 0 {
        return Err(PatchError::ZeroDimension);
    }
    let record = patch_record_len(side);
    let payload = &bytes[20..];
    if payload.len() != record * count {
        return Err(PatchError::LengthMismatch {
            expected: record * count,
            found: payload.len(),
        });
    }
    let n = side * side;
    let mut patches = Vec::with_capacity(count);
    for rec in payload.chunks_exact(record) {
        let spins: Vec<i8> = (0..n)
            .map(|k| {
                if (rec[k / 8] >> (7 - k % 8)) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        patches.push(SpinPatch::new(side, spins)?);
    }
    PatchSet::new(patches)
}

pub fn save_patchset(ps: &PatchSet, path: &Path) -> Result<(), PatchError> {
    let mut file = fs::File::create(path)?;
    file.write_all(&patchset_to_bytes(ps))?;
    Ok(())
}

pub fn load_patchset(path: &Path) -> Result<PatchSet, PatchError> {
    let bytes = fs::read(path)?;
    patchset_from_bytes(&bytes)
}
