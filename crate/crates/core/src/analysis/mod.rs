//! Post-inference analytics on lattice models: sublattice link
//! classification, distance-averaged coupling profiles, histograms,
//! exponential decay fits, frustration counts, and Fourier spectra.

mod fit;
mod rbody;
mod spectrum;

pub use fit::{fit_exponential, ExpFit, DEFAULT_FIT_RANGE};
pub use rbody::{r_body_solution, RBodySolution};
pub use spectrum::{
    spectrum_of_field, spectrum_of_image, spectrum_of_patches, synthetic_inverse_frequency_field,
    SpectrumCurve,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invising::IsingModel;
use crate::patchset::{site_index, EmpiricalMoments};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("sites ({0}, {1}) and ({2}, {3}) are not an NN or NNN pair")]
    NotALink(usize, usize, usize, usize),
    #[error("lattice side {side} is below the minimum {min} for this analysis")]
    LatticeTooSmall { side: usize, min: usize },
    #[error("profile origin must be (1,1) or (2,2), got ({0}, {1})")]
    InvalidOrigin(usize, usize),
    #[error("fewer than {min} profile points inside the fit range")]
    TooFewPoints { min: usize },
    #[error("profile value {value} at r = {r} is not positive; cannot fit in log space")]
    FitDomain { r: usize, value: f64 },
    #[error("profile has no decaying trend; decay length is not positive")]
    FitDegenerate,
    #[error("moments have {moments} sites but the model has {model}")]
    DimensionMismatch { moments: usize, model: usize },
    #[error("histogram bin width must be positive")]
    BadBinWidth,
    #[error("histogram would need {needed} bins (limit {max}); bin width is too fine for the data range")]
    TooManyBins { needed: u64, max: usize },
    #[error("image is {width}x{height}; spectra need a square side of at least 8")]
    BadSpectrumInput { width: usize, height: usize },
    #[error("fixed-point iteration did not settle after {0} steps")]
    DivergentIteration(usize),
}

/// Nearest-neighbor (r = 1) or next-nearest-neighbor (r = √2) link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    Nn,
    Nnn,
}

/// Sublattice class of a link; the lattice tiles with period 2, so every
/// in-lattice link lands in class 1 or class 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkClass {
    pub kind: LinkKind,
    pub cls: u8,
}

/// Classifies an NN or NNN link by the sublattice rule: horizontal links by
/// the parity of the left x, vertical and diagonal links by the parity of the
/// upper y. Odd parity is class 1.
pub fn classify_link(r_i: (usize, usize), r_j: (usize, usize)) -> Result<LinkClass, AnalysisError> {
    let (xi, yi) = r_i;
    let (xj, yj) = r_j;
    let dx = xi.abs_diff(xj);
    let dy = yi.abs_diff(yj);
    let odd = |v: usize| v % 2 == 1;
    match (dx, dy) {
        (1, 0) => Ok(LinkClass {
            kind: LinkKind::Nn,
            cls: if odd(xi.min(xj)) { 1 } else { 2 },
        }),
        (0, 1) => Ok(LinkClass {
            kind: LinkKind::Nn,
            cls: if odd(yi.min(yj)) { 1 } else { 2 },
        }),
        (1, 1) => Ok(LinkClass {
            kind: LinkKind::Nnn,
            cls: if odd(yi.min(yj)) { 1 } else { 2 },
        }),
        _ => Err(AnalysisError::NotALink(xi, yi, xj, yj)),
    }
}

/// One classified link with its coupling value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkRecord {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub cls: u8,
    pub w: f64,
}

fn require_side(model: &IsingModel, min: usize) -> Result<usize, AnalysisError> {
    let side = model.side();
    if side < min {
        return Err(AnalysisError::LatticeTooSmall { side, min });
    }
    Ok(side)
}

/// Every in-lattice link of the requested kind, with class and coupling.
pub fn link_list(model: &IsingModel, kind: LinkKind) -> Result<Vec<LinkRecord>, AnalysisError> {
    let side = require_side(model, 2)?;
    let mut out = Vec::new();
    let mut push = |from: (usize, usize), to: (usize, usize)| {
        let cls = classify_link(from, to)
            .expect("generated pairs are links")
            .cls;
        let i = site_index(side, from.0, from.1);
        let j = site_index(side, to.0, to.1);
        out.push(LinkRecord {
            from,
            to,
            cls,
            w: model.w(i, j),
        });
    };
    match kind {
        LinkKind::Nn => {
            for y in 1..=side {
                for x in 1..side {
                    push((x, y), (x + 1, y));
                }
            }
            for y in 1..side {
                for x in 1..=side {
                    push((x, y), (x, y + 1));
                }
            }
        }
        LinkKind::Nnn => {
            for y in 1..side {
                for x in 1..side {
                    push((x, y), (x + 1, y + 1));
                }
                for x in 2..=side {
                    push((x, y), (x - 1, y + 1));
                }
            }
        }
    }
    Ok(out)
}

/// Mean coupling of each sublattice class over all links of `kind`.
pub fn class_means(model: &IsingModel, kind: LinkKind) -> Result<(f64, f64), AnalysisError> {
    let links = link_list(model, kind)?;
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for link in &links {
        let idx = (link.cls - 1) as usize;
        sums[idx] += link.w;
        counts[idx] += 1;
    }
    Ok((
        sums[0] / counts[0].max(1) as f64,
        sums[1] / counts[1].max(1) as f64,
    ))
}

/// Distance-averaged couplings from a fixed origin column/row, boundary rows
/// and columns excluded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceProfile {
    /// The (x̂, ŷ) the averages are anchored to: (1,1) is sublattice A,
    /// (2,2) is sublattice B.
    pub origin: (usize, usize),
    pub r_values: Vec<usize>,
    pub w_bar: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl DistanceProfile {
    /// Value at integer distance r, if inside the profile.
    pub fn at(&self, r: usize) -> Option<(f64, f64)> {
        self.r_values
            .iter()
            .position(|&v| v == r)
            .map(|k| (self.w_bar[k], self.stderr[k]))
    }

    /// CSV with the header `r,w_bar,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,w_bar,stderr\n");
        for k in 0..self.r_values.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.r_values[k], self.w_bar[k], self.stderr[k]
            ));
        }
        out
    }
}

/// Averages w over horizontal runs from column x̂ (rows 2..L−1) and vertical
/// runs from row ŷ (columns 2..L−1); each distance r collects 2(L−2) terms.
/// The standard error is σ(r)/√(2(L−2)).
pub fn distance_profile(
    model: &IsingModel,
    origin: (usize, usize),
) -> Result<DistanceProfile, AnalysisError> {
    let side = require_side(model, 4)?;
    let (ox, oy) = origin;
    if origin != (1, 1) && origin != (2, 2) {
        return Err(AnalysisError::InvalidOrigin(ox, oy));
    }
    let r_max = side - ox.max(oy);
    let mut r_values = Vec::with_capacity(r_max);
    let mut w_bar = Vec::with_capacity(r_max);
    let mut stderr = Vec::with_capacity(r_max);
    for r in 1..=r_max {
        let mut terms = Vec::with_capacity(2 * (side - 2));
        for y in 2..=side - 1 {
            let i = site_index(side, ox, y);
            let j = site_index(side, ox + r, y);
            terms.push(model.w(i, j));
        }
        for x in 2..=side - 1 {
            let i = site_index(side, x, oy);
            let j = site_index(side, x, oy + r);
            terms.push(model.w(i, j));
        }
        let count = terms.len() as f64;
        let mean = terms.iter().sum::<f64>() / count;
        let var = terms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        r_values.push(r);
        w_bar.push(mean);
        stderr.push((var / count).sqrt());
    }
    Ok(DistanceProfile {
        origin,
        r_values,
        w_bar,
        stderr,
    })
}

/// A count histogram with bins of fixed width aligned to multiples of the
/// width, so the bin containing zero always starts at zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Left edge of bin 0.
    pub first_edge: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Largest tolerated bin count; wider data means the bin width does not
    /// fit the value scale.
    pub const MAX_BINS: usize = 1_000_000;

    pub fn from_values(values: &[f64], bin_width: f64) -> Result<Self, AnalysisError> {
        if !(bin_width > 0.0) {
            return Err(AnalysisError::BadBinWidth);
        }
        if values.is_empty() {
            return Ok(Self {
                bin_width,
                first_edge: 0.0,
                counts: vec![],
            });
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !min.is_finite() || !max.is_finite() {
            return Err(AnalysisError::BadBinWidth);
        }
        let first_bin = (min / bin_width).floor() as i64;
        let last_bin = (max / bin_width).floor() as i64;
        let span = (last_bin - first_bin + 1) as u64;
        if span > Self::MAX_BINS as u64 {
            return Err(AnalysisError::TooManyBins {
                needed: span,
                max: Self::MAX_BINS,
            });
        }
        let nbins = span as usize;
        let first_edge = first_bin as f64 * bin_width;
        let mut counts = vec![0u64; nbins];
        for &v in values {
            let mut k = ((v - first_edge) / bin_width).floor() as i64;
            k = k.clamp(0, nbins as i64 - 1);
            counts[k as usize] += 1;
        }
        Ok(Self {
            bin_width,
            first_edge,
            counts,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the bin containing `v`, if any.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let k = ((v - self.first_edge) / self.bin_width).floor() as i64;
        (k >= 0 && (k as usize) < self.counts.len()).then_some(k as usize)
    }
}

/// Default bin width of coupling histograms.
pub const DEFAULT_COUPLING_BIN: f64 = 0.02;

/// Per-class coupling histograms for one link kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingHistograms {
    pub kind: LinkKind,
    pub cls1: Histogram,
    pub cls2: Histogram,
}

/// Histograms P(w | link kind), separated by sublattice class. Every
/// in-lattice link of the kind lands in exactly one class histogram.
pub fn coupling_histogram(
    model: &IsingModel,
    kind: LinkKind,
    bin_width: f64,
) -> Result<CouplingHistograms, AnalysisError> {
    require_side(model, 3)?;
    let links = link_list(model, kind)?;
    let cls1: Vec<f64> = links.iter().filter(|l| l.cls == 1).map(|l| l.w).collect();
    let cls2: Vec<f64> = links.iter().filter(|l| l.cls == 2).map(|l| l.w).collect();
    Ok(CouplingHistograms {
        kind,
        cls1: Histogram::from_values(&cls1, bin_width)?,
        cls2: Histogram::from_values(&cls2, bin_width)?,
    })
}

/// Frustrated plaquettes: unit squares whose four NN couplings all exceed
/// `threshold` in magnitude and multiply to a negative sign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrustrationReport {
    pub threshold: f64,
    pub count: usize,
    /// Upper-left (x, y) of each frustrated plaquette.
    pub plaquettes: Vec<(usize, usize)>,
}

pub const DEFAULT_FRUSTRATION_THRESHOLD: f64 = 0.05;

pub fn frustration_count(
    model: &IsingModel,
    threshold: f64,
) -> Result<FrustrationReport, AnalysisError> {
    let side = require_side(model, 2)?;
    let mut plaquettes = Vec::new();
    for y in 1..side {
        for x in 1..side {
            let corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
            let mut product = 1.0f64;
            let mut strong = true;
            for k in 0..4 {
                let a = corners[k];
                let b = corners[(k + 1) % 4];
                let w = model.w(site_index(side, a.0, a.1), site_index(side, b.0, b.1));
                if w.abs() <= threshold {
                    strong = false;
                    break;
                }
                product *= w.signum();
            }
            if strong && product < 0.0 {
                plaquettes.push((x, y));
            }
        }
    }
    Ok(FrustrationReport {
        threshold,
        count: plaquettes.len(),
        plaquettes,
    })
}

/// A probability histogram: `mass` sums to one. For data with zero spread a
/// single bin of zero width carries all the mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedHistogram {
    /// Bin edges, one more than bins.
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl NormalizedHistogram {
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        assert!(!values.is_empty() && bins >= 1);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            return Self {
                edges: vec![min, max],
                mass: vec![1.0],
            };
        }
        let width = (max - min) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| min + k as f64 * width).collect();
        let mut mass = vec![0.0; bins];
        let share = 1.0 / values.len() as f64;
        for &v in values {
            let k = (((v - min) / width).floor() as usize).min(bins - 1);
            mass[k] += share;
        }
        Self { edges, mass }
    }

    /// Probability density per bin (mass over width); zero-width bins report
    /// their mass as-is.
    pub fn density(&self) -> Vec<f64> {
        self.mass
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let width = self.edges[k + 1] - self.edges[k];
                if width > 0.0 {
                    m / width
                } else {
                    *m
                }
            })
            .collect()
    }

    /// Mass-weighted mean of bin centers.
    pub fn mean(&self) -> f64 {
        self.mass
            .iter()
            .enumerate()
            .map(|(k, m)| m * 0.5 * (self.edges[k] + self.edges[k + 1]))
            .sum()
    }
}

pub const DEFAULT_FIELD_BINS: usize = 40;

/// Normalized histograms of the model's local fields P(h_i) and the data's
/// local magnetizations P(μ_i).
pub fn field_and_magnetization_histograms(
    model: &IsingModel,
    moments: &EmpiricalMoments,
    bins: usize,
) -> Result<(NormalizedHistogram, NormalizedHistogram), AnalysisError> {
    if model.n() != moments.n() {
        return Err(AnalysisError::DimensionMismatch {
            moments: moments.n(),
            model: model.n(),
        });
    }
    Ok((
        NormalizedHistogram::from_values(model.fields(), bins),
        NormalizedHistogram::from_values(moments.mu(), bins),
    ))
}

/// The six parameters of the lattice prior: two NN class couplings, two NNN
/// class couplings, and the exponential tail (a, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub w_nn_1: f64,
    pub w_nn_2: f64,
    pub w_nnn_1: f64,
    pub w_nnn_2: f64,
    pub a: f64,
    pub b: f64,
}

impl PriorParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        let vals = [
            self.w_nn_1,
            self.w_nn_2,
            self.w_nnn_1,
            self.w_nnn_2,
            self.a,
            self.b,
        ];
        if vals.iter().any(|v| !v.is_finite()) || !(self.b > 0.0) {
            return Err(AnalysisError::FitDegenerate);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_classification_examples() {
        let c = classify_link((1, 1), (2, 1)).unwrap();
        assert_eq!((c.kind, c.cls), (LinkKind::Nn, 1));
        let c = classify_link((2, 3), (2, 4)).unwrap();
        assert_eq!((c.kind, c.cls), (LinkKind::Nn, 1));
        let c = classify_link((5, 2), (6, 3)).unwrap();
        assert_eq!((c.kind, c.cls), (LinkKind::Nnn, 2));
        // order of endpoints does not matter
        let c = classify_link((6, 3), (5, 2)).unwrap();
        assert_eq!((c.kind, c.cls), (LinkKind::Nnn, 2));
        assert!(classify_link((1, 1), (3, 1)).is_err());
        assert!(classify_link((1, 1), (1, 1)).is_err());
    }

    #[test]
    fn every_link_gets_exactly_one_class() {
        let model = IsingModel::zeros(5);
        for kind in [LinkKind::Nn, LinkKind::Nnn] {
            let links = link_list(&model, kind).unwrap();
            for link in &links {
                assert!(link.cls == 1 || link.cls == 2);
                // period-2 translation in the transverse coordinate flips class
                let shifted = match kind {
                    LinkKind::Nn if link.from.1 == link.to.1 => {
                        ((link.from.0 + 1, link.from.1), (link.to.0 + 1, link.to.1))
                    }
                    _ => ((link.from.0, link.from.1 + 1), (link.to.0, link.to.1 + 1)),
                };
                if shifted.0 .0 <= 5 && shifted.0 .1 <= 5 && shifted.1 .0 <= 5 && shifted.1 .1 <= 5
                {
                    let c = classify_link(shifted.0, shifted.1).unwrap();
                    assert_ne!(c.cls, link.cls);
                }
            }
        }
    }

    #[test]
    fn link_counts_on_three_lattice() {
        let model = IsingModel::zeros(3);
        assert_eq!(link_list(&model, LinkKind::Nn).unwrap().len(), 12);
        assert_eq!(link_list(&model, LinkKind::Nnn).unwrap().len(), 8);
        let nn = coupling_histogram(&model, LinkKind::Nn, 0.02).unwrap();
        assert_eq!(nn.cls1.total() + nn.cls2.total(), 12);
        let nnn = coupling_histogram(&model, LinkKind::Nnn, 0.02).unwrap();
        assert_eq!(nnn.cls1.total() + nnn.cls2.total(), 8);
    }

    #[test]
    fn zero_model_profile_is_zero() {
        let model = IsingModel::zeros(6);
        let profile = distance_profile(&model, (1, 1)).unwrap();
        assert_eq!(profile.r_values, vec![1, 2, 3, 4, 5]);
        assert!(profile.w_bar.iter().all(|&v| v == 0.0));
        assert!(profile.stderr.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_couplings_average_exactly() {
        let side = 5;
        let n = side * side;
        let c = 0.37;
        let mut w = vec![c; n * n];
        for i in 0..n {
            w[i * n + i] = 0.0;
        }
        let model = IsingModel::new(side, w, vec![0.0; n]).unwrap();
        for origin in [(1, 1), (2, 2)] {
            let profile = distance_profile(&model, origin).unwrap();
            for (&v, &s) in profile.w_bar.iter().zip(profile.stderr.iter()) {
                assert!((v - c).abs() < 1e-13);
                assert!(s < 1e-13);
            }
        }
    }

    #[test]
    fn four_lattice_profile_matches_hand_average() {
        let side = 4;
        let mut model = IsingModel::zeros(side);
        // the four r=1 terms of the (1,1) profile
        let terms = [
            ((1usize, 2usize), (2usize, 2usize), 0.1),
            ((1, 3), (2, 3), 0.2),
            ((2, 1), (2, 2), 0.4),
            ((3, 1), (3, 2), 0.8),
        ];
        for &((x1, y1), (x2, y2), v) in &terms {
            model.set_coupling(site_index(side, x1, y1), site_index(side, x2, y2), v);
        }
        // a decoy coupling that the profile must not touch
        model.set_coupling(site_index(side, 1, 1), site_index(side, 2, 1), 9.0);
        let profile = distance_profile(&model, (1, 1)).unwrap();
        let (mean, stderr) = profile.at(1).unwrap();
        let want = (0.1 + 0.2 + 0.4 + 0.8) / 4.0;
        assert!((mean - want).abs() < 1e-15);
        let var: f64 = [0.1f64, 0.2, 0.4, 0.8]
            .iter()
            .map(|v| (v - want) * (v - want))
            .sum::<f64>()
            / 4.0;
        assert!((stderr - (var / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn profile_rejects_bad_origins_and_small_lattices() {
        let model = IsingModel::zeros(6);
        assert!(matches!(
            distance_profile(&model, (1, 2)),
            Err(AnalysisError::InvalidOrigin(1, 2))
        ));
        let tiny = IsingModel::zeros(3);
        assert!(matches!(
            distance_profile(&tiny, (1, 1)),
            Err(AnalysisError::LatticeTooSmall { .. })
        ));
    }

    #[test]
    fn zero_model_histograms_concentrate_at_zero() {
        let model = IsingModel::zeros(4);
        let h = coupling_histogram(&model, LinkKind::Nn, 0.02).unwrap();
        for hist in [&h.cls1, &h.cls2] {
            assert_eq!(hist.counts.len(), 1);
            assert_eq!(hist.bin_of(0.0), Some(0));
        }
    }

    #[test]
    fn two_valued_model_gives_two_delta_histograms() {
        let side = 6;
        let mut model = IsingModel::zeros(side);
        for link in link_list(&model, LinkKind::Nn).unwrap() {
            let v = if link.cls == 1 { -0.85 } else { 0.2 };
            model.set_coupling(
                site_index(side, link.from.0, link.from.1),
                site_index(side, link.to.0, link.to.1),
                v,
            );
        }
        let h = coupling_histogram(&model, LinkKind::Nn, 0.02).unwrap();
        assert_eq!(h.cls1.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.cls2.counts.iter().filter(|&&c| c > 0).count(), 1);
        let peak1 = h.cls1.bin_of(-0.85).unwrap();
        assert!(h.cls1.counts[peak1] > 0);
        let peak2 = h.cls2.bin_of(0.2).unwrap();
        assert!(h.cls2.counts[peak2] > 0);
    }

    #[test]
    fn ferromagnet_has_no_frustration() {
        let side = 4;
        let mut model = IsingModel::zeros(side);
        for link in link_list(&model, LinkKind::Nn).unwrap() {
            model.set_coupling(
                site_index(side, link.from.0, link.from.1),
                site_index(side, link.to.0, link.to.1),
                0.5,
            );
        }
        let report = frustration_count(&model, 0.05).unwrap();
        assert_eq!(report.count, 0);
    }

    #[test]
    fn single_negative_link_frustrates_its_plaquettes() {
        let side = 4;
        let mut model = IsingModel::zeros(side);
        for link in link_list(&model, LinkKind::Nn).unwrap() {
            model.set_coupling(
                site_index(side, link.from.0, link.from.1),
                site_index(side, link.to.0, link.to.1),
                0.5,
            );
        }
        // interior vertical link (2,2)-(2,3) borders plaquettes (1,2) and (2,2)
        model.set_coupling(site_index(side, 2, 2), site_index(side, 2, 3), -0.5);
        let report = frustration_count(&model, 0.05).unwrap();
        assert_eq!(report.count, 2);
        assert!(report.plaquettes.contains(&(1, 2)));
        assert!(report.plaquettes.contains(&(2, 2)));
    }

    #[test]
    fn frustration_is_scale_and_field_invariant() {
        let side = 5;
        let mut model = IsingModel::zeros(side);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_pcg::Pcg64::seed_from_u64(3);
        for link in link_list(&model, LinkKind::Nn).unwrap() {
            let mag = rng.random_range(0.2..1.0f64);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            model.set_coupling(
                site_index(side, link.from.0, link.from.1),
                site_index(side, link.to.0, link.to.1),
                mag * sign,
            );
        }
        let base = frustration_count(&model, 0.05).unwrap();
        assert!(base.count > 0, "random signs should frustrate something");

        let scaled_w: Vec<f64> = model.couplings().iter().map(|v| 2.0 * v).collect();
        let flipped_h: Vec<f64> = model.fields().iter().map(|v| -v - 0.3).collect();
        let scaled = IsingModel::new(side, scaled_w, flipped_h).unwrap();
        let other = frustration_count(&scaled, 0.05).unwrap();
        assert_eq!(base.count, other.count);
        assert_eq!(base.plaquettes, other.plaquettes);
    }

    #[test]
    fn absurd_value_ranges_do_not_allocate() {
        let err = Histogram::from_values(&[0.0, 1.0e9], 0.02).unwrap_err();
        assert!(matches!(err, AnalysisError::TooManyBins { .. }));
    }

    #[test]
    fn degenerate_histogram_is_single_bin_with_unit_mass() {
        let h = NormalizedHistogram::from_values(&[0.3; 12], 40);
        assert_eq!(h.mass, vec![1.0]);
        assert!((h.mean() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn normalized_histogram_mass_sums_to_one() {
        let values: Vec<f64> = (0..100).map(|k| (k as f64) * 0.01 - 0.3).collect();
        let h = NormalizedHistogram::from_values(&values, 40);
        let total: f64 = h.mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // density integrates to one as well
        let integral: f64 = h
            .density()
            .iter()
            .enumerate()
            .map(|(k, d)| d * (h.edges[k + 1] - h.edges[k]))
            .sum();
        assert!((integral - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmf_fields_of_independent_spins_concentrate_at_atanh() {
        let n = 16;
        let mu = vec![0.3; n];
        let mut gamma = vec![0.0; n * n];
        for i in 0..n {
            gamma[i * n + i] = 1.0 - 0.09;
        }
        let m = EmpiricalMoments::from_parts(4, 1_000, mu, gamma).unwrap();
        let model = crate::invising::infer_nmf(&m, Some(0.0)).unwrap();
        let (h_hist, mu_hist) = field_and_magnetization_histograms(&model, &m, 40).unwrap();
        assert_eq!(h_hist.mass, vec![1.0]);
        let h_loc = h_hist.edges[0];
        assert!((h_loc - 0.3f64.atanh()).abs() < 1e-9);
        assert!((h_loc - 0.3095).abs() < 1e-4);
        assert_eq!(mu_hist.mass, vec![1.0]);
    }
}
