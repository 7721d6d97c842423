//! JSON report objects written by the pipeline commands.
//!
//! Reports are schema-stable: field meanings only change together with
//! `report_version`. Every report embeds enough provenance (inputs, seeds,
//! full argv) to re-run the command that produced it.

use serde::{Deserialize, Serialize};

use bmprior_core::analysis::{
    CouplingHistograms, DistanceProfile, ExpFit, FrustrationReport, LinkRecord, NormalizedHistogram,
};
use bmprior_core::{EmpiricalMoments, IsingModel};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub argv: Vec<String>,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(inputs: Vec<String>, seed: Option<u64>) -> Self {
        Self {
            tool: "bmprior".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            argv: std::env::args().collect(),
            inputs,
            seed,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MomentsReport {
    pub report_version: u32,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub moments: EmpiricalMoments,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelReport {
    pub report_version: u32,
    pub provenance: Provenance,
    pub method: String,
    #[serde(flatten)]
    pub model: IsingModel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelSummary {
    pub l: usize,
    pub n: usize,
    pub w_min: f64,
    pub w_max: f64,
    pub w_mean_abs: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub h_mean: f64,
}

impl ModelSummary {
    pub fn of(model: &IsingModel) -> Self {
        let n = model.n();
        let w = model.couplings();
        let h = model.fields();
        let offdiag: Vec<f64> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| w[i * n + j])
            .collect();
        Self {
            l: model.side(),
            n,
            w_min: offdiag.iter().cloned().fold(f64::INFINITY, f64::min),
            w_max: offdiag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            w_mean_abs: offdiag.iter().map(|v| v.abs()).sum::<f64>() / offdiag.len().max(1) as f64,
            h_min: h.iter().cloned().fold(f64::INFINITY, f64::min),
            h_max: h.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            h_mean: h.iter().sum::<f64>() / n as f64,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MomentsSummary {
    pub l: usize,
    pub b: u64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_mean: f64,
}

impl MomentsSummary {
    pub fn of(m: &EmpiricalMoments) -> Self {
        Self {
            l: m.side(),
            b: m.sample_count(),
            mu_min: m.mu().iter().cloned().fold(f64::INFINITY, f64::min),
            mu_max: m.mu().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mu_mean: m.mu().iter().sum::<f64>() / m.n() as f64,
        }
    }
}

/// A fit that either succeeded or carries the failure reason.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<ExpFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FitOutcome {
    pub fn from_result(res: Result<ExpFit, impl std::fmt::Display>) -> Self {
        match res {
            Ok(fit) => Self {
                fit: Some(fit),
                error: None,
            },
            Err(e) => Self {
                fit: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Profiles {
    pub sublattice_a: DistanceProfile,
    pub sublattice_b: DistanceProfile,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Fits {
    pub sublattice_a: FitOutcome,
    pub sublattice_b: FitOutcome,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HistogramSection {
    pub nn: CouplingHistograms,
    pub nnn: CouplingHistograms,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fields: Option<NormalizedHistogram>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub magnetizations: Option<NormalizedHistogram>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LinkSection {
    pub nn: Vec<LinkRecord>,
    pub nnn: Vec<LinkRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub report_version: u32,
    pub provenance: Provenance,
    pub model_summary: ModelSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments_summary: Option<MomentsSummary>,
    pub profiles: Profiles,
    pub fits: Fits,
    pub histograms: HistogramSection,
    pub links: LinkSection,
    pub frustration: FrustrationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_slope: Option<f64>,
}
