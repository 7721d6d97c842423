//! Closed-form inverse-Ising estimators.
//!
//! Both estimators start from the inverse of the connected correlation
//! matrix. The naive mean-field (NMF) couplings are the negated off-diagonal
//! entries of Γ⁻¹; the Bethe approximation (BA) refines each pair with a
//! per-link closed form that is exact on trees.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patchset::EmpiricalMoments;

#[derive(Debug, Error)]
pub enum InferError {
    #[error("covariance matrix is singular; pass a positive ridge")]
    SingularCovariance,
    #[error("coupling matrix must be square and match the field vector")]
    DimensionMismatch,
    #[error("coupling matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("non-finite value at ({0}, {1})")]
    NotFinite(usize, usize),
    #[error("atanh argument {value} out of domain for pair ({i}, {j})")]
    AtanhDomain { i: usize, j: usize, value: f64 },
}

/// A pairwise Ising / Boltzmann-machine model: symmetric zero-diagonal
/// couplings `w` (row-major N×N) and fields `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct IsingModel {
    /// Lattice side; 0 when the sites carry no lattice structure.
    #[serde(rename = "l")]
    side: usize,
    w: Vec<f64>,
    h: Vec<f64>,
}

/// Serialization shadow of [`IsingModel`]; deserialization revalidates the
/// invariants.
#[derive(Deserialize)]
struct RawModel {
    l: usize,
    w: Vec<f64>,
    h: Vec<f64>,
}

impl TryFrom<RawModel> for IsingModel {
    type Error = InferError;

    fn try_from(raw: RawModel) -> Result<Self, Self::Error> {
        IsingModel::new(raw.l, raw.w, raw.h)
    }
}

impl IsingModel {
    /// Builds a model, checking symmetry, zero diagonal, and finiteness.
    pub fn new(side: usize, w: Vec<f64>, h: Vec<f64>) -> Result<Self, InferError> {
        let n = h.len();
        if w.len() != n * n || (side > 0 && side * side != n) {
            return Err(InferError::DimensionMismatch);
        }
        for i in 0..n {
            if !h[i].is_finite() {
                return Err(InferError::NotFinite(i, i));
            }
            for j in 0..n {
                let v = w[i * n + j];
                if !v.is_finite() {
                    return Err(InferError::NotFinite(i, j));
                }
                if (v - w[j * n + i]).abs() > 1e-12 {
                    return Err(InferError::NotSymmetric(i, j));
                }
            }
            if w[i * n + i] != 0.0 {
                return Err(InferError::NotSymmetric(i, i));
            }
        }
        Ok(Self { side, w, h })
    }

    /// An all-zero lattice model with N = side² sites.
    pub fn zeros(side: usize) -> Self {
        let n = side * side;
        Self {
            side,
            w: vec![0.0; n * n],
            h: vec![0.0; n],
        }
    }

    /// An all-zero model without lattice structure.
    pub fn zeros_general(n: usize) -> Self {
        Self {
            side: 0,
            w: vec![0.0; n * n],
            h: vec![0.0; n],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n() + j]
    }

    pub fn h(&self, i: usize) -> f64 {
        self.h[i]
    }

    pub fn couplings(&self) -> &[f64] {
        &self.w
    }

    pub fn fields(&self) -> &[f64] {
        &self.h
    }

    /// Sets w_ij = w_ji = value. The diagonal stays zero.
    pub fn set_coupling(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j, "self-couplings have no meaning");
        let n = self.n();
        self.w[i * n + j] = value;
        self.w[j * n + i] = value;
    }

    pub fn set_field(&mut self, i: usize, value: f64) {
        self.h[i] = value;
    }

    /// Energy of a spin configuration: −Σ_{i<j} w_ij S_i S_j − Σ_i h_i S_i.
    pub fn energy(&self, spins: &[f64]) -> f64 {
        let n = self.n();
        debug_assert_eq!(spins.len(), n);
        let mut e = 0.0;
        for i in 0..n {
            let row = &self.w[i * n..(i + 1) * n];
            let mut local = 0.0;
            for j in 0..n {
                local += row[j] * spins[j];
            }
            e -= spins[i] * (0.5 * local + self.h[i]);
        }
        e
    }

    /// Largest |w_ij|.
    pub fn max_abs_coupling(&self) -> f64 {
        self.w.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }
}

/// Largest tolerated |μ_i| before atanh; saturated sites are clamped here.
const MU_CLAMP: f64 = 1.0 - 1e-6;
/// Below this |Γ⁻¹_ij| the BA link formula uses its w → 0 limit.
const EPS_DIV: f64 = 1e-12;
/// atanh arguments are clamped to ±(1 − ATANH_MARGIN).
const ATANH_MARGIN: f64 = 1e-12;
/// atanh arguments farther out of domain than this are reported as errors.
const ATANH_REJECT: f64 = 1e-3;
/// Condition-number estimate above which the automatic ridge kicks in.
const COND_LIMIT: f64 = 1e12;

fn clamped_mu(m: &EmpiricalMoments) -> Vec<f64> {
    m.mu()
        .iter()
        .map(|&v| v.clamp(-MU_CLAMP, MU_CLAMP))
        .collect()
}

fn cholesky_inverse(mat: &DMatrix<f64>) -> Option<(Vec<f64>, f64)> {
    let chol = mat.clone().cholesky()?;
    let diag = chol.l_dirty();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..mat.nrows() {
        let d = diag[(i, i)];
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let cond = (dmax / dmin).powi(2);
    let inv = chol.inverse();
    Some((inv.as_slice().to_vec(), cond))
}

fn plain_inverse(mat: &DMatrix<f64>) -> Option<Vec<f64>> {
    // symmetric positive-definite factorization first, then full pivoting
    if let Some((inv, _)) = cholesky_inverse(mat) {
        return Some(inv);
    }
    mat.clone()
        .full_piv_lu()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .map(|m| m.as_slice().to_vec())
}

/// Returns (Γ + ridge·I)⁻¹ as a row-major N×N matrix.
pub fn invert_covariance(m: &EmpiricalMoments, ridge: f64) -> Result<Vec<f64>, InferError> {
    let n = m.n();
    let mut mat = DMatrix::from_row_slice(n, n, m.gamma());
    for i in 0..n {
        mat[(i, i)] += ridge;
    }
    plain_inverse(&mat).ok_or(InferError::SingularCovariance)
}

/// Ridge policy: `Some(r)` inverts (Γ + rI); `None` tries the plain inverse
/// and falls back to ridge 1e-8·tr(Γ)/N when the matrix is singular or its
/// condition estimate exceeds 1e12.
fn effective_inverse(m: &EmpiricalMoments, ridge: Option<f64>) -> Result<Vec<f64>, InferError> {
    if let Some(r) = ridge {
        return invert_covariance(m, r);
    }
    let n = m.n();
    let mat = DMatrix::from_row_slice(n, n, m.gamma());
    if let Some((inv, cond)) = cholesky_inverse(&mat) {
        if cond <= COND_LIMIT {
            return Ok(inv);
        }
    }
    let trace: f64 = (0..n).map(|i| m.gamma_at(i, i)).sum();
    invert_covariance(m, 1e-8 * trace / n as f64)
}

fn checked_atanh(arg: f64, i: usize, j: usize) -> Result<f64, InferError> {
    if arg.abs() >= 1.0 + ATANH_REJECT {
        return Err(InferError::AtanhDomain { i, j, value: arg });
    }
    Ok(arg.clamp(-(1.0 - ATANH_MARGIN), 1.0 - ATANH_MARGIN).atanh())
}

/// Naive mean-field estimator: w = −Γ⁻¹ off the diagonal,
/// h_i = atanh μ_i − Σ_j w_ij μ_j.
pub fn infer_nmf(m: &EmpiricalMoments, ridge: Option<f64>) -> Result<IsingModel, InferError> {
    let n = m.n();
    let inv = effective_inverse(m, ridge)?;
    let mu = clamped_mu(m);
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = -0.5 * (inv[i * n + j] + inv[j * n + i]);
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    let h = (0..n)
        .map(|i| {
            let sum: f64 = (0..n).map(|j| w[i * n + j] * mu[j]).sum();
            mu[i].atanh() - sum
        })
        .collect();
    IsingModel::new(m.side(), w, h)
}

/// The pair function of the Bethe field equation, with its removable
/// singularities handled: f → μ₁ as t → 0 and f → (μ₁ − μ₂t)/(1 − t²) when
/// the denominator vanishes.
fn bethe_pair_f(mu1: f64, mu2: f64, t: f64) -> f64 {
    if t.abs() < EPS_DIV {
        return mu1;
    }
    let den = 2.0 * t * (mu2 - mu1 * t);
    if den.abs() < EPS_DIV {
        return (mu1 - mu2 * t) / (1.0 - t * t);
    }
    let one_minus_t2 = 1.0 - t * t;
    let disc = (one_minus_t2 * one_minus_t2 - 4.0 * t * (mu1 - mu2 * t) * (mu2 - mu1 * t)).max(0.0);
    (one_minus_t2 - disc.sqrt()) / den
}

/// Bethe-approximation estimator; exact on tree-structured models.
pub fn infer_ba(m: &EmpiricalMoments, ridge: Option<f64>) -> Result<IsingModel, InferError> {
    let n = m.n();
    let inv = effective_inverse(m, ridge)?;
    let mu = clamped_mu(m);
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let g = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            if g.abs() < EPS_DIV {
                continue;
            }
            let mi = mu[i];
            let mj = mu[j];
            let d = (1.0 + 4.0 * (1.0 - mi * mi) * (1.0 - mj * mj) * g * g)
                .max(0.0)
                .sqrt();
            let root = (0.25 - mi * mj * g * d
                + (2.0 * mi * mi * mj * mj - mi * mi - mj * mj) * g * g)
                .max(0.0)
                .sqrt();
            let arg = mi * mj - d / (2.0 * g) + root / g;
            let v = checked_atanh(arg, i, j)?;
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    let mut h = Vec::with_capacity(n);
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let t = w[i * n + j].tanh();
            if t.abs() < EPS_DIV {
                continue;
            }
            sum += checked_atanh(t * bethe_pair_f(mu[j], mu[i], t), i, j)?;
        }
        h.push(mu[i].atanh() - sum);
    }
    IsingModel::new(m.side(), w, h)
}
