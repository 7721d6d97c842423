//! Metropolis sampling, Monte-Carlo maximum-likelihood learning, and
//! thermodynamic sweeps.
//!
//! One sweep proposes N single-spin flips at uniformly random sites. Chains
//! are independent, each seeded from (seed, chain index), so estimates are
//! bitwise reproducible for a fixed configuration regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invising::IsingModel;
use crate::patchset::EmpiricalMoments;
use crate::seeding::stream_seed;

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid Monte-Carlo configuration: {0}")]
    InvalidConfig(String),
    #[error("temperature grid must be positive and ascending")]
    InvalidTemperatureGrid,
    #[error("state histograms need at most {max} spins, got {n}")]
    TooManySpins { n: usize, max: usize },
    #[error("moments have {moments} sites but the model has {model}")]
    DimensionMismatch { moments: usize, model: usize },
}

/// Metropolis chain configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    /// Measured sweeps per chain; one sweep is N proposed flips.
    pub sweeps: usize,
    /// Discarded equilibration sweeps per chain.
    pub burn_in: usize,
    /// Independent chains averaged together.
    pub chains: usize,
    /// Base RNG seed; chain c uses the stream (seed, c).
    pub seed: u64,
    /// Sampling temperature of e^{−H/T}; the learned model lives at T = 1.
    pub temperature: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            sweeps: 10_000,
            burn_in: 1_000,
            chains: 4,
            seed: 0,
            temperature: 1.0,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<(), McError> {
        if self.sweeps == 0 {
            return Err(McError::InvalidConfig("sweeps must be >= 1".into()));
        }
        if self.chains == 0 {
            return Err(McError::InvalidConfig("chains must be >= 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(McError::InvalidConfig("temperature must be > 0".into()));
        }
        Ok(())
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// Sample averages from the Metropolis chains.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    m: Vec<f64>,
    c: Vec<f64>,
    energy_mean: f64,
    energy_var: f64,
    samples_used: u64,
}

impl McEstimate {
    /// Estimated magnetizations ⟨S_i⟩.
    pub fn m(&self) -> &[f64] {
        &self.m
    }

    /// Estimated connected correlations ⟨S_iS_j⟩ − m_i m_j, row-major N×N.
    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn c_at(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.m.len() + j]
    }

    /// Estimated second moment ⟨S_iS_j⟩.
    pub fn second_moment(&self, i: usize, j: usize) -> f64 {
        self.c_at(i, j) + self.m[i] * self.m[j]
    }

    pub fn energy_mean(&self) -> f64 {
        self.energy_mean
    }

    pub fn energy_var(&self) -> f64 {
        self.energy_var
    }

    pub fn samples_used(&self) -> u64 {
        self.samples_used
    }
}

/// Raw per-chain sums; merged across chains in fixed chain order.
struct ChainSums {
    spin_sum: Vec<f64>,
    pair_sum: Vec<i64>,
    energy_sum: f64,
    energy_sq_sum: f64,
    samples: u64,
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

struct Chain<'a> {
    model: &'a IsingModel,
    temperature: f64,
    spins: Vec<f64>,
    energy: f64,
    rng: Pcg64,
}

impl<'a> Chain<'a> {
    fn new(model: &'a IsingModel, temperature: f64, seed: u64) -> Self {
        let mut rng = Pcg64::seed_from_u64(seed);
        let spins: Vec<f64> = (0..model.n())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let energy = model.energy(&spins);
        Self {
            model,
            temperature,
            spins,
            energy,
            rng,
        }
    }

    /// N Metropolis proposals at random sites.
    fn sweep(&mut self) {
        let n = self.model.n();
        let w = self.model.couplings();
        let h = self.model.fields();
        for _ in 0..n {
            let k = self.rng.random_range(0..n);
            let row = &w[k * n..(k + 1) * n];
            let mut local = h[k];
            for (w_kj, s_j) in row.iter().zip(self.spins.iter()) {
                local += w_kj * s_j;
            }
            let delta = 2.0 * self.spins[k] * local;
            let accept =
                delta <= 0.0 || self.rng.random::<f64>() < (-delta / self.temperature).exp();
            if accept {
                self.spins[k] = -self.spins[k];
                self.energy += delta;
            }
        }
    }

    fn run(mut self, sweeps: usize, burn_in: usize, track_pairs: bool) -> ChainSums {
        let n = self.model.n();
        for _ in 0..burn_in {
            self.sweep();
        }
        // re-anchor the incrementally tracked energy after equilibration
        self.energy = self.model.energy(&self.spins);
        let mut sums = ChainSums {
            spin_sum: vec![0.0; n],
            pair_sum: vec![0; if track_pairs { n * (n - 1) / 2 } else { 0 }],
            energy_sum: 0.0,
            energy_sq_sum: 0.0,
            samples: 0,
        };
        for _ in 0..sweeps {
            self.sweep();
            for (acc, &s) in sums.spin_sum.iter_mut().zip(self.spins.iter()) {
                *acc += s;
            }
            if track_pairs {
                for i in 0..n {
                    let si = self.spins[i];
                    let base = upper_index(n, i, i + 1);
                    for j in (i + 1)..n {
                        if si == self.spins[j] {
                            sums.pair_sum[base + j - i - 1] += 1;
                        } else {
                            sums.pair_sum[base + j - i - 1] -= 1;
                        }
                    }
                }
            }
            sums.energy_sum += self.energy;
            sums.energy_sq_sum += self.energy * self.energy;
            sums.samples += 1;
        }
        sums
    }
}

/// Runs a single chain from a random start and returns the final spins.
/// Used for drawing independent configurations.
pub(crate) fn simulate_state(
    model: &IsingModel,
    temperature: f64,
    sweeps: usize,
    seed: u64,
) -> Vec<f64> {
    let mut chain = Chain::new(model, temperature, seed);
    for _ in 0..sweeps {
        chain.sweep();
    }
    chain.spins
}

/// Chains whose sums are held in memory at once; merging happens in fixed
/// chain order so the result does not depend on the chunk size or thread
/// count.
const CHAIN_CHUNK: usize = 128;

fn run_chains(model: &IsingModel, cfg: &McConfig) -> McEstimate {
    let n = model.n();
    let n_pairs = n * (n - 1) / 2;
    let mut spin_sum = vec![0.0f64; n];
    let mut pair_sum = vec![0i64; n_pairs];
    let mut e_sum = 0.0f64;
    let mut e2_sum = 0.0f64;
    let mut total = 0u64;

    let mut start = 0;
    while start < cfg.chains {
        let end = (start + CHAIN_CHUNK).min(cfg.chains);
        let chunk: Vec<ChainSums> = (start..end)
            .into_par_iter()
            .map(|chain_idx| {
                let seed = stream_seed(cfg.seed, chain_idx as u64);
                Chain::new(model, cfg.temperature, seed).run(cfg.sweeps, cfg.burn_in, true)
            })
            .collect();
        for s in &chunk {
            for (acc, v) in spin_sum.iter_mut().zip(s.spin_sum.iter()) {
                *acc += v;
            }
            for (acc, v) in pair_sum.iter_mut().zip(s.pair_sum.iter()) {
                *acc += v;
            }
            e_sum += s.energy_sum;
            e2_sum += s.energy_sq_sum;
            total += s.samples;
        }
        start = end;
    }

    let total_f = total as f64;
    let m: Vec<f64> = spin_sum.iter().map(|v| v / total_f).collect();
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        c[i * n + i] = 1.0 - m[i] * m[i];
        for j in (i + 1)..n {
            let second = pair_sum[upper_index(n, i, j)] as f64 / total_f;
            let conn = second - m[i] * m[j];
            c[i * n + j] = conn;
            c[j * n + i] = conn;
        }
    }

    let e_mean = e_sum / total_f;
    let e_var = (e2_sum / total_f - e_mean * e_mean).max(0.0);

    McEstimate {
        m,
        c,
        energy_mean: e_mean,
        energy_var: e_var,
        samples_used: total,
    }
}

/// Estimates model moments by Metropolis sampling. Deterministic for a fixed
/// (model, config) pair.
pub fn sample_moments(model: &IsingModel, cfg: &McConfig) -> Result<McEstimate, McError> {
    cfg.validate()?;
    Ok(run_chains(model, cfg))
}

/// Visit counts over all 2^N states, measured every `thin` sweeps after
/// burn-in. Only sensible for tiny systems.
pub struct StateHistogram {
    pub counts: Vec<u64>,
    pub samples: u64,
}

pub fn state_histogram(
    model: &IsingModel,
    cfg: &McConfig,
    thin: usize,
) -> Result<StateHistogram, McError> {
    cfg.validate()?;
    let n = model.n();
    if n > crate::enumerate::MAX_SPINS {
        return Err(McError::TooManySpins {
            n,
            max: crate::enumerate::MAX_SPINS,
        });
    }
    let thin = thin.max(1);
    let per_chain: Vec<Vec<u64>> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain_idx| {
            let seed = stream_seed(cfg.seed, chain_idx as u64);
            let mut chain = Chain::new(model, cfg.temperature, seed);
            for _ in 0..cfg.burn_in {
                chain.sweep();
            }
            let mut counts = vec![0u64; 1 << n];
            let mut sweeps_done = 0usize;
            while sweeps_done < cfg.sweeps {
                chain.sweep();
                sweeps_done += 1;
                if sweeps_done % thin == 0 {
                    let state: usize = chain
                        .spins
                        .iter()
                        .enumerate()
                        .filter(|(_, &s)| s > 0.0)
                        .map(|(i, _)| 1usize << i)
                        .sum();
                    counts[state] += 1;
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; 1 << n];
    for chain_counts in per_chain {
        for (acc, v) in counts.iter_mut().zip(chain_counts) {
            *acc += v;
        }
    }
    let samples = counts.iter().sum();
    Ok(StateHistogram { counts, samples })
}

/// One point of a specific-heat sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatPoint {
    pub t: f64,
    pub c: f64,
    pub c_stderr: f64,
}

/// Specific heat against temperature, with the peak location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatCurve {
    pub points: Vec<HeatPoint>,
    pub peak_t: f64,
    pub peak_c: f64,
}

impl HeatCurve {
    /// CSV with the header `T,C,C_stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,C,C_stderr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.t, p.c, p.c_stderr));
        }
        out
    }
}

/// Sweeps the temperature grid and measures C = (⟨H²⟩ − ⟨H⟩²)/(N T²) from
/// energy fluctuations. The standard error comes from the chain-to-chain
/// spread.
pub fn specific_heat_sweep(
    model: &IsingModel,
    t_grid: &[f64],
    cfg: &McConfig,
) -> Result<HeatCurve, McError> {
    cfg.validate()?;
    if t_grid.is_empty()
        || t_grid.iter().any(|&t| !(t > 0.0))
        || t_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(McError::InvalidTemperatureGrid);
    }
    let n = model.n() as f64;
    let mut points = Vec::with_capacity(t_grid.len());
    for (t_idx, &t) in t_grid.iter().enumerate() {
        let chain_c: Vec<f64> = (0..cfg.chains)
            .into_par_iter()
            .map(|chain_idx| {
                let seed = stream_seed(cfg.seed, (t_idx * cfg.chains + chain_idx) as u64);
                let sums = Chain::new(model, t, seed).run(cfg.sweeps, cfg.burn_in, false);
                let mean = sums.energy_sum / sums.samples as f64;
                let var = (sums.energy_sq_sum / sums.samples as f64 - mean * mean).max(0.0);
                var / (n * t * t)
            })
            .collect();
        let c = chain_c.iter().sum::<f64>() / chain_c.len() as f64;
        let c_stderr = if chain_c.len() > 1 {
            let var =
                chain_c.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / (chain_c.len() - 1) as f64;
            (var / chain_c.len() as f64).sqrt()
        } else {
            0.0
        };
        points.push(HeatPoint { t, c, c_stderr });
    }
    let peak = points
        .iter()
        .cloned()
        .reduce(|best, p| if p.c > best.c { p } else { best })
        .expect("grid is nonempty");
    Ok(HeatCurve {
        points,
        peak_t: peak.t,
        peak_c: peak.c,
    })
}

/// Configuration of Monte-Carlo maximum-likelihood learning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnConfig {
    /// Stop when the ∞-norm of the moment gradient falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Ridge added to the diagonal curvature of the Newton step.
    pub newton_ridge: f64,
    /// Halvings allowed before a step type gives up.
    pub backtracks: usize,
    /// A step is accepted if it does not raise the residual by more than this.
    pub reject_slack: f64,
    /// Scale of the fallback gradient-ascent step.
    pub gradient_step: f64,
    pub mc: McConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-3,
            max_iters: 100,
            newton_ridge: 1e-4,
            backtracks: 4,
            reject_slack: 0.01,
            gradient_step: 0.5,
            mc: McConfig::default(),
        }
    }
}

/// What kind of step an iteration took.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepKind {
    Newton,
    Gradient,
    /// No proposal lowered the residual; parameters kept.
    Stalled,
    Converged,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Newton => "newton",
            StepKind::Gradient => "gradient",
            StepKind::Stalled => "stalled",
            StepKind::Converged => "converged",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnIteration {
    pub iter: usize,
    pub grad_inf_norm: f64,
    pub step: StepKind,
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub model: IsingModel,
    pub converged: bool,
    pub iterations: usize,
    /// ∞-norm of the moment gradient at the returned model.
    pub residual: f64,
    pub trace: Vec<LearnIteration>,
}

/// Parameter vector: fields first, then the upper-triangle couplings.
#[derive(Clone)]
struct Params {
    n: usize,
    h: Vec<f64>,
    w_upper: Vec<f64>,
}

impl Params {
    fn from_model(model: &IsingModel) -> Self {
        let n = model.n();
        let mut w_upper = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                w_upper.push(model.w(i, j));
            }
        }
        Self {
            n,
            h: model.fields().to_vec(),
            w_upper,
        }
    }

    fn to_model(&self, side: usize) -> IsingModel {
        let n = self.n;
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.w_upper[upper_index(n, i, j)];
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
        IsingModel::new(side, w, self.h.clone()).expect("triangular storage is symmetric")
    }

    fn stepped(&self, dh: &[f64], dw: &[f64], scale: f64) -> Self {
        Self {
            n: self.n,
            h: self.h.iter().zip(dh).map(|(v, d)| v + scale * d).collect(),
            w_upper: self
                .w_upper
                .iter()
                .zip(dw)
                .map(|(v, d)| v + scale * d)
                .collect(),
        }
    }
}

/// Moment gradient (data − model) split into field and coupling parts.
fn moment_gradient(data: &EmpiricalMoments, est: &McEstimate) -> (Vec<f64>, Vec<f64>, f64) {
    let n = data.n();
    let g_h: Vec<f64> = data
        .mu()
        .iter()
        .zip(est.m())
        .map(|(mu, m)| mu - m)
        .collect();
    let mut g_w = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let target = data.gamma_at(i, j) + data.mu()[i] * data.mu()[j];
            g_w.push(target - est.second_moment(i, j));
        }
    }
    let norm = g_h
        .iter()
        .chain(g_w.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    (g_h, g_w, norm)
}

/// Maximizes the data log-likelihood by moment matching with Monte-Carlo
/// estimates: damped Newton steps on a diagonal susceptibility curvature,
/// falling back to gradient ascent with backtracking. Returns the best
/// iterate seen, flagged unconverged when the gradient tolerance was not
/// reached within `max_iters`.
pub fn learn_mc(
    data: &EmpiricalMoments,
    cfg: &LearnConfig,
    init: &IsingModel,
) -> Result<LearnOutcome, McError> {
    cfg.mc.validate()?;
    if data.n() != init.n() {
        return Err(McError::DimensionMismatch {
            moments: data.n(),
            model: init.n(),
        });
    }
    let n = data.n();
    let side = data.side();
    let mut eval_counter = 0u64;
    let estimate = |params: &Params, counter: &mut u64| -> McEstimate {
        let seed = stream_seed(cfg.mc.seed, 0x4c4541524e ^ *counter);
        *counter += 1;
        run_chains(&params.to_model(side), &cfg.mc.with_seed(seed))
    };

    let mut params = Params::from_model(init);
    let mut est = estimate(&params, &mut eval_counter);
    let (mut g_h, mut g_w, mut residual) = moment_gradient(data, &est);

    let mut best_params = params.clone();
    let mut best_residual = residual;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iters {
        iterations = iter;
        if residual < cfg.grad_tol {
            converged = true;
            trace.push(LearnIteration {
                iter,
                grad_inf_norm: residual,
                step: StepKind::Converged,
            });
            break;
        }

        // diagonal curvature: variance of each sufficient statistic
        let curv_h: Vec<f64> = est.m().iter().map(|m| 1.0 - m * m).collect();
        let mut curv_w = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let s = est.second_moment(i, j);
                curv_w.push(1.0 - s * s);
            }
        }
        let dh_newton: Vec<f64> = g_h
            .iter()
            .zip(curv_h.iter())
            .map(|(g, c)| g / (c + cfg.newton_ridge))
            .collect();
        let dw_newton: Vec<f64> = g_w
            .iter()
            .zip(curv_w.iter())
            .map(|(g, c)| g / (c + cfg.newton_ridge))
            .collect();

        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..=cfg.backtracks {
            let cand = params.stepped(&dh_newton, &dw_newton, scale);
            let cand_est = estimate(&cand, &mut eval_counter);
            let (ch, cw, cres) = moment_gradient(data, &cand_est);
            if cres <= residual + cfg.reject_slack {
                accepted = Some((cand, cand_est, ch, cw, cres, StepKind::Newton));
                break;
            }
            scale *= 0.5;
        }
        if accepted.is_none() {
            let mut scale = cfg.gradient_step;
            for _ in 0..=cfg.backtracks {
                let cand = params.stepped(&g_h, &g_w, scale);
                let cand_est = estimate(&cand, &mut eval_counter);
                let (ch, cw, cres) = moment_gradient(data, &cand_est);
                if cres <= residual + cfg.reject_slack {
                    accepted = Some((cand, cand_est, ch, cw, cres, StepKind::Gradient));
                    break;
                }
                scale *= 0.5;
            }
        }

        match accepted {
            Some((cand, cand_est, ch, cw, cres, kind)) => {
                params = cand;
                est = cand_est;
                g_h = ch;
                g_w = cw;
                residual = cres;
                trace.push(LearnIteration {
                    iter,
                    grad_inf_norm: residual,
                    step: kind,
                });
            }
            None => {
                // remeasure in place; the rejection may have been noise
                est = estimate(&params, &mut eval_counter);
                let (ch, cw, cres) = moment_gradient(data, &est);
                g_h = ch;
                g_w = cw;
                residual = cres;
                trace.push(LearnIteration {
                    iter,
                    grad_inf_norm: residual,
                    step: StepKind::Stalled,
                });
            }
        }
        if residual < best_residual {
            best_residual = residual;
            best_params = params.clone();
        }
    }
    if residual < cfg.grad_tol {
        converged = true;
    }

    let (final_params, final_residual) = if converged || residual <= best_residual {
        (params, residual)
    } else {
        (best_params, best_residual)
    };
    Ok(LearnOutcome {
        model: final_params.to_model(side),
        converged,
        iterations,
        residual: final_residual,
        trace,
    })
}
