//! Exact enumeration of small spin systems.
//!
//! Sums over all 2^N configurations, so it is only usable for N ≤ 20 or so.
//! Serves as the reference oracle for the samplers and estimators: it shares
//! no code path with either.

use crate::invising::IsingModel;
use crate::patchset::EmpiricalMoments;

/// Hard cap on the system size; 2^20 states is already a million.
pub const MAX_SPINS: usize = 20;

/// Decodes a state index into ±1 spins: bit i set means spin i is +1.
pub fn spins_of_state(n: usize, state: u32) -> Vec<f64> {
    (0..n)
        .map(|i| if (state >> i) & 1 == 1 { 1.0 } else { -1.0 })
        .collect()
}

fn assert_small(n: usize) {
    assert!(
        n <= MAX_SPINS,
        "exact enumeration limited to {MAX_SPINS} spins, got {n}"
    );
}

/// Boltzmann probabilities of all 2^N states at temperature `t`.
pub fn boltzmann_probabilities(model: &IsingModel, t: f64) -> Vec<f64> {
    let n = model.n();
    assert_small(n);
    let states = 1u32 << n;
    let energies: Vec<f64> = (0..states)
        .map(|s| model.energy(&spins_of_state(n, s)))
        .collect();
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (-(e - e_min) / t).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

/// Exact magnetizations and connected correlations of the model at T = 1.
pub fn exact_moments(model: &IsingModel) -> EmpiricalMoments {
    let n = model.n();
    let probs = boltzmann_probabilities(model, 1.0);
    let mut mu = vec![0.0; n];
    let mut ss = vec![0.0; n * n];
    for (state, &p) in probs.iter().enumerate() {
        let spins = spins_of_state(n, state as u32);
        for i in 0..n {
            mu[i] += p * spins[i];
            for j in 0..n {
                ss[i * n + j] += p * spins[i] * spins[j];
            }
        }
    }
    let gamma: Vec<f64> = (0..n * n).map(|k| ss[k] - mu[k / n] * mu[k % n]).collect();
    EmpiricalMoments::from_parts(model.side(), u64::MAX, mu, gamma)
        .expect("enumeration produces consistent moments")
}

/// Exact mean energy and energy variance at temperature `t`.
pub fn exact_energy_stats(model: &IsingModel, t: f64) -> (f64, f64) {
    let n = model.n();
    assert_small(n);
    let probs = boltzmann_probabilities(model, t);
    let mut e_mean = 0.0;
    let mut e2_mean = 0.0;
    for (state, &p) in probs.iter().enumerate() {
        let e = model.energy(&spins_of_state(n, state as u32));
        e_mean += p * e;
        e2_mean += p * e * e;
    }
    (e_mean, (e2_mean - e_mean * e_mean).max(0.0))
}

/// Exact specific heat per site, C = (⟨H²⟩ − ⟨H⟩²)/(N T²).
pub fn exact_specific_heat(model: &IsingModel, t: f64) -> f64 {
    let (_, var) = exact_energy_stats(model, t);
    var / (model.n() as f64 * t * t)
}
