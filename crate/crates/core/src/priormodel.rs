//! The six-parameter lattice prior: build it as a concrete model, read its
//! parameters back out of an inferred model, and sample synthetic patches.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    class_means, distance_profile, fit_exponential, AnalysisError, LinkKind, PriorParams,
    DEFAULT_FIT_RANGE,
};
use crate::gibbs::McConfig;
use crate::invising::IsingModel;
use crate::patchset::{site_index, PatchSet, SpinPatch};
use crate::seeding::stream_seed;

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("invalid prior parameters: {0}")]
    InvalidParams(String),
    #[error("lattice side {side} is below the minimum {min}")]
    LatticeTooSmall { side: usize, min: usize },
    #[error("patch count must be at least 1")]
    EmptyRequest,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Couplings beyond this distance are truncated to zero; about twice the
/// observed interaction range.
pub const DEFAULT_R_CUT: f64 = 8.0;

/// The on-disk prior description: the six parameters plus the uniform field
/// and the tail cutoff, as one flat object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorFile {
    pub w_nn_1: f64,
    pub w_nn_2: f64,
    pub w_nnn_1: f64,
    pub w_nnn_2: f64,
    pub a: f64,
    pub b: f64,
    pub h0: f64,
    pub r_cut: f64,
}

impl PriorFile {
    pub fn new(params: PriorParams, h0: f64) -> Self {
        Self {
            w_nn_1: params.w_nn_1,
            w_nn_2: params.w_nn_2,
            w_nnn_1: params.w_nnn_1,
            w_nnn_2: params.w_nnn_2,
            a: params.a,
            b: params.b,
            h0,
            r_cut: DEFAULT_R_CUT,
        }
    }

    pub fn params(&self) -> PriorParams {
        PriorParams {
            w_nn_1: self.w_nn_1,
            w_nn_2: self.w_nn_2,
            w_nnn_1: self.w_nnn_1,
            w_nnn_2: self.w_nnn_2,
            a: self.a,
            b: self.b,
        }
    }
}

/// Builds the prior on an L×L lattice: NN and NNN couplings by sublattice
/// class, an exponential tail a·e^{−|r−2|/b} elsewhere up to `r_cut`, and a
/// uniform field `h0`.
pub fn build_prior(params: &PriorParams, side: usize, h0: f64) -> Result<IsingModel, PriorError> {
    build_prior_with_cut(params, side, h0, DEFAULT_R_CUT)
}

pub fn build_prior_with_cut(
    params: &PriorParams,
    side: usize,
    h0: f64,
    r_cut: f64,
) -> Result<IsingModel, PriorError> {
    params
        .validate()
        .map_err(|_| PriorError::InvalidParams("parameters must be finite with b > 0".into()))?;
    if !h0.is_finite() || !r_cut.is_finite() || r_cut < 0.0 {
        return Err(PriorError::InvalidParams(
            "field and cutoff must be finite, cutoff nonnegative".into(),
        ));
    }
    if side < 4 {
        return Err(PriorError::LatticeTooSmall { side, min: 4 });
    }
    let n = side * side;
    let mut model = IsingModel::zeros(side);
    for i in 0..n {
        model.set_field(i, h0);
    }
    for yi in 1..=side {
        for xi in 1..=side {
            for yj in 1..=side {
                for xj in 1..=side {
                    let i = site_index(side, xi, yi);
                    let j = site_index(side, xj, yj);
                    if j <= i {
                        continue;
                    }
                    let dx = xi.abs_diff(xj);
                    let dy = yi.abs_diff(yj);
                    let r2 = dx * dx + dy * dy;
                    let w = match r2 {
                        1 => {
                            let cls = crate::analysis::classify_link((xi, yi), (xj, yj))
                                .expect("r = 1 is a link")
                                .cls;
                            if cls == 1 {
                                params.w_nn_1
                            } else {
                                params.w_nn_2
                            }
                        }
                        2 => {
                            let cls = crate::analysis::classify_link((xi, yi), (xj, yj))
                                .expect("r = √2 is a link")
                                .cls;
                            if cls == 1 {
                                params.w_nnn_1
                            } else {
                                params.w_nnn_2
                            }
                        }
                        _ => {
                            let r = (r2 as f64).sqrt();
                            if r <= r_cut {
                                params.a * (-(r - 2.0).abs() / params.b).exp()
                            } else {
                                0.0
                            }
                        }
                    };
                    if w != 0.0 {
                        model.set_coupling(i, j, w);
                    }
                }
            }
        }
    }
    Ok(model)
}

/// Reads the six parameters back from a lattice model: NN/NNN class means of
/// the couplings, and (a, b) as the average of the sublattice-A and
/// sublattice-B exponential fits over 2 ≤ r ≤ 6.
pub fn extract_params(model: &IsingModel) -> Result<PriorParams, PriorError> {
    if model.side() < 8 {
        return Err(PriorError::LatticeTooSmall {
            side: model.side(),
            min: 8,
        });
    }
    let (w_nn_1, w_nn_2) = class_means(model, LinkKind::Nn)?;
    let (w_nnn_1, w_nnn_2) = class_means(model, LinkKind::Nnn)?;
    let (r_min, r_max) = DEFAULT_FIT_RANGE;
    let fit_a = fit_exponential(&distance_profile(model, (1, 1))?, r_min, r_max)?;
    let fit_b = fit_exponential(&distance_profile(model, (2, 2))?, r_min, r_max)?;
    Ok(PriorParams {
        w_nn_1,
        w_nn_2,
        w_nnn_1,
        w_nnn_2,
        a: 0.5 * (fit_a.a + fit_b.a),
        b: 0.5 * (fit_a.b + fit_b.b),
    })
}

/// Draws `count` patches, each as the final state of its own Metropolis
/// chain seeded from (cfg.seed, patch index). Each chain runs
/// `burn_in + sweeps` sweeps from a random start.
pub fn generate_patches(
    model: &IsingModel,
    count: usize,
    cfg: &McConfig,
) -> Result<PatchSet, PriorError> {
    let side = model.side();
    if side == 0 {
        return Err(PriorError::LatticeTooSmall { side, min: 1 });
    }
    if count == 0 {
        return Err(PriorError::EmptyRequest);
    }
    let total_sweeps = cfg.burn_in + cfg.sweeps;
    let patches: Vec<SpinPatch> = (0..count)
        .into_par_iter()
        .map(|idx| {
            let seed = stream_seed(cfg.seed, idx as u64);
            let spins = crate::gibbs::simulate_state(model, cfg.temperature, total_sweeps, seed);
            let spins_i8: Vec<i8> = spins
                .iter()
                .map(|&s| if s > 0.0 { 1 } else { -1 })
                .collect();
            SpinPatch::new(side, spins_i8).expect("sampler emits ±1 spins")
        })
        .collect();
    Ok(PatchSet::new(patches).expect("count >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::classify_link;
    use crate::enumerate;
    use crate::patchset::compute_moments;

    /// A strongly dithered parameter set: checkerboard NN structure with a
    /// short ferromagnetic tail.
    fn dither_texture_params() -> PriorParams {
        PriorParams {
            w_nn_1: -0.85,
            w_nn_2: 0.2,
            w_nnn_1: -0.14,
            w_nnn_2: 0.4,
            a: 0.3,
            b: 1.1,
        }
    }

    #[test]
    fn zero_parameters_build_a_zero_matrix() {
        let params = PriorParams {
            w_nn_1: 0.0,
            w_nn_2: 0.0,
            w_nnn_1: 0.0,
            w_nnn_2: 0.0,
            a: 0.0,
            b: 1.0,
        };
        let model = build_prior(&params, 6, 0.0).unwrap();
        assert!(model.couplings().iter().all(|&v| v == 0.0));
        assert!(model.fields().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coupling_values_match_the_piecewise_definition() {
        let side = 16;
        let model = build_prior(&dither_texture_params(), side, 0.0).unwrap();
        // class-1 NN link
        let i = site_index(side, 1, 2);
        let j = site_index(side, 2, 2);
        assert_eq!(classify_link((1, 2), (2, 2)).unwrap().cls, 1);
        assert_eq!(model.w(i, j), -0.85);
        // r = 2 tail entries equal a exactly
        let i = site_index(side, 3, 5);
        let j = site_index(side, 5, 5);
        assert_eq!(model.w(i, j), 0.3);
        // r = 2 + b tail decays to a/e; closest lattice realization uses
        // an explicit radius check instead
        let r = 5.0f64;
        let i = site_index(side, 1, 1);
        let j = site_index(side, 6, 1);
        let want = 0.3 * (-(r - 2.0) / 1.1).exp();
        assert!((model.w(i, j) - want).abs() < 1e-15);
        // beyond the cutoff couplings vanish
        let i = site_index(side, 1, 1);
        let j = site_index(side, 16, 16);
        assert_eq!(model.w(i, j), 0.0);
    }

    #[test]
    fn tail_at_two_plus_b_is_a_over_e() {
        let params = PriorParams {
            b: 3.0, // 2 + b = 5 lands on an exact lattice distance
            ..dither_texture_params()
        };
        let side = 12;
        let model = build_prior(&params, side, 0.0).unwrap();
        let i = site_index(side, 2, 4);
        let j = site_index(side, 7, 4);
        let want = params.a / std::f64::consts::E;
        assert!((model.w(i, j) - want).abs() < 1e-15);
    }

    #[test]
    fn uniform_field_is_applied() {
        let model = build_prior(&dither_texture_params(), 8, -0.25).unwrap();
        assert!(model.fields().iter().all(|&h| h == -0.25));
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut params = dither_texture_params();
        params.b = 0.0;
        assert!(build_prior(&params, 8, 0.0).is_err());
        assert!(build_prior(&dither_texture_params(), 3, 0.0).is_err());
    }

    #[test]
    fn extract_inverts_build() {
        let params = dither_texture_params();
        let model = build_prior(&params, 16, 0.0).unwrap();
        let got = extract_params(&model).unwrap();
        // class means recover the inputs up to summation roundoff
        assert!((got.w_nn_1 - params.w_nn_1).abs() < 1e-12);
        assert!((got.w_nn_2 - params.w_nn_2).abs() < 1e-12);
        assert!((got.w_nnn_1 - params.w_nnn_1).abs() < 1e-12);
        assert!((got.w_nnn_2 - params.w_nnn_2).abs() < 1e-12);
        assert!((got.a - params.a).abs() <= 1e-6, "a = {}", got.a);
        assert!((got.b - params.b).abs() <= 1e-6, "b = {}", got.b);
    }

    #[test]
    fn extract_round_trips_across_the_fitted_range() {
        for (a, b) in [(0.1, 0.7), (0.16, 1.3), (0.3, 3.0)] {
            let params = PriorParams {
                w_nn_1: 0.07,
                w_nn_2: 0.32,
                w_nnn_1: 0.24,
                w_nnn_2: 0.22,
                a,
                b,
            };
            let model = build_prior(&params, 16, 0.0).unwrap();
            let got = extract_params(&model).unwrap();
            assert!((got.a - a).abs() <= 1e-6, "a: {} vs {a}", got.a);
            assert!((got.b - b).abs() <= 1e-6, "b: {} vs {b}", got.b);
        }
    }

    #[test]
    fn flat_couplings_mean_correctly_but_fail_the_fit() {
        let side = 8;
        let n = side * side;
        let mut w = vec![0.1; n * n];
        for i in 0..n {
            w[i * n + i] = 0.0;
        }
        let model = IsingModel::new(side, w, vec![0.0; n]).unwrap();
        let (c1, c2) = class_means(&model, LinkKind::Nn).unwrap();
        assert!((c1 - 0.1).abs() < 1e-12 && (c2 - 0.1).abs() < 1e-12);
        assert!(matches!(
            extract_params(&model),
            Err(PriorError::Analysis(AnalysisError::FitDegenerate))
        ));
    }

    #[test]
    fn prior_couplings_are_translation_covariant() {
        let side = 12;
        let model = build_prior(&dither_texture_params(), side, 0.0).unwrap();
        // away from boundaries, couplings depend only on (class, offset)
        for (x, y) in [(3usize, 3usize), (5, 7), (4, 6)] {
            for (dx, dy) in [(1usize, 0usize), (0, 1), (1, 1), (2, 0), (3, 1)] {
                let here = model.w(site_index(side, x, y), site_index(side, x + dx, y + dy));
                let there = model.w(
                    site_index(side, x + 2, y + 2),
                    site_index(side, x + 2 + dx, y + 2 + dy),
                );
                assert_eq!(here, there, "offset ({dx},{dy}) at ({x},{y})");
            }
        }
    }

    #[test]
    fn free_model_generates_balanced_patches() {
        let model = IsingModel::zeros(4);
        let cfg = McConfig {
            sweeps: 10,
            burn_in: 50,
            chains: 1,
            seed: 11,
            temperature: 1.0,
        };
        let b = 10_000;
        let ps = generate_patches(&model, b, &cfg).unwrap();
        assert_eq!(ps.len(), b);
        let m = compute_moments(&ps).unwrap();
        let sigma = 1.0 / (b as f64).sqrt();
        for &mu in m.mu() {
            assert!(mu.abs() <= 4.0 * sigma, "mu = {mu}");
        }
    }

    #[test]
    fn strong_field_saturates_patches() {
        let side = 3;
        let n = side * side;
        let model = IsingModel::new(side, vec![0.0; n * n], vec![3.0; n]).unwrap();
        let cfg = McConfig {
            sweeps: 10,
            burn_in: 50,
            chains: 1,
            seed: 13,
            temperature: 1.0,
        };
        let b = 5_000;
        let ps = generate_patches(&model, b, &cfg).unwrap();
        let total = (b * n) as f64;
        let ups: usize = ps
            .patches()
            .iter()
            .map(|p| p.spins().iter().filter(|&&s| s == 1).count())
            .sum();
        let frac = ups as f64 / total;
        let want = (1.0 + 3.0f64.tanh()) / 2.0;
        let sigma = (want * (1.0 - want) / total).sqrt();
        assert!(
            (frac - want).abs() <= 4.0 * sigma.max(1e-4),
            "frac {frac} vs {want}"
        );
    }

    #[test]
    fn generated_state_frequencies_match_enumeration() {
        let side = 2;
        let mut model = IsingModel::zeros(side);
        model.set_coupling(0, 1, 0.6);
        model.set_coupling(2, 3, 0.6);
        model.set_coupling(0, 2, -0.4);
        model.set_field(1, 0.3);
        let cfg = McConfig {
            sweeps: 30,
            burn_in: 120,
            chains: 1,
            seed: 17,
            temperature: 1.0,
        };
        let b = 100_000;
        let ps = generate_patches(&model, b, &cfg).unwrap();
        let probs = enumerate::boltzmann_probabilities(&model, 1.0);
        let mut counts = vec![0u64; 16];
        for patch in ps.patches() {
            let state: usize = patch
                .spins()
                .iter()
                .enumerate()
                .filter(|(_, &s)| s == 1)
                .map(|(i, _)| 1usize << i)
                .sum();
            counts[state] += 1;
        }
        for (state, (&count, &p)) in counts.iter().zip(probs.iter()).enumerate() {
            let sigma = (b as f64 * p * (1.0 - p)).sqrt();
            let dev = (count as f64 - b as f64 * p).abs();
            assert!(
                dev <= 4.0 * sigma,
                "state {state}: count {count}, expect {}",
                b as f64 * p
            );
        }
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let model = build_prior(&dither_texture_params(), 4, 0.0).unwrap();
        let cfg = McConfig {
            sweeps: 5,
            burn_in: 20,
            chains: 1,
            seed: 23,
            temperature: 1.0,
        };
        let a = generate_patches(&model, 20, &cfg).unwrap();
        let b = generate_patches(&model, 20, &cfg).unwrap();
        assert_eq!(a, b);
        let reseeded = McConfig { seed: 24, ..cfg };
        let other = generate_patches(&model, 20, &reseeded).unwrap();
        assert_ne!(a, other);
    }
}
