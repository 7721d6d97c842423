//! Monte-Carlo learning against enumerable teachers.

use bmprior_core::enumerate;
use bmprior_core::gibbs::{learn_mc, LearnConfig, McConfig, StepKind};
use bmprior_core::invising::{infer_nmf, IsingModel};
use bmprior_core::patchset::site_index;

fn nn_ferromagnet(side: usize, w: f64) -> IsingModel {
    let mut model = IsingModel::zeros(side);
    for y in 1..=side {
        for x in 1..side {
            model.set_coupling(site_index(side, x, y), site_index(side, x + 1, y), w);
        }
    }
    for y in 1..side {
        for x in 1..=side {
            model.set_coupling(site_index(side, x, y), site_index(side, x, y + 1), w);
        }
    }
    model
}

#[test]
fn learns_a_three_by_three_teacher_from_exact_moments() {
    let teacher = nn_ferromagnet(3, 0.3);
    let moments = enumerate::exact_moments(&teacher);
    let init = infer_nmf(&moments, Some(0.0)).unwrap();
    let cfg = LearnConfig {
        grad_tol: 0.015,
        max_iters: 40,
        reject_slack: 0.01,
        mc: McConfig {
            sweeps: 30_000,
            burn_in: 1_000,
            chains: 4,
            seed: 5,
            temperature: 1.0,
        },
        ..LearnConfig::default()
    };
    let outcome = learn_mc(&moments, &cfg, &init).unwrap();
    assert!(outcome.converged, "residual stuck at {}", outcome.residual);
    let n = teacher.n();
    for i in 0..n {
        for j in 0..n {
            let got = outcome.model.w(i, j);
            let want = teacher.w(i, j);
            assert!(
                (got - want).abs() <= 0.05,
                "w({i},{j}) = {got:.3} vs teacher {want:.3}"
            );
        }
    }
}

#[test]
fn starting_at_the_optimum_terminates_immediately() {
    let teacher = nn_ferromagnet(2, 0.3);
    let moments = enumerate::exact_moments(&teacher);
    let cfg = LearnConfig {
        grad_tol: 0.03,
        max_iters: 10,
        mc: McConfig {
            sweeps: 30_000,
            burn_in: 1_000,
            chains: 4,
            seed: 11,
            temperature: 1.0,
        },
        ..LearnConfig::default()
    };
    let outcome = learn_mc(&moments, &cfg, &teacher).unwrap();
    assert!(outcome.converged);
    assert!(
        outcome.iterations <= 2,
        "took {} iterations from the optimum",
        outcome.iterations
    );
}

#[test]
fn trace_records_every_iteration() {
    let teacher = nn_ferromagnet(2, 0.5);
    let moments = enumerate::exact_moments(&teacher);
    let zero = IsingModel::zeros(2);
    let cfg = LearnConfig {
        grad_tol: 0.02,
        max_iters: 30,
        mc: McConfig {
            sweeps: 20_000,
            burn_in: 500,
            chains: 4,
            seed: 3,
            temperature: 1.0,
        },
        ..LearnConfig::default()
    };
    let outcome = learn_mc(&moments, &cfg, &zero).unwrap();
    assert_eq!(outcome.trace.len(), outcome.iterations);
    for (k, entry) in outcome.trace.iter().enumerate() {
        assert_eq!(entry.iter, k + 1);
        assert!(entry.grad_inf_norm.is_finite());
    }
    // accepted steps never raise the residual by more than the slack
    for pair in outcome.trace.windows(2) {
        if pair[1].step != StepKind::Stalled {
            assert!(
                pair[1].grad_inf_norm <= pair[0].grad_inf_norm + cfg.reject_slack + 1e-12,
                "residual rose from {} to {}",
                pair[0].grad_inf_norm,
                pair[1].grad_inf_norm
            );
        }
    }
    assert!(outcome.converged);
}
