//! End-to-end pipeline behaviour on a small trained setup.

mod support;

use std::sync::OnceLock;

use advpower::attacks::{AttackKind, AttackTarget};
use advpower::dataset::instance_rng;
use advpower::harness::{run_sweep, AttackSpec, ExperimentPlan, UncertaintyPoint};

fn setup() -> &'static support::DeskSetup {
    static SETUP: OnceLock<support::DeskSetup> = OnceLock::new();
    SETUP.get_or_init(|| support::desk_setup(300, 100, vec![16, 16], 10).unwrap())
}

#[test]
fn zero_budget_reproduces_baseline() {
    let s = setup();
    let p = s.pipeline().unwrap();
    support::zero_budget_identity(&s.config, &p, s.test_set())
        .unwrap()
        .assert();
}

#[test]
fn sweep_is_reproducible_across_thread_counts() {
    let s = setup();
    let p = s.pipeline().unwrap();
    let plan = ExperimentPlan {
        ratios: vec![0.05],
        uncertainty: vec![
            UncertaintyPoint::EXACT,
            UncertaintyPoint {
                observation_error: 0.1,
                execution_error: 0.1,
            },
        ],
        noise_seeds: 2,
        ..ExperimentPlan::default()
    };
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = one.install(|| run_sweep(&p, &plan, s.test_set()).unwrap());
    let b = four.install(|| run_sweep(&p, &plan, s.test_set()).unwrap());
    assert_eq!(a, b);
}

#[test]
fn single_target_restricts_perturbation_to_its_column() {
    let s = setup();
    let p = s.pipeline().unwrap();
    for kind in AttackKind::all() {
        let spec = AttackSpec::new(kind, AttackTarget::SingleUe(1), 0.1);
        for (i, inst) in s.test_set().iter().take(20).enumerate() {
            let out = p
                .evaluate_instance(inst, Some(&spec), &mut instance_rng(0, i as u64))
                .unwrap();
            for ((_, j), d) in out.perturbation.as_array().indexed_iter() {
                assert!(j == 1 || *d == 0.0, "{kind} touched column {j}");
            }
            for ((r, j), g) in out.reported.as_array().indexed_iter() {
                if j != 1 {
                    assert_eq!(*g, inst.gains.get(r, j));
                }
            }
        }
    }
}

#[test]
fn best_ue_is_no_better_than_any_fixed_ue() {
    let s = setup();
    let p = s.pipeline().unwrap();
    for (i, inst) in s.test_set().iter().take(30).enumerate() {
        let best = AttackSpec::new(AttackKind::Analytical, AttackTarget::BestUe, 0.1);
        let b = p
            .evaluate_instance(inst, Some(&best), &mut instance_rng(0, i as u64))
            .unwrap();
        for j in 0..s.config.num_ues() {
            let one = AttackSpec::new(AttackKind::Analytical, AttackTarget::SingleUe(j), 0.1);
            let o = p
                .evaluate_instance(inst, Some(&one), &mut instance_rng(0, i as u64))
                .unwrap();
            assert!(b.achieved_min <= o.achieved_min);
        }
    }
}

#[test]
fn gain_lowering_attacks_never_cause_outage() {
    let s = setup();
    let p = s.pipeline().unwrap();
    for kind in [AttackKind::Scaling, AttackKind::Analytical] {
        let spec = AttackSpec::new(kind, AttackTarget::AllUes, 0.2);
        for (i, inst) in s.test_set().iter().enumerate() {
            let out = p
                .evaluate_instance(inst, Some(&spec), &mut instance_rng(0, i as u64))
                .unwrap();
            assert!(!out.rates.any_outage());
        }
    }
}
