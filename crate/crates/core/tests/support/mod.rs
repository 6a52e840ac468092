//! Checks shared by the acceptance binary and the integration tests. Each
//! check returns a [`Check`] carrying the measured quantity, so callers can
//! either print it or assert on it.
#![allow(dead_code)]

use std::time::{Duration, Instant};

use advpower::attacks::{
    analytical_attack_all, analytical_attack_single, apply_perturbation, fgm_attack, observe_gains,
    scaling_attack, AttackBudget, AttackKind, AttackTarget, FgmSign, Scope, DEFAULT_EPSILON,
};
use advpower::dataset::{
    generate_dataset, instance_rng, Dataset, GainDistribution, LabeledInstance,
};
use advpower::harness::{run_sweep, uncertainty_sweep, AttackSpec, ExperimentPlan, Pipeline};
use advpower::model::{
    achieved_rates, rate_gain_gradient, rate_per_ue, rate_power_gradient, GainMatrix,
    PowerAllocation, SystemConfig,
};
use advpower::neural::{train, Batch, LossKind, Network, NetworkSpec, TrainConfig};
use advpower::solver::{brute_force_oracle, solve_maxmin, SolverConfig};
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRng, TestRunner};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Check {
    fn timed(
        name: &'static str,
        limit: Duration,
        start: Instant,
        ok: bool,
        detail: String,
    ) -> Self {
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let detail = if in_time {
            detail
        } else {
            format!("{detail}; over time limit {limit:?}")
        };
        Check {
            name,
            passed: ok && in_time,
            detail,
            elapsed,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }

    pub fn assert(&self) {
        assert!(self.passed, "{}", self.line());
    }
}

/// `|a - b|_2 / max(|a|_2, |b|_2)`, zero when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn central_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

// ---- model gradients ----

pub fn gradient_fidelity(instances: usize) -> advpower::Result<Check> {
    let start = Instant::now();
    let k = 3;
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for index in 0..instances {
        let mut rng = instance_rng(2024, index as u64);
        let n = rng.gen_range(1..=10);
        let config = SystemConfig::new(n, k, 10.0)?;
        let g: Vec<f64> = (0..n * k).map(|_| rng.gen_range(0.05..0.95)).collect();
        let raw: Vec<f64> = (0..n * k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let scale = config.total_power() / raw.iter().sum::<f64>();
        let p: Vec<f64> = raw.iter().map(|v| v * scale).collect();
        let gains = GainMatrix::from_flat(n, k, g.clone())?;
        let powers = PowerAllocation::from_flat(n, k, p.clone())?;
        for j in 0..k {
            let rate_of = |gf: &[f64], pf: &[f64]| {
                let gm = GainMatrix::from_flat(n, k, gf.to_vec()).unwrap();
                let pm = PowerAllocation::from_flat(n, k, pf.to_vec()).unwrap();
                rate_per_ue(&config, &gm, &pm).unwrap().as_slice()[j]
            };
            let fd_g = central_difference(&g, h, |gf| rate_of(gf, &p));
            let col: Vec<f64> = (0..n).map(|i| fd_g[i * k + j]).collect();
            let eta = rate_gain_gradient(&config, &gains, &powers, j)?;
            worst = worst.max(rel_error(&eta, &col));

            let fd_p = central_difference(&p, h, |pf| rate_of(&g, pf));
            let grad = rate_power_gradient(&config, &gains, &powers, j)?;
            let grad: Vec<f64> = grad.iter().copied().collect();
            worst = worst.max(rel_error(&grad, &fd_p));
        }
    }
    Ok(Check::timed(
        "gradient fidelity",
        Duration::from_secs(10),
        start,
        worst < 1e-5,
        format!("max relative error {worst:.2e} over {instances} instances (bound 1e-5)"),
    ))
}

// ---- network gradients ----

pub fn network_gradient_fidelity() -> advpower::Result<Check> {
    let start = Instant::now();
    let config = SystemConfig::new(4, 3, 10.0)?;
    let solver = SolverConfig {
        num_starts: 2,
        ..SolverConfig::default()
    };
    let data = generate_dataset(&config, 8, GainDistribution::Uniform, 77, &solver)?;
    let batch = Batch::from_instances(&data.instances)?;
    let h = 1e-6;
    let mut worst_param: f64 = 0.0;
    let mut worst_input: f64 = 0.0;
    for (seed, kind) in LossKind::all().into_iter().enumerate() {
        let net = Network::init(NetworkSpec::new(&config, vec![8, 8]), seed as u64 + 3)?;
        let (_, grads) = net.param_gradients(kind, &config, &batch)?;
        let flat = net.params.to_flat();
        let mut probe = net.clone();
        let fd = central_difference(&flat, h, |x| {
            probe.params.set_flat(x).unwrap();
            probe.batch_loss(kind, &config, &batch).unwrap()
        });
        worst_param = worst_param.max(rel_error(&grads.to_flat(), &fd));

        for r in 0..batch.len() {
            let input: Vec<f64> = batch.inputs.row(r).to_vec();
            let label: Vec<f64> = batch.labels.row(r).to_vec();
            let label_min = batch.label_min[r];
            let analytic = net.input_gradient(kind, &config, &input, &label, label_min, None)?;
            let fd = central_difference(&input, h, |x| {
                let one = Batch {
                    inputs: Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap(),
                    labels: Array2::from_shape_vec((1, label.len()), label.clone()).unwrap(),
                    label_min: ndarray::Array1::from_elem(1, label_min),
                };
                net.batch_loss(kind, &config, &one).unwrap()
            });
            worst_input = worst_input.max(rel_error(&analytic, &fd));
        }
    }
    let worst = worst_param.max(worst_input);
    Ok(Check::timed(
        "network gradient fidelity",
        Duration::from_secs(30),
        start,
        worst < 1e-4,
        format!(
            "max relative error params {worst_param:.2e}, inputs {worst_input:.2e}, all four losses (bound 1e-4)"
        ),
    ))
}

// ---- solver ----

pub fn solver_soundness(instances: usize) -> advpower::Result<Check> {
    let start = Instant::now();
    let config = SystemConfig::new(2, 2, 10.0)?;
    let solver = SolverConfig::default();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut feasible = true;
    for index in 0..instances {
        let mut rng = instance_rng(99, index as u64);
        let gains = GainMatrix::new(Array2::from_shape_simple_fn((2, 2), || rng.gen::<f64>()))?;
        let (powers, solved) = solve_maxmin(&config, &gains, &solver)?;
        let (_, grid) = brute_force_oracle(&config, &gains, 21)?;
        worst_gap = worst_gap.max(grid - solved);
        feasible &= powers.is_feasible(&config);
    }
    Ok(Check::timed(
        "solver soundness",
        Duration::from_secs(120),
        start,
        feasible && worst_gap <= 0.05,
        format!(
            "worst oracle - solver gap {worst_gap:.4} bits over {instances} instances (bound 0.05), all feasible: {feasible}"
        ),
    ))
}

// ---- trained desk-scale setup ----

pub struct DeskSetup {
    pub config: SystemConfig,
    pub dataset: Dataset,
    pub models: Vec<(LossKind, Network)>,
    pub surrogate: Network,
    pub train_time: Duration,
    pub test_size: usize,
}

impl DeskSetup {
    pub fn train_set(&self) -> &[LabeledInstance] {
        self.dataset.split(0.5).0
    }

    pub fn test_set(&self) -> &[LabeledInstance] {
        &self.dataset.split(0.5).1[..self.test_size]
    }

    pub fn bs(&self) -> &Network {
        &self
            .models
            .iter()
            .find(|(k, _)| *k == LossKind::Custom)
            .expect("custom model trained")
            .1
    }

    pub fn pipeline(&self) -> advpower::Result<Pipeline<'_>> {
        Pipeline::new(&self.config, self.bs(), &self.surrogate)
    }
}

/// Generates `2 * train` instances, trains one network per loss on the first
/// half from the same seed, and a CUSTOM surrogate from another seed.
pub fn desk_setup(
    train_size: usize,
    test_size: usize,
    hidden: Vec<usize>,
    epochs: usize,
) -> advpower::Result<DeskSetup> {
    let start = Instant::now();
    let config = SystemConfig::new(4, 3, 10.0)?;
    let dataset = generate_dataset(
        &config,
        2 * train_size,
        GainDistribution::Uniform,
        1,
        &SolverConfig::default(),
    )?;
    let spec = NetworkSpec::new(&config, hidden);
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let (train_set, _) = dataset.split(0.5);
    let mut models = Vec::new();
    for kind in LossKind::all() {
        let (net, _) = train(spec.clone(), &cfg, kind, &config, train_set, &[])?;
        models.push((kind, net));
    }
    let sur_cfg = TrainConfig { rng_seed: 1, ..cfg };
    let (surrogate, _) = train(spec, &sur_cfg, LossKind::Custom, &config, train_set, &[])?;
    Ok(DeskSetup {
        config,
        dataset,
        models,
        surrogate,
        train_time: start.elapsed(),
        test_size,
    })
}

pub fn loss_ordering(setup: &DeskSetup) -> advpower::Result<Check> {
    let start = Instant::now();
    let mut scores = Vec::new();
    for (kind, net) in &setup.models {
        let v = net
            .mean_normalized_min_rate(&setup.config, setup.test_set())?
            .unwrap_or(f64::NAN);
        scores.push((*kind, v));
    }
    let custom = scores
        .iter()
        .find(|(k, _)| *k == LossKind::Custom)
        .unwrap()
        .1;
    let best_other = scores
        .iter()
        .filter(|(k, _)| *k != LossKind::Custom)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let ok = custom - best_other >= 0.02 && custom >= 0.85;
    let shown: Vec<String> = scores
        .iter()
        .map(|(k, v)| format!("{k} {:.2}%", 100.0 * v))
        .collect();
    let mut check = Check::timed(
        "loss ordering",
        Duration::from_secs(3600),
        start,
        ok,
        format!(
            "{} on {} held-out; CUSTOM margin {:.2} points (need >= 2), CUSTOM >= 85%",
            shown.join(", "),
            setup.test_size,
            100.0 * (custom - best_other)
        ),
    );
    // Training is part of this criterion's budget.
    check.elapsed += setup.train_time;
    if check.elapsed > Duration::from_secs(3600) {
        check.passed = false;
    }
    Ok(check)
}

pub fn attack_ordering(setup: &DeskSetup) -> advpower::Result<Check> {
    let start = Instant::now();
    let pipeline = setup.pipeline()?;
    let plan = ExperimentPlan {
        attacks: AttackKind::all().to_vec(),
        targets: vec![AttackTarget::SingleUe(0), AttackTarget::AllUes],
        ratios: vec![0.05, 0.1],
        test_size: setup.test_size,
        ..ExperimentPlan::default()
    };
    let out = run_sweep(&pipeline, &plan, setup.test_set())?;
    let get = |attack: &str, target: &str, rho: f64| {
        out.rows
            .iter()
            .find(|r| r.attack == attack && r.target == target && r.rho == rho)
            .map(|r| r.mean_normalized)
            .expect("cell present")
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for rho in [0.05, 0.1] {
        let fgm_all = get("fgm", "all", rho);
        let ana_all = get("analytical", "all", rho);
        let sca_all = get("scaling", "all", rho);
        let fgm_one = get("fgm", "single:1", rho);
        let ana_one = get("analytical", "single:1", rho);
        ok &= fgm_all <= ana_all && ana_all <= sca_all;
        ok &= sca_all - fgm_all >= 0.05;
        ok &= fgm_all < fgm_one && ana_all < ana_one;
        parts.push(format!(
            "rho {rho}: fgm-all {:.2}% <= analytical-all {:.2}% <= scaling-all {:.2}%, fgm-ue1 {:.2}%, analytical-ue1 {:.2}%",
            100.0 * fgm_all,
            100.0 * ana_all,
            100.0 * sca_all,
            100.0 * fgm_one,
            100.0 * ana_one
        ));
    }
    Ok(Check::timed(
        "attack ordering",
        Duration::from_secs(600),
        start,
        ok,
        format!("{} over {} instances", parts.join("; "), setup.test_size),
    ))
}

/// Every attack, target and error model at zero budget against the baseline,
/// instance by instance, compared bit for bit.
pub fn zero_budget_identity(
    config: &SystemConfig,
    pipeline: &Pipeline<'_>,
    test: &[LabeledInstance],
) -> advpower::Result<Check> {
    let start = Instant::now();
    let mut targets: Vec<AttackTarget> =
        (0..config.num_ues()).map(AttackTarget::SingleUe).collect();
    targets.extend([AttackTarget::BestUe, AttackTarget::AllUes]);
    let mut mismatches = 0usize;
    let mut cells = 0usize;
    for (index, inst) in test.iter().enumerate() {
        let base = pipeline.no_attack(inst)?.normalized.map(f64::to_bits);
        for kind in AttackKind::all() {
            for &target in &targets {
                for (e_obs, e_exec) in [(0.0, 0.0), (0.1, 0.1)] {
                    let spec = AttackSpec::new(kind, target, 0.0).with_uncertainty(e_obs, e_exec);
                    let mut rng = instance_rng(5, index as u64);
                    let out = pipeline.evaluate_instance(inst, Some(&spec), &mut rng)?;
                    cells += 1;
                    if out.normalized.map(f64::to_bits) != base {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let plan = ExperimentPlan {
        ratios: vec![0.0],
        test_size: test.len(),
        ..ExperimentPlan::default()
    };
    let rows = run_sweep(pipeline, &plan, test)?.rows;
    let base = rows[0].mean_normalized.to_bits();
    let row_mismatch = rows
        .iter()
        .filter(|r| r.mean_normalized.to_bits() != base)
        .count();
    Ok(Check::timed(
        "zero-budget identity",
        Duration::from_secs(60),
        start,
        mismatches == 0 && row_mismatch == 0,
        format!(
            "{mismatches} of {cells} per-instance results and {row_mismatch} of {} sweep rows differ from the baseline bitwise",
            rows.len()
        ),
    ))
}

pub fn uncertainty_robustness(setup: &DeskSetup, noise_seeds: usize) -> advpower::Result<Check> {
    let start = Instant::now();
    let pipeline = setup.pipeline()?;
    let errors = [0.05, 0.1, 0.15, 0.2];
    let table = uncertainty_sweep(
        &pipeline,
        setup.test_set(),
        AttackTarget::SingleUe(0),
        0.1,
        &errors,
        noise_seeds,
        11,
    )?;
    let worst = table
        .observation
        .iter()
        .chain(&table.execution)
        .map(|v| v - table.exact)
        .fold(f64::NEG_INFINITY, f64::max);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{:.2}", 100.0 * x))
            .collect::<Vec<_>>()
            .join("/")
    };
    Ok(Check::timed(
        "uncertainty robustness",
        Duration::from_secs(900),
        start,
        worst <= 0.02,
        format!(
            "exact {:.2}%, observation {}%, execution {}%; largest increase {:.2} points (bound 2) over {noise_seeds} seeds x {} instances",
            100.0 * table.exact,
            fmt(&table.observation),
            fmt(&table.execution),
            100.0 * worst,
            setup.test_size
        ),
    ))
}

// ---- invariants ----

#[derive(Debug, Clone)]
pub struct Case {
    pub n: usize,
    pub k: usize,
    pub gains: Vec<f64>,
    pub powers: Vec<f64>,
    pub ratio: f64,
    pub ue: usize,
    pub seed: u64,
}

impl Case {
    pub fn config(&self) -> SystemConfig {
        SystemConfig::new(self.n, self.k, 10.0).unwrap()
    }
    pub fn gains(&self) -> GainMatrix {
        GainMatrix::from_flat(self.n, self.k, self.gains.clone()).unwrap()
    }
    pub fn powers(&self) -> PowerAllocation {
        PowerAllocation::from_flat(self.n, self.k, self.powers.clone()).unwrap()
    }
}

pub fn case_strategy() -> impl Strategy<Value = Case> {
    (1usize..=5, 1usize..=4).prop_flat_map(|(n, k)| {
        (
            proptest::collection::vec(0.0..=1.0f64, n * k),
            proptest::collection::vec(0.0..5.0f64, n * k),
            0.0..=1.0f64,
            0..k,
            any::<u64>(),
        )
            .prop_map(move |(gains, powers, ratio, ue, seed)| Case {
                n,
                k,
                gains,
                powers,
                ratio,
                ue,
                seed,
            })
    })
}

/// All perturbations the attacks can produce for a case, labeled with their scope.
pub fn all_perturbations(case: &Case) -> Vec<(String, Scope, advpower::model::Perturbation)> {
    let config = case.config();
    let gains = case.gains();
    let powers = case.powers();
    let net = Network::init(NetworkSpec::new(&config, vec![6]), case.seed).unwrap();
    let mut out = Vec::new();
    for scope in [Scope::Ue(case.ue), Scope::All] {
        let budget = AttackBudget::new(case.ratio)
            .unwrap()
            .absolute(&gains, scope);
        out.push((
            "scaling".into(),
            scope,
            scaling_attack(&gains, scope, case.ratio).unwrap(),
        ));
        let analytical = match scope {
            Scope::Ue(j) => {
                analytical_attack_single(&config, &gains, &powers, j, budget, DEFAULT_EPSILON)
            }
            Scope::All => analytical_attack_all(&config, &gains, &powers, budget, DEFAULT_EPSILON),
        };
        out.push(("analytical".into(), scope, analytical.unwrap()));
        let fgm = fgm_attack(&net, &config, &gains, scope, budget, 3.0, FgmSign::Ascend).unwrap();
        out.push(("fgm".into(), scope, fgm.perturbation));
    }
    out
}

fn runner(cases: u32) -> TestRunner {
    let config = PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn run_property(
    runner: &mut TestRunner,
    test: impl Fn(Case) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner
        .run(&case_strategy(), test)
        .map_err(|e| e.to_string())
}

pub fn prop_budget_soundness(case: Case) -> Result<(), TestCaseError> {
    let gains = case.gains();
    for (name, scope, delta) in all_perturbations(&case) {
        let budget = AttackBudget::new(case.ratio)
            .unwrap()
            .absolute(&gains, scope);
        let used = delta.l1_norm();
        prop_assert!(
            used <= budget * (1.0 + 1e-12) + 1e-12,
            "{name} {scope:?}: |delta| {used} > budget {budget}"
        );
    }
    Ok(())
}

pub fn prop_column_locality(case: Case) -> Result<(), TestCaseError> {
    for (name, scope, delta) in all_perturbations(&case) {
        if let Scope::Ue(j) = scope {
            for ((_, col), d) in delta.as_array().indexed_iter() {
                prop_assert!(
                    col == j || *d == 0.0,
                    "{name}: column {col} touched for UE {j}"
                );
            }
        }
    }
    Ok(())
}

/// Single-UE gradient attacks only lower gains and never below the floor.
pub fn prop_epsilon_floor(case: Case) -> Result<(), TestCaseError> {
    let config = case.config();
    let gains = case.gains();
    let powers = case.powers();
    let budget = AttackBudget::new(case.ratio)
        .unwrap()
        .absolute(&gains, Scope::Ue(case.ue));
    let delta =
        analytical_attack_single(&config, &gains, &powers, case.ue, budget, DEFAULT_EPSILON)
            .unwrap();
    for ((i, j), d) in delta.as_array().indexed_iter() {
        prop_assert!(*d <= 0.0);
        if *d != 0.0 {
            let after = gains.get(i, j) + d;
            prop_assert!(
                after >= DEFAULT_EPSILON - 1e-12,
                "gain ({i},{j}) lowered to {after}"
            );
        }
    }
    Ok(())
}

pub fn prop_clamp_range(case: Case) -> Result<(), TestCaseError> {
    let gains = case.gains();
    let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(case.seed);
    // Deliberately oversized changes in both directions.
    let wild = advpower::model::Perturbation(Array2::from_shape_fn(gains.dim(), |_| {
        rng.gen_range(-2.0..2.0)
    }));
    let err = case.ratio;
    let reported = apply_perturbation(&gains, &wild, err, &mut rng).unwrap();
    let observed = observe_gains(&gains, err, &mut rng).unwrap();
    for v in reported.as_array().iter().chain(observed.as_array().iter()) {
        prop_assert!((0.0..=1.0).contains(v), "value {v} escaped [0, 1]");
    }
    Ok(())
}

/// Gain-lowering attacks can never push a UE into outage.
pub fn prop_outage_soundness(case: Case) -> Result<(), TestCaseError> {
    let config = case.config();
    let gains = case.gains();
    let powers = case.powers();
    for (name, _, delta) in all_perturbations(&case) {
        if name == "fgm" {
            continue;
        }
        prop_assert!(delta.as_array().iter().all(|d| *d <= 0.0));
        let reported = GainMatrix::clamped(gains.as_array() + delta.as_array()).unwrap();
        let r = achieved_rates(&config, &gains, &reported, &powers).unwrap();
        prop_assert!(!r.any_outage(), "{name} caused an outage");
    }
    Ok(())
}

pub fn prop_softmax_sum(case: Case) -> Result<(), TestCaseError> {
    let config = case.config();
    let net = Network::init(NetworkSpec::new(&config, vec![7, 5]), case.seed).unwrap();
    let p = net.forward(&config, &case.gains()).unwrap();
    prop_assert!(p.as_array().iter().all(|v| *v >= 0.0));
    let total = p.total();
    prop_assert!(
        (total - config.total_power()).abs() <= 1e-9 * config.total_power(),
        "allocation sums to {total}"
    );
    Ok(())
}

pub type Property = fn(Case) -> Result<(), TestCaseError>;

pub const INVARIANTS: [(&str, Property); 6] = [
    ("budget soundness", prop_budget_soundness),
    ("column locality", prop_column_locality),
    ("epsilon floor", prop_epsilon_floor),
    ("clamp range", prop_clamp_range),
    ("outage soundness", prop_outage_soundness),
    ("softmax sum", prop_softmax_sum),
];

pub fn invariant_suite(cases: u32) -> Check {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (name, prop) in INVARIANTS {
        if let Err(e) = run_property(&mut runner(cases), prop) {
            failures.push(format!("{name}: {e}"));
        }
    }
    let names: Vec<&str> = INVARIANTS.iter().map(|(n, _)| *n).collect();
    let detail = if failures.is_empty() {
        format!("{} x {cases} cases: {}", INVARIANTS.len(), names.join(", "))
    } else {
        failures.join("; ")
    };
    Check::timed(
        "invariant suites",
        Duration::from_secs(120),
        start,
        failures.is_empty(),
        detail,
    )
}

pub fn run_one_invariant(name: &str, cases: u32) -> Result<(), String> {
    let (_, prop) = INVARIANTS
        .iter()
        .find(|(n, _)| *n == name)
        .expect("known invariant");
    run_property(&mut runner(cases), *prop)
}
