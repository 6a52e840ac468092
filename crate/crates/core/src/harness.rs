//! End-to-end evaluation: the adversary observes the gains, crafts a
//! perturbation, the perturbed gains reach the BS, the BS allocates with its
//! network, and the UEs get whatever rate survives the true channel.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{
    analytical_attack_all, analytical_attack_single, apply_perturbation, best_ue_selection,
    fgm_attack, observe_gains, scaling_attack, AttackBudget, AttackKind, AttackTarget,
    FgmReference, FgmSign, Scope, UncertaintyModel, DEFAULT_EPSILON,
};
use crate::dataset::{sidecar_path, write_json, LabeledInstance};
use crate::error::{Error, Result};
use crate::model::{
    achieved_rates, argmin, normalized_min_rate, rates_unchecked, AchievedRates, GainMatrix,
    Perturbation, PowerAllocation, SystemConfig,
};
use crate::neural::{train, LossKind, Network, NetworkSpec, TrainConfig};
use crate::solver::{solve_maxmin, SolverConfig};

pub const RESULTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FgmOptions {
    pub sign: FgmSign,
    pub reference: FgmReference,
}

/// One attack configuration applied to an instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub target: AttackTarget,
    pub ratio: f64,
    pub epsilon: f64,
    pub uncertainty: UncertaintyModel,
    pub fgm: FgmOptions,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, target: AttackTarget, ratio: f64) -> Self {
        Self {
            kind,
            target,
            ratio,
            epsilon: DEFAULT_EPSILON,
            uncertainty: UncertaintyModel::none(),
            fgm: FgmOptions::default(),
        }
    }

    pub fn with_uncertainty(mut self, observation_error: f64, execution_error: f64) -> Self {
        self.uncertainty.observation_error = observation_error;
        self.uncertainty.execution_error = execution_error;
        self
    }
}

/// Everything that happened to one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    pub observed: GainMatrix,
    pub perturbation: Perturbation,
    pub reported: GainMatrix,
    pub allocation: PowerAllocation,
    pub rates: AchievedRates,
    pub achieved_min: f64,
    /// `None` for degenerate instances.
    pub normalized: Option<f64>,
    /// UE actually attacked when the target was chosen per instance.
    pub attacked_ue: Option<usize>,
    /// FGM found a zero gradient and left the gains untouched.
    pub zero_gradient: bool,
}

impl InstanceOutcome {
    pub fn outages(&self) -> Vec<bool> {
        self.rates.outages()
    }
}

/// The BS model, the adversary's surrogate and the system they operate in.
pub struct Pipeline<'a> {
    pub config: &'a SystemConfig,
    pub bs: &'a Network,
    pub surrogate: &'a Network,
    /// Used by the adversary to label observed gains it has not seen before.
    pub solver: SolverConfig,
}

struct Crafted {
    delta: Perturbation,
    zero_gradient: bool,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a SystemConfig, bs: &'a Network, surrogate: &'a Network) -> Result<Self> {
        bs.spec.check_system(config)?;
        surrogate.spec.check_system(config)?;
        Ok(Self {
            config,
            bs,
            surrogate,
            solver: SolverConfig::default(),
        })
    }

    fn finish(
        &self,
        instance: &LabeledInstance,
        observed: GainMatrix,
        delta: Perturbation,
        reported: GainMatrix,
        attacked_ue: Option<usize>,
        zero_gradient: bool,
    ) -> Result<InstanceOutcome> {
        let allocation = self.bs.forward(self.config, &reported)?;
        let rates = achieved_rates(self.config, &instance.gains, &reported, &allocation)?;
        let achieved_min = rates.min_achieved();
        Ok(InstanceOutcome {
            observed,
            perturbation: delta,
            reported,
            allocation,
            normalized: normalized_min_rate(achieved_min, instance.oracle_min_rate),
            achieved_min,
            rates,
            attacked_ue,
            zero_gradient,
        })
    }

    /// The BS allocating from the true gains.
    pub fn no_attack(&self, instance: &LabeledInstance) -> Result<InstanceOutcome> {
        let (n, k) = instance.gains.dim();
        self.finish(
            instance,
            instance.gains.clone(),
            Perturbation::zeros(n, k),
            instance.gains.clone(),
            None,
            false,
        )
    }

    fn reference_min_rate(
        &self,
        instance: &LabeledInstance,
        observed: &GainMatrix,
        options: &FgmOptions,
    ) -> Result<f64> {
        match options.reference {
            FgmReference::SolverLabel if observed == &instance.gains => {
                Ok(instance.oracle_min_rate)
            }
            FgmReference::SolverLabel => Ok(solve_maxmin(self.config, observed, &self.solver)?.1),
            FgmReference::SurrogateClean => {
                let p = self.surrogate.forward(self.config, observed)?;
                let r = rates_unchecked(self.config, observed.view(), p.view());
                Ok(argmin(&r).expect("K >= 1").0)
            }
        }
    }

    fn craft(
        &self,
        instance: &LabeledInstance,
        observed: &GainMatrix,
        scope: Scope,
        attack: &AttackSpec,
    ) -> Result<Crafted> {
        let budget = AttackBudget::new(attack.ratio)?.absolute(observed, scope);
        let plain = |delta| Crafted {
            delta,
            zero_gradient: false,
        };
        match attack.kind {
            AttackKind::Scaling => Ok(plain(scaling_attack(observed, scope, attack.ratio)?)),
            AttackKind::Analytical => {
                let powers = self.surrogate.forward(self.config, observed)?;
                let delta = match scope {
                    Scope::Ue(j) => analytical_attack_single(
                        self.config,
                        observed,
                        &powers,
                        j,
                        budget,
                        attack.epsilon,
                    )?,
                    Scope::All => analytical_attack_all(
                        self.config,
                        observed,
                        &powers,
                        budget,
                        attack.epsilon,
                    )?,
                };
                Ok(plain(delta))
            }
            AttackKind::Fgm => {
                let reference = if budget == 0.0 {
                    0.0
                } else {
                    self.reference_min_rate(instance, observed, &attack.fgm)?
                };
                let out = fgm_attack(
                    self.surrogate,
                    self.config,
                    observed,
                    scope,
                    budget,
                    reference,
                    attack.fgm.sign,
                )?;
                Ok(Crafted {
                    delta: out.perturbation,
                    zero_gradient: out.zero_gradient,
                })
            }
        }
    }

    fn attack_scope(
        &self,
        instance: &LabeledInstance,
        observed: GainMatrix,
        scope: Scope,
        attack: &AttackSpec,
        rng: &mut ChaCha8Rng,
    ) -> Result<InstanceOutcome> {
        let crafted = self.craft(instance, &observed, scope, attack)?;
        let reported = apply_perturbation(
            &instance.gains,
            &crafted.delta,
            attack.uncertainty.execution_error,
            rng,
        )?;
        let ue = match scope {
            Scope::Ue(j) => Some(j),
            Scope::All => None,
        };
        self.finish(
            instance,
            observed,
            crafted.delta,
            reported,
            ue,
            crafted.zero_gradient,
        )
    }

    /// Runs one instance through the attack pipeline, in order: observation
    /// error, crafting from the observed gains, execution error and clamping
    /// onto the true gains, BS allocation from the reported gains, achieved
    /// rates on the true channel, normalization by the offline optimum.
    pub fn evaluate_instance(
        &self,
        instance: &LabeledInstance,
        attack: Option<&AttackSpec>,
        rng: &mut ChaCha8Rng,
    ) -> Result<InstanceOutcome> {
        let Some(attack) = attack else {
            return self.no_attack(instance);
        };
        attack.target.check(self.config.num_ues())?;
        attack.uncertainty.validate()?;
        let observed = observe_gains(&instance.gains, attack.uncertainty.observation_error, rng)?;
        match attack.target {
            AttackTarget::SingleUe(j) => {
                self.attack_scope(instance, observed, Scope::Ue(j), attack, rng)
            }
            AttackTarget::AllUes => self.attack_scope(instance, observed, Scope::All, attack, rng),
            AttackTarget::BestUe => {
                // Every candidate sees the same execution noise stream.
                let start = rng.clone();
                let (_, _, (outcome, used)) = best_ue_selection(self.config.num_ues(), |j| {
                    let mut cand_rng = start.clone();
                    let out = self.attack_scope(
                        instance,
                        observed.clone(),
                        Scope::Ue(j),
                        attack,
                        &mut cand_rng,
                    )?;
                    Ok((out.achieved_min, (out, cand_rng)))
                })?;
                *rng = used;
                Ok(outcome)
            }
        }
    }
}

/// An `(observation, execution)` error pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyPoint {
    pub observation_error: f64,
    pub execution_error: f64,
}

impl UncertaintyPoint {
    pub const EXACT: UncertaintyPoint = UncertaintyPoint {
        observation_error: 0.0,
        execution_error: 0.0,
    };

    pub fn is_exact(&self) -> bool {
        self.observation_error == 0.0 && self.execution_error == 0.0
    }
}

/// Grid of attack cells evaluated over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub attacks: Vec<AttackKind>,
    pub targets: Vec<AttackTarget>,
    pub ratios: Vec<f64>,
    pub uncertainty: Vec<UncertaintyPoint>,
    pub epsilon: f64,
    pub fgm: FgmOptions,
    /// Noise seeds averaged per cell with nonzero uncertainty.
    pub noise_seeds: usize,
    /// Cap on the number of held-out instances evaluated.
    pub test_size: usize,
    pub master_seed: u64,
    /// Seed of the uncertainty draws, kept apart from `master_seed`.
    pub uncertainty_seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            attacks: AttackKind::all().to_vec(),
            targets: vec![
                AttackTarget::SingleUe(0),
                AttackTarget::BestUe,
                AttackTarget::AllUes,
            ],
            ratios: vec![0.0, 0.01, 0.02, 0.05, 0.1],
            uncertainty: vec![UncertaintyPoint::EXACT],
            epsilon: DEFAULT_EPSILON,
            fgm: FgmOptions::default(),
            noise_seeds: 10,
            test_size: 1000,
            master_seed: 0,
            uncertainty_seed: 0,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("ratio {r} outside [0, 1]")));
        }
        for t in &self.targets {
            t.check(config.num_ues()).map_err(|_| {
                Error::Config(format!("target {t} exceeds K = {}", config.num_ues()))
            })?;
        }
        if self
            .uncertainty
            .iter()
            .any(|u| !(u.observation_error >= 0.0 && u.execution_error >= 0.0))
        {
            return Err(Error::Config("uncertainty errors must be >= 0".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.noise_seeds == 0 || self.test_size == 0 {
            return Err(Error::Config(
                "noise_seeds and test_size must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Cells in output order: attack, then target, then ratio, then uncertainty.
    pub fn cells(&self) -> Vec<AttackSpec> {
        let mut out = Vec::new();
        for &kind in &self.attacks {
            for &target in &self.targets {
                for &ratio in &self.ratios {
                    for u in &self.uncertainty {
                        let mut spec = AttackSpec::new(kind, target, ratio)
                            .with_uncertainty(u.observation_error, u.execution_error);
                        spec.epsilon = self.epsilon;
                        spec.fgm = self.fgm;
                        out.push(spec);
                    }
                }
            }
        }
        out
    }

    fn seeds_for(&self, spec: &AttackSpec) -> usize {
        if spec.uncertainty.is_exact() {
            1
        } else {
            self.noise_seeds
        }
    }
}

/// One aggregated cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub attack: String,
    pub target: String,
    pub rho: f64,
    pub e_obs: f64,
    pub e_exec: f64,
    pub mean_normalized: f64,
    pub instances: usize,
    pub outage_fraction: f64,
    pub seed: u64,
}

pub const RESULT_COLUMNS: [&str; 9] = [
    "attack",
    "target",
    "rho",
    "e_obs",
    "e_exec",
    "mean_normalized",
    "instances",
    "outage_fraction",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    /// Test instances with a non-positive optimum, left out of every average.
    pub skipped: usize,
}

/// Derives the random stream of one `(noise seed, instance)` pair.
fn cell_rng(uncertainty_seed: u64, noise_seed: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(uncertainty_seed ^ ((noise_seed as u64) << 32));
    rng.set_stream(index as u64);
    rng
}

/// Aggregate of per-instance outcomes. Sums run in index order so the result
/// does not depend on thread count.
fn aggregate(outcomes: &[Option<(f64, bool)>]) -> (f64, usize, f64) {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut outages = 0usize;
    for (v, o) in outcomes.iter().flatten() {
        sum += v;
        count += 1;
        outages += usize::from(*o);
    }
    if count == 0 {
        return (f64::NAN, 0, 0.0);
    }
    (sum / count as f64, count, outages as f64 / count as f64)
}

/// Mean normalized min rate and outage fraction of one attack cell over the
/// instances, averaged over `seeds` noise seeds. `None` attack is the baseline.
pub fn evaluate_cell(
    pipeline: &Pipeline<'_>,
    instances: &[LabeledInstance],
    attack: Option<&AttackSpec>,
    seeds: usize,
) -> Result<Vec<Option<(f64, bool)>>> {
    let seed_base = attack.map_or(0, |a| a.uncertainty.rng_seed);
    let per_seed: Vec<Vec<Option<(f64, bool)>>> = (0..seeds)
        .map(|s| {
            instances
                .par_iter()
                .enumerate()
                .map(|(idx, inst)| {
                    if inst.is_degenerate() {
                        return Ok(None);
                    }
                    let mut rng = cell_rng(seed_base, s, idx);
                    let out = pipeline.evaluate_instance(inst, attack, &mut rng)?;
                    let outage = out.rates.any_outage();
                    Ok(out.normalized.map(|v| (v, outage)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

fn row_for(attack: Option<&AttackSpec>, outcomes: &[Option<(f64, bool)>], seed: u64) -> ResultRow {
    let (mean, count, outage) = aggregate(outcomes);
    let (name, target, rho, e_obs, e_exec) = match attack {
        None => ("none".to_string(), "-".to_string(), 0.0, 0.0, 0.0),
        Some(a) => (
            a.kind.to_string(),
            a.target.to_string(),
            a.ratio,
            a.uncertainty.observation_error,
            a.uncertainty.execution_error,
        ),
    };
    ResultRow {
        attack: name,
        target,
        rho,
        e_obs,
        e_exec,
        mean_normalized: mean,
        instances: count,
        outage_fraction: outage,
        seed,
    }
}

/// Baseline row followed by one row per plan cell, over at most
/// `plan.test_size` instances of `test_set`.
pub fn run_sweep(
    pipeline: &Pipeline<'_>,
    plan: &ExperimentPlan,
    test_set: &[LabeledInstance],
) -> Result<SweepOutput> {
    plan.validate(pipeline.config)?;
    let test = &test_set[..test_set.len().min(plan.test_size)];
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let skipped = test.iter().filter(|i| i.is_degenerate()).count();
    let mut rows = Vec::new();
    let base = evaluate_cell(pipeline, test, None, 1)?;
    rows.push(row_for(None, &base, plan.master_seed));
    for mut spec in plan.cells() {
        spec.uncertainty.rng_seed = plan.uncertainty_seed ^ plan.master_seed;
        let seeds = plan.seeds_for(&spec);
        let outcomes = evaluate_cell(pipeline, test, Some(&spec), seeds)?;
        rows.push(row_for(Some(&spec), &outcomes, spec.uncertainty.rng_seed));
    }
    Ok(SweepOutput { rows, skipped })
}

/// Trains one model per loss kind from identical seeds and data and reports
/// each one's mean normalized min rate on `test_set` without attack.
pub fn loss_comparison(
    config: &SystemConfig,
    spec: &NetworkSpec,
    train_cfg: &TrainConfig,
    kinds: &[LossKind],
    train_set: &[LabeledInstance],
    test_set: &[LabeledInstance],
) -> Result<Vec<(LossKind, f64)>> {
    kinds
        .iter()
        .map(|&kind| {
            let (net, _) = train(spec.clone(), train_cfg, kind, config, train_set, &[])?;
            let v = net
                .mean_normalized_min_rate(config, test_set)?
                .ok_or_else(|| Error::InvalidInput("no usable test instances".into()))?;
            Ok((kind, v))
        })
        .collect()
}

/// Table of the attack under each error model and error ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTable {
    pub exact: f64,
    pub errors: Vec<f64>,
    pub observation: Vec<f64>,
    pub execution: Vec<f64>,
}

/// Analytical attack on one UE at a fixed ratio with each error model
/// switched on separately, averaged over `noise_seeds` seeds per cell.
pub fn uncertainty_sweep(
    pipeline: &Pipeline<'_>,
    test_set: &[LabeledInstance],
    target: AttackTarget,
    ratio: f64,
    errors: &[f64],
    noise_seeds: usize,
    seed: u64,
) -> Result<UncertaintyTable> {
    let mut uncertainty = vec![UncertaintyPoint::EXACT];
    for &e in errors {
        uncertainty.push(UncertaintyPoint {
            observation_error: e,
            execution_error: 0.0,
        });
    }
    for &e in errors {
        uncertainty.push(UncertaintyPoint {
            observation_error: 0.0,
            execution_error: e,
        });
    }
    let plan = ExperimentPlan {
        attacks: vec![AttackKind::Analytical],
        targets: vec![target],
        ratios: vec![ratio],
        uncertainty,
        noise_seeds,
        test_size: test_set.len(),
        uncertainty_seed: seed,
        ..ExperimentPlan::default()
    };
    let out = run_sweep(pipeline, &plan, test_set)?;
    let cells = &out.rows[1..];
    let n = errors.len();
    Ok(UncertaintyTable {
        exact: cells[0].mean_normalized,
        errors: errors.to_vec(),
        observation: cells[1..=n].iter().map(|r| r.mean_normalized).collect(),
        execution: cells[n + 1..].iter().map(|r| r.mean_normalized).collect(),
    })
}

/// Sidecar written next to a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsMeta {
    pub format_version: u32,
    pub crate_version: String,
    pub plan: ExperimentPlan,
    pub skipped_instances: usize,
    pub test_instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

pub fn write_results(path: &Path, rows: &[ResultRow], meta: &ResultsMeta) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(RESULT_COLUMNS).map_err(err)?;
    for r in rows {
        w.write_record([
            r.attack.clone(),
            r.target.clone(),
            r.rho.to_string(),
            r.e_obs.to_string(),
            r.e_exec.to_string(),
            r.mean_normalized.to_string(),
            r.instances.to_string(),
            r.outage_fraction.to_string(),
            r.seed.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let headers = r
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?;
    if headers.iter().ne(RESULT_COLUMNS) {
        return Err(Error::format(path, "unexpected results columns"));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

fn pct(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{:.2}%", 100.0 * v)
    }
}

/// Renders results as aligned text: one column per attack/target curve over
/// the budget ratio, then a grid of the uncertainty rows if there are any.
pub fn render_report(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    if let Some(base) = rows.iter().find(|r| r.attack == "none") {
        out.push_str(&format!(
            "no attack: {} over {} instances\n\n",
            pct(base.mean_normalized),
            base.instances
        ));
    }
    let exact: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.attack != "none" && r.e_obs == 0.0 && r.e_exec == 0.0)
        .collect();
    let mut curves: Vec<(String, String)> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    for r in &exact {
        let key = (r.attack.clone(), r.target.clone());
        if !curves.contains(&key) {
            curves.push(key);
        }
        if !ratios.contains(&r.rho) {
            ratios.push(r.rho);
        }
    }
    ratios.sort_by(f64::total_cmp);
    if !curves.is_empty() {
        let width = curves
            .iter()
            .map(|(a, t)| a.len() + t.len() + 1)
            .max()
            .unwrap_or(0)
            .max(9);
        out.push_str(&format!("{:>6}", "rho"));
        for (a, t) in &curves {
            out.push_str(&format!("  {:>width$}", format!("{a}/{t}")));
        }
        out.push('\n');
        for rho in &ratios {
            out.push_str(&format!("{rho:>6.3}"));
            for (a, t) in &curves {
                let cell = exact
                    .iter()
                    .find(|r| &r.attack == a && &r.target == t && r.rho == *rho)
                    .map_or_else(|| "-".to_string(), |r| pct(r.mean_normalized));
                out.push_str(&format!("  {cell:>width$}"));
            }
            out.push('\n');
        }
    }

    // One error grid per attack cell that has noisy rows.
    let mut cells: Vec<(String, String, f64)> = Vec::new();
    for r in rows
        .iter()
        .filter(|r| r.attack != "none" && (r.e_obs > 0.0) != (r.e_exec > 0.0))
    {
        let key = (r.attack.clone(), r.target.clone(), r.rho);
        if !cells.contains(&key) {
            cells.push(key);
        }
    }
    for (attack, target, rho) in &cells {
        let cell_rows: Vec<&ResultRow> = rows
            .iter()
            .filter(|r| &r.attack == attack && &r.target == target && r.rho == *rho)
            .collect();
        let mut errors: Vec<f64> = cell_rows
            .iter()
            .flat_map(|r| [r.e_obs, r.e_exec])
            .filter(|e| *e > 0.0)
            .collect();
        errors.sort_by(f64::total_cmp);
        errors.dedup();
        out.push_str(&format!("\n{attack}/{target} at rho {rho}"));
        if let Some(r) = cell_rows.iter().find(|r| r.e_obs == 0.0 && r.e_exec == 0.0) {
            out.push_str(&format!(", no error: {}", pct(r.mean_normalized)));
        }
        out.push_str(&format!("\n{:<22}", "error ratio"));
        for e in &errors {
            out.push_str(&format!("{:>10}", format!("{:.0}%", 100.0 * e)));
        }
        out.push('\n');
        for (label, on_obs) in [("error on channel gain", true), ("error on change", false)] {
            out.push_str(&format!("{label:<22}"));
            for e in &errors {
                let cell = cell_rows
                    .iter()
                    .find(|r| {
                        if on_obs {
                            r.e_obs == *e && r.e_exec == 0.0
                        } else {
                            r.e_exec == *e && r.e_obs == 0.0
                        }
                    })
                    .map_or_else(|| "-".to_string(), |r| pct(r.mean_normalized));
                out.push_str(&format!("{cell:>10}"));
            }
            out.push('\n');
        }
    }
    out
}
