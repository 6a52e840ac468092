//! Budget-constrained perturbations of the channel gains reported to the BS.
//!
//! Three attacks are provided:
//! * a benchmark that scales the targeted gains down by `1 - rho`,
//! * an analytical attack that spends the budget on the gains whose rate
//!   sensitivity (with the surrogate's powers held fixed) is largest,
//! * a one-step fast-gradient attack through the surrogate network.
//!
//! The budget is `rho` times the sum of the targeted (observed) gains and
//! bounds the L1 norm of the intended change.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rate_gain_gradient, GainMatrix, Perturbation, PowerAllocation, SystemConfig};
use crate::neural::{LossKind, Network};

/// Default floor for gains reduced by the analytical attack.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Which UEs' gains the adversary may change. UE indices are zero-based;
/// the text form (`single:J`) is one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AttackTarget {
    SingleUe(usize),
    /// Genie choice: the single UE whose attack hurts the min rate most.
    BestUe,
    AllUes,
}

impl fmt::Display for AttackTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackTarget::SingleUe(j) => write!(f, "single:{}", j + 1),
            AttackTarget::BestUe => f.write_str("best"),
            AttackTarget::AllUes => f.write_str("all"),
        }
    }
}

impl FromStr for AttackTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "best" => Ok(AttackTarget::BestUe),
            "all" => Ok(AttackTarget::AllUes),
            _ => {
                let j = s
                    .strip_prefix("single:")
                    .and_then(|j| j.parse::<usize>().ok())
                    .filter(|j| *j >= 1)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "bad target '{s}' (expected single:J with J >= 1, best or all)"
                        ))
                    })?;
                Ok(AttackTarget::SingleUe(j - 1))
            }
        }
    }
}

impl TryFrom<String> for AttackTarget {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AttackTarget> for String {
    fn from(t: AttackTarget) -> String {
        t.to_string()
    }
}

impl AttackTarget {
    pub fn check(&self, num_ues: usize) -> Result<()> {
        match *self {
            AttackTarget::SingleUe(j) if j >= num_ues => Err(Error::IndexOutOfRange {
                index: j,
                size: num_ues,
            }),
            _ => Ok(()),
        }
    }
}

/// The set of gain columns one crafted perturbation may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Ue(usize),
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Scaling,
    Analytical,
    Fgm,
}

impl AttackKind {
    pub fn all() -> [AttackKind; 3] {
        [AttackKind::Scaling, AttackKind::Analytical, AttackKind::Fgm]
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::Scaling => "scaling",
            AttackKind::Analytical => "analytical",
            AttackKind::Fgm => "fgm",
        })
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "scaling" => Ok(AttackKind::Scaling),
            "analytical" => Ok(AttackKind::Analytical),
            "fgm" => Ok(AttackKind::Fgm),
            other => Err(Error::Config(format!(
                "unknown attack '{other}' (expected scaling|analytical|fgm)"
            ))),
        }
    }
}

/// Budget as a fraction of the targeted gains' total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackBudget {
    ratio: f64,
}

impl AttackBudget {
    pub fn new(ratio: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio) {
            return Err(Error::InvalidInput(format!(
                "budget ratio must be in [0, 1], got {ratio}"
            )));
        }
        Ok(Self { ratio })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// `B_g`: `rho * sum_i g_ij` for one UE, `rho * sum_ij g_ij` for all.
    pub fn absolute(&self, gains: &GainMatrix, scope: Scope) -> f64 {
        match scope {
            Scope::Ue(j) => self.ratio * gains.column_sum(j),
            Scope::All => self.ratio * gains.total(),
        }
    }
}

/// Multiplicative error on what the adversary sees and on what it executes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintyModel {
    pub observation_error: f64,
    pub execution_error: f64,
    pub rng_seed: u64,
}

impl UncertaintyModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.observation_error >= 0.0 && self.execution_error >= 0.0) {
            return Err(Error::InvalidInput(
                "uncertainty error ratios must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_exact(&self) -> bool {
        self.observation_error == 0.0 && self.execution_error == 0.0
    }
}

/// Benchmark: `delta_ij = -rho * g_ij` on the targeted columns.
pub fn scaling_attack(gains: &GainMatrix, scope: Scope, ratio: f64) -> Result<Perturbation> {
    AttackBudget::new(ratio)?;
    let delta = Array2::from_shape_fn(gains.dim(), |(i, j)| match scope {
        Scope::Ue(ue) if ue != j => 0.0,
        _ => -ratio * gains.get(i, j),
    });
    Ok(Perturbation(delta))
}

fn check_budget(budget: f64) -> Result<()> {
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "absolute budget must be finite and nonnegative, got {budget}"
        )));
    }
    Ok(())
}

/// Spends `budget` on one UE's gains in order of decreasing sensitivity:
/// each visited gain is lowered to the floor `epsilon`, until the remaining
/// budget fits within one gain, which is then lowered by exactly that amount.
/// Gains already at or below `epsilon` are skipped. Returns the perturbation
/// and the unspent budget.
fn spend_on_column(
    config: &SystemConfig,
    gains: &GainMatrix,
    powers: &PowerAllocation,
    ue: usize,
    budget: f64,
    epsilon: f64,
    delta: &mut Array2<f64>,
) -> Result<f64> {
    let eta = rate_gain_gradient(config, gains, powers, ue)?;
    let mut order: Vec<usize> = (0..eta.len()).collect();
    // Stable sort keeps lower subcarrier indices first on ties.
    order.sort_by(|a, b| eta[*b].total_cmp(&eta[*a]));
    let mut remaining = budget;
    for i in order {
        if remaining <= 0.0 {
            break;
        }
        let g = gains.get(i, ue);
        if g <= epsilon {
            continue;
        }
        if g >= remaining + epsilon {
            delta[[i, ue]] = -remaining;
            remaining = 0.0;
            break;
        }
        delta[[i, ue]] = epsilon - g;
        remaining -= g - epsilon;
    }
    Ok(remaining)
}

/// Analytical attack on one UE. `surrogate_powers` is the surrogate's
/// allocation for the gains the adversary observes.
pub fn analytical_attack_single(
    config: &SystemConfig,
    gains: &GainMatrix,
    surrogate_powers: &PowerAllocation,
    ue: usize,
    budget: f64,
    epsilon: f64,
) -> Result<Perturbation> {
    check_budget(budget)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let mut delta = Array2::zeros(gains.dim());
    spend_on_column(
        config,
        gains,
        surrogate_powers,
        ue,
        budget,
        epsilon,
        &mut delta,
    )?;
    Ok(Perturbation(delta))
}

/// Analytical attack on all UEs. UEs are visited by decreasing total
/// sensitivity `sum_i eta_ij`; a UE whose whole column fits in the remaining
/// budget has its gains driven to zero, otherwise the single-UE procedure is
/// applied to it with what is left and the attack stops.
pub fn analytical_attack_all(
    config: &SystemConfig,
    gains: &GainMatrix,
    surrogate_powers: &PowerAllocation,
    budget: f64,
    epsilon: f64,
) -> Result<Perturbation> {
    check_budget(budget)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let k = config.num_ues();
    let mut totals = Vec::with_capacity(k);
    for j in 0..k {
        totals.push(
            rate_gain_gradient(config, gains, surrogate_powers, j)?
                .iter()
                .sum::<f64>(),
        );
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| totals[*b].total_cmp(&totals[*a]));

    let mut delta = Array2::zeros(gains.dim());
    let mut remaining = budget;
    for j in order {
        if remaining <= 0.0 {
            break;
        }
        let column = gains.column_sum(j);
        if remaining >= column {
            delta
                .column_mut(j)
                .assign(&gains.as_array().column(j).mapv(|g| -g));
            remaining -= column;
        } else {
            spend_on_column(
                config,
                gains,
                surrogate_powers,
                j,
                remaining,
                epsilon,
                &mut delta,
            )?;
            break;
        }
    }
    Ok(Perturbation(delta))
}

/// Sign applied to the attack-loss gradient before the shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FgmSign {
    /// Step along `+grad L_a`, increasing the surrogate's min-rate error.
    #[default]
    Ascend,
    /// Step along `-grad L_a`.
    Descend,
}

/// Where the min rate that `L_a` compares against comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FgmReference {
    /// Offline optimum for the observed gains.
    #[default]
    SolverLabel,
    /// The surrogate's own min rate on the observed gains. `L_a` and its
    /// gradient vanish at the clean input under this choice.
    SurrogateClean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgmOutcome {
    pub perturbation: Perturbation,
    /// Set when the (shifted) gradient had zero L1 norm and no change was made.
    pub zero_gradient: bool,
}

/// Turns an attack-loss gradient into an L1-budgeted perturbation: keep the
/// targeted coordinates, shift them by `-min` if any is negative, and scale
/// so the L1 norm equals `budget`. The result is nonnegative.
pub fn fgm_step(
    gradient: &[f64],
    num_ues: usize,
    scope: Scope,
    budget: f64,
) -> Result<(Vec<f64>, bool)> {
    check_budget(budget)?;
    let targeted = |idx: usize| match scope {
        Scope::Ue(j) => idx % num_ues == j,
        Scope::All => true,
    };
    let mut eta: Vec<f64> = gradient
        .iter()
        .enumerate()
        .map(|(idx, g)| if targeted(idx) { *g } else { 0.0 })
        .collect();
    if eta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient("attack-loss gradient".into()));
    }
    if budget == 0.0 {
        return Ok((vec![0.0; eta.len()], false));
    }
    let min = eta
        .iter()
        .enumerate()
        .filter(|(idx, _)| targeted(*idx))
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        for (idx, v) in eta.iter_mut().enumerate() {
            if targeted(idx) {
                *v -= min;
            }
        }
    }
    let norm: f64 = eta.iter().map(|v| v.abs()).sum();
    if norm == 0.0 {
        return Ok((vec![0.0; eta.len()], true));
    }
    Ok((eta.into_iter().map(|v| budget * v / norm).collect(), false))
}

/// Fast-gradient attack through the surrogate network. The attack loss is
/// the squared gap between `reference_min_rate` and the min rate of the
/// surrogate's allocation evaluated on `observed` gains.
pub fn fgm_attack(
    surrogate: &Network,
    config: &SystemConfig,
    observed: &GainMatrix,
    scope: Scope,
    budget: f64,
    reference_min_rate: f64,
    sign: FgmSign,
) -> Result<FgmOutcome> {
    check_budget(budget)?;
    let (n, k) = (config.num_subcarriers(), config.num_ues());
    if budget == 0.0 {
        return Ok(FgmOutcome {
            perturbation: Perturbation::zeros(n, k),
            zero_gradient: false,
        });
    }
    let x = observed.to_flat();
    let label = vec![0.0; x.len()];
    let only = match scope {
        Scope::Ue(j) => Some(j),
        Scope::All => None,
    };
    let mut grad = surrogate.input_gradient(
        LossKind::Custom,
        config,
        &x,
        &label,
        reference_min_rate,
        only,
    )?;
    if sign == FgmSign::Descend {
        grad.iter_mut().for_each(|g| *g = -*g);
    }
    let (delta, zero_gradient) = fgm_step(&grad, k, scope, budget)?;
    Ok(FgmOutcome {
        perturbation: Perturbation(Array2::from_shape_vec((n, k), delta).expect("sized")),
        zero_gradient,
    })
}

fn uniform_factor<R: Rng>(rng: &mut R, error: f64) -> f64 {
    if error == 0.0 {
        1.0
    } else {
        rng.gen_range(1.0 - error..=1.0 + error)
    }
}

/// What the BS receives: each intended change is scaled by an independent
/// factor in `[1 - e_exec, 1 + e_exec]`, added to the true gain and clamped
/// to `[0, 1]`. No random draws are made when `e_exec` is zero.
pub fn apply_perturbation<R: Rng>(
    true_gains: &GainMatrix,
    delta: &Perturbation,
    execution_error: f64,
    rng: &mut R,
) -> Result<GainMatrix> {
    if delta.as_array().dim() != true_gains.dim() {
        return Err(Error::dims(
            format!("{:?}", true_gains.dim()),
            format!("{:?}", delta.as_array().dim()),
        ));
    }
    if !(execution_error >= 0.0) {
        return Err(Error::InvalidInput("execution error must be >= 0".into()));
    }
    let mut out = true_gains.as_array().clone();
    for (g, d) in out.iter_mut().zip(delta.as_array().iter()) {
        let executed = if *d == 0.0 {
            *d
        } else {
            d * uniform_factor(rng, execution_error)
        };
        *g += executed;
    }
    GainMatrix::clamped(out)
}

/// What the adversary measures: each gain times an independent factor in
/// `[1 - e_obs, 1 + e_obs]`, clamped to `[0, 1]`.
pub fn observe_gains<R: Rng>(
    true_gains: &GainMatrix,
    observation_error: f64,
    rng: &mut R,
) -> Result<GainMatrix> {
    if !(observation_error >= 0.0) {
        return Err(Error::InvalidInput("observation error must be >= 0".into()));
    }
    if observation_error == 0.0 {
        return Ok(true_gains.clone());
    }
    let mut out = true_gains.as_array().clone();
    out.iter_mut()
        .for_each(|g| *g *= uniform_factor(rng, observation_error));
    GainMatrix::clamped(out)
}

/// Runs `attack_ue` for every UE and keeps the one with the lowest score
/// (ties to the lowest index). `attack_ue` returns `(score, payload)`.
pub fn best_ue_selection<T, F>(num_ues: usize, mut attack_ue: F) -> Result<(usize, f64, T)>
where
    F: FnMut(usize) -> Result<(f64, T)>,
{
    let mut best: Option<(usize, f64, T)> = None;
    for j in 0..num_ues {
        let (score, payload) = attack_ue(j)?;
        if best.as_ref().is_none_or(|(_, s, _)| score < *s) {
            best = Some((j, score, payload));
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no UEs to attack".into()))
}
