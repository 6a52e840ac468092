//! Domain types and the rate mathematics of downlink power allocation over
//! orthogonal subcarriers.
//!
//! Matrices are `N x K` (subcarrier `i`, UE `j`) and flatten subcarrier-major,
//! i.e. `g_11, g_12, .., g_1K, g_21, ..`. UE and subcarrier indices are
//! zero-based in the API.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Slack used when comparing a transmitted rate against the link rate.
pub const OUTAGE_SLACK: f64 = 1e-9;

/// Slack used when checking the total power constraint.
pub const POWER_SLACK: f64 = 1e-9;

/// Problem dimensions and the constants of the rate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    num_subcarriers: usize,
    num_ues: usize,
    total_power: f64,
    noise_power: Vec<f64>,
}

impl SystemConfig {
    /// Config with the default noise model, `sigma_i^2 = 1/N` on every subcarrier.
    pub fn new(num_subcarriers: usize, num_ues: usize, total_power: f64) -> Result<Self> {
        let noise = vec![1.0 / num_subcarriers.max(1) as f64; num_subcarriers];
        Self::with_noise(num_subcarriers, num_ues, total_power, noise)
    }

    pub fn with_noise(
        num_subcarriers: usize,
        num_ues: usize,
        total_power: f64,
        noise_power: Vec<f64>,
    ) -> Result<Self> {
        if num_subcarriers == 0 || num_ues == 0 {
            return Err(Error::InvalidInput(format!(
                "need at least one subcarrier and one UE, got N={num_subcarriers}, K={num_ues}"
            )));
        }
        if !(total_power.is_finite() && total_power > 0.0) {
            return Err(Error::InvalidInput(format!(
                "total power must be positive, got {total_power}"
            )));
        }
        if noise_power.len() != num_subcarriers {
            return Err(Error::dims(
                format!("{num_subcarriers} noise powers"),
                noise_power.len(),
            ));
        }
        if let Some(bad) = noise_power.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "noise powers must be positive, got {bad}"
            )));
        }
        Ok(Self {
            num_subcarriers,
            num_ues,
            total_power,
            noise_power,
        })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    /// `N * K`, the length of a flattened gain or power matrix.
    pub fn num_links(&self) -> usize {
        self.num_subcarriers * self.num_ues
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn noise_power(&self) -> &[f64] {
        &self.noise_power
    }

    fn check_shape(&self, what: &str, view: ArrayView2<'_, f64>) -> Result<()> {
        let (n, k) = view.dim();
        if n != self.num_subcarriers || k != self.num_ues {
            return Err(Error::dims(
                format!("{what} of shape {}x{}", self.num_subcarriers, self.num_ues),
                format!("{n}x{k}"),
            ));
        }
        Ok(())
    }
}

/// Channel gains `g_ij`, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix(Array2<f64>);

impl GainMatrix {
    pub fn new(gains: Array2<f64>) -> Result<Self> {
        if let Some(bad) = gains
            .iter()
            .find(|g| !(g.is_finite() && (0.0..=1.0).contains(*g)))
        {
            return Err(Error::InvalidInput(format!(
                "channel gains must lie in [0, 1], got {bad}"
            )));
        }
        Ok(Self(gains))
    }

    /// Builds an `N x K` matrix from a subcarrier-major flat vector.
    pub fn from_flat(num_subcarriers: usize, num_ues: usize, flat: Vec<f64>) -> Result<Self> {
        let len = flat.len();
        let arr = Array2::from_shape_vec((num_subcarriers, num_ues), flat)
            .map_err(|_| Error::dims(num_subcarriers * num_ues, len))?;
        Self::new(arr)
    }

    /// Clamps every entry into `[0, 1]`. Non-finite entries are rejected.
    pub fn clamped(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite channel gain".into()));
        }
        Ok(Self(values.mapv(|v| v.clamp(0.0, 1.0))))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn get(&self, subcarrier: usize, ue: usize) -> f64 {
        self.0[[subcarrier, ue]]
    }

    /// Sum of the gains of one UE over all subcarriers.
    pub fn column_sum(&self, ue: usize) -> f64 {
        self.0.column(ue).sum()
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }
}

/// Transmit powers `p_ij`, all nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(Array2<f64>);

impl PowerAllocation {
    pub fn new(powers: Array2<f64>) -> Result<Self> {
        if let Some(bad) = powers.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "powers must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(Self(powers))
    }

    pub fn from_flat(num_subcarriers: usize, num_ues: usize, flat: Vec<f64>) -> Result<Self> {
        let len = flat.len();
        let arr = Array2::from_shape_vec((num_subcarriers, num_ues), flat)
            .map_err(|_| Error::dims(num_subcarriers * num_ues, len))?;
        Self::new(arr)
    }

    /// Equal split of the total power over all `N * K` entries.
    pub fn uniform(config: &SystemConfig) -> Self {
        let share = config.total_power() / config.num_links() as f64;
        Self(Array2::from_elem(
            (config.num_subcarriers(), config.num_ues()),
            share,
        ))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }

    /// Whether the allocation satisfies the power budget of `config`.
    pub fn is_feasible(&self, config: &SystemConfig) -> bool {
        self.0.dim() == (config.num_subcarriers(), config.num_ues())
            && self.0.iter().all(|p| *p >= 0.0)
            && self.total() <= config.total_power() + POWER_SLACK
    }
}

/// Per-UE rates in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Additive change to a gain matrix, `delta_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation(pub Array2<f64>);

impl Perturbation {
    pub fn zeros(num_subcarriers: usize, num_ues: usize) -> Self {
        Self(Array2::zeros((num_subcarriers, num_ues)))
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|d| d.abs()).sum()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|d| *d == 0.0)
    }
}

/// Interference seen by UE `ue` on subcarrier `i`, i.e. the power allocated to
/// every other UE there. Summed explicitly rather than as `S - p_ij` to avoid
/// cancellation.
fn interference(powers: ArrayView2<'_, f64>, subcarrier: usize, ue: usize) -> f64 {
    powers
        .row(subcarrier)
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != ue)
        .map(|(_, p)| p)
        .sum()
}

fn check_pair(
    config: &SystemConfig,
    gains: ArrayView2<'_, f64>,
    powers: ArrayView2<'_, f64>,
) -> Result<()> {
    config.check_shape("gain matrix", gains)?;
    config.check_shape("power matrix", powers)
}

fn check_ue(config: &SystemConfig, ue: usize) -> Result<()> {
    if ue >= config.num_ues() {
        return Err(Error::IndexOutOfRange {
            index: ue,
            size: config.num_ues(),
        });
    }
    Ok(())
}

/// Rate of a single UE, summed over subcarriers.
pub(crate) fn ue_rate(
    noise: &[f64],
    gains: ArrayView2<'_, f64>,
    powers: ArrayView2<'_, f64>,
    ue: usize,
) -> f64 {
    let mut rate = 0.0;
    for (i, sigma2) in noise.iter().enumerate() {
        let g = gains[[i, ue]];
        let sinr = g * powers[[i, ue]] / (sigma2 + g * interference(powers, i, ue));
        rate += sinr.ln_1p();
    }
    rate / LN_2
}

pub(crate) fn rates_unchecked(
    config: &SystemConfig,
    gains: ArrayView2<'_, f64>,
    powers: ArrayView2<'_, f64>,
) -> Vec<f64> {
    (0..config.num_ues())
        .map(|j| ue_rate(config.noise_power(), gains, powers, j))
        .collect()
}

/// Per-UE rate `r_j = sum_i log2(1 + g_ij p_ij / (sigma_i^2 + g_ij sum_{k != j} p_ik))`.
pub fn rate_per_ue(
    config: &SystemConfig,
    gains: &GainMatrix,
    powers: &PowerAllocation,
) -> Result<RateVector> {
    check_pair(config, gains.view(), powers.view())?;
    Ok(RateVector(rates_unchecked(
        config,
        gains.view(),
        powers.view(),
    )))
}

/// Minimum over UEs and the lowest index attaining it.
pub fn min_rate(rates: &RateVector) -> Result<(f64, usize)> {
    argmin(rates.as_slice()).ok_or_else(|| Error::InvalidInput("empty rate vector".into()))
}

/// Lowest-index minimum of a slice; `None` when empty.
pub(crate) fn argmin(values: &[f64]) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (j, &r) in values.iter().enumerate() {
        match best {
            Some((b, _)) if r >= b => {}
            _ => best = Some((r, j)),
        }
    }
    best
}

pub(crate) fn gain_gradient_unchecked(
    noise: &[f64],
    gains: ArrayView2<'_, f64>,
    powers: ArrayView2<'_, f64>,
    ue: usize,
) -> Vec<f64> {
    noise
        .iter()
        .enumerate()
        .map(|(i, &sigma2)| {
            let g = gains[[i, ue]];
            let p = powers[[i, ue]];
            let other = interference(powers, i, ue);
            let all = other + p;
            p * sigma2 / ((sigma2 + g * other) * (sigma2 + g * all) * LN_2)
        })
        .collect()
}

/// Sensitivity `eta_ij = d r_j / d g_ij` of UE `ue`'s rate to each of its
/// gains, holding the powers fixed. Length `N`.
pub fn rate_gain_gradient(
    config: &SystemConfig,
    gains: &GainMatrix,
    powers: &PowerAllocation,
    ue: usize,
) -> Result<Vec<f64>> {
    check_pair(config, gains.view(), powers.view())?;
    check_ue(config, ue)?;
    Ok(gain_gradient_unchecked(
        config.noise_power(),
        gains.view(),
        powers.view(),
        ue,
    ))
}

/// Writes `d r_ue / d p_ik` for every `(i, k)` into `out` (shape `N x K`).
pub(crate) fn power_gradient_into(
    noise: &[f64],
    gains: ArrayView2<'_, f64>,
    powers: ArrayView2<'_, f64>,
    ue: usize,
    out: &mut Array2<f64>,
) {
    for (i, &sigma2) in noise.iter().enumerate() {
        let g = gains[[i, ue]];
        let p = powers[[i, ue]];
        let other = interference(powers, i, ue);
        let with_own = sigma2 + g * (other + p);
        let without_own = sigma2 + g * other;
        let own = g / (with_own * LN_2);
        let cross = -g * g * p / (with_own * without_own * LN_2);
        for (k, slot) in out.row_mut(i).iter_mut().enumerate() {
            *slot = if k == ue { own } else { cross };
        }
    }
}

/// Derivative of UE `ue`'s rate with respect to every power `p_ik`.
/// Entries in column `ue` are nonnegative, the rest nonpositive.
pub fn rate_power_gradient(
    config: &SystemConfig,
    gains: &GainMatrix,
    powers: &PowerAllocation,
    ue: usize,
) -> Result<Array2<f64>> {
    check_pair(config, gains.view(), powers.view())?;
    check_ue(config, ue)?;
    let mut out = Array2::zeros((config.num_subcarriers(), config.num_ues()));
    power_gradient_into(
        config.noise_power(),
        gains.view(),
        powers.view(),
        ue,
        &mut out,
    );
    Ok(out)
}

/// Rates a UE actually gets when the BS allocated `powers` from `reported_gains`
/// but the channel is `true_gains`: the rate the BS transmits at, or zero when
/// that exceeds what the true link supports.
#[derive(Debug, Clone, PartialEq)]
pub struct AchievedRates {
    pub transmitted: RateVector,
    pub link: RateVector,
    pub achieved: RateVector,
}

impl AchievedRates {
    /// Per-UE outage flags.
    pub fn outages(&self) -> Vec<bool> {
        self.transmitted
            .as_slice()
            .iter()
            .zip(self.link.as_slice())
            .map(|(t, l)| *t > l + OUTAGE_SLACK)
            .collect()
    }

    pub fn any_outage(&self) -> bool {
        self.outages().into_iter().any(|o| o)
    }

    pub fn min_achieved(&self) -> f64 {
        argmin(self.achieved.as_slice()).map_or(0.0, |(v, _)| v)
    }
}

pub fn achieved_rates(
    config: &SystemConfig,
    true_gains: &GainMatrix,
    reported_gains: &GainMatrix,
    powers: &PowerAllocation,
) -> Result<AchievedRates> {
    let transmitted = rate_per_ue(config, reported_gains, powers)?;
    let link = rate_per_ue(config, true_gains, powers)?;
    let achieved = transmitted
        .as_slice()
        .iter()
        .zip(link.as_slice())
        .map(|(&t, &l)| if t <= l + OUTAGE_SLACK { t } else { 0.0 })
        .collect();
    Ok(AchievedRates {
        transmitted,
        link,
        achieved: RateVector(achieved),
    })
}

/// Achieved min rate relative to the offline optimum. `None` for degenerate
/// instances whose optimum is not positive.
pub fn normalized_min_rate(achieved_min: f64, oracle_min: f64) -> Option<f64> {
    (oracle_min > 0.0).then(|| achieved_min / oracle_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn scalar(sigma2: f64, g: f64, p: f64) -> (SystemConfig, GainMatrix, PowerAllocation) {
        (
            SystemConfig::with_noise(1, 1, 10.0, vec![sigma2]).unwrap(),
            GainMatrix::new(array![[g]]).unwrap(),
            PowerAllocation::new(array![[p]]).unwrap(),
        )
    }

    #[test]
    fn zero_gain_gives_zero_rate() {
        let (c, g, p) = scalar(1.0, 0.0, 7.0);
        assert_eq!(rate_per_ue(&c, &g, &p).unwrap().0, vec![0.0]);
    }

    #[test]
    fn single_link_rate() {
        let (c, g, p) = scalar(1.0, 1.0, 10.0);
        let r = rate_per_ue(&c, &g, &p).unwrap();
        assert_relative_eq!(r.0[0], 11f64.log2(), epsilon = 1e-12);
        assert_relative_eq!(r.0[0], 3.4594, epsilon = 1e-4);
    }

    #[test]
    fn symmetric_two_ue_rates() {
        let c = SystemConfig::with_noise(1, 2, 10.0, vec![1.0]).unwrap();
        let g = GainMatrix::new(array![[1.0, 1.0]]).unwrap();
        let p = PowerAllocation::new(array![[5.0, 5.0]]).unwrap();
        let r = rate_per_ue(&c, &g, &p).unwrap();
        let expected = (1.0 + 5.0 / 6.0f64).log2();
        assert_eq!(r.0[0], r.0[1]);
        assert_relative_eq!(r.0[0], expected, epsilon = 1e-12);
        assert_relative_eq!(r.0[0], 0.8745, epsilon = 1e-4);
        let (v, j) = min_rate(&r).unwrap();
        assert_eq!(j, 0);
        assert_relative_eq!(v, 0.8745, epsilon = 1e-4);
    }

    #[test]
    fn min_rate_ties_and_order() {
        assert_eq!(
            min_rate(&RateVector(vec![1.0, 2.0, 0.5])).unwrap(),
            (0.5, 2)
        );
        assert_eq!(min_rate(&RateVector(vec![1.0, 1.0])).unwrap(), (1.0, 0));
        assert!(min_rate(&RateVector(vec![])).is_err());
    }

    #[test]
    fn gain_gradient_hand_value() {
        let (c, g, p) = scalar(1.0, 1.0, 10.0);
        let eta = rate_gain_gradient(&c, &g, &p, 0).unwrap();
        assert_relative_eq!(eta[0], 10.0 / (11.0 * LN_2), epsilon = 1e-12);
        assert_relative_eq!(eta[0], 1.3115, epsilon = 1e-4);
    }

    #[test]
    fn gain_gradient_zero_power() {
        let c = SystemConfig::new(2, 2, 10.0).unwrap();
        let g = GainMatrix::new(array![[0.5, 0.4], [0.3, 0.9]]).unwrap();
        let p = PowerAllocation::new(array![[0.0, 3.0], [2.0, 5.0]]).unwrap();
        let eta = rate_gain_gradient(&c, &g, &p, 0).unwrap();
        assert_eq!(eta[0], 0.0);
        assert!(eta[1] > 0.0);
        assert!(rate_gain_gradient(&c, &g, &p, 2).is_err());
    }

    #[test]
    fn power_gradient_hand_value_and_signs() {
        let (c, g, p) = scalar(1.0, 1.0, 10.0);
        let d = rate_power_gradient(&c, &g, &p, 0).unwrap();
        assert_relative_eq!(d[[0, 0]], 1.0 / (11.0 * LN_2), epsilon = 1e-12);
        assert_relative_eq!(d[[0, 0]], 0.1312, epsilon = 1e-4);

        let c = SystemConfig::new(2, 3, 10.0).unwrap();
        let g = GainMatrix::new(array![[0.5, 0.4, 0.1], [0.3, 0.9, 0.7]]).unwrap();
        let p = PowerAllocation::new(array![[1.0, 3.0, 0.5], [2.0, 1.5, 2.0]]).unwrap();
        for ue in 0..3 {
            let d = rate_power_gradient(&c, &g, &p, ue).unwrap();
            for ((_, k), v) in d.indexed_iter() {
                if k == ue {
                    assert!(*v >= 0.0);
                } else {
                    assert!(*v <= 0.0);
                }
            }
        }
    }

    #[test]
    fn power_gradient_zero_gains() {
        let c = SystemConfig::new(2, 2, 10.0).unwrap();
        let g = GainMatrix::new(Array2::zeros((2, 2))).unwrap();
        let p = PowerAllocation::uniform(&c);
        let d = rate_power_gradient(&c, &g, &p, 1).unwrap();
        assert!(d.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let c = SystemConfig::new(2, 2, 10.0).unwrap();
        let g = GainMatrix::new(Array2::zeros((2, 3))).unwrap();
        let p = PowerAllocation::uniform(&c);
        assert!(matches!(
            rate_per_ue(&c, &g, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn outage_cases() {
        let c = SystemConfig::with_noise(1, 1, 10.0, vec![1.0]).unwrap();
        let truth = GainMatrix::new(array![[0.5]]).unwrap();
        let reported = GainMatrix::new(array![[1.0]]).unwrap();
        let p = PowerAllocation::new(array![[10.0]]).unwrap();
        let a = achieved_rates(&c, &truth, &reported, &p).unwrap();
        assert_relative_eq!(a.transmitted.0[0], 11f64.log2());
        assert_relative_eq!(a.link.0[0], 6f64.log2());
        assert_eq!(a.achieved.0, vec![0.0]);
        assert!(a.any_outage());

        let same = achieved_rates(&c, &truth, &truth, &p).unwrap();
        assert_eq!(same.achieved, same.transmitted);
        assert!(!same.any_outage());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalized_min_rate(2.5, 2.5), Some(1.0));
        assert_eq!(normalized_min_rate(0.0, 2.5), Some(0.0));
        assert_eq!(normalized_min_rate(1.0, 0.0), None);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(0, 3, 10.0).is_err());
        assert!(SystemConfig::new(4, 0, 10.0).is_err());
        assert!(SystemConfig::new(4, 3, 0.0).is_err());
        assert!(SystemConfig::with_noise(2, 3, 10.0, vec![1.0, -1.0]).is_err());
        let c = SystemConfig::new(4, 3, 10.0).unwrap();
        assert!(c.noise_power().iter().all(|s| *s == 0.25));
        assert!(GainMatrix::new(array![[1.5]]).is_err());
        assert!(PowerAllocation::new(array![[-0.1]]).is_err());
    }
}
