//! Offline max-min power allocation.
//!
//! `solve_maxmin` runs projected gradient ascent on the soft-min surrogate
//! `-tau * ln(sum_j exp(-r_j / tau))`, annealing `tau` over a decreasing schedule,
//! from several starting points. The best true min rate seen at any feasible
//! iterate is returned. `brute_force_oracle` enumerates a simplex grid and is
//! only meant for checking the former on tiny instances.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    argmin, power_gradient_into, rates_unchecked, GainMatrix, PowerAllocation, SystemConfig,
};

/// Largest `N * K` accepted by the grid oracle.
pub const ORACLE_MAX_LINKS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub num_starts: usize,
    /// Iteration cap per smoothing stage.
    pub max_iters: usize,
    /// Soft-min temperatures, strictly decreasing.
    pub smoothing_schedule: Vec<f64>,
    /// Initial ascent step; adapted by backtracking.
    pub step_size: f64,
    pub convergence_tol: f64,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            num_starts: 8,
            max_iters: 200,
            smoothing_schedule: vec![1.0, 0.3, 0.1, 0.03, 0.01],
            step_size: 1.0,
            convergence_tol: 1e-10,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_starts == 0 || self.max_iters == 0 {
            return Err(Error::Config(
                "solver needs num_starts >= 1 and max_iters >= 1".into(),
            ));
        }
        if self.smoothing_schedule.is_empty()
            || self.smoothing_schedule.iter().any(|t| !(*t > 0.0))
            || self.smoothing_schedule.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(Error::Config(
                "smoothing_schedule must be positive and strictly decreasing".into(),
            ));
        }
        if !(self.step_size > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(Error::Config(
                "step_size and convergence_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Euclidean projection onto `{p >= 0, sum p <= total_power}`.
pub fn project_onto_budget(powers: &mut Array2<f64>, total_power: f64) {
    powers.mapv_inplace(|p| p.max(0.0));
    if powers.sum() <= total_power {
        return;
    }
    // Largest threshold theta with sum(max(p - theta, 0)) = total_power.
    let mut sorted: Vec<f64> = powers.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (idx, v) in sorted.iter().enumerate() {
        prefix += v;
        let t = (prefix - total_power) / (idx + 1) as f64;
        if *v > t {
            theta = t;
        } else {
            break;
        }
    }
    powers.mapv_inplace(|p| (p - theta).max(0.0));
}

fn soft_min(rates: &[f64], tau: f64, weights: &mut [f64]) -> f64 {
    let (m, _) = argmin(rates).expect("at least one UE");
    let mut z = 0.0;
    for (w, r) in weights.iter_mut().zip(rates) {
        *w = (-(r - m) / tau).exp();
        z += *w;
    }
    for w in weights.iter_mut() {
        *w /= z;
    }
    m - tau * z.ln()
}

struct Ascent<'a> {
    config: &'a SystemConfig,
    gains: &'a GainMatrix,
    solver: &'a SolverConfig,
    scratch: Array2<f64>,
    grad: Array2<f64>,
    weights: Vec<f64>,
}

impl<'a> Ascent<'a> {
    fn new(config: &'a SystemConfig, gains: &'a GainMatrix, solver: &'a SolverConfig) -> Self {
        let shape = (config.num_subcarriers(), config.num_ues());
        Self {
            config,
            gains,
            solver,
            scratch: Array2::zeros(shape),
            grad: Array2::zeros(shape),
            weights: vec![0.0; config.num_ues()],
        }
    }

    fn fail(&self, reason: &str) -> Error {
        Error::SolverFailure {
            reason: reason.into(),
            gains: self.gains.to_flat(),
        }
    }

    fn objective(&mut self, powers: &Array2<f64>, tau: f64) -> (f64, f64) {
        let rates = rates_unchecked(self.config, self.gains.view(), powers.view());
        let smooth = soft_min(&rates, tau, &mut self.weights);
        (smooth, argmin(&rates).map_or(0.0, |(v, _)| v))
    }

    fn gradient(&mut self, powers: &Array2<f64>) {
        self.grad.fill(0.0);
        for ue in 0..self.config.num_ues() {
            let w = self.weights[ue];
            if w == 0.0 {
                continue;
            }
            power_gradient_into(
                self.config.noise_power(),
                self.gains.view(),
                powers.view(),
                ue,
                &mut self.scratch,
            );
            self.grad.scaled_add(w, &self.scratch);
        }
    }

    /// Runs the annealed ascent from `start`; returns the best iterate by true min rate.
    fn run(&mut self, start: Array2<f64>) -> Result<(Array2<f64>, f64)> {
        let total = self.config.total_power();
        let mut powers = start;
        project_onto_budget(&mut powers, total);
        let (_, mut best_min) = self.objective(&powers, 1.0);
        let mut best = powers.clone();

        let schedule = self.solver.smoothing_schedule.clone();
        for tau in schedule {
            let mut step = self.solver.step_size;
            let (mut obj, _) = self.objective(&powers, tau);
            for _ in 0..self.solver.max_iters {
                self.gradient(&powers);
                if self.grad.iter().any(|g| !g.is_finite()) {
                    return Err(self.fail("non-finite gradient"));
                }
                let mut accepted = None;
                for _ in 0..40 {
                    let mut cand = powers.clone();
                    cand.scaled_add(step, &self.grad);
                    project_onto_budget(&mut cand, total);
                    let (cand_obj, cand_min) = self.objective(&cand, tau);
                    if !cand_obj.is_finite() {
                        return Err(self.fail("non-finite objective"));
                    }
                    if cand_obj > obj {
                        accepted = Some((cand, cand_obj, cand_min));
                        break;
                    }
                    step *= 0.5;
                }
                // Weights now belong to the accepted candidate.
                let Some((cand, cand_obj, cand_min)) = accepted else {
                    break;
                };
                let gain = cand_obj - obj;
                powers = cand;
                obj = cand_obj;
                if cand_min > best_min {
                    best_min = cand_min;
                    best.assign(&powers);
                }
                step *= 1.5;
                if gain <= self.solver.convergence_tol * (1.0 + obj.abs()) {
                    break;
                }
            }
        }
        Ok((best, best_min))
    }
}

fn start_point(config: &SystemConfig, seed: u64, start: usize) -> Array2<f64> {
    let shape = (config.num_subcarriers(), config.num_ues());
    if start == 0 {
        return PowerAllocation::uniform(config).as_array().clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    let mut p = Array2::from_shape_fn(shape, |_| rng.gen::<f64>() + 1e-3);
    let scale = config.total_power() / p.sum();
    p.mapv_inplace(|v| v * scale);
    p
}

/// Multi-start annealed projected gradient ascent for the max-min problem.
/// Returns the best feasible allocation found and its min rate.
pub fn solve_maxmin(
    config: &SystemConfig,
    gains: &GainMatrix,
    solver: &SolverConfig,
) -> Result<(PowerAllocation, f64)> {
    solver.validate()?;
    if gains.dim() != (config.num_subcarriers(), config.num_ues()) {
        return Err(Error::dims(
            format!("{}x{}", config.num_subcarriers(), config.num_ues()),
            format!("{:?}", gains.dim()),
        ));
    }
    let mut ascent = Ascent::new(config, gains, solver);
    let mut best: Option<(Array2<f64>, f64)> = None;
    for s in 0..solver.num_starts {
        let (p, v) = ascent.run(start_point(config, solver.rng_seed, s))?;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((p, v));
        }
    }
    let (powers, _) = best.expect("num_starts >= 1");
    let powers = PowerAllocation::new(powers)?;
    // Recompute so the reported value is exactly the min rate of the returned allocation.
    let rates = rates_unchecked(config, gains.view(), powers.view());
    let (min, _) = argmin(&rates).expect("K >= 1");
    if !min.is_finite() {
        return Err(Error::SolverFailure {
            reason: "non-finite min rate".into(),
            gains: gains.to_flat(),
        });
    }
    Ok((powers, min))
}

/// Exhaustive search over powers on a grid of `grid_points` levels per entry
/// (`0, p/(G-1), .., p`) with total at most `p`. Ties keep the first point in
/// lexicographic order.
pub fn brute_force_oracle(
    config: &SystemConfig,
    gains: &GainMatrix,
    grid_points: usize,
) -> Result<(PowerAllocation, f64)> {
    let links = config.num_links();
    if links > ORACLE_MAX_LINKS {
        return Err(Error::InvalidInput(format!(
            "grid oracle supports N*K <= {ORACLE_MAX_LINKS}, got {links}"
        )));
    }
    if grid_points < 5 {
        return Err(Error::InvalidInput(format!(
            "grid oracle needs at least 5 levels, got {grid_points}"
        )));
    }
    if gains.dim() != (config.num_subcarriers(), config.num_ues()) {
        return Err(Error::dims(
            format!("{}x{}", config.num_subcarriers(), config.num_ues()),
            format!("{:?}", gains.dim()),
        ));
    }
    let unit = config.total_power() / (grid_points - 1) as f64;
    let shape = (config.num_subcarriers(), config.num_ues());
    let mut levels = vec![0usize; links];
    let mut best = (vec![0usize; links], f64::NEG_INFINITY);

    fn visit(pos: usize, remaining: usize, levels: &mut [usize], eval: &mut dyn FnMut(&[usize])) {
        if pos == levels.len() {
            eval(levels);
            return;
        }
        for l in 0..=remaining {
            levels[pos] = l;
            visit(pos + 1, remaining - l, levels, eval);
        }
    }

    let mut powers = Array2::<f64>::zeros(shape);
    let mut eval = |lv: &[usize]| {
        for (slot, l) in powers.iter_mut().zip(lv) {
            *slot = *l as f64 * unit;
        }
        let rates = rates_unchecked(config, gains.view(), powers.view());
        let (m, _) = argmin(&rates).expect("K >= 1");
        if m > best.1 {
            best = (lv.to_vec(), m);
        }
    };
    visit(0, grid_points - 1, &mut levels, &mut eval);

    let flat = best.0.iter().map(|l| *l as f64 * unit).collect();
    let alloc = PowerAllocation::from_flat(shape.0, shape.1, flat)?;
    Ok((alloc, best.1))
}
