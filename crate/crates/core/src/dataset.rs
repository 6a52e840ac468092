//! Labeled instances and the dataset file.
//!
//! The dataset is a CSV table with one row per instance: the `N*K` gains
//! (`g_1_1 .. g_N_K`, subcarrier-major), the `N*K` label powers in the same
//! order, then `oracle_min_rate`. A JSON sidecar at `<path>.meta.json` carries
//! the system constants, generator settings and format version.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmin, rates_unchecked, GainMatrix, PowerAllocation, SystemConfig};
use crate::solver::{solve_maxmin, SolverConfig};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Draws before a failing instance is given up on.
const MAX_RESAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub gains: GainMatrix,
    pub powers: PowerAllocation,
    pub oracle_min_rate: f64,
}

impl LabeledInstance {
    /// Min rate of the stored label recomputed from the stored gains.
    pub fn recomputed_min_rate(&self, config: &SystemConfig) -> f64 {
        let r = rates_unchecked(config, self.gains.view(), self.powers.view());
        argmin(&r).map_or(0.0, |(v, _)| v)
    }

    /// Instances with a non-positive optimum cannot be normalized against.
    pub fn is_degenerate(&self) -> bool {
        !(self.oracle_min_rate > 0.0)
    }
}

/// Sampling law for channel gains; draws always land in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainDistribution {
    /// i.i.d. Uniform(0, 1).
    #[default]
    Uniform,
    /// Exponential with the given mean (Rayleigh fading power), clipped at 1.
    ClippedExponential { mean: f64 },
}

impl GainDistribution {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            GainDistribution::Uniform => rng.gen::<f64>(),
            GainDistribution::ClippedExponential { mean } => {
                let u: f64 = rng.gen();
                (-mean * (1.0 - u).ln()).min(1.0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GainDistribution::ClippedExponential { mean } if !(mean > 0.0) => Err(Error::Config(
                format!("exponential mean must be positive, got {mean}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Sidecar metadata written next to every dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub num_subcarriers: usize,
    pub num_ues: usize,
    pub total_power: f64,
    pub noise_power: Vec<f64>,
    pub distribution: GainDistribution,
    pub seed: u64,
    pub count: usize,
    pub resampled: usize,
    pub solver: SolverConfig,
    /// Echo of the run configuration that produced the file, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

impl DatasetMeta {
    pub fn system(&self) -> Result<SystemConfig> {
        SystemConfig::with_noise(
            self.num_subcarriers,
            self.num_ues,
            self.total_power,
            self.noise_power.clone(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub instances: Vec<LabeledInstance>,
}

impl Dataset {
    /// First `train_fraction` of the instances for training, the rest held out.
    pub fn split(&self, train_fraction: f64) -> (&[LabeledInstance], &[LabeledInstance]) {
        let n = self.instances.len();
        let cut = ((n as f64 * train_fraction).round() as usize).min(n);
        self.instances.split_at(cut)
    }
}

/// Per-instance random stream derived from `(seed, index)`.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn label_one(
    config: &SystemConfig,
    distribution: GainDistribution,
    seed: u64,
    index: usize,
    solver: &SolverConfig,
) -> Result<(LabeledInstance, usize)> {
    let mut rng = instance_rng(seed, index as u64);
    let solver = SolverConfig {
        rng_seed: solver.rng_seed.wrapping_add(index as u64),
        ..solver.clone()
    };
    let mut last_err = None;
    for attempt in 0..MAX_RESAMPLES {
        let flat = (0..config.num_links())
            .map(|_| distribution.sample(&mut rng))
            .collect();
        let gains = GainMatrix::from_flat(config.num_subcarriers(), config.num_ues(), flat)?;
        match solve_maxmin(config, &gains, &solver) {
            Ok((powers, oracle_min_rate)) => {
                return Ok((
                    LabeledInstance {
                        gains,
                        powers,
                        oracle_min_rate,
                    },
                    attempt,
                ))
            }
            Err(e @ Error::SolverFailure { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Draws `count` gain matrices and labels each with `solve_maxmin`. Every
/// instance has its own random stream, so the result does not depend on how
/// many worker threads run. Returns the instances and the number of resamples.
pub fn generate_dataset(
    config: &SystemConfig,
    count: usize,
    distribution: GainDistribution,
    seed: u64,
    solver: &SolverConfig,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidInput("dataset count must be >= 1".into()));
    }
    distribution.validate()?;
    solver.validate()?;
    let labeled: Vec<(LabeledInstance, usize)> = (0..count)
        .into_par_iter()
        .map(|i| label_one(config, distribution, seed, i, solver))
        .collect::<Result<_>>()?;
    let resampled = labeled.iter().map(|(_, r)| r).sum();
    let instances = labeled.into_iter().map(|(inst, _)| inst).collect();
    Ok(Dataset {
        meta: DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            num_subcarriers: config.num_subcarriers(),
            num_ues: config.num_ues(),
            total_power: config.total_power(),
            noise_power: config.noise_power().to_vec(),
            distribution,
            seed,
            count,
            resampled,
            solver: solver.clone(),
            run_config: None,
        },
        instances,
    })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn header(n: usize, k: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * n * k + 1);
    for prefix in ["g", "p"] {
        for i in 1..=n {
            for j in 1..=k {
                cols.push(format!("{prefix}_{i}_{j}"));
            }
        }
    }
    cols.push("oracle_min_rate".into());
    cols
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let meta = &dataset.meta;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(header(meta.num_subcarriers, meta.num_ues))
        .map_err(csv_err)?;
    for inst in &dataset.instances {
        let row = inst
            .gains
            .as_array()
            .iter()
            .chain(inst.powers.as_array().iter())
            .chain(std::iter::once(&inst.oracle_min_rate))
            .map(|v| v.to_string());
        w.write_record(row).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::format(path, e.to_string()))?
        .flush()
        .map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let meta_path = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: DatasetMeta =
        serde_json::from_str(&meta_text).map_err(|e| Error::format(&meta_path, e.to_string()))?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: meta.format_version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let (n, k) = (meta.num_subcarriers, meta.num_ues);
    let links = n * k;
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let expected = header(n, k);
    let found: Vec<String> = r
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != expected {
        return Err(Error::ShapeMismatch(format!(
            "dataset header does not match N={n}, K={k}"
        )));
    }
    let mut instances = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, format!("row {}: {e}", row + 1)))?;
        let gains = GainMatrix::from_flat(n, k, vals[..links].to_vec())?;
        let powers = PowerAllocation::from_flat(n, k, vals[links..2 * links].to_vec())?;
        instances.push(LabeledInstance {
            gains,
            powers,
            oracle_min_rate: vals[2 * links],
        });
    }
    if instances.len() != meta.count {
        return Err(Error::format(
            path,
            format!(
                "sidecar declares {} rows, file has {}",
                meta.count,
                instances.len()
            ),
        ));
    }
    Ok(Dataset { meta, instances })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_solver() -> SolverConfig {
        SolverConfig {
            num_starts: 2,
            max_iters: 60,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn header_order() {
        assert_eq!(
            header(2, 2),
            vec![
                "g_1_1",
                "g_1_2",
                "g_2_1",
                "g_2_2",
                "p_1_1",
                "p_1_2",
                "p_2_1",
                "p_2_2",
                "oracle_min_rate"
            ]
        );
    }

    #[test]
    fn labels_are_feasible_and_consistent() {
        let c = SystemConfig::new(4, 3, 10.0).unwrap();
        let d = generate_dataset(&c, 100, GainDistribution::Uniform, 7, &quick_solver()).unwrap();
        assert_eq!(d.instances.len(), 100);
        for inst in &d.instances {
            assert!(inst.powers.is_feasible(&c));
            assert!(inst.oracle_min_rate > 0.0);
            assert!((inst.recomputed_min_rate(&c) - inst.oracle_min_rate).abs() <= 1e-9);
        }
    }

    #[test]
    fn file_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let c = SystemConfig::new(2, 3, 10.0).unwrap();
        let a = generate_dataset(&c, 5, GainDistribution::Uniform, 3, &quick_solver()).unwrap();
        let b = generate_dataset(&c, 5, GainDistribution::Uniform, 3, &quick_solver()).unwrap();
        let pa = dir.path().join("a.csv");
        let pb = dir.path().join("b.csv");
        write_dataset(&pa, &a).unwrap();
        write_dataset(&pb, &b).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        let back = read_dataset(&pa).unwrap();
        assert_eq!(back.instances, a.instances);
        assert_eq!(back.meta, a.meta);
    }

    #[test]
    fn missing_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("none.csv");
        assert!(matches!(read_dataset(&p), Err(Error::MissingArtifact(_))));

        let c = SystemConfig::new(2, 2, 10.0).unwrap();
        let d = generate_dataset(&c, 3, GainDistribution::Uniform, 1, &quick_solver()).unwrap();
        let p = dir.path().join("d.csv");
        write_dataset(&p, &d).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let cut: String = text.lines().take(2).collect::<Vec<_>>().join("\n");
        std::fs::write(&p, cut).unwrap();
        assert!(read_dataset(&p).is_err());
    }

    #[test]
    fn exponential_draws_stay_in_range() {
        let mut rng = instance_rng(1, 0);
        let d = GainDistribution::ClippedExponential { mean: 0.5 };
        for _ in 0..1000 {
            let g = d.sample(&mut rng);
            assert!((0.0..=1.0).contains(&g));
        }
        assert!(GainDistribution::ClippedExponential { mean: 0.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn split_halves() {
        let c = SystemConfig::new(1, 2, 10.0).unwrap();
        let d = generate_dataset(&c, 10, GainDistribution::Uniform, 2, &quick_solver()).unwrap();
        let (tr, te) = d.split(0.5);
        assert_eq!((tr.len(), te.len()), (5, 5));
    }
}
