//! Feedforward regression network mapping a flattened gain matrix to a power
//! allocation: dense ReLU hidden layers and a softmax output scaled by the
//! total power, so every output is feasible by construction.
//!
//! Everything runs in `f64`. Gradients are computed by hand-written
//! backpropagation, including through the rate formula for the min-rate loss
//! and down to the input layer for attacks.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledInstance;
use crate::error::{Error, Result};
use crate::model::{
    argmin, gain_gradient_unchecked, normalized_min_rate, power_gradient_into, rates_unchecked,
    GainMatrix, PowerAllocation, SystemConfig,
};

/// Hidden layer widths of the full-size architecture.
pub const FULL_HIDDEN: [usize; 4] = [1024, 1024, 1024, 512];
/// Hidden layer widths used for CPU-scale experiments.
pub const DESK_HIDDEN: [usize; 4] = [128, 128, 128, 64];

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_MAGIC: &[u8; 8] = b"APWNET\0\0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_size: usize,
    pub hidden_sizes: Vec<usize>,
    pub output_size: usize,
    /// The softmax output is multiplied by this.
    pub total_power: f64,
}

impl NetworkSpec {
    pub fn new(config: &SystemConfig, hidden_sizes: Vec<usize>) -> Self {
        Self {
            input_size: config.num_links(),
            hidden_sizes,
            output_size: config.num_links(),
            total_power: config.total_power(),
        }
    }

    pub fn full(config: &SystemConfig) -> Self {
        Self::new(config, FULL_HIDDEN.to_vec())
    }

    pub fn desk(config: &SystemConfig) -> Self {
        Self::new(config, DESK_HIDDEN.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size != self.output_size {
            return Err(Error::ShapeMismatch(format!(
                "input and output sizes must match and be positive ({} vs {})",
                self.input_size, self.output_size
            )));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::ShapeMismatch("hidden layer of width 0".into()));
        }
        if !(self.total_power > 0.0) {
            return Err(Error::InvalidInput("total power must be positive".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every dense layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![self.input_size];
        sizes.extend(&self.hidden_sizes);
        sizes.push(self.output_size);
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn check_system(&self, config: &SystemConfig) -> Result<()> {
        if self.input_size != config.num_links() {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} inputs, system has N*K = {}",
                self.input_size,
                config.num_links()
            )));
        }
        Ok(())
    }
}

/// Weights are stored `fan_in x fan_out` so a batch is `X.dot(W) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<Dense>,
}

impl NetworkParams {
    pub fn zeros_like(spec: &NetworkSpec) -> Self {
        Self {
            layers: spec
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Dense {
                    weights: Array2::zeros((i, o)),
                    bias: Array1::zeros(o),
                })
                .collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameters in storage order: per layer, weights row-major then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::dims(self.num_params(), flat.len()));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Training / attack loss between a label and a predicted allocation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LossKind {
    /// Mean absolute error over the `N*K` powers.
    Mae,
    /// Mean absolute error relative to `p + c`.
    Mape { c: f64 },
    /// Mean squared error of `ln(p + 1)`.
    Msle,
    /// Squared gap between the label's min rate and the prediction's.
    #[default]
    Custom,
}

impl LossKind {
    pub const MAPE_DEFAULT_C: f64 = 10.0;

    pub fn all() -> [LossKind; 4] {
        [
            LossKind::Mae,
            LossKind::Mape {
                c: Self::MAPE_DEFAULT_C,
            },
            LossKind::Msle,
            LossKind::Custom,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossKind::Mape { c } if !(*c > 0.0) => Err(Error::Config(format!(
                "MAPE offset must be positive, got {c}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Mae => f.write_str("mae"),
            LossKind::Mape { .. } => f.write_str("mape"),
            LossKind::Msle => f.write_str("msle"),
            LossKind::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(LossKind::Mae),
            "mape" => Ok(LossKind::Mape {
                c: Self::MAPE_DEFAULT_C,
            }),
            "msle" => Ok(LossKind::Msle),
            "custom" => Ok(LossKind::Custom),
            other => Err(Error::Config(format!(
                "unknown loss '{other}' (expected mae|mape|msle|custom)"
            ))),
        }
    }
}

/// Per-sample loss plus its gradient with respect to the predicted powers
/// and, for the min-rate loss, the direct gradient with respect to the gains.
struct SampleLoss<'a> {
    kind: LossKind,
    config: &'a SystemConfig,
    scratch: Array2<f64>,
}

impl<'a> SampleLoss<'a> {
    fn new(kind: LossKind, config: &'a SystemConfig) -> Self {
        Self {
            kind,
            config,
            scratch: Array2::zeros((config.num_subcarriers(), config.num_ues())),
        }
    }

    fn shape(&self) -> (usize, usize) {
        (self.config.num_subcarriers(), self.config.num_ues())
    }

    fn value(
        &self,
        gains: ArrayView1<'_, f64>,
        label: ArrayView1<'_, f64>,
        label_min: f64,
        pred: ArrayView1<'_, f64>,
    ) -> f64 {
        let n = pred.len() as f64;
        match self.kind {
            LossKind::Mae => {
                Zip::from(label)
                    .and(pred)
                    .fold(0.0, |acc, p, q| acc + (p - q).abs())
                    / n
            }
            LossKind::Mape { c } => {
                Zip::from(label)
                    .and(pred)
                    .fold(0.0, |acc, p, q| acc + (p - q).abs() / (p + c))
                    / n
            }
            LossKind::Msle => {
                Zip::from(label).and(pred).fold(0.0, |acc, p, q| {
                    let d = p.ln_1p() - q.ln_1p();
                    acc + d * d
                }) / n
            }
            LossKind::Custom => {
                let (m, _) = self.pred_min(gains, pred);
                (label_min - m) * (label_min - m)
            }
        }
    }

    fn pred_min(&self, gains: ArrayView1<'_, f64>, pred: ArrayView1<'_, f64>) -> (f64, usize) {
        let shape = self.shape();
        let g = gains.into_shape_with_order(shape).expect("gain length");
        let p = pred.into_shape_with_order(shape).expect("power length");
        argmin(&rates_unchecked(self.config, g, p)).expect("K >= 1")
    }

    /// Returns the loss; writes `dL/dpred` (and `dL/dgains` when requested).
    fn grad(
        &mut self,
        gains: ArrayView1<'_, f64>,
        label: ArrayView1<'_, f64>,
        label_min: f64,
        pred: ArrayView1<'_, f64>,
        d_pred: &mut [f64],
        d_gains: Option<&mut [f64]>,
    ) -> f64 {
        let n = pred.len() as f64;
        let loss = self.value(gains, label, label_min, pred);
        match self.kind {
            LossKind::Mae => {
                for ((d, p), q) in d_pred.iter_mut().zip(label).zip(pred) {
                    *d = sign(q - p) / n;
                }
            }
            LossKind::Mape { c } => {
                for ((d, p), q) in d_pred.iter_mut().zip(label).zip(pred) {
                    *d = sign(q - p) / ((p + c) * n);
                }
            }
            LossKind::Msle => {
                for ((d, p), q) in d_pred.iter_mut().zip(label).zip(pred) {
                    *d = -2.0 * (p.ln_1p() - q.ln_1p()) / ((1.0 + q) * n);
                }
            }
            LossKind::Custom => {
                let shape = self.shape();
                let (m, ue) = self.pred_min(gains, pred);
                let outer = -2.0 * (label_min - m);
                let g = gains.into_shape_with_order(shape).expect("gain length");
                let p = pred.into_shape_with_order(shape).expect("power length");
                power_gradient_into(self.config.noise_power(), g, p, ue, &mut self.scratch);
                for (d, s) in d_pred.iter_mut().zip(self.scratch.iter()) {
                    *d = outer * s;
                }
                if let Some(dg) = d_gains {
                    dg.iter_mut().for_each(|v| *v = 0.0);
                    let eta = gain_gradient_unchecked(self.config.noise_power(), g, p, ue);
                    let k = self.config.num_ues();
                    for (i, e) in eta.into_iter().enumerate() {
                        dg[i * k + ue] = outer * e;
                    }
                }
                return loss;
            }
        }
        if let Some(dg) = d_gains {
            dg.iter_mut().for_each(|v| *v = 0.0);
        }
        loss
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss of a single prediction. The gains are only used by [`LossKind::Custom`],
/// which compares min rates of label and prediction under the same gains.
pub fn loss_value(
    kind: LossKind,
    config: &SystemConfig,
    gains: &GainMatrix,
    label: &PowerAllocation,
    predicted: &PowerAllocation,
) -> Result<f64> {
    let shape = (config.num_subcarriers(), config.num_ues());
    for (what, d) in [
        ("gains", gains.dim()),
        ("label", label.as_array().dim()),
        ("prediction", predicted.as_array().dim()),
    ] {
        if d != shape {
            return Err(Error::dims(format!("{what} {shape:?}"), format!("{d:?}")));
        }
    }
    let flat = |a: &Array2<f64>| Array1::from_iter(a.iter().copied());
    let g = flat(gains.as_array());
    let l = flat(label.as_array());
    let p = flat(predicted.as_array());
    let label_min = argmin(&rates_unchecked(config, gains.view(), label.view()))
        .expect("K >= 1")
        .0;
    Ok(SampleLoss::new(kind, config).value(g.view(), l.view(), label_min, p.view()))
}

/// Rows of inputs with their labels and label min rates.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub labels: Array2<f64>,
    pub label_min: Array1<f64>,
}

impl Batch {
    pub fn from_instances(instances: &[LabeledInstance]) -> Result<Self> {
        let first = instances
            .first()
            .ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
        let links = first.gains.as_array().len();
        let mut inputs = Array2::zeros((instances.len(), links));
        let mut labels = Array2::zeros((instances.len(), links));
        for (r, inst) in instances.iter().enumerate() {
            if inst.gains.as_array().len() != links {
                return Err(Error::dims(links, inst.gains.as_array().len()));
            }
            inputs
                .row_mut(r)
                .iter_mut()
                .zip(inst.gains.as_array().iter())
                .for_each(|(d, s)| *d = *s);
            labels
                .row_mut(r)
                .iter_mut()
                .zip(inst.powers.as_array().iter())
                .for_each(|(d, s)| *d = *s);
        }
        let label_min = instances.iter().map(|i| i.oracle_min_rate).collect();
        Ok(Self {
            inputs,
            labels,
            label_min,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select(Axis(0), rows),
            labels: self.labels.select(Axis(0), rows),
            label_min: self.label_min.select(Axis(0), rows),
        }
    }
}

struct Trace {
    /// Layer inputs: `acts[0]` is the batch input, `acts[l]` the ReLU output of hidden layer `l`.
    acts: Vec<Array2<f64>>,
    /// Softmax probabilities (before scaling by total power).
    probs: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
}

impl Network {
    /// Seed-deterministic He-uniform weights (limit `sqrt(6 / fan_in)`), zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let limit = (6.0 / fan_in as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_fn((fan_in, fan_out), |_| {
                        rng.gen_range(-limit..limit)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            spec,
            params: NetworkParams { layers },
        })
    }

    pub fn from_parts(spec: NetworkSpec, params: NetworkParams) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        if shapes.len() != params.layers.len()
            || shapes
                .iter()
                .zip(&params.layers)
                .any(|(&(i, o), l)| l.weights.dim() != (i, o) || l.bias.len() != o)
        {
            return Err(Error::ShapeMismatch(
                "parameters do not match the network spec".into(),
            ));
        }
        Ok(Self { spec, params })
    }

    fn trace(&self, inputs: ArrayView2<'_, f64>) -> Trace {
        let last = self.params.layers.len() - 1;
        let mut acts = Vec::with_capacity(last + 1);
        acts.push(inputs.to_owned());
        let mut logits = None;
        for (l, layer) in self.params.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.weights);
            z += &layer.bias;
            if l == last {
                logits = Some(z);
            } else {
                z.mapv_inplace(|v| v.max(0.0));
                acts.push(z);
            }
        }
        let mut probs = logits.expect("at least one layer");
        for mut row in probs.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            row.mapv_inplace(|v| (v - max).exp());
            let z = row.sum();
            row.mapv_inplace(|v| v / z);
        }
        Trace { acts, probs }
    }

    /// Batched forward pass; rows are flattened gain matrices, output rows are powers.
    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.spec.input_size {
            return Err(Error::dims(self.spec.input_size, inputs.ncols()));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite network input".into()));
        }
        Ok(self.trace(inputs).probs * self.spec.total_power)
    }

    /// Forward pass for one flattened gain matrix.
    pub fn forward_flat(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|_| Error::dims(self.spec.input_size, input.len()))?;
        Ok(self.forward_batch(x)?.into_iter().collect())
    }

    /// Power allocation the network assigns to `gains`.
    pub fn forward(&self, config: &SystemConfig, gains: &GainMatrix) -> Result<PowerAllocation> {
        self.spec.check_system(config)?;
        let out = self.forward_flat(&gains.to_flat())?;
        PowerAllocation::from_flat(config.num_subcarriers(), config.num_ues(), out)
    }

    /// Mean loss over a batch.
    pub fn batch_loss(&self, kind: LossKind, config: &SystemConfig, batch: &Batch) -> Result<f64> {
        let preds = self.forward_batch(batch.inputs.view())?;
        let loss = SampleLoss::new(kind, config);
        let total: f64 = (0..batch.len())
            .map(|r| {
                loss.value(
                    batch.inputs.row(r),
                    batch.labels.row(r),
                    batch.label_min[r],
                    preds.row(r),
                )
            })
            .sum();
        Ok(total / batch.len() as f64)
    }

    /// Backpropagates `d_probs_scaled` (dL/d outputs, already averaged) and
    /// returns parameter gradients plus dL/d inputs from the network path.
    fn backward(&self, trace: &Trace, d_out: &Array2<f64>) -> (NetworkParams, Array2<f64>) {
        // Scaled softmax: dz_k = P * s_k * (g_k - sum_l g_l s_l).
        let p_total = self.spec.total_power;
        let mut dz = Array2::zeros(d_out.raw_dim());
        Zip::from(dz.rows_mut())
            .and(d_out.rows())
            .and(trace.probs.rows())
            .for_each(|mut dzr, gr, sr| {
                let dot = gr.dot(&sr);
                Zip::from(&mut dzr)
                    .and(&gr)
                    .and(&sr)
                    .for_each(|d, g, s| *d = p_total * s * (g - dot));
            });

        let mut grads = Vec::with_capacity(self.params.layers.len());
        for l in (0..self.params.layers.len()).rev() {
            let a_prev = &trace.acts[l];
            let layer = &self.params.layers[l];
            let dw = a_prev.t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            let mut da = dz.dot(&layer.weights.t());
            if l > 0 {
                Zip::from(&mut da).and(a_prev).for_each(|d, a| {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            grads.push(Dense {
                weights: dw,
                bias: db,
            });
            dz = da;
        }
        grads.reverse();
        (NetworkParams { layers: grads }, dz)
    }

    fn loss_grads(
        &self,
        kind: LossKind,
        config: &SystemConfig,
        batch: &Batch,
        want_input: bool,
    ) -> Result<(f64, NetworkParams, Array2<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        self.spec.check_system(config)?;
        if batch.inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite network input".into()));
        }
        let trace = self.trace(batch.inputs.view());
        let preds = &trace.probs * self.spec.total_power;
        let n = batch.len() as f64;
        let links = self.spec.output_size;
        let mut d_out = Array2::zeros(preds.raw_dim());
        let mut d_direct = Array2::zeros(preds.raw_dim());
        let mut loss = SampleLoss::new(kind, config);
        let mut total = 0.0;
        let mut row_pred = vec![0.0; links];
        let mut row_gain = vec![0.0; links];
        for r in 0..batch.len() {
            total += loss.grad(
                batch.inputs.row(r),
                batch.labels.row(r),
                batch.label_min[r],
                preds.row(r),
                &mut row_pred,
                want_input.then_some(&mut row_gain[..]),
            );
            d_out
                .row_mut(r)
                .iter_mut()
                .zip(&row_pred)
                .for_each(|(d, v)| *d = v / n);
            if want_input {
                d_direct
                    .row_mut(r)
                    .iter_mut()
                    .zip(&row_gain)
                    .for_each(|(d, v)| *d = v / n);
            }
        }
        let (grads, mut d_in) = self.backward(&trace, &d_out);
        if want_input {
            d_in += &d_direct;
        }
        if !grads.all_finite() || d_in.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(format!(
                "{kind} loss over a batch of {}",
                batch.len()
            )));
        }
        Ok((total / n, grads, d_in))
    }

    /// Mean loss over the batch and its gradient with respect to every parameter.
    pub fn param_gradients(
        &self,
        kind: LossKind,
        config: &SystemConfig,
        batch: &Batch,
    ) -> Result<(f64, NetworkParams)> {
        let (loss, grads, _) = self.loss_grads(kind, config, batch, false)?;
        Ok((loss, grads))
    }

    /// Gradient of the loss of one sample with respect to the input gains,
    /// through the network and, for [`LossKind::Custom`], through the gains'
    /// direct appearance in the rate formula. With `only_ue`, entries outside
    /// that UE's column are zeroed.
    pub fn input_gradient(
        &self,
        kind: LossKind,
        config: &SystemConfig,
        input: &[f64],
        label: &[f64],
        label_min: f64,
        only_ue: Option<usize>,
    ) -> Result<Vec<f64>> {
        let links = self.spec.input_size;
        if input.len() != links || label.len() != links {
            return Err(Error::dims(links, input.len().max(label.len())));
        }
        let batch = Batch {
            inputs: Array2::from_shape_vec((1, links), input.to_vec()).expect("sized"),
            labels: Array2::from_shape_vec((1, links), label.to_vec()).expect("sized"),
            label_min: Array1::from_elem(1, label_min),
        };
        let (_, _, d_in) = self.loss_grads(kind, config, &batch, true)?;
        let mut g: Vec<f64> = d_in.into_iter().collect();
        if let Some(ue) = only_ue {
            let k = config.num_ues();
            if ue >= k {
                return Err(Error::IndexOutOfRange { index: ue, size: k });
            }
            for (idx, v) in g.iter_mut().enumerate() {
                if idx % k != ue {
                    *v = 0.0;
                }
            }
        }
        Ok(g)
    }

    /// Mean normalized min rate of the network's allocations on clean inputs.
    /// Degenerate instances are skipped.
    pub fn mean_normalized_min_rate(
        &self,
        config: &SystemConfig,
        instances: &[LabeledInstance],
    ) -> Result<Option<f64>> {
        if instances.is_empty() {
            return Ok(None);
        }
        let batch = Batch::from_instances(instances)?;
        let preds = self.forward_batch(batch.inputs.view())?;
        let shape = (config.num_subcarriers(), config.num_ues());
        let mut sum = 0.0;
        let mut count = 0usize;
        for (r, inst) in instances.iter().enumerate() {
            let p = preds.row(r).into_shape_with_order(shape).expect("shape");
            let rates = rates_unchecked(config, inst.gains.view(), p);
            let m = argmin(&rates).expect("K >= 1").0;
            if let Some(v) = normalized_min_rate(m, inst.oracle_min_rate) {
                sum += v;
                count += 1;
            }
        }
        Ok((count > 0).then(|| sum / count as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
    /// Leading share of the dataset used for training; the rest is held out.
    pub train_fraction: f64,
    /// Held-out instances scored after every epoch (0 disables).
    pub validation_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 128,
            epochs: 100,
            rng_seed: 0,
            train_fraction: 0.5,
            validation_size: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config("train_fraction must be in (0, 1]".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.eps > 0.0)
        {
            return Err(Error::Config("invalid ADAM moments or eps".into()));
        }
        Ok(())
    }
}

/// One line of the training log. Epoch 0 is the untrained network scored on
/// the full training split; later epochs report the mean minibatch loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub held_out_normalized: Option<f64>,
}

struct Adam {
    m: NetworkParams,
    v: NetworkParams,
    t: i32,
}

impl Adam {
    fn new(spec: &NetworkSpec) -> Self {
        Self {
            m: NetworkParams::zeros_like(spec),
            v: NetworkParams::zeros_like(spec),
            t: 0,
        }
    }

    fn step(&mut self, cfg: &TrainConfig, params: &mut NetworkParams, grads: &NetworkParams) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let lr_t = cfg.learning_rate * (1.0 - b2.powi(self.t)).sqrt() / (1.0 - b1.powi(self.t));
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr_t * *m / (v.sqrt() + cfg.eps);
        };
        for (((p, m), v), g) in params
            .layers
            .iter_mut()
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
            .zip(&grads.layers)
        {
            Zip::from(&mut p.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(update);
            Zip::from(&mut p.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(update);
        }
    }
}

/// Trains a freshly initialized network with ADAM on shuffled minibatches.
/// Deterministic for a fixed `rng_seed`.
pub fn train(
    spec: NetworkSpec,
    cfg: &TrainConfig,
    kind: LossKind,
    config: &SystemConfig,
    train_set: &[LabeledInstance],
    held_out: &[LabeledInstance],
) -> Result<(Network, Vec<EpochLog>)> {
    cfg.validate()?;
    kind.validate()?;
    spec.check_system(config)?;
    let data = Batch::from_instances(train_set)?;
    let held_out = &held_out[..held_out.len().min(cfg.validation_size)];
    let mut net = Network::init(spec, cfg.rng_seed)?;
    let mut adam = Adam::new(&net.spec);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ 0x05ee_d0fb_a7c4);
    let mut order: Vec<usize> = (0..data.len()).collect();

    let initial = net.batch_loss(kind, config, &data)?;
    let mut log = vec![EpochLog {
        epoch: 0,
        loss: initial,
        held_out_normalized: net.mean_normalized_min_rate(config, held_out)?,
    }];
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.select(chunk);
            let (loss, grads) = match net.param_gradients(kind, config, &batch) {
                Ok(v) => v,
                Err(Error::NonFiniteGradient(detail)) => {
                    return Err(Error::Divergence { epoch, detail })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("loss became {loss}"),
                });
            }
            adam.step(cfg, &mut net.params, &grads);
            sum += loss;
            batches += 1;
        }
        if !net.params.all_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: "non-finite parameters".into(),
            });
        }
        log.push(EpochLog {
            epoch,
            loss: sum / batches as f64,
            held_out_normalized: net.mean_normalized_min_rate(config, held_out)?,
        });
    }
    Ok((net, log))
}

/// Writes the training log as a whitespace-aligned text table.
pub fn format_training_log(log: &[EpochLog]) -> String {
    let mut out = format!("{:>6} {:>16} {:>12}\n", "epoch", "loss", "held_out");
    for e in log {
        let h = e
            .held_out_normalized
            .map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        out.push_str(&format!("{:>6} {:>16.9e} {:>12}\n", e.epoch, e.loss, h));
    }
    out
}

/// Model file layout: 8-byte magic, `u32` LE format version, `u32` LE header
/// length, a JSON header holding the [`NetworkSpec`], then every parameter as
/// `f64` LE in [`NetworkParams::to_flat`] order.
pub fn save_model(path: &Path, net: &Network) -> Result<()> {
    let header = serde_json::to_vec(&net.spec).map_err(|e| Error::format(path, e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + header.len() + 8 * net.params.num_params());
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for v in net.params.to_flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Network> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let truncated = || Error::format(path, "truncated model file");
    if bytes.len() < 16 {
        return Err(truncated());
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(Error::format(path, "not a model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(truncated)?;
    let spec: NetworkSpec =
        serde_json::from_slice(body).map_err(|e| Error::format(path, e.to_string()))?;
    spec.validate()?;
    let mut params = NetworkParams::zeros_like(&spec);
    let data = &bytes[16 + hlen..];
    if data.len() != 8 * params.num_params() {
        return Err(if data.len() < 8 * params.num_params() {
            truncated()
        } else {
            Error::format(path, "trailing bytes after parameters")
        });
    }
    let flat: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    params.set_flat(&flat)?;
    Network::from_parts(spec, params)
}

/// Loads a model and checks it matches the system dimensions.
pub fn load_model_for(path: &Path, config: &SystemConfig) -> Result<Network> {
    let net = load_model(path)?;
    net.spec.check_system(config)?;
    Ok(net)
}

/// Slice of `flat` restricted to UE `ue`'s column (subcarrier-major layout).
pub fn column_of(flat: &[f64], num_ues: usize, ue: usize) -> Vec<f64> {
    flat.iter().skip(ue).step_by(num_ues).copied().collect()
}
