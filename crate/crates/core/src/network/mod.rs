//! Feedforward spiking network unrolled over `T` timesteps.
//!
//! Each hidden layer computes `I_l = W_l s_{l−1} + b_l` and advances its
//! neurons one step; the class scores are the time-averaged linear readout of
//! the last hidden layer's spikes.

mod checkpoint;
mod gradcheck;
mod params;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::neurons::{
    hard_inference_step, NeuronCell, NeuronConfig, NeuronKind, NeuronState, Phase, LOG_EPS,
};

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointManifest};
pub use gradcheck::{loss_gradcheck, micro_problem, GradcheckReport, ParamCheck};
pub use params::{BoundParams, Param, ParamStore};

/// Architecture and loss settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub timesteps: usize,
    pub neuron: NeuronConfig,
    /// Weight of the mean-spike-rate penalty.
    pub lambda: f64,
}

impl NetworkSpec {
    pub fn new(inputs: usize, classes: usize, kind: NeuronKind) -> Self {
        NetworkSpec {
            inputs,
            hidden: vec![64],
            classes,
            timesteps: 1,
            neuron: NeuronConfig::new(kind),
            lambda: 0.0,
        }
    }

    pub fn kind(&self) -> NeuronKind {
        self.neuron.kind
    }

    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 {
            return Err(Error::Config("timesteps must be >= 1".into()));
        }
        if self.inputs == 0 || self.classes == 0 || self.hidden.is_empty() {
            return Err(Error::Config(
                "network needs inputs, classes and a hidden layer".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        self.neuron.validate()
    }
}

/// Spike function used by a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Train,
    /// Soft spikes, no parameter updates intended.
    EvalSoft,
    /// Hard thresholding of the ultra kinds.
    EvalHard,
}

/// Outputs of one forward pass.
#[derive(Debug)]
pub struct ForwardRecord<'t> {
    /// `[batch, classes]`.
    pub logits: Var<'t>,
    /// Mean hidden spike rate over layers, time, batch and units.
    pub spike_rate: Var<'t>,
    /// `spikes[t][l]` when retention was requested.
    pub spikes: Option<Vec<Vec<Tensor>>>,
    /// Minimum `|Ṽ − θ|` over all hidden units and steps.
    pub min_margin: f64,
}

/// Parameters plus architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: ParamStore,
}

pub fn weight_name(layer: usize) -> String {
    format!("hidden{layer}.weight")
}

pub fn bias_name(layer: usize) -> String {
    format!("hidden{layer}.bias")
}

pub fn neuron_param_name(layer: usize, param: &str) -> String {
    format!("hidden{layer}.{param}")
}

pub const READOUT_WEIGHT: &str = "readout.weight";
pub const READOUT_BIAS: &str = "readout.bias";

impl Network {
    /// Weights and biases drawn from `U(−1/√fan_in, 1/√fan_in)`; neuron
    /// scalars at their configured initial values.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |shape: &[usize], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n = shape.iter().product();
            let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
            Tensor::new(shape.to_vec(), data).expect("shape matches")
        };
        let mut params = ParamStore::new();
        let mut fan_in = spec.inputs;
        for (l, &width) in spec.hidden.iter().enumerate() {
            params.push(weight_name(l), uniform(&[width, fan_in], fan_in), true);
            params.push(bias_name(l), uniform(&[width], fan_in), true);
            for (name, value) in spec.neuron.initial_params() {
                params.push(neuron_param_name(l, name), value, true);
            }
            fan_in = width;
        }
        params.push(
            READOUT_WEIGHT,
            uniform(&[spec.classes, fan_in], fan_in),
            true,
        );
        params.push(READOUT_BIAS, uniform(&[spec.classes], fan_in), true);
        Ok(Network { spec, params })
    }

    /// Hold every layer's temperature at `eps` and stop it from training.
    pub fn fix_eps(&mut self, eps: f64) -> Result<()> {
        crate::autodiff::numeric::check_eps(eps)?;
        for l in 0..self.spec.hidden.len() {
            if let Some(p) = self.params.get_mut(&neuron_param_name(l, LOG_EPS)) {
                p.value = Tensor::scalar(eps.ln());
                p.trainable = false;
            }
        }
        Ok(())
    }

    /// Current temperature of each hidden layer (empty for baselines).
    pub fn eps_values(&self) -> Vec<f64> {
        (0..self.spec.hidden.len())
            .filter_map(|l| self.params.get(&neuron_param_name(l, LOG_EPS)))
            .map(|p| p.value.data()[0].exp())
            .collect()
    }

    /// Project each log-temperature back into the configured clamp.
    pub fn project_eps(&mut self) {
        let (lo, hi) = self.spec.neuron.log_eps_bounds();
        for l in 0..self.spec.hidden.len() {
            if let Some(p) = self.params.get_mut(&neuron_param_name(l, LOG_EPS)) {
                let x = &mut p.value.data_mut()[0];
                *x = x.clamp(lo, hi);
            }
        }
    }

    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundParams<'t> {
        self.params.bind(tape)
    }

    /// Unrolled forward pass over `input[t]: [batch, inputs]`.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        bound: &BoundParams<'t>,
        input: &[Tensor],
        mode: Mode,
        retain_spikes: bool,
    ) -> Result<ForwardRecord<'t>> {
        let spec = &self.spec;
        let kind = spec.kind();
        if mode == Mode::EvalHard && !kind.is_ultra() {
            return Err(Error::Contract(format!(
                "eval-hard mode is only defined for ultradiscretized kinds, not {kind}"
            )));
        }
        if input.len() != spec.timesteps {
            return Err(Error::shape(
                "forward",
                format!("{} input frames for T = {}", input.len(), spec.timesteps),
            ));
        }
        let batch = input.first().map_or(0, |x| x.shape()[0]);
        for frame in input {
            if frame.shape() != [batch, spec.inputs] {
                return Err(Error::shape(
                    "forward",
                    format!(
                        "frame {:?}, expected [{batch}, {}]",
                        frame.shape(),
                        spec.inputs
                    ),
                ));
            }
        }

        let mut layers = Vec::with_capacity(spec.hidden.len());
        for l in 0..spec.hidden.len() {
            let names: Vec<(&str, Var<'t>)> = spec
                .neuron
                .initial_params()
                .into_iter()
                .filter_map(|(n, _)| bound.try_var(&neuron_param_name(l, n)).map(|v| (n, v)))
                .collect();
            let cell = NeuronCell::bind(tape, &spec.neuron, &names)?;
            layers.push((bound.var(&weight_name(l))?, bound.var(&bias_name(l))?, cell));
        }
        let mut states: Vec<NeuronState<'t>> = spec
            .hidden
            .iter()
            .map(|&w| NeuronState::zeros(tape, batch, w, kind))
            .collect();

        let mut spike_total: Option<Var<'t>> = None;
        let mut rate_sum: Option<Var<'t>> = None;
        let mut retained = retain_spikes.then(Vec::new);
        let mut min_margin = f64::INFINITY;
        let phase = if mode == Mode::Train {
            Phase::Train
        } else {
            Phase::Eval
        };

        for frame in input {
            let mut x = tape.constant(frame.clone());
            let mut frame_spikes = Vec::new();
            for ((w, b, cell), state) in layers.iter().zip(states.iter_mut()) {
                let current = x.linear(*w, *b)?;
                let out = if mode == Mode::EvalHard {
                    hard_inference_step(cell, *state, current, phase)?
                } else {
                    cell.step(*state, current)?
                };
                let theta = cell.cfg.theta;
                min_margin = out
                    .pre_reset
                    .value()
                    .data()
                    .iter()
                    .fold(min_margin, |m, &v| m.min((v - theta).abs()));
                *state = out.state;
                let s = out.spikes;
                let layer_sum = s.sum();
                spike_total = Some(match spike_total {
                    Some(acc) => acc.add(layer_sum)?,
                    None => layer_sum,
                });
                if retain_spikes {
                    frame_spikes.push(s.value().clone());
                }
                x = s;
            }
            rate_sum = Some(match rate_sum {
                Some(acc) => acc.add(x)?,
                None => x,
            });
            if let Some(r) = retained.as_mut() {
                r.push(frame_spikes);
            }
        }

        let t = spec.timesteps as f64;
        let mean_rate = rate_sum.expect("T >= 1").scale(1.0 / t);
        let logits = mean_rate.linear(bound.var(READOUT_WEIGHT)?, bound.var(READOUT_BIAS)?)?;
        let units: usize = spec.hidden.iter().sum();
        let count = (t * batch as f64 * units as f64).max(1.0);
        let spike_rate = spike_total.expect("T >= 1").scale(1.0 / count);
        Ok(ForwardRecord {
            logits,
            spike_rate,
            spikes: retained,
            min_margin,
        })
    }
}

/// Softmax cross-entropy of the logits plus `lambda · s̄`.
pub fn loss<'t>(record: &ForwardRecord<'t>, labels: &[usize], lambda: f64) -> Result<Var<'t>> {
    let tape = record.logits.tape();
    let ce = tape.cross_entropy(record.logits, labels)?;
    if lambda == 0.0 {
        Ok(ce)
    } else {
        ce.add(record.spike_rate.scale(lambda))
    }
}

/// Relative synaptic-operation count `T · s̄`.
pub fn energy(spike_rate: f64, timesteps: usize) -> f64 {
    timesteps as f64 * spike_rate
}
