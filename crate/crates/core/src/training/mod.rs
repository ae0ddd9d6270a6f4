//! Training loop, metrics and the temperature ablation.
//!
//! A run is a pure function of `(NetworkSpec, data, TrainConfig)`: weight
//! initialisation, epoch shuffles and spike encoding all derive from
//! `TrainConfig::seed`, and nothing runs in parallel, so repeating a run
//! reproduces its metrics byte for byte.

mod optim;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::encoding::{epoch_order, Dataset, InputEncoding, Stream};
use crate::error::{Error, Result};
use crate::network::{energy, loss, Checkpoint, Mode, Network, NetworkSpec};

pub use optim::{cosine_lr, Adam};

/// Temperature handling for ultradiscretized kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EpsMode {
    /// `log ε` is trained and projected into the clamp after every step.
    #[default]
    Learned,
    /// `ε` is held at this value.
    Fixed(f64),
}

/// Optimizer and data settings. Read from TOML:
///
/// ```toml
/// lr0 = 0.001
/// batch = 128
/// epochs = 15
/// seed = 42
/// lambda = 0.1
/// eps_mode = "learned"        # or eps_mode = { fixed = 0.5 }
/// encoding = { mode = "rate", gain = 0.5 }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Spike-rate penalty; overrides `NetworkSpec::lambda`.
    pub lambda: f64,
    pub eps_mode: EpsMode,
    pub encoding: InputEncoding,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-3,
            batch: 128,
            epochs: 15,
            seed: 42,
            lambda: 0.0,
            eps_mode: EpsMode::Learned,
            encoding: InputEncoding::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!(
                "lr0 must be positive, got {}",
                self.lr0
            )));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("epochs and batch must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if let EpsMode::Fixed(e) = self.eps_mode {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::Config(format!(
                    "fixed eps must be positive, got {e}"
                )));
            }
        }
        if let InputEncoding::Rate { gain } = self.encoding {
            if !(gain > 0.0 && gain <= 1.0) {
                return Err(Error::Config(format!(
                    "gain must lie in (0, 1], got {gain}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
    /// Test accuracy with soft spikes.
    pub acc: f64,
    /// Test accuracy with hard spikes (equal to `acc` for baselines).
    pub acc_hard: f64,
    pub spike_soft: f64,
    pub spike_hard: f64,
    /// `T · spike_soft`.
    pub energy: f64,
    pub eps: Vec<f64>,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rows: Vec<EpochMetrics>,
}

fn fmt_f64(x: f64) -> String {
    // Shortest round-trip representation.
    format!("{x:?}")
}

impl RunMetrics {
    /// `epoch,loss,acc,spike_soft,spike_hard,energy,eps_layer0..,lr`.
    pub fn to_csv(&self) -> String {
        let layers = self.rows.first().map_or(0, |r| r.eps.len());
        let mut out = String::from("epoch,loss,acc,spike_soft,spike_hard,energy");
        for l in 0..layers {
            let _ = write!(out, ",eps_layer{l}");
        }
        out.push_str(",lr\n");
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                r.epoch,
                fmt_f64(r.loss),
                fmt_f64(r.acc),
                fmt_f64(r.spike_soft),
                fmt_f64(r.spike_hard),
                fmt_f64(r.energy)
            );
            for e in &r.eps {
                let _ = write!(out, ",{}", fmt_f64(*e));
            }
            let _ = writeln!(out, ",{}", fmt_f64(r.lr));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: String,
    pub timesteps: usize,
    pub lambda: f64,
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_acc: f64,
    pub final_acc: f64,
    pub final_acc_hard: f64,
    pub final_spike_soft: f64,
    pub final_spike_hard: f64,
    pub final_energy: f64,
    pub final_eps: Vec<f64>,
    /// True when every epoch's temperatures were inside the clamp.
    pub eps_within_clamp: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub metrics: RunMetrics,
    pub summary: RunSummary,
}

/// Accuracy, loss and spike rate of one pass over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub acc: f64,
    pub loss: f64,
    pub spike_rate: f64,
}

const EVAL_SEED_SALT: u64 = 0x7e57_da7a;

/// Evaluate `net` on `data` in `mode`. Test inputs use their own encoding
/// stream, fixed across epochs.
pub fn evaluate(
    net: &Network,
    data: &Dataset,
    encoding: InputEncoding,
    batch: usize,
    seed: u64,
    mode: Mode,
) -> Result<Evaluation> {
    if data.width() != net.spec.inputs {
        return Err(Error::Config(format!(
            "dataset width {} does not match network inputs {}",
            data.width(),
            net.spec.inputs
        )));
    }
    let (mut correct, mut loss_sum, mut spike_sum) = (0usize, 0.0, 0.0);
    let batch = batch.max(1);
    for (b, start) in (0..data.len()).step_by(batch).enumerate() {
        let idx: Vec<usize> = (start..(start + batch).min(data.len())).collect();
        let part = data.select(&idx);
        let stream = Stream::new(seed ^ EVAL_SEED_SALT, 0, b as u32);
        let frames = encoding.frames(data, &part.images, net.spec.timesteps, stream)?;
        let tape = Tape::new();
        let bound = net.params.bind_frozen(&tape);
        let rec = net.forward(&tape, &bound, &frames, mode, false)?;
        let n = idx.len() as f64;
        loss_sum += loss(&rec, &part.labels, 0.0)?.item()? * n;
        spike_sum += rec.spike_rate.item()? * n;
        let pred = rec.logits.value().argmax_rows();
        correct += pred
            .iter()
            .zip(&part.labels)
            .filter(|(p, l)| p == l)
            .count();
    }
    let n = data.len().max(1) as f64;
    Ok(Evaluation {
        acc: correct as f64 / n,
        loss: loss_sum / n,
        spike_rate: spike_sum / n,
    })
}

/// Train from scratch and evaluate on `test` after every epoch.
pub fn train(
    spec: &NetworkSpec,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut spec = spec.clone();
    spec.lambda = cfg.lambda;
    for (name, d) in [("train", train), ("test", test)] {
        if d.width() != spec.inputs {
            return Err(Error::Config(format!(
                "{name} data width {} does not match network inputs {}",
                d.width(),
                spec.inputs
            )));
        }
        if d.classes > spec.classes {
            return Err(Error::Config(format!(
                "{name} data has {} classes, network has {}",
                d.classes, spec.classes
            )));
        }
    }
    let mut net = Network::new(spec.clone(), cfg.seed)?;
    if let EpsMode::Fixed(eps) = cfg.eps_mode {
        net.fix_eps(eps)?;
    }
    let (lo, hi) = spec.neuron.eps_clamp;
    let mut adam = Adam::new(&net.params);
    let mut metrics = RunMetrics::default();
    let mut best: Option<(f64, Checkpoint)> = None;
    let ultra = spec.kind().is_ultra();

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, cfg.epochs, cfg.lr0);
        let order = epoch_order(train.len(), cfg.seed, epoch as u32);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch).enumerate() {
            let part = train.select(chunk);
            let stream = Stream::new(cfg.seed, epoch as u32, b as u32);
            let frames = cfg
                .encoding
                .frames(train, &part.images, spec.timesteps, stream)?;
            let tape = Tape::new();
            let bound = net.bind(&tape);
            let rec = net.forward(&tape, &bound, &frames, Mode::Train, false)?;
            let root = loss(&rec, &part.labels, spec.lambda)?;
            let value = root.item()?;
            if !value.is_finite() {
                return Err(Error::Input(format!(
                    "loss became non-finite at epoch {epoch}, batch {b}"
                )));
            }
            let grads = bound.gradients(&tape.backward(root)?);
            adam.step(&mut net.params, &grads, lr)?;
            net.project_eps();
            loss_sum += value * chunk.len() as f64;
            seen += chunk.len();
        }

        let soft = evaluate(
            &net,
            test,
            cfg.encoding,
            cfg.batch,
            cfg.seed,
            Mode::EvalSoft,
        )?;
        let hard = if ultra {
            evaluate(
                &net,
                test,
                cfg.encoding,
                cfg.batch,
                cfg.seed,
                Mode::EvalHard,
            )?
        } else {
            soft
        };
        metrics.rows.push(EpochMetrics {
            epoch,
            loss: loss_sum / seen.max(1) as f64,
            acc: soft.acc,
            acc_hard: hard.acc,
            spike_soft: soft.spike_rate,
            spike_hard: hard.spike_rate,
            energy: energy(soft.spike_rate, spec.timesteps),
            eps: net.eps_values(),
            lr,
        });
        if best.as_ref().map_or(true, |(acc, _)| soft.acc > *acc) {
            best = Some((soft.acc, Checkpoint::from_network(&net, cfg.seed, epoch)));
        }
    }

    let last_row = metrics.rows.last().expect("epochs >= 1").clone();
    let (best_acc, best) = best.expect("epochs >= 1");
    let tol = 1e-12;
    let summary = RunSummary {
        kind: spec.kind().to_string(),
        timesteps: spec.timesteps,
        lambda: spec.lambda,
        seed: cfg.seed,
        epochs: cfg.epochs,
        best_epoch: best.manifest.epoch,
        best_acc,
        final_acc: last_row.acc,
        final_acc_hard: last_row.acc_hard,
        final_spike_soft: last_row.spike_soft,
        final_spike_hard: last_row.spike_hard,
        final_energy: last_row.energy,
        final_eps: last_row.eps.clone(),
        eps_within_clamp: metrics
            .rows
            .iter()
            .flat_map(|r| &r.eps)
            .all(|&e| e >= lo * (1.0 - tol) && e <= hi * (1.0 + tol)),
    };
    let last = Checkpoint::from_network(&net, cfg.seed, cfg.epochs - 1);
    Ok(TrainOutcome {
        network: net,
        best,
        last,
        metrics,
        summary,
    })
}

/// One temperature setting of the ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `"fixed"` or `"learned"`.
    pub setting: String,
    pub initial_eps: f64,
    pub final_eps: Vec<f64>,
    pub acc: f64,
    pub spike_rate: f64,
    pub eps_within_clamp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub kind: String,
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

/// Train once per fixed `ε` and optionally once with learned `ε`, all from
/// the same seed.
pub fn ablate_epsilon(
    spec: &NetworkSpec,
    train_data: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    fixed: &[f64],
    learned: bool,
) -> Result<AblationReport> {
    if !spec.kind().is_ultra() {
        return Err(Error::Config(format!(
            "epsilon ablation needs an ultradiscretized kind, not {}",
            spec.kind()
        )));
    }
    let mut settings: Vec<EpsMode> = fixed.iter().map(|&e| EpsMode::Fixed(e)).collect();
    if learned {
        settings.push(EpsMode::Learned);
    }
    let mut rows = Vec::new();
    for mode in settings {
        let run_cfg = TrainConfig {
            eps_mode: mode,
            ..cfg.clone()
        };
        let out = train(spec, train_data, test, &run_cfg)?;
        let (setting, initial_eps) = match mode {
            EpsMode::Fixed(e) => ("fixed", e),
            EpsMode::Learned => ("learned", spec.neuron.eps0),
        };
        rows.push(AblationRow {
            setting: setting.into(),
            initial_eps,
            final_eps: out.summary.final_eps,
            acc: out.summary.final_acc,
            spike_rate: out.summary.final_spike_soft,
            eps_within_clamp: out.summary.eps_within_clamp,
        });
    }
    Ok(AblationReport {
        kind: spec.kind().to_string(),
        seed: cfg.seed,
        rows,
    })
}
