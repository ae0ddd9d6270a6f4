use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use ultralif::encoding::{load_mnist, make_blobs, Dataset, InputEncoding, Split};
use ultralif::network::{
    bias_name, energy, loss_gradcheck, micro_problem, read_checkpoint, weight_name,
    write_checkpoint, Mode, NetworkSpec,
};
use ultralif::neurons::{NeuronConfig, NeuronKind};
use ultralif::training::{ablate_epsilon, evaluate, train, EpsMode, RunSummary, TrainConfig};
use ultralif::tropical::{self, Arrangement};

use crate::args::*;
use crate::failure::{Failure, Outcome};

pub const DEFAULT_DATA_DIR: &str = "data/mnist";
const MANIFEST: &str = "manifest.json";

/// Everything needed to rerun a command: the fully resolved arguments
/// (no config-file indirection, no environment lookups, no output path)
/// plus tool version and the effective seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub command: Command,
    /// Effective configuration, for readers; replay ignores it.
    #[serde(default)]
    pub resolved: serde_json::Value,
}

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Gradcheck(a) => run_gradcheck(a),
        Command::AblateEps(a) => run_ablate(a),
        Command::Analyze { analysis } => match analysis {
            Analysis::Regions(a) => run_regions(a),
            Analysis::Zonotope(a) => run_zonotope(a),
            Analysis::Temporal(a) => run_temporal(a),
            Analysis::Energy(a) => run_energy(a),
        },
        Command::Replay(a) => run_replay(a),
    }
}

fn run_replay(a: ReplayArgs) -> Outcome {
    let text = fs::read_to_string(&a.manifest)?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut command = manifest.command;
    if matches!(command, Command::Replay(_)) {
        return Err(Failure::config("a manifest cannot record a replay"));
    }
    let out = match a.out {
        Some(out) => out,
        None => a
            .manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    command.set_out(Some(out));
    run(command)
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn print_json(value: &impl Serialize) -> Outcome {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Create `out` and record `command` (with its output path stripped).
fn write_manifest(
    out: &Path,
    command: &Command,
    seed: Option<u64>,
    resolved: serde_json::Value,
) -> Outcome {
    fs::create_dir_all(out)?;
    let mut command = command.clone();
    command.set_out(None);
    let manifest = Manifest {
        tool: "ultralif".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        command,
        resolved,
    };
    write_json(&out.join(MANIFEST), &manifest)
}

fn absolute(path: &Path) -> Outcome<PathBuf> {
    fs::canonicalize(path).map_err(|e| {
        Failure::from(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

impl DataArgs {
    /// Pin the data directory to an absolute path so the manifest does not
    /// depend on the caller's working directory or environment.
    fn resolve(&mut self) -> Outcome {
        if self.dataset == DatasetArg::Mnist {
            let dir = self
                .data_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
            self.data_dir = Some(absolute(&dir)?);
        } else {
            self.data_dir = None;
        }
        Ok(())
    }

    fn load(&self) -> Outcome<(Dataset, Dataset)> {
        let (train, test) = match self.dataset {
            DatasetArg::Mnist => {
                let dir = self.data_dir.as_deref().expect("resolved");
                (
                    load_mnist(dir, Split::Train)?,
                    load_mnist(dir, Split::Test)?,
                )
            }
            DatasetArg::Blobs => {
                let mut train = make_blobs(2, 200, 2, 0.1, 11)?;
                let mut test = make_blobs(2, 100, 2, 0.1, 12)?;
                for d in [&mut train, &mut test] {
                    d.mean = 0.0;
                    d.std = 1.0;
                }
                (train, test)
            }
        };
        let train = match self.subset {
            Some(n) => train.head(n),
            None => train,
        };
        let test = match self.test_subset.or(self.subset.map(|n| (n / 4).max(1))) {
            Some(n) => test.head(n),
            None => test,
        };
        if train.is_empty() || test.is_empty() {
            return Err(Failure::config("empty dataset after subsetting"));
        }
        Ok((train, test))
    }

    fn load_test(&self) -> Outcome<Dataset> {
        Ok(self.load()?.1)
    }
}

impl TrainOpts {
    /// Defaults, overlaid by the config file, overlaid by flags. Afterwards
    /// every field is explicit and the config path is dropped.
    fn resolve(&mut self) -> Outcome<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::from_toml(&fs::read_to_string(path)?)?,
            None => TrainConfig::default(),
        };
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch {
            cfg.batch = v;
        }
        if let Some(v) = self.lr {
            cfg.lr0 = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(e) = self.eps {
            cfg.eps_mode = EpsMode::Fixed(e);
        }
        match (self.encoding, self.gain) {
            (Some(EncodingArg::Analog), _) => cfg.encoding = InputEncoding::Analog,
            (Some(EncodingArg::Rate), gain) => {
                let default = match cfg.encoding {
                    InputEncoding::Rate { gain } => gain,
                    InputEncoding::Analog => ultralif::encoding::DEFAULT_GAIN,
                };
                cfg.encoding = InputEncoding::Rate {
                    gain: gain.unwrap_or(default),
                }
            }
            (None, Some(g)) => match cfg.encoding {
                InputEncoding::Rate { .. } => cfg.encoding = InputEncoding::Rate { gain: g },
                InputEncoding::Analog => return Err(Failure::config("--gain needs rate encoding")),
            },
            (None, None) => {}
        }
        cfg.validate()?;
        *self = TrainOpts {
            config: None,
            epochs: Some(cfg.epochs),
            batch: Some(cfg.batch),
            lr: Some(cfg.lr0),
            lambda: Some(cfg.lambda),
            seed: Some(cfg.seed),
            eps: match cfg.eps_mode {
                EpsMode::Fixed(e) => Some(e),
                EpsMode::Learned => None,
            },
            encoding: Some(match cfg.encoding {
                InputEncoding::Rate { .. } => EncodingArg::Rate,
                InputEncoding::Analog => EncodingArg::Analog,
            }),
            gain: match cfg.encoding {
                InputEncoding::Rate { gain } => Some(gain),
                InputEncoding::Analog => None,
            },
        };
        Ok(cfg)
    }
}

impl ModelArgs {
    fn spec(&self, inputs: usize, classes: usize, lambda: f64) -> Outcome<NetworkSpec> {
        let mut spec = NetworkSpec::new(inputs, classes, self.model);
        spec.hidden = self.hidden.clone();
        spec.timesteps = self.timesteps;
        spec.lambda = lambda;
        spec.validate()?;
        Ok(spec)
    }
}

fn run_train(mut a: TrainArgs) -> Outcome {
    let out = a
        .out
        .clone()
        .ok_or_else(|| Failure::config("train needs --out"))?;
    a.data.resolve()?;
    let cfg = a.opts.resolve()?;
    let (train_data, test) = a.data.load()?;
    let spec = a
        .model
        .spec(train_data.width(), train_data.classes, cfg.lambda)?;
    let resolved = json!({ "train": cfg, "network": spec });
    write_manifest(&out, &Command::Train(a.clone()), Some(cfg.seed), resolved)?;

    let outcome = train(&spec, &train_data, &test, &cfg)?;
    fs::write(out.join("metrics.csv"), outcome.metrics.to_csv())?;
    write_json(&out.join("summary.json"), &outcome.summary)?;
    write_checkpoint(&out.join("checkpoint.ulif"), &outcome.best)?;
    write_checkpoint(&out.join("checkpoint-last.ulif"), &outcome.last)?;
    print_json(&outcome.summary)
}

fn encoding_of(kind: EncodingArg, gain: f64) -> InputEncoding {
    match kind {
        EncodingArg::Rate => InputEncoding::Rate { gain },
        EncodingArg::Analog => InputEncoding::Analog,
    }
}

fn run_eval(mut a: EvalArgs) -> Outcome {
    a.checkpoint = absolute(&a.checkpoint)?;
    a.data.resolve()?;
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let net = ckpt.into_network()?;
    let test = a.data.load_test()?;
    let mode = if a.hard_spikes {
        Mode::EvalHard
    } else {
        Mode::EvalSoft
    };
    let eval = evaluate(
        &net,
        &test,
        encoding_of(a.encoding, a.gain),
        a.batch,
        a.seed,
        mode,
    )?;
    let report = json!({
        "kind": net.spec.kind(),
        "mode": mode,
        "samples": test.len(),
        "acc": eval.acc,
        "loss": eval.loss,
        "spike_rate": eval.spike_rate,
        "energy": energy(eval.spike_rate, net.spec.timesteps),
    });
    if let Some(out) = a.out.clone() {
        write_manifest(&out, &Command::Eval(a), None, json!({}))?;
        write_json(&out.join("eval.json"), &report)?;
    }
    print_json(&report)
}

fn run_gradcheck(a: GradcheckArgs) -> Outcome {
    if !(a.fd_step > 0.0 && a.fd_step.is_finite()) {
        return Err(Failure::config(format!(
            "--fd-step must be positive, got {}",
            a.fd_step
        )));
    }
    let (net, input, labels) = micro_problem(a.model, a.seed)?;
    let report = loss_gradcheck(&net, &input, &labels, a.fd_step)?;
    if let Some(out) = a.out.clone() {
        write_manifest(
            &out,
            &Command::Gradcheck(a.clone()),
            Some(a.seed),
            json!({}),
        )?;
        write_json(&out.join("gradcheck.json"), &report)?;
    }
    println!("model: {}", a.model);
    for p in &report.params {
        println!("  {:<20} rel err {:.3e}", p.name, p.rel_err);
    }
    println!("max rel err: {:.6e}", report.max_rel_err);
    if report.max_rel_err >= a.tol || !report.max_rel_err.is_finite() {
        return Err(Failure::numeric(format!(
            "gradient check failed: max relative error {:.3e} >= {:.1e}",
            report.max_rel_err, a.tol
        )));
    }
    Ok(())
}

fn run_ablate(mut a: AblateArgs) -> Outcome {
    let out = a
        .out
        .clone()
        .ok_or_else(|| Failure::config("ablate-eps needs --out"))?;
    if a.fixed.is_empty() && !a.learned {
        return Err(Failure::config("give --fixed values, --learned, or both"));
    }
    if a.opts.eps.is_some() {
        return Err(Failure::config(
            "ablate-eps sets epsilon itself; drop --eps",
        ));
    }
    a.data.resolve()?;
    let cfg = a.opts.resolve()?;
    let (train_data, test) = a.data.load()?;
    let spec = a
        .model
        .spec(train_data.width(), train_data.classes, cfg.lambda)?;
    let resolved = json!({ "train": cfg, "network": spec });
    write_manifest(
        &out,
        &Command::AblateEps(a.clone()),
        Some(cfg.seed),
        resolved,
    )?;
    let report = ablate_epsilon(&spec, &train_data, &test, &cfg, &a.fixed, a.learned)?;
    write_json(&out.join("ablation.json"), &report)?;
    print_json(&report)
}

/// Weights, biases and neuron settings of the analysed layer.
struct Layer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    neuron: NeuronConfig,
}

impl LayerSource {
    fn resolve(&mut self) -> Outcome {
        if let Some(path) = &self.checkpoint {
            self.checkpoint = Some(absolute(path)?);
        }
        Ok(())
    }

    fn layer(&self) -> Outcome<Layer> {
        match &self.checkpoint {
            Some(path) => {
                let net = read_checkpoint(path)?.into_network()?;
                let w = net.params.value(&weight_name(0))?;
                let b = net.params.value(&bias_name(0))?;
                Ok(Layer {
                    weights: (0..w.shape()[0]).map(|j| w.row(j).to_vec()).collect(),
                    bias: b.data().to_vec(),
                    neuron: net.spec.neuron.clone(),
                })
            }
            None => {
                if self.hidden == 0 || self.inputs == 0 {
                    return Err(Failure::config("--hidden and --inputs must be >= 1"));
                }
                let (weights, bias) = tropical::gaussian_layer(self.hidden, self.inputs, self.seed);
                Ok(Layer {
                    weights,
                    bias,
                    neuron: NeuronConfig::new(NeuronKind::UltraLif),
                })
            }
        }
    }

    fn arrangement(&self, layer: &Layer) -> Outcome<Arrangement> {
        let base = match self.offsets {
            OffsetArg::Spike => layer.neuron.theta,
            OffsetArg::Membrane => layer.neuron.tau0.ln(),
        };
        let offsets = layer.bias.iter().map(|b| base - b).collect();
        Ok(Arrangement::new(layer.weights.clone(), offsets)?)
    }
}

fn finish_analysis(
    out: Option<PathBuf>,
    command: Command,
    file: &str,
    report: &impl Serialize,
) -> Outcome {
    if let Some(out) = out {
        write_manifest(&out, &command, None, json!({}))?;
        write_json(&out.join(file), report)?;
    }
    print_json(report)
}

fn run_regions(mut a: RegionsArgs) -> Outcome {
    a.layer.resolve()?;
    let layer = a.layer.layer()?;
    let arr = a.layer.arrangement(&layer)?;
    let report = tropical::count_regions(&arr, a.resolution)?;
    let cmd = Command::Analyze {
        analysis: Analysis::Regions(a.clone()),
    };
    finish_analysis(a.out, cmd, "regions.json", &report)
}

fn run_zonotope(mut a: ZonotopeArgs) -> Outcome {
    a.layer.resolve()?;
    let layer = a.layer.layer()?;
    let arr = a.layer.arrangement(&layer)?;
    let zonotope = tropical::zonotope_volume(&arr.weights)?;
    let diagnostics = tropical::general_position_check(&arr.weights, &arr.offsets)?;
    let monte_carlo = if a.samples > 0 {
        Some(tropical::zonotope_volume_monte_carlo(
            &arr.weights,
            a.samples,
            a.layer.seed,
        )?)
    } else {
        None
    };
    let report = json!({
        "hidden": arr.hidden(),
        "inputs": arr.inputs(),
        "zonotope": zonotope,
        "diagnostics": diagnostics,
        "monte_carlo_volume": monte_carlo,
    });
    let cmd = Command::Analyze {
        analysis: Analysis::Zonotope(a.clone()),
    };
    finish_analysis(a.out, cmd, "zonotope.json", &report)
}

fn run_temporal(mut a: TemporalArgs) -> Outcome {
    a.layer.resolve()?;
    if a.layer.offsets != OffsetArg::Spike {
        return Err(Failure::config(
            "temporal counts spike sequences; use --offsets spike",
        ));
    }
    let layer = a.layer.layer()?;
    let report = tropical::temporal_region_count(
        &layer.weights,
        &layer.bias,
        &layer.neuron,
        a.timesteps,
        a.resolution,
    )?;
    if !report.within_bound {
        return Err(Failure::numeric(format!(
            "{} sequences exceed the bound {}",
            report.sequences, report.bound
        )));
    }
    let cmd = Command::Analyze {
        analysis: Analysis::Temporal(a.clone()),
    };
    finish_analysis(a.out, cmd, "temporal.json", &report)
}

fn run_energy(mut a: EnergyArgs) -> Outcome {
    let (rate, timesteps) = match (&a.summary, a.rate, a.timesteps) {
        (Some(path), _, _) => {
            let path = absolute(path)?;
            let summary: RunSummary = serde_json::from_str(&fs::read_to_string(&path)?)?;
            a.summary = Some(path);
            (summary.final_spike_soft, summary.timesteps)
        }
        (None, Some(r), Some(t)) => (r, t),
        _ => {
            return Err(Failure::config(
                "give --summary, or --rate with --timesteps",
            ))
        }
    };
    if !(0.0..=1.0).contains(&rate) || timesteps == 0 {
        return Err(Failure::config(format!(
            "rate {rate} / timesteps {timesteps} out of range"
        )));
    }
    let report = json!({
        "spike_rate": rate,
        "timesteps": timesteps,
        "energy": energy(rate, timesteps),
    });
    let cmd = Command::Analyze {
        analysis: Analysis::Energy(a.clone()),
    };
    finish_analysis(a.out, cmd, "energy.json", &report)
}
