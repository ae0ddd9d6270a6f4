use crate::autodiff::{Surrogate, Tape, Tensor, Var};
use crate::error::{Error, Result};

use super::config::{NeuronConfig, NeuronKind, DSPIKE_K, LOG_EPS, TAU_PARAM, THETA_PARAM};

/// Whether a forward pass is part of training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Membrane (and adaptation) state of one layer, `[batch, width]`.
#[derive(Debug, Clone, Copy)]
pub struct NeuronState<'t> {
    pub v: Var<'t>,
    pub adapt: Option<Var<'t>>,
}

impl<'t> NeuronState<'t> {
    /// Zero state, the `V(0) = v(0) = 0` base case.
    pub fn zeros(tape: &'t Tape, batch: usize, width: usize, kind: NeuronKind) -> Self {
        NeuronState {
            v: tape.constant(Tensor::zeros(&[batch, width])),
            adapt: kind
                .adapts()
                .then(|| tape.constant(Tensor::zeros(&[batch, width]))),
        }
    }

    pub fn from_membrane(tape: &'t Tape, v: Tensor) -> Self {
        NeuronState {
            v: tape.constant(v),
            adapt: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutput<'t> {
    /// Soft spikes in (0,1) for ultra kinds, exactly 0/1 otherwise.
    pub spikes: Var<'t>,
    /// Pre-reset membrane potential.
    pub pre_reset: Var<'t>,
    pub state: NeuronState<'t>,
}

/// A layer's neuron configuration bound to its learnable scalars on a tape.
#[derive(Debug, Clone)]
pub struct NeuronCell<'t> {
    pub cfg: NeuronConfig,
    tape: &'t Tape,
    eps: Option<Var<'t>>,
    ln_tau: Option<Var<'t>>,
    tau: Option<Var<'t>>,
    theta: Option<Var<'t>>,
    k: Option<Var<'t>>,
}

impl<'t> NeuronCell<'t> {
    /// Bind `cfg` to parameter variables, looked up by name (see
    /// [`NeuronConfig::initial_params`]). Missing learnable parameters fall
    /// back to their initial values as constants.
    pub fn bind(tape: &'t Tape, cfg: &NeuronConfig, params: &[(&str, Var<'t>)]) -> Result<Self> {
        cfg.validate()?;
        let lookup = |name: &str| {
            params
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .or_else(|| {
                    cfg.initial_params()
                        .into_iter()
                        .find(|(n, _)| *n == name)
                        .map(|(_, t)| tape.constant(t))
                })
        };
        let kind = cfg.kind;
        let eps = if kind.is_ultra() {
            lookup(LOG_EPS).map(|l| l.exp())
        } else {
            None
        };
        let tau_param = if kind.learns_tau() {
            lookup(TAU_PARAM)
        } else {
            None
        };
        let tau = tau_param.map(|p| p.sigmoid());
        let ln_tau = tau.map(|t| t.ln());
        let theta = if kind.learns_theta() {
            lookup(THETA_PARAM).map(|p| p.sigmoid())
        } else {
            None
        };
        let k = if kind.is_dspike() {
            lookup(DSPIKE_K)
        } else {
            None
        };
        Ok(NeuronCell {
            cfg: cfg.clone(),
            tape,
            eps,
            ln_tau,
            tau,
            theta,
            k,
        })
    }

    /// Cell with all learnable scalars held at their initial values, except
    /// an explicit temperature for ultra kinds.
    pub fn fixed(tape: &'t Tape, cfg: &NeuronConfig, eps: f64) -> Result<Self> {
        let log_eps = tape.scalar(eps.ln());
        Self::bind(tape, cfg, &[(LOG_EPS, log_eps)])
    }

    pub fn kind(&self) -> NeuronKind {
        self.cfg.kind
    }

    /// Current temperature, for ultra kinds.
    pub fn eps(&self) -> Option<Var<'t>> {
        self.eps
    }

    pub fn eps_value(&self) -> Option<f64> {
        self.eps.and_then(|e| e.item().ok())
    }

    /// Leak in log space: `ln sigmoid(tau_param)` when learnable, else `ln tau0`.
    pub fn ln_tau_value(&self) -> f64 {
        self.ln_tau
            .and_then(|v| v.item().ok())
            .unwrap_or_else(|| self.cfg.tau0.ln())
    }

    /// One timestep. Ultra kinds emit soft spikes; baselines hard spikes with
    /// surrogate gradients.
    pub fn step(&self, state: NeuronState<'t>, input: Var<'t>) -> Result<StepOutput<'t>> {
        match self.kind() {
            NeuronKind::UltraLif | NeuronKind::UltraPlif => ultralif_step(self, state, input),
            NeuronKind::UltraDlif | NeuronKind::UltraDplif => ultradlif_step(self, state, input),
            _ => baseline_step(self, state, input),
        }
    }

    fn require_eps(&self) -> Result<Var<'t>> {
        self.eps
            .ok_or_else(|| Error::Contract(format!("{} has no temperature parameter", self.kind())))
    }
}

fn check_input(state: &NeuronState<'_>, input: Var<'_>) -> Result<()> {
    let (v, i) = (state.v.value(), input.value());
    if v.shape() != i.shape() {
        return Err(Error::shape(
            "neuron step",
            format!("state {:?} vs input {:?}", v.shape(), i.shape()),
        ));
    }
    if !i.is_finite() {
        return Err(Error::Input("non-finite neuron input".into()));
    }
    Ok(())
}

/// Pre-reset membrane of the ultradiscretized kinds.
fn ultra_membrane<'t>(
    cell: &NeuronCell<'t>,
    state: NeuronState<'t>,
    input: Var<'t>,
) -> Result<Var<'t>> {
    check_input(&state, input)?;
    let eps = cell.require_eps()?;
    let leak = |v: Var<'t>| match cell.ln_tau {
        Some(ln_tau) => v.add_scalar(ln_tau),
        None => Ok(v.add_const(cell.cfg.tau0.ln())),
    };
    match cell.kind() {
        NeuronKind::UltraLif | NeuronKind::UltraPlif => {
            let decayed = leak(state.v)?;
            cell.tape.lse(&[decayed, input], eps)
        }
        NeuronKind::UltraDlif => {
            let v = state.v;
            let mixed = cell.tape.lse(&[v.roll_last(1), v, v.roll_last(-1)], eps)?;
            mixed.add(input)
        }
        NeuronKind::UltraDplif => {
            let v = leak(state.v)?;
            let mixed = cell.tape.lse(&[v.roll_last(1), v, v.roll_last(-1)], eps)?;
            mixed.add(input)
        }
        other => Err(Error::Contract(format!(
            "{other} is not an ultradiscretized kind"
        ))),
    }
}

/// Soft spike `sigmoid((Ṽ − θ)/ε)` and convex reset.
fn soft_spike_and_reset<'t>(cell: &NeuronCell<'t>, pre: Var<'t>) -> Result<StepOutput<'t>> {
    let eps = cell.require_eps()?;
    let spikes = pre.add_const(-cell.cfg.theta).div_scalar(eps)?.sigmoid();
    let v = reset(cell, pre, spikes)?;
    Ok(StepOutput {
        spikes,
        pre_reset: pre,
        state: NeuronState { v, adapt: None },
    })
}

/// `Ṽ (1 − s) + v_reset · s`.
fn reset<'t>(cell: &NeuronCell<'t>, pre: Var<'t>, spikes: Var<'t>) -> Result<Var<'t>> {
    let kept = pre.mul(spikes.one_minus())?;
    if cell.cfg.v_reset == 0.0 {
        Ok(kept)
    } else {
        kept.add(spikes.scale(cell.cfg.v_reset))
    }
}

/// Temporal ultradiscretized neuron: `Ṽ = LSE_ε(V + ln τ, I)`.
pub fn ultralif_step<'t>(
    cell: &NeuronCell<'t>,
    state: NeuronState<'t>,
    input: Var<'t>,
) -> Result<StepOutput<'t>> {
    if !matches!(cell.kind(), NeuronKind::UltraLif | NeuronKind::UltraPlif) {
        return Err(Error::Contract(format!(
            "ultralif_step called for {}",
            cell.kind()
        )));
    }
    let pre = ultra_membrane(cell, state, input)?;
    soft_spike_and_reset(cell, pre)
}

/// Spatial ultradiscretized neuron: `Ṽ_i = LSE_ε(V_{i−1}, V_i, V_{i+1}) + I_i`,
/// circular in `i`.
pub fn ultradlif_step<'t>(
    cell: &NeuronCell<'t>,
    state: NeuronState<'t>,
    input: Var<'t>,
) -> Result<StepOutput<'t>> {
    if !cell.kind().is_spatial() {
        return Err(Error::Contract(format!(
            "ultradlif_step called for {}",
            cell.kind()
        )));
    }
    let pre = ultra_membrane(cell, state, input)?;
    soft_spike_and_reset(cell, pre)
}

/// Same membrane update as the ultra kind but with `H(Ṽ − θ)` and a hard
/// reset. Inference only.
pub fn hard_inference_step<'t>(
    cell: &NeuronCell<'t>,
    state: NeuronState<'t>,
    input: Var<'t>,
    phase: Phase,
) -> Result<StepOutput<'t>> {
    if phase == Phase::Train {
        return Err(Error::Contract(
            "hard-threshold inference step used during training".into(),
        ));
    }
    let pre = ultra_membrane(cell, state, input)?;
    let spikes = pre.add_const(-cell.cfg.theta).heaviside(Surrogate::Zero);
    let v = reset(cell, pre, spikes)?;
    Ok(StepOutput {
        spikes,
        pre_reset: pre,
        state: NeuronState { v, adapt: None },
    })
}

/// Surrogate-gradient baselines: `v' = τ v + I`, hard spike forward,
/// smooth derivative backward, multiplicative reset `v'(1 − s)`.
pub fn baseline_step<'t>(
    cell: &NeuronCell<'t>,
    state: NeuronState<'t>,
    input: Var<'t>,
) -> Result<StepOutput<'t>> {
    let kind = cell.kind();
    if kind.is_ultra() {
        return Err(Error::Contract(format!("baseline_step called for {kind}")));
    }
    check_input(&state, input)?;
    let cfg = &cell.cfg;
    let decayed = match cell.tau {
        Some(tau) => state.v.mul_scalar(tau)?,
        None => state.v.scale(cfg.tau0),
    };
    let pre = decayed.add(input)?;
    let surrogate = Surrogate::Sigmoid {
        beta: cfg.beta_surrogate,
    };

    let spikes = if kind.is_dspike() {
        let k = cell
            .k
            .ok_or_else(|| Error::Contract("DSpike cell without sharpness".into()))?;
        pre.dspike(k, cfg.theta)?
    } else if let Some(theta) = cell.theta {
        pre.add_scalar(theta.scale(-1.0))?.heaviside(surrogate)
    } else if kind.adapts() {
        let b = state
            .adapt
            .ok_or_else(|| Error::Contract("AdaLIF state without adaptation variable".into()))?;
        let threshold = b.scale(cfg.beta_adapt).add_const(cfg.theta);
        pre.sub(threshold)?.heaviside(surrogate)
    } else {
        pre.add_const(-cfg.theta).heaviside(surrogate)
    };

    let v = pre.mul(spikes.one_minus())?;
    let adapt = match state.adapt {
        Some(b) if kind.adapts() => Some(
            b.scale(cfg.tau_adapt)
                .add(spikes.scale(1.0 - cfg.tau_adapt))?,
        ),
        _ => None,
    };
    Ok(StepOutput {
        spikes,
        pre_reset: pre,
        state: NeuronState { v, adapt },
    })
}
