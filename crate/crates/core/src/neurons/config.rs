use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Neuron model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronKind {
    UltraLif,
    UltraPlif,
    UltraDlif,
    UltraDplif,
    Lif,
    Plif,
    AdaLif,
    FullPlif,
    DSpike,
    #[serde(rename = "dspike+")]
    DSpikePlus,
}

impl NeuronKind {
    pub const ALL: [NeuronKind; 10] = [
        NeuronKind::UltraLif,
        NeuronKind::UltraPlif,
        NeuronKind::UltraDlif,
        NeuronKind::UltraDplif,
        NeuronKind::Lif,
        NeuronKind::Plif,
        NeuronKind::AdaLif,
        NeuronKind::FullPlif,
        NeuronKind::DSpike,
        NeuronKind::DSpikePlus,
    ];

    pub const ULTRA: [NeuronKind; 4] = [
        NeuronKind::UltraLif,
        NeuronKind::UltraPlif,
        NeuronKind::UltraDlif,
        NeuronKind::UltraDplif,
    ];

    /// Soft-spike kinds built on the log-sum-exp relaxation.
    pub fn is_ultra(self) -> bool {
        Self::ULTRA.contains(&self)
    }

    /// Kinds whose membrane mixes the circular 3-neighbourhood.
    pub fn is_spatial(self) -> bool {
        matches!(self, NeuronKind::UltraDlif | NeuronKind::UltraDplif)
    }

    pub fn learns_tau(self) -> bool {
        matches!(
            self,
            NeuronKind::UltraPlif
                | NeuronKind::UltraDplif
                | NeuronKind::Plif
                | NeuronKind::FullPlif
                | NeuronKind::DSpikePlus
        )
    }

    pub fn learns_theta(self) -> bool {
        self == NeuronKind::FullPlif
    }

    pub fn is_dspike(self) -> bool {
        matches!(self, NeuronKind::DSpike | NeuronKind::DSpikePlus)
    }

    pub fn adapts(self) -> bool {
        self == NeuronKind::AdaLif
    }

    pub fn name(self) -> &'static str {
        match self {
            NeuronKind::UltraLif => "ultralif",
            NeuronKind::UltraPlif => "ultraplif",
            NeuronKind::UltraDlif => "ultradlif",
            NeuronKind::UltraDplif => "ultradplif",
            NeuronKind::Lif => "lif",
            NeuronKind::Plif => "plif",
            NeuronKind::AdaLif => "adalif",
            NeuronKind::FullPlif => "fullplif",
            NeuronKind::DSpike => "dspike",
            NeuronKind::DSpikePlus => "dspike+",
        }
    }
}

impl fmt::Display for NeuronKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NeuronKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let key = match lower.as_str() {
            "dspikeplus" | "dspike-plus" => "dspike+",
            other => other,
        };
        NeuronKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown neuron kind `{s}`")))
    }
}

/// Per-layer neuron hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuronConfig {
    pub kind: NeuronKind,
    pub theta: f64,
    pub tau0: f64,
    pub v_reset: f64,
    pub eps0: f64,
    pub eps_clamp: (f64, f64),
    pub beta_surrogate: f64,
    pub beta_adapt: f64,
    pub tau_adapt: f64,
    pub dspike_k0: f64,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        NeuronConfig {
            kind: NeuronKind::UltraLif,
            theta: 0.5,
            tau0: 0.9,
            v_reset: 0.0,
            eps0: 1.0,
            eps_clamp: (0.1, 20.0),
            beta_surrogate: 10.0,
            beta_adapt: 0.1,
            tau_adapt: 0.9,
            dspike_k0: 4.0,
        }
    }
}

impl NeuronConfig {
    pub fn new(kind: NeuronKind) -> Self {
        NeuronConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::Parameter(format!(
                "theta must be > 0, got {}",
                self.theta
            )));
        }
        if !(self.tau0 > 0.0 && self.tau0 < 1.0) {
            return Err(Error::Parameter(format!(
                "tau0 must lie in (0,1), got {}",
                self.tau0
            )));
        }
        let (lo, hi) = self.eps_clamp;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::Parameter(format!("invalid eps clamp [{lo}, {hi}]")));
        }
        if !(self.eps0 > 0.0) {
            return Err(Error::Parameter(format!(
                "eps0 must be > 0, got {}",
                self.eps0
            )));
        }
        Ok(())
    }

    /// Bounds on the log-temperature parameter.
    pub fn log_eps_bounds(&self) -> (f64, f64) {
        (self.eps_clamp.0.ln(), self.eps_clamp.1.ln())
    }

    /// Learnable per-layer scalars for this kind, with their initial values.
    ///
    /// `tau_param` and `theta_param` are logits: `tau = sigmoid(tau_param)`.
    pub fn initial_params(&self) -> Vec<(&'static str, Tensor)> {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let mut out = Vec::new();
        if self.kind.is_ultra() {
            out.push((LOG_EPS, Tensor::scalar(self.eps0.ln())));
        }
        if self.kind.learns_tau() {
            out.push((TAU_PARAM, Tensor::scalar(logit(self.tau0))));
        }
        if self.kind.learns_theta() {
            out.push((THETA_PARAM, Tensor::scalar(logit(self.theta.min(0.999)))));
        }
        if self.kind.is_dspike() {
            out.push((DSPIKE_K, Tensor::scalar(self.dspike_k0)));
        }
        out
    }
}

pub const LOG_EPS: &str = "log_eps";
pub const TAU_PARAM: &str = "tau_param";
pub const THETA_PARAM: &str = "theta_param";
pub const DSPIKE_K: &str = "k";
