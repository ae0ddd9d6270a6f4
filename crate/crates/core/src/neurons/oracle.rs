//! Non-differentiable reference dynamics: the hard max-plus limits of the
//! ultradiscretized neurons and the additive models they derive from.

use super::config::NeuronConfig;

/// One step of a scalar max-plus trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStep {
    pub pre_reset: f64,
    pub spike: bool,
    pub v_next: f64,
    /// Threshold margin `|pre_reset − θ|`.
    pub margin: f64,
}

/// `V' = max(V + ln τ₀, I)`, hard spike `H(V' − θ)`, reset to `v_reset`.
pub fn maxplus_lif_oracle(v: f64, input: f64, cfg: &NeuronConfig) -> OracleStep {
    let pre = (v + cfg.tau0.ln()).max(input);
    hard_reset(pre, cfg)
}

fn hard_reset(pre: f64, cfg: &NeuronConfig) -> OracleStep {
    let spike = pre > cfg.theta;
    OracleStep {
        pre_reset: pre,
        spike,
        v_next: if spike { cfg.v_reset } else { pre },
        margin: (pre - cfg.theta).abs(),
    }
}

/// One step of the max-plus diffusion (morphological dilation) network.
#[derive(Debug, Clone, PartialEq)]
pub struct DlifOracleStep {
    pub pre_reset: Vec<f64>,
    pub spikes: Vec<bool>,
    pub v_next: Vec<f64>,
    pub margins: Vec<f64>,
}

/// `V'_i = max(V_{i−1}, V_i, V_{i+1}) + I_i` with circular indexing, then hard
/// spike and reset.
pub fn maxplus_dlif_oracle(v: &[f64], input: &[f64], cfg: &NeuronConfig) -> DlifOracleStep {
    assert_eq!(v.len(), input.len(), "state and input widths differ");
    let w = v.len();
    let steps: Vec<OracleStep> = (0..w)
        .map(|i| {
            let left = v[(i + w - 1) % w];
            let right = v[(i + 1) % w];
            hard_reset(left.max(v[i]).max(right) + input[i], cfg)
        })
        .collect();
    DlifOracleStep {
        pre_reset: steps.iter().map(|s| s.pre_reset).collect(),
        spikes: steps.iter().map(|s| s.spike).collect(),
        v_next: steps.iter().map(|s| s.v_next).collect(),
        margins: steps.iter().map(|s| s.margin).collect(),
    }
}

/// Forward-Euler LIF without spiking: `v' = τ₀ v + I`.
pub fn euler_lif_step(v: f64, input: f64, tau0: f64) -> f64 {
    tau0 * v + input
}

/// Balanced explicit diffusion step, equal thirds over the circular
/// 3-neighbourhood.
pub fn uniform_diffusion_step(v: &[f64]) -> Vec<f64> {
    let w = v.len();
    (0..w)
        .map(|i| (v[(i + w - 1) % w] + v[i] + v[(i + 1) % w]) / 3.0)
        .collect()
}
