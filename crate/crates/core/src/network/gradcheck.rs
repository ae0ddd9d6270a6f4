use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{loss, Mode, Network, NetworkSpec};
use crate::autodiff::gradcheck::{central_difference, relative_error};
use crate::autodiff::{Tape, Tensor};
use crate::error::Result;
use crate::neurons::NeuronKind;

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub rel_err: f64,
    pub analytic_norm: f64,
    pub fd_norm: f64,
}

/// Tape gradient of the loss against central finite differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub kind: NeuronKind,
    pub fd_step: f64,
    /// Largest per-parameter relative error.
    pub max_rel_err: f64,
    /// Relative error of all gradients concatenated.
    pub total_rel_err: f64,
    /// Smallest `|Ṽ − θ|` seen during the unperturbed forward pass.
    pub min_margin: f64,
    pub params: Vec<ParamCheck>,
}

impl GradcheckReport {
    pub fn param(&self, name: &str) -> Option<&ParamCheck> {
        self.params.iter().find(|p| p.name == name)
    }
}

fn loss_value(net: &Network, input: &[Tensor], labels: &[usize]) -> Result<f64> {
    let tape = Tape::new();
    let bound = net.bind(&tape);
    let rec = net.forward(&tape, &bound, input, Mode::Train, false)?;
    loss(&rec, labels, net.spec.lambda)?.item()
}

/// Compare the tape gradient of the training loss with central differences
/// of step `fd_step`, parameter by parameter.
pub fn loss_gradcheck(
    net: &Network,
    input: &[Tensor],
    labels: &[usize],
    fd_step: f64,
) -> Result<GradcheckReport> {
    let tape = Tape::new();
    let bound = net.bind(&tape);
    let rec = net.forward(&tape, &bound, input, Mode::Train, false)?;
    let root = loss(&rec, labels, net.spec.lambda)?;
    let analytic = bound.gradients(&tape.backward(root)?);

    let probe = RefCell::new(net.clone());
    let numeric = central_difference(
        |values| {
            let mut probe = probe.borrow_mut();
            probe.params.set_tensors(values).expect("same shapes");
            loss_value(&probe, input, labels).unwrap_or(f64::NAN)
        },
        &net.params.tensors(),
        fd_step,
    );

    let norm = |t: &Tensor| t.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let params: Vec<ParamCheck> = net
        .params
        .iter()
        .zip(analytic.iter().zip(&numeric))
        .filter(|(p, _)| p.trainable)
        .map(|(p, (a, n))| ParamCheck {
            name: p.name.clone(),
            rel_err: relative_error(a, n),
            analytic_norm: norm(a),
            fd_norm: norm(n),
        })
        .collect();
    let flat = |ts: &[Tensor]| Tensor::vector(ts.iter().flat_map(|t| t.data().to_vec()).collect());
    Ok(GradcheckReport {
        kind: net.spec.kind(),
        fd_step,
        max_rel_err: params.iter().map(|p| p.rel_err).fold(0.0, f64::max),
        total_rel_err: relative_error(&flat(&analytic), &flat(&numeric)),
        min_margin: rec.min_margin,
        params,
    })
}

/// The standard check network: 6 inputs, 5 hidden, 3 classes, `T = 3`,
/// batch of 2, random weights and inputs in `[0, 1)`.
pub fn micro_problem(kind: NeuronKind, seed: u64) -> Result<(Network, Vec<Tensor>, Vec<usize>)> {
    let mut spec = NetworkSpec::new(6, 3, kind);
    spec.hidden = vec![5];
    spec.timesteps = 3;
    spec.lambda = 0.1;
    let net = Network::new(spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let input = (0..3)
        .map(|_| Tensor::new(vec![2, 6], (0..12).map(|_| rng.gen()).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((net, input, vec![0, 2]))
}
