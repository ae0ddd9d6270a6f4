//! Stateful neuron cells.
//!
//! * Ultradiscretized kinds (`UltraLIF`, `UltraPLIF`, `UltraDLIF`,
//!   `UltraDPLIF`) relax the max-plus membrane update with a log-sum-exp of
//!   temperature `ε` and emit soft spikes `σ((Ṽ − θ)/ε)`; forward and backward
//!   passes differentiate the same function.
//! * Surrogate baselines (`LIF`, `PLIF`, `AdaLIF`, `FullPLIF`, `DSpike`,
//!   `DSpike+`) spike with a hard Heaviside and back-propagate a smooth
//!   stand-in derivative.
//! * [`oracle`] holds the hard max-plus trajectories the soft kinds converge to.

mod cell;
mod config;
pub mod oracle;

pub use cell::{
    baseline_step, hard_inference_step, ultradlif_step, ultralif_step, NeuronCell, NeuronState,
    Phase, StepOutput,
};
pub use config::{NeuronConfig, NeuronKind, DSPIKE_K, LOG_EPS, TAU_PARAM, THETA_PARAM};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Tape, Tensor};
    use crate::error::Error;

    fn row(values: &[f64]) -> Tensor {
        Tensor::new(vec![1, values.len()], values.to_vec()).unwrap()
    }

    fn scalar_step(kind: NeuronKind, v: f64, input: f64, eps: f64) -> (f64, f64, f64) {
        let tape = Tape::new();
        let cell = NeuronCell::fixed(&tape, &NeuronConfig::new(kind), eps).unwrap();
        let state = NeuronState::from_membrane(&tape, row(&[v]));
        let out = cell.step(state, tape.constant(row(&[input]))).unwrap();
        (
            out.pre_reset.item().unwrap(),
            out.spikes.item().unwrap(),
            out.state.v.item().unwrap(),
        )
    }

    #[test]
    fn ultralif_reference_step() {
        // 30-digit evaluation of ln(0.9 + e), sigma(V - 0.5), V (1 - s).
        let (pre, s, v) = scalar_step(NeuronKind::UltraLif, 0.0, 1.0, 1.0);
        assert!((pre - 1.285_999_280_141_409_6).abs() < 1e-12);
        assert!((s - 0.686_971_653_583_547_2).abs() < 1e-12);
        assert!((v - 0.402_554_228_155_414_1).abs() < 1e-12);
    }

    #[test]
    fn ultralif_tropical_limit() {
        let (pre, s, v) = scalar_step(NeuronKind::UltraLif, 0.0, -5.0, 0.001);
        assert!((pre - 0.9f64.ln()).abs() < 1e-12);
        assert!(s < 1e-200);
        assert!((v - 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn spike_is_one_half_at_threshold() {
        let tape = Tape::new();
        let cell =
            NeuronCell::fixed(&tape, &NeuronConfig::new(NeuronKind::UltraDlif), 1.0).unwrap();
        // Ṽ = ε ln 3 + I, choose I so that Ṽ = θ.
        let input = 0.5 - 3f64.ln();
        let state = NeuronState::zeros(&tape, 1, 1, NeuronKind::UltraDlif);
        let out = cell.step(state, tape.constant(row(&[input]))).unwrap();
        assert!((out.pre_reset.item().unwrap() - 0.5).abs() < 1e-15);
        assert!((out.spikes.item().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ultradlif_examples() {
        let run = |v: &[f64], input: &[f64], eps: f64| {
            let tape = Tape::new();
            let cfg = NeuronConfig::new(NeuronKind::UltraDlif);
            let cell = NeuronCell::fixed(&tape, &cfg, eps).unwrap();
            let state = NeuronState::from_membrane(&tape, row(v));
            let out = ultradlif_step(&cell, state, tape.constant(row(input))).unwrap();
            let pre = out.pre_reset.value().data().to_vec();
            pre
        };
        for x in run(&[0.0; 3], &[0.0; 3], 1.0) {
            assert!((x - 3f64.ln()).abs() < 1e-15);
        }
        for x in run(&[2.0, 0.0, 0.0], &[0.0; 3], 0.001) {
            assert!((x - 2.0).abs() < 1e-9);
        }
        let pre = run(&[1.0, 0.0, -1.0], &[0.1, 0.0, 0.0], 0.5);
        assert!((pre[0] - 1.171_465_814_249_949_8).abs() < 1e-12);
    }

    #[test]
    fn ultradplif_adds_leak_to_every_neighbour() {
        let tape = Tape::new();
        let cfg = NeuronConfig::new(NeuronKind::UltraDplif);
        let cell = NeuronCell::fixed(&tape, &cfg, 1.0).unwrap();
        let state = NeuronState::from_membrane(&tape, row(&[0.0; 4]));
        let out = cell.step(state, tape.constant(row(&[0.0; 4]))).unwrap();
        for &x in out.pre_reset.value().data() {
            assert!((x - (3f64.ln() + 0.9f64.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn lif_baseline_examples() {
        let (pre, s, v) = scalar_step(NeuronKind::Lif, 0.5, 0.2, 1.0);
        assert!((pre - 0.65).abs() < 1e-15);
        assert_eq!((s, v), (1.0, 0.0));

        let (pre, s, v) = scalar_step(NeuronKind::Lif, 0.0, 0.3, 1.0);
        assert_eq!((pre, s, v), (0.3, 0.0, 0.3));
    }

    #[test]
    fn adalif_threshold_rises_after_spike() {
        let tape = Tape::new();
        let cfg = NeuronConfig::new(NeuronKind::AdaLif);
        let cell = NeuronCell::bind(&tape, &cfg, &[]).unwrap();
        let state = NeuronState::zeros(&tape, 1, 1, NeuronKind::AdaLif);
        let out = baseline_step(&cell, state, tape.constant(row(&[0.6]))).unwrap();
        assert_eq!(out.spikes.item().unwrap(), 1.0);
        let b = out.state.adapt.unwrap().item().unwrap();
        assert!((b - 0.1).abs() < 1e-15);
        assert!((cfg.theta + cfg.beta_adapt * b - 0.51).abs() < 1e-15);

        // 0.505 clears the base threshold but not the adapted one.
        let out = baseline_step(&cell, out.state, tape.constant(row(&[0.505]))).unwrap();
        assert_eq!(out.spikes.item().unwrap(), 0.0);
    }

    #[test]
    fn baseline_spikes_are_binary_and_ultra_spikes_are_open_interval() {
        let inputs = [-3.0, -0.2, 0.0, 0.49, 0.51, 2.0, 7.0];
        for kind in NeuronKind::ALL {
            let tape = Tape::new();
            let cell = NeuronCell::bind(&tape, &NeuronConfig::new(kind), &[]).unwrap();
            let mut state = NeuronState::zeros(&tape, 1, inputs.len(), kind);
            for _ in 0..3 {
                let out = cell.step(state, tape.constant(row(&inputs))).unwrap();
                for &s in out.spikes.value().data() {
                    if kind.is_ultra() {
                        assert!(s > 0.0 && s < 1.0, "{kind}: {s}");
                    } else {
                        assert!(s == 0.0 || s == 1.0, "{kind}: {s}");
                    }
                }
                state = out.state;
            }
        }
    }

    #[test]
    fn hard_inference_examples() {
        let tape = Tape::new();
        let cfg = NeuronConfig::new(NeuronKind::UltraLif);
        let cell = NeuronCell::fixed(&tape, &cfg, 0.01).unwrap();
        let state = NeuronState::from_membrane(&tape, row(&[-50.0, -50.0]));
        let out = hard_inference_step(&cell, state, tape.constant(row(&[0.6, 0.4])), Phase::Eval)
            .unwrap();
        let pre = out.pre_reset.value().data().to_vec();
        assert!((pre[0] - 0.6).abs() < 1e-12 && (pre[1] - 0.4).abs() < 1e-12);
        assert_eq!(out.spikes.value().data(), &[1.0, 0.0]);
        let v = out.state.v.value().data().to_vec();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.4).abs() < 1e-12);

        let err = hard_inference_step(&cell, state, tape.constant(row(&[0.6, 0.4])), Phase::Train);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn soft_and_hard_spikes_agree_on_margin_bounded_inputs() {
        // Sweep oracle: for margin δ ≥ 0.1 at ε = 0.01 the soft spike is within
        // e^{-δ/ε} of the hard one, so rounding recovers it exactly.
        let eps = 0.01;
        let cfg = NeuronConfig::new(NeuronKind::UltraLif);
        let inputs: Vec<f64> = (0..400)
            .map(|i| -1.0 + 2.5 * i as f64 / 399.0)
            .filter(|x| (x - cfg.theta).abs() >= 0.1)
            .collect();
        let tape = Tape::new();
        let cell = NeuronCell::fixed(&tape, &cfg, eps).unwrap();
        let start = Tensor::full(&[1, inputs.len()], -50.0);
        let input = tape.constant(row(&inputs));
        let soft = cell
            .step(NeuronState::from_membrane(&tape, start.clone()), input)
            .unwrap();
        let hard = hard_inference_step(
            &cell,
            NeuronState::from_membrane(&tape, start),
            input,
            Phase::Eval,
        )
        .unwrap();
        let soft = soft.spikes.value().data().to_vec();
        let hard = hard.spikes.value().data().to_vec();
        for ((s, h), x) in soft.iter().zip(&hard).zip(&inputs) {
            let margin = (x - cfg.theta).abs();
            // One ulp at 1.0 covers spikes that round just below one.
            let bound = (-margin / eps).exp() * (1.0 + 1e-12) + f64::EPSILON;
            assert!((s - h).abs() <= bound, "x={x}");
            assert_eq!(s.round(), *h);
        }
    }

    #[test]
    fn shape_and_input_errors() {
        let tape = Tape::new();
        let cell = NeuronCell::fixed(&tape, &NeuronConfig::default(), 1.0).unwrap();
        let state = NeuronState::zeros(&tape, 1, 3, NeuronKind::UltraLif);
        let bad = tape.constant(row(&[0.0, 1.0]));
        assert!(matches!(cell.step(state, bad), Err(Error::Shape { .. })));
        let nan = tape.constant(row(&[0.0, f64::INFINITY, 1.0]));
        assert!(matches!(cell.step(state, nan), Err(Error::Input(_))));
        let lif = NeuronCell::bind(&tape, &NeuronConfig::new(NeuronKind::Lif), &[]).unwrap();
        assert!(matches!(
            ultralif_step(&lif, state, tape.constant(row(&[0.0; 3]))),
            Err(Error::Contract(_))
        ));
    }
}
