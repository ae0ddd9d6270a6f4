//! Acceptance checks. Runs every criterion and prints one PASS/FAIL line each.
//! Known failures are reported, not fatal; set `ULTRALIF_ACCEPTANCE_STRICT=1`
//! to exit nonzero when any criterion fails. Training criteria need MNIST IDX
//! files in `$ULTRALIF_DATA` (default: `data/mnist` at the workspace root).

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ultralif::autodiff::numeric::{heaviside, lse, sigmoid};
use ultralif::autodiff::{Tape, Tensor};
use ultralif::encoding::{load_mnist, Dataset, InputEncoding, Split};
use ultralif::network::{energy, loss_gradcheck, micro_problem, NetworkSpec};
use ultralif::neurons::oracle::{maxplus_dlif_oracle, maxplus_lif_oracle};
use ultralif::neurons::{NeuronCell, NeuronConfig, NeuronKind, NeuronState};
use ultralif::training::{train, RunSummary, TrainConfig, TrainOutcome};
use ultralif::tropical::{self, Arrangement};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// A criterion also fails when it overruns its time budget.
fn timed(budget: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = f();
    let took = start.elapsed();
    v.detail = format!(
        "{} [{:.2}s / {}s]",
        v.detail,
        took.as_secs_f64(),
        budget.as_secs()
    );
    if took > budget {
        v.pass = false;
        v.detail.push_str(" over time budget");
    }
    v
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

fn c1_lse_bounds() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for i in 0..10_000 {
        let n = [2, 3, 8][i % 3];
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let eps = log_uniform(&mut rng, 1e-3, 10.0);
        let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let v = lse(&x, eps).unwrap();
        worst = worst.min(v - m).min(m + eps * (n as f64).ln() - v);
    }
    verdict(worst >= -1e-12, format!("min slack {worst:.3e}"))
}

fn c2_sigmoid_heaviside() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::NEG_INFINITY;
    let mut n = 0;
    while n < 10_000 {
        let x: f64 = rng.gen_range(-10.0..10.0);
        if x == 0.0 {
            continue;
        }
        let eps = log_uniform(&mut rng, 1e-3, 10.0);
        let excess = (sigmoid(x / eps) - heaviside(x)).abs() - (-x.abs() / eps).exp();
        worst = worst.max(excess);
        n += 1;
    }
    // One ulp at 1.0 covers spikes that round to just below one.
    verdict(worst <= f64::EPSILON, format!("max excess {worst:.3e}"))
}

fn spike_slope(v: f64, theta: f64, eps: f64) -> f64 {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::scalar(v));
    let s = x.add_const(-theta).scale(1.0 / eps).sigmoid();
    tape.backward(s).unwrap().wrt(x).item().unwrap()
}

fn c3_gradient_bound() -> Verdict {
    let theta = NeuronConfig::default().theta;
    let epss = [0.1, 0.5, 1.0, 2.0];
    let per = 100_000 / epss.len();
    let mut ok = true;
    let mut sup_gap: f64 = 0.0;
    for eps in epss {
        let cap = 0.25 / eps;
        for i in 0..per {
            let v = -10.0 + 20.0 * i as f64 / (per - 1) as f64;
            let g = spike_slope(v, theta, eps);
            ok &= g > 0.0 && g <= cap;
        }
        sup_gap = sup_gap.max((spike_slope(theta, theta, eps) - cap).abs());
    }
    verdict(
        ok && sup_gap <= 1e-9,
        format!("all slopes in (0, 1/4ε]: {ok}; |sup − 1/4ε| = {sup_gap:.1e}"),
    )
}

/// Input sequences (T = 20, |I| ≤ 1) whose max-plus trajectories keep every
/// threshold margin ≥ 0.05.
fn margin_bounded(
    width: usize,
    count: usize,
    cfg: &NeuronConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    while out.len() < count {
        let seq: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut v = vec![0.0; width];
        let mut ok = true;
        for i in &seq {
            let (next, margin) = oracle_step(&v, i, cfg);
            ok &= margin.iter().all(|&m| m >= 0.05);
            v = next.0;
        }
        if ok {
            out.push(seq);
        }
    }
    out
}

type OracleOut = ((Vec<f64>, Vec<bool>), Vec<f64>);

fn oracle_step(v: &[f64], input: &[f64], cfg: &NeuronConfig) -> OracleOut {
    if cfg.kind.is_spatial() {
        let s = maxplus_dlif_oracle(v, input, cfg);
        ((s.v_next, s.spikes), s.margins)
    } else {
        let s = maxplus_lif_oracle(v[0], input[0], cfg);
        ((vec![s.v_next], vec![s.spike]), vec![s.margin])
    }
}

/// Worst `|V_ε(t) − v(t)| / (t·ε·ln n)` and whether hard-rounded spikes
/// matched the oracle throughout.
fn trajectory_check(
    cfg: &NeuronConfig,
    seqs: &[Vec<Vec<f64>>],
    eps: f64,
    ln_n: f64,
) -> (f64, bool) {
    let width = seqs[0][0].len();
    let mut worst: f64 = 0.0;
    let mut spikes_agree = true;
    for seq in seqs {
        let tape = Tape::new();
        let cell = NeuronCell::fixed(&tape, cfg, eps).unwrap();
        let mut state = NeuronState::from_membrane(&tape, Tensor::zeros(&[1, width]));
        let mut v = vec![0.0; width];
        for (t, input) in seq.iter().enumerate() {
            let out = cell
                .step(
                    state,
                    tape.constant(Tensor::new(vec![1, width], input.clone()).unwrap()),
                )
                .unwrap();
            let ((next, spikes), _) = oracle_step(&v, input, cfg);
            let bound = (t + 1) as f64 * eps * ln_n;
            for j in 0..width {
                let err = (out.state.v.value().data()[j] - next[j]).abs();
                // Absolute 1e-12 slack: the DLIF bound is attained exactly
                // when three equal neighbours meet.
                worst = worst.max((err - 1e-12).max(0.0) / bound);
                spikes_agree &= (out.spikes.value().data()[j] > 0.5) == spikes[j];
            }
            v = next;
            state = out.state;
        }
    }
    (worst, spikes_agree)
}

fn c4_trajectories() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, width, ln_n) in [
        (NeuronKind::UltraLif, 1, 2f64.ln()),
        (NeuronKind::UltraDlif, 8, 3f64.ln()),
    ] {
        let cfg = NeuronConfig::new(kind);
        let seqs = margin_bounded(width, 100, &cfg, &mut rng);
        for eps in [0.1, 0.01, 0.001] {
            let (ratio, spikes) = trajectory_check(&cfg, &seqs, eps, ln_n);
            let ok = ratio <= 1.0 && (eps > 0.001 || spikes);
            pass &= ok;
            parts.push(format!(
                "{kind} ε={eps}: err/bound {ratio:.3}{}{}",
                if eps == 0.001 {
                    format!(", spikes match {spikes}")
                } else {
                    String::new()
                },
                if ok { "" } else { " ✗" }
            ));
        }
    }
    verdict(pass, parts.join("; "))
}

fn c5_gradcheck() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in NeuronKind::ULTRA {
        let (net, input, labels) = micro_problem(kind, 5).unwrap();
        let r = loss_gradcheck(&net, &input, &labels, 1e-5).unwrap();
        pass &= r.max_rel_err < 1e-4;
        parts.push(format!("{kind} {:.1e}", r.max_rel_err));
    }
    let (net, input, labels) = micro_problem(NeuronKind::Lif, 5).unwrap();
    let r = loss_gradcheck(&net, &input, &labels, 1e-5).unwrap();
    let w = r.param("hidden0.weight").unwrap();
    let mismatch = w.fd_norm == 0.0 && w.analytic_norm > 1e-3;
    pass &= mismatch;
    parts.push(format!(
        "lif hidden weights: fd ‖g‖ = {}, surrogate ‖g‖ = {:.3e}",
        w.fd_norm, w.analytic_norm
    ));
    verdict(pass, parts.join("; "))
}

fn c6_semiring() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x = log_uniform(&mut rng, 1e-6, 1e6);
        let y = log_uniform(&mut rng, 1e-6, 1e6);
        let eps = log_uniform(&mut rng, 1e-3, 10.0);
        let d = |v: f64| eps * v.ln();
        worst = worst
            .max((d(x * y) - (d(x) + d(y))).abs())
            .max((d(x + y) - lse(&[d(x), d(y)], eps).unwrap()).abs());
    }
    verdict(worst <= 1e-10, format!("max deviation {worst:.2e}"))
}

fn c7_regions() -> Verdict {
    let mut exact_ok = 0;
    let mut grid_ok = 0;
    let mut seed = 0u64;
    let mut tried = 0;
    while tried < 50 {
        seed += 1;
        let h = 1 + (seed as usize % 6);
        let (w, c) = tropical::gaussian_layer(h, 2, seed);
        let arr = Arrangement::new(w, c).unwrap();
        if !tropical::is_general_position(&arr).unwrap() {
            continue;
        }
        tried += 1;
        let formula = u64::try_from(tropical::region_formula(h, 2)).unwrap();
        exact_ok += usize::from(tropical::count_regions_exact_2d(&arr).unwrap() == formula);
        grid_ok += usize::from(tropical::count_regions_grid(&arr, 2000).unwrap() == formula);
    }

    let degenerate = [
        // parallel, concurrent, coincident, zero normal
        (vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![0.0, 1.0]),
        (
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![0.0; 3],
        ),
        (
            vec![vec![1.0, -1.0], vec![-3.0, 3.0], vec![0.5, 2.0]],
            vec![1.0, -3.0, 0.2],
        ),
        (vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.3, 0.1]),
    ];
    let below = degenerate.iter().all(|(w, c)| {
        let arr = Arrangement::new(w.clone(), c.clone()).unwrap();
        let formula = u64::try_from(tropical::region_formula(arr.hidden(), 2)).unwrap();
        tropical::count_regions_exact_2d(&arr).unwrap() < formula
            && tropical::count_regions_grid(&arr, 1000).unwrap() < formula
    });

    let cfg = NeuronConfig::default();
    let mut temporal_ok = true;
    let mut max_seq = 0;
    for s in 0..10 {
        let h = 2 + s % 5;
        let (w, b) = tropical::gaussian_layer(h, 2, 700 + s as u64);
        let r = tropical::temporal_region_count(&w, &b, &cfg, 2, 400).unwrap();
        let bound = u64::try_from(tropical::region_formula(h, 2).pow(2)).unwrap();
        temporal_ok &= r.sequences <= bound;
        max_seq = max_seq.max(r.sequences);
    }
    verdict(
        exact_ok == 50 && below && temporal_ok,
        format!(
            "exact == R(h,2) on {exact_ok}/50 (grid 2000² agrees on {grid_ok}/50); degenerate strictly below: {below}; T=2 within R²: {temporal_ok}"
        ),
    )
}

fn c8_zonotope() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_rel: f64 = 0.0;
    let mut capacity_ok = true;
    for k in 0..20 {
        let n = 1 + k % 3;
        let h = rng.gen_range(n..=6);
        let (w, c) = tropical::gaussian_layer(h, n, 800 + k as u64);
        let exact = tropical::zonotope_volume(&w).unwrap().volume;
        let mc = tropical::zonotope_volume_monte_carlo(&w, 1_000_000, 900 + k as u64).unwrap();
        worst_rel = worst_rel.max((mc - exact).abs() / exact);
        let arr = Arrangement::new(w, c).unwrap();
        let regions = tropical::count_regions(&arr, if n == 3 { 120 } else { 4000 })
            .unwrap()
            .empirical;
        capacity_ok &= exact > 0.0 && regions >= 1 << n;
    }
    let deficient = [
        vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        vec![
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![-1.0, -2.0, -3.0],
            vec![0.5, 1.0, 1.5],
        ],
        vec![
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0, 2.0],
        ],
        vec![vec![1.0, 2.0, 3.0]],
    ];
    let zero = deficient
        .iter()
        .all(|w| tropical::zonotope_volume(w).unwrap().volume == 0.0);
    verdict(
        worst_rel <= 0.02 && zero && capacity_ok,
        format!("max |MC − exact|/exact {:.3}%; rank-deficient → 0: {zero}; regions ≥ 2ⁿ: {capacity_ok}", 100.0 * worst_rel),
    )
}

struct MnistRuns {
    ultra: Vec<(NeuronKind, RunSummary)>,
    lif: RunSummary,
    dlif_sparse: RunSummary,
    dlif_dense: TrainOutcome,
    analog: Vec<(NeuronKind, RunSummary)>,
    elapsed: Duration,
}

fn data_dir() -> PathBuf {
    std::env::var_os("ULTRALIF_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn mnist() -> Result<(Dataset, Dataset), String> {
    let dir = data_dir();
    let train = load_mnist(&dir, Split::Train).map_err(|e| format!("{}: {e}", dir.display()))?;
    let test = load_mnist(&dir, Split::Test).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok((train.head(8000), test.head(2000)))
}

fn scaled_run(
    kind: NeuronKind,
    lambda: f64,
    encoding: InputEncoding,
    data: &(Dataset, Dataset),
) -> TrainOutcome {
    let spec = NetworkSpec::new(data.0.width(), data.0.classes, kind);
    let cfg = TrainConfig {
        lambda,
        encoding,
        ..TrainConfig::default()
    };
    train(&spec, &data.0, &data.1, &cfg).expect("training runs")
}

fn runs() -> &'static Result<MnistRuns, String> {
    static RUNS: OnceLock<Result<MnistRuns, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let data = mnist()?;
        let start = Instant::now();
        let rate = InputEncoding::default();
        let dlif_dense = scaled_run(NeuronKind::UltraDlif, 0.0, rate, &data);
        let mut ultra = vec![(NeuronKind::UltraDlif, dlif_dense.summary.clone())];
        for kind in [
            NeuronKind::UltraLif,
            NeuronKind::UltraPlif,
            NeuronKind::UltraDplif,
        ] {
            ultra.push((kind, scaled_run(kind, 0.0, rate, &data).summary));
        }
        let lif = scaled_run(NeuronKind::Lif, 0.0, rate, &data).summary;
        let dlif_sparse = scaled_run(NeuronKind::UltraDlif, 0.1, rate, &data).summary;
        let elapsed = start.elapsed();
        let analog = [
            NeuronKind::UltraDlif,
            NeuronKind::UltraDplif,
            NeuronKind::Lif,
        ]
        .into_iter()
        .map(|k| (k, scaled_run(k, 0.0, InputEncoding::Analog, &data).summary))
        .collect();
        Ok(MnistRuns {
            ultra,
            lif,
            dlif_sparse,
            dlif_dense,
            analog,
            elapsed,
        })
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn c9_scaled_training() -> Verdict {
    let r = match runs() {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("MNIST unavailable: {e}")),
    };
    let dlif = r.ultra[0].1.final_acc;
    let (best_kind, best) = r.ultra.iter().map(|(k, s)| (*k, s.final_acc)).fold(
        (NeuronKind::UltraDlif, f64::MIN),
        |a, b| if b.1 > a.1 { b } else { a },
    );
    let margin = best - r.lif.final_acc;
    let minutes = r.elapsed.as_secs_f64() / 60.0;
    verdict(
        dlif >= 0.90 && margin >= 0.005 && minutes < 10.0,
        format!(
            "rate input: UltraDLIF {} (need ≥ 90%); best ultra {best_kind} {} vs LIF {} → {:+.2} pts (need ≥ +0.5); {minutes:.1} min",
            pct(dlif),
            pct(best),
            pct(r.lif.final_acc),
            100.0 * margin
        ),
    )
}

fn c10_sparsity() -> Verdict {
    let r = match runs() {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("MNIST unavailable: {e}")),
    };
    let dense = &r.dlif_dense.summary;
    let sparse = &r.dlif_sparse;
    let reduction = 1.0 - sparse.final_spike_soft / dense.final_spike_soft;
    let drop = dense.final_acc - sparse.final_acc;
    verdict(
        reduction >= 0.25 && drop <= 0.01,
        format!(
            "UltraDLIF spike rate {:.3} → {:.3} ({:.1}% reduction, need ≥ 25%); accuracy {} → {} (drop {:.2} pts, need ≤ 1)",
            dense.final_spike_soft,
            sparse.final_spike_soft,
            100.0 * reduction,
            pct(dense.final_acc),
            pct(sparse.final_acc),
            100.0 * drop
        ),
    )
}

fn c11_energy() -> Verdict {
    let spot = format!("{:.2}", energy(0.404, 1)) == "0.40"
        && format!("{:.2}", energy(0.248, 30)) == "7.44";
    let exact = |rate: f64, t: usize| energy(rate, t).to_bits() == (t as f64 * rate).to_bits();
    let mut recorded = (0..=1000).all(|i| exact(i as f64 / 1000.0, 1 + i % 30));
    let mut rows = 0;
    if let Ok(r) = runs() {
        for row in &r.dlif_dense.metrics.rows {
            recorded &= row.energy.to_bits() == (1.0 * row.spike_soft).to_bits();
            rows += 1;
        }
        for (_, s) in r.ultra.iter().chain(&r.analog) {
            recorded &=
                s.final_energy.to_bits() == (s.timesteps as f64 * s.final_spike_soft).to_bits();
        }
    }
    verdict(
        spot && recorded,
        format!("0.404·1 = 0.40 and 0.248·30 = 7.44: {spot}; T·s̄ bit-exact on synthetic and {rows} recorded epochs: {recorded}"),
    )
}

fn c12_learned_eps() -> Verdict {
    let r = match runs() {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("MNIST unavailable: {e}")),
    };
    let out = &r.dlif_dense;
    let eps = out.summary.final_eps[0];
    let clamp = out
        .metrics
        .rows
        .iter()
        .all(|row| row.eps.iter().all(|e| (0.1..=20.0).contains(e)));
    verdict(
        (0.3..=3.0).contains(&eps) && clamp && out.summary.eps_within_clamp,
        format!(
            "UltraDLIF final ε = {eps:.3} (need [0.3, 3]); inside [0.1, 20] every epoch: {clamp}"
        ),
    )
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("LSE bounds", Box::new(move || timed(s(1), c1_lse_bounds))),
        (
            "sigmoid/Heaviside bound",
            Box::new(move || timed(s(1), c2_sigmoid_heaviside)),
        ),
        (
            "soft-spike gradient bound",
            Box::new(move || timed(s(1), c3_gradient_bound)),
        ),
        (
            "trajectory convergence",
            Box::new(move || timed(s(10), c4_trajectories)),
        ),
        (
            "forward-backward consistency",
            Box::new(move || timed(s(30), c5_gradcheck)),
        ),
        (
            "semiring homomorphism",
            Box::new(move || timed(s(1), c6_semiring)),
        ),
        (
            "region counting",
            Box::new(move || timed(s(60), c7_regions)),
        ),
        (
            "zonotope volume",
            Box::new(move || timed(s(60), c8_zonotope)),
        ),
        ("scaled MNIST training", Box::new(c9_scaled_training)),
        (
            "sparsity penalty",
            Box::new(move || timed(s(20 * 60), c10_sparsity)),
        ),
        ("energy arithmetic", Box::new(c11_energy)),
        (
            "learned epsilon",
            Box::new(move || timed(s(15 * 60), c12_learned_eps)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {:>2} {}: {name} — {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if let Ok(r) = runs() {
        let analog: Vec<String> = r
            .analog
            .iter()
            .map(|(k, s)| format!("{k} {}", pct(s.final_acc)))
            .collect();
        println!("info: analog-input runs (λ = 0): {}", analog.join(", "));
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    let strict = std::env::var_os("ULTRALIF_ACCEPTANCE_STRICT").is_some_and(|v| v != "0");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
