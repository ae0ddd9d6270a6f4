//! Linear-region geometry of single-hidden-layer networks in the tropical
//! (`ε → 0`) limit.
//!
//! At that limit a hidden unit `j` responds to `x ∈ ℝⁿ` through the affine
//! form `w_j·x + b_j`, so the input space is cut by the hyperplanes
//! `w_j·x = c_j`. Two families of offsets matter:
//!
//! * [`Arrangement::membrane`] — `c_j = ln τ₀ − b_j`, the kink of
//!   `max(ln τ₀, w_j·x + b_j)`, which is where the membrane map changes
//!   linear piece;
//! * [`Arrangement::spikes`] — `c_j = θ − b_j`, where the hard spike of the
//!   first step flips. This is the arrangement whose cells carry a constant
//!   spike pattern.
//!
//! Grid methods sample cell centres of a uniform grid over `[−B, B]ⁿ` with
//! `B = 3·max_j|c_j| / max_j‖w_j‖ + 3`, widened when needed so the box holds
//! every vertex of the arrangement (1.25× the largest vertex coordinate,
//! plus one).

mod exact;

use std::collections::{HashMap, HashSet};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{bias_name, weight_name, Network};
use crate::neurons::NeuronConfig;

/// `R(h, n) = Σ_{k=0}^{min(n,h)} C(h, k)`, the maximum number of regions `h`
/// affine hyperplanes cut `ℝⁿ` into.
pub fn region_formula(h: usize, n: usize) -> BigUint {
    let mut total = BigUint::zero();
    let mut binom = BigUint::from(1u32);
    for k in 0..=n.min(h) {
        total += &binom;
        // C(h, k+1) = C(h, k)·(h−k)/(k+1), exact at every step.
        binom = binom * BigUint::from(h - k) / BigUint::from(k + 1);
    }
    total
}

/// Hyperplanes `w_j·x = c_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arrangement {
    pub weights: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

impl Arrangement {
    pub fn new(weights: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let n = weights.first().map_or(0, Vec::len);
        if weights.is_empty() || n == 0 {
            return Err(Error::Input("arrangement needs h >= 1 and n >= 1".into()));
        }
        if weights.iter().any(|r| r.len() != n) || offsets.len() != weights.len() {
            return Err(Error::shape(
                "Arrangement::new",
                format!("{} rows, {} offsets", weights.len(), offsets.len()),
            ));
        }
        if weights
            .iter()
            .flatten()
            .chain(&offsets)
            .any(|x| !x.is_finite())
        {
            return Err(Error::Input("arrangement entries must be finite".into()));
        }
        Ok(Arrangement { weights, offsets })
    }

    fn from_layer(net: &Network, offset: impl Fn(f64) -> f64) -> Result<Self> {
        let w = net.params.value(&weight_name(0))?;
        let b = net.params.value(&bias_name(0))?;
        let weights = (0..w.shape()[0]).map(|j| w.row(j).to_vec()).collect();
        let offsets = b.data().iter().map(|&bj| offset(bj)).collect();
        Arrangement::new(weights, offsets)
    }

    /// Kinks of the first hidden layer's membrane map.
    pub fn membrane(net: &Network) -> Result<Self> {
        let ln_tau = net.spec.neuron.tau0.ln();
        Self::from_layer(net, |b| ln_tau - b)
    }

    /// First-step spike boundaries of the first hidden layer.
    pub fn spikes(net: &Network) -> Result<Self> {
        let theta = net.spec.neuron.theta;
        Self::from_layer(net, |b| theta - b)
    }

    pub fn hidden(&self) -> usize {
        self.weights.len()
    }

    pub fn inputs(&self) -> usize {
        self.weights[0].len()
    }

    /// Bit `j` set when `w_j·x > c_j`.
    pub fn sign_pattern(&self, x: &[f64]) -> u64 {
        self.weights
            .iter()
            .zip(&self.offsets)
            .enumerate()
            .fold(0u64, |acc, (j, (w, &c))| {
                let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                if dot > c {
                    acc | (1 << j)
                } else {
                    acc
                }
            })
    }

    /// Half-width of the sampling box, see the module docs.
    pub fn bounding_box(&self) -> f64 {
        let max_norm = self
            .weights
            .iter()
            .map(|w| w.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let max_off = self.offsets.iter().map(|c| c.abs()).fold(0.0, f64::max);
        let mut b = if max_norm > 0.0 {
            3.0 * max_off / max_norm + 3.0
        } else {
            3.0
        };
        for v in self.vertices() {
            let reach = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
            b = b.max(1.25 * reach + 1.0);
        }
        b
    }

    /// Points where `n` hyperplanes with independent normals meet.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.inputs();
        exact::subsets(self.hidden(), n)
            .into_iter()
            .filter_map(|idx| {
                let a: Vec<Vec<f64>> = idx.iter().map(|&i| self.weights[i].clone()).collect();
                let c: Vec<f64> = idx.iter().map(|&i| self.offsets[i]).collect();
                solve(&a, &c)
            })
            .collect()
    }
}

/// Standard-normal weights `[h][n]` and offsets `[h]`, reproducible from
/// `seed`. Such draws are in general position with probability one.
pub fn gaussian_layer(h: usize, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..h)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let offsets = (0..h).map(|_| rng.sample(StandardNormal)).collect();
    (weights, offsets)
}

/// Solve `a x = c` for square `a` by partial pivoting; `None` if singular.
fn solve(a: &[Vec<f64>], c: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(c)
        .map(|(r, &ci)| r.iter().copied().chain([ci]).collect())
        .collect();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[p][col].abs() < 1e-12 {
            return None;
        }
        m.swap(p, col);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// A JSON number when it fits in 64 bits, a decimal string otherwise.
fn big_number<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x.to_u64() {
        Some(v) => s.serialize_u64(v),
        None => s.serialize_str(&x.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Exact,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionReport {
    pub hidden: usize,
    pub inputs: usize,
    /// `R(h, n)`.
    #[serde(serialize_with = "big_number")]
    pub formula: BigUint,
    pub empirical: u64,
    pub method: CountMethod,
    pub general_position: bool,
}

/// Exact region count of a planar arrangement by incremental insertion:
/// a new line crossing the earlier ones at `k` distinct points splits
/// `k + 1` regions. Coincident lines are inserted once; zero rows cut
/// nothing.
pub fn count_regions_exact_2d(arr: &Arrangement) -> Result<u64> {
    if arr.inputs() != 2 {
        return Err(Error::Input(format!(
            "exact enumeration is planar only, got n = {}",
            arr.inputs()
        )));
    }
    let mut lines: Vec<[BigRational; 3]> = Vec::new();
    for (w, &c) in arr.weights.iter().zip(&arr.offsets) {
        let (a, b, c) = (
            exact::rational(w[0])?,
            exact::rational(w[1])?,
            exact::rational(c)?,
        );
        if a.is_zero() && b.is_zero() {
            continue;
        }
        let lead = if a.is_zero() { b.clone() } else { a.clone() };
        let line = [&a / &lead, &b / &lead, &c / &lead];
        if !lines.contains(&line) {
            lines.push(line);
        }
    }
    let mut regions: u64 = 1;
    for (i, l) in lines.iter().enumerate() {
        let mut points = HashSet::new();
        for m in &lines[..i] {
            let d = &l[0] * &m[1] - &l[1] * &m[0];
            if d.is_zero() {
                continue;
            }
            let x = (&l[2] * &m[1] - &l[1] * &m[2]) / &d;
            let y = (&l[0] * &m[2] - &l[2] * &m[0]) / &d;
            points.insert((x, y));
        }
        regions += 1 + points.len() as u64;
    }
    Ok(regions)
}

/// Distinct sign patterns at `resolution^n` grid-cell centres.
pub fn count_regions_grid(arr: &Arrangement, resolution: usize) -> Result<u64> {
    let n = arr.inputs();
    check_grid(n, resolution, arr.hidden())?;
    let b = arr.bounding_box();
    let mut seen = HashSet::new();
    for_each_grid_point(n, resolution, b, |x| {
        seen.insert(arr.sign_pattern(x));
    });
    Ok(seen.len() as u64)
}

fn check_grid(n: usize, resolution: usize, h: usize) -> Result<()> {
    if !(1..=3).contains(&n) {
        return Err(Error::Input(format!(
            "grid counting supports n <= 3, got {n}"
        )));
    }
    if resolution < 2 {
        return Err(Error::Parameter(format!(
            "grid resolution {resolution} is degenerate"
        )));
    }
    if h > 20 {
        return Err(Error::Input(format!(
            "grid counting supports h <= 20, got {h}"
        )));
    }
    Ok(())
}

fn for_each_grid_point(n: usize, res: usize, b: f64, mut f: impl FnMut(&[f64])) {
    let step = 2.0 * b / res as f64;
    let coord = |i: usize| -b + (i as f64 + 0.5) * step;
    let mut x = vec![0.0; n];
    let total = res.pow(n as u32);
    for flat in 0..total {
        let mut r = flat;
        for xi in x.iter_mut() {
            *xi = coord(r % res);
            r /= res;
        }
        f(&x);
    }
}

/// Exact enumeration in the plane, grid sampling for `n = 1, 3`.
pub fn count_regions(arr: &Arrangement, resolution: usize) -> Result<RegionReport> {
    let (empirical, method) = if arr.inputs() == 2 {
        (count_regions_exact_2d(arr)?, CountMethod::Exact)
    } else {
        (count_regions_grid(arr, resolution)?, CountMethod::Grid)
    };
    Ok(RegionReport {
        hidden: arr.hidden(),
        inputs: arr.inputs(),
        formula: region_formula(arr.hidden(), arr.inputs()),
        empirical,
        method,
        general_position: is_general_position(arr)?,
    })
}

/// Every `n` normals independent and no `n + 1` hyperplanes through one
/// point, decided exactly.
pub fn is_general_position(arr: &Arrangement) -> Result<bool> {
    let n = arr.inputs();
    let h = arr.hidden();
    let w = exact::rational_matrix(&arr.weights)?;
    for idx in exact::subsets(h, n.min(h)) {
        let rows: Vec<_> = idx.iter().map(|&i| w[i].clone()).collect();
        if exact::rank(rows) < idx.len() {
            return Ok(false);
        }
    }
    if h > n {
        for idx in exact::subsets(h, n + 1) {
            let rows = idx
                .iter()
                .map(|&i| {
                    let mut r = w[i].clone();
                    r.push(exact::rational(arr.offsets[i])?);
                    Ok(r)
                })
                .collect::<Result<Vec<_>>>()?;
            if exact::det(rows).is_zero() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalReport {
    pub timesteps: usize,
    pub sequences: u64,
    /// `R(h, n)^T`.
    #[serde(serialize_with = "big_number")]
    pub bound: BigUint,
    pub within_bound: bool,
}

/// Distinct `T`-step spike sequences of the tropical LIF layer
/// `V ← max(V + ln τ₀, Wx + b)`, `s = H(V − θ)`, hard reset, under a static
/// input, over the grid of the layer's spike arrangement.
pub fn temporal_region_count(
    weights: &[Vec<f64>],
    bias: &[f64],
    cfg: &NeuronConfig,
    timesteps: usize,
    resolution: usize,
) -> Result<TemporalReport> {
    let offsets = bias.iter().map(|b| cfg.theta - b).collect();
    let arr = Arrangement::new(weights.to_vec(), offsets)?;
    let (h, n) = (arr.hidden(), arr.inputs());
    check_grid(n, resolution, h)?;
    if timesteps == 0 || timesteps * h > 64 {
        return Err(Error::Input(format!(
            "T = {timesteps} with h = {h} does not fit a 64-bit code"
        )));
    }
    let ln_tau = cfg.tau0.ln();
    let mut seen = HashSet::new();
    let mut v = vec![0.0; h];
    for_each_grid_point(n, resolution, arr.bounding_box(), |x| {
        v.iter_mut().for_each(|vi| *vi = 0.0);
        let mut code = 0u64;
        for t in 0..timesteps {
            for j in 0..h {
                let current: f64 =
                    weights[j].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bias[j];
                let pre = (v[j] + ln_tau).max(current);
                if pre > cfg.theta {
                    code |= 1 << (t * h + j);
                    v[j] = cfg.v_reset;
                } else {
                    v[j] = pre;
                }
            }
        }
        seen.insert(code);
    });
    let bound = region_formula(h, n).pow(timesteps as u32);
    let sequences = seen.len() as u64;
    Ok(TemporalReport {
        timesteps,
        sequences,
        within_bound: BigUint::from(sequences) <= bound,
        bound,
    })
}

/// Zonotope volume and the rank of its generators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZonotopeReport {
    pub volume: f64,
    pub rank: usize,
    /// `rank < n`: the generators lie in a proper subspace.
    pub deficient: bool,
}

/// Volume of `{Σ λ_i w_i : λ_i ∈ [0, 1]}` as the sum of `|det|` over all
/// `n`-subsets of rows, accumulated exactly.
pub fn zonotope_volume(weights: &[Vec<f64>]) -> Result<ZonotopeReport> {
    let n = weights.first().map_or(0, Vec::len);
    if n == 0 || weights.iter().any(|r| r.len() != n) {
        return Err(Error::shape(
            "zonotope_volume",
            "rows must share a nonzero width",
        ));
    }
    let w = exact::rational_matrix(weights)?;
    let rank = exact::rank(w.clone());
    if rank < n {
        return Ok(ZonotopeReport {
            volume: 0.0,
            rank,
            deficient: true,
        });
    }
    let mut total = BigRational::zero();
    for idx in exact::subsets(weights.len(), n) {
        let rows = idx.iter().map(|&i| w[i].clone()).collect();
        total += exact::abs(&exact::det(rows));
    }
    Ok(ZonotopeReport {
        volume: total.to_f64().unwrap_or(f64::INFINITY),
        rank,
        deficient: false,
    })
}

/// Hit-or-miss volume estimate from uniform samples in the bounding box,
/// using the facet description `|u·(p − c)| ≤ ½ Σ_i |u·w_i|` over the
/// normals `u` of every `(n−1)`-subset of generators.
pub fn zonotope_volume_monte_carlo(weights: &[Vec<f64>], samples: usize, seed: u64) -> Result<f64> {
    let n = weights.first().map_or(0, Vec::len);
    if n == 0 || n > 3 || weights.iter().any(|r| r.len() != n) {
        return Err(Error::Input(
            "Monte Carlo volume supports 1 <= n <= 3".into(),
        ));
    }
    let centre: Vec<f64> = (0..n)
        .map(|j| 0.5 * weights.iter().map(|w| w[j]).sum::<f64>())
        .collect();
    let half: Vec<f64> = (0..n)
        .map(|j| 0.5 * weights.iter().map(|w| w[j].abs()).sum::<f64>())
        .collect();
    if half.iter().any(|&e| e == 0.0) {
        return Ok(0.0);
    }
    let normals: Vec<Vec<f64>> = match n {
        1 => vec![vec![1.0]],
        2 => weights.iter().map(|w| vec![-w[1], w[0]]).collect(),
        _ => exact::subsets(weights.len(), 2)
            .into_iter()
            .map(|p| cross(&weights[p[0]], &weights[p[1]]))
            .collect(),
    };
    let facets: Vec<(Vec<f64>, f64)> = normals
        .into_iter()
        .filter(|u| u.iter().any(|&x| x.abs() > 1e-12))
        .map(|u| {
            let reach = 0.5 * weights.iter().map(|w| dot(&u, w).abs()).sum::<f64>();
            (u, reach)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; n];
    let mut inside = 0usize;
    for _ in 0..samples {
        for j in 0..n {
            p[j] = centre[j] + half[j] * rng.gen_range(-1.0..1.0);
        }
        let d: Vec<f64> = p.iter().zip(&centre).map(|(a, b)| a - b).collect();
        if facets.iter().all(|(u, reach)| dot(u, &d).abs() <= *reach) {
            inside += 1;
        }
    }
    let box_volume: f64 = half.iter().map(|e| 2.0 * e).product();
    Ok(box_volume * inside as f64 / samples.max(1) as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionDiagnostics {
    pub rank: usize,
    /// Smallest `|det|` over `n`-subsets of rows (`0` if `h < n`).
    pub min_abs_det: f64,
    /// Row pairs with `|cos| > 1 − 1e−6`.
    pub near_parallel: Vec<(usize, usize)>,
    pub volume: f64,
    pub general_position: bool,
    pub degenerate: bool,
    /// `2ⁿ` when the volume is positive and `h ≥ n`.
    pub capacity_lower_bound: Option<u64>,
}

pub fn general_position_check(
    weights: &[Vec<f64>],
    offsets: &[f64],
) -> Result<PositionDiagnostics> {
    let arr = Arrangement::new(weights.to_vec(), offsets.to_vec())?;
    let (h, n) = (arr.hidden(), arr.inputs());
    let zono = zonotope_volume(weights)?;
    let w = exact::rational_matrix(weights)?;
    let min_abs_det = exact::subsets(h, n)
        .into_iter()
        .map(|idx| {
            let rows = idx.iter().map(|&i| w[i].clone()).collect();
            exact::abs(&exact::det(rows))
                .to_f64()
                .unwrap_or(f64::INFINITY)
        })
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
        .unwrap_or(0.0);
    let mut near_parallel = Vec::new();
    for p in exact::subsets(h, 2) {
        let (a, b) = (&weights[p[0]], &weights[p[1]]);
        let na = dot(a, a).sqrt();
        let nb = dot(b, b).sqrt();
        if na > 0.0 && nb > 0.0 && (dot(a, b) / (na * nb)).abs() > 1.0 - 1e-6 {
            near_parallel.push((p[0], p[1]));
        }
    }
    let general_position = is_general_position(&arr)?;
    Ok(PositionDiagnostics {
        rank: zono.rank,
        min_abs_det,
        near_parallel,
        volume: zono.volume,
        general_position,
        degenerate: zono.deficient,
        capacity_lower_bound: (zono.volume > 0.0 && h >= n).then(|| 1u64 << n),
    })
}

/// How many sample points of a batch fall in each spike pattern; used to
/// tie the tropical dynamics back to the arrangement.
pub fn pattern_histogram(arr: &Arrangement, points: &[Vec<f64>]) -> HashMap<u64, usize> {
    let mut out = HashMap::new();
    for p in points {
        *out.entry(arr.sign_pattern(p)).or_insert(0) += 1;
    }
    out
}
