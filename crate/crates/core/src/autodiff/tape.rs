use std::cell::{Ref, RefCell};

use super::numeric::{self, sigmoid};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Backward rule attached to a hard Heaviside spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surrogate {
    /// No gradient flows through the spike (hard inference).
    Zero,
    /// `beta * sigma(beta x) * (1 - sigma(beta x))`.
    Sigmoid { beta: f64 },
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddConst(usize),
    AddScalar(usize, usize),
    MulScalar(usize, usize),
    DivScalar(usize, usize),
    Exp(usize),
    Ln(usize),
    Sigmoid(usize),
    OneMinus(usize),
    MatMul(usize, usize),
    Linear { x: usize, w: usize, b: usize },
    Transpose(usize),
    Reshape(usize),
    RollLast { x: usize, shift: isize },
    Sum(usize),
    Mean(usize),
    Lse { args: Vec<usize>, eps: usize },
    Heaviside { x: usize, surrogate: Surrogate },
    DSpike { v: usize, k: usize, theta: f64 },
    CrossEntropy { logits: usize, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run computation graph.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and [`Tape::backward`] is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}", self.id)
    }
}

/// Result of a backward sweep, indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the root with respect to `var`, if any flowed into it.
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    /// Like [`Gradients::get`] but zero-filled when nothing flowed.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.value().shape()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A trainable leaf.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn needs(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn value_of(&self, id: usize) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    /// Smooth maximum `eps * ln sum_i exp(x_i / eps)` over the list of
    /// equally-shaped arguments, evaluated elementwise.
    pub fn lse<'t>(&'t self, args: &[Var<'t>], eps: Var<'t>) -> Result<Var<'t>> {
        let first = args
            .first()
            .ok_or_else(|| Error::Input("log-sum-exp needs at least one argument".into()))?;
        let eps_value = eps.value().item()?;
        numeric::check_eps(eps_value)?;
        let shape = first.value().shape().to_vec();
        let out = {
            let values: Vec<Ref<'_, Tensor>> = args.iter().map(|a| a.value()).collect();
            if let Some(bad) = values.iter().find(|v| v.shape() != shape.as_slice()) {
                return Err(Error::shape(
                    "lse",
                    format!("argument shape {:?} vs {:?}", bad.shape(), shape),
                ));
            }
            if values.iter().any(|v| v.data().iter().any(|x| x.is_nan())) {
                return Err(Error::Input("NaN in log-sum-exp argument".into()));
            }
            let n = first.value().len();
            let mut buf = vec![0.0; values.len()];
            let data = (0..n)
                .map(|j| {
                    for (slot, v) in buf.iter_mut().zip(&values) {
                        *slot = v.data()[j];
                    }
                    numeric::lse_unchecked(&buf, eps_value)
                })
                .collect();
            Tensor::new(shape, data)?
        };
        let mut ids: Vec<usize> = args.iter().map(|a| a.id).collect();
        ids.push(eps.id);
        let rg = self.needs(&ids);
        ids.pop();
        Ok(self.push(
            out,
            Op::Lse {
                args: ids,
                eps: eps.id,
            },
            rg,
        ))
    }

    /// Softmax cross-entropy of `logits` `[batch, classes]`, averaged over the batch.
    pub fn cross_entropy<'t>(&'t self, logits: Var<'t>, labels: &[usize]) -> Result<Var<'t>> {
        let value = {
            let l = logits.value();
            if l.ndim() != 2 || l.shape()[0] != labels.len() {
                return Err(Error::shape(
                    "cross_entropy",
                    format!("logits {:?} for {} labels", l.shape(), labels.len()),
                ));
            }
            let classes = l.shape()[1];
            if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
                return Err(Error::Input(format!(
                    "label {bad} out of range for {classes} classes"
                )));
            }
            let total: f64 = labels
                .iter()
                .enumerate()
                .map(|(b, &y)| {
                    let row = l.row(b);
                    numeric::lse_unchecked(row, 1.0) - row[y]
                })
                .sum();
            Tensor::scalar(total / labels.len().max(1) as f64)
        };
        let rg = self.needs(&[logits.id]);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits: logits.id,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes[root.id].value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward root must be scalar, shape is {:?}",
                nodes[root.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[root.id] = Some(Tensor::ones(nodes[root.id].value.shape()));

        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if node.requires_grad {
                propagate(&nodes, id, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(nodes: &[Node], grads: &mut [Option<Tensor>], id: usize, g: Tensor) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, mut f: impl FnMut(f64, f64) -> f64) -> Tensor {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data).expect("zip_map on equal shapes")
}

fn propagate(nodes: &[Node], id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let out = &nodes[id].value;
    let val = |i: usize| &nodes[i].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(nodes, grads, *a, g.clone());
            accumulate(nodes, grads, *b, g.clone());
        }
        Op::Sub(a, b) => {
            accumulate(nodes, grads, *a, g.clone());
            accumulate(nodes, grads, *b, g.map(|x| -x));
        }
        Op::Mul(a, b) => {
            accumulate(nodes, grads, *a, zip_map(g, val(*b), |g, y| g * y));
            accumulate(nodes, grads, *b, zip_map(g, val(*a), |g, x| g * x));
        }
        Op::Scale(a, c) => accumulate(nodes, grads, *a, g.map(|x| x * c)),
        Op::AddConst(a) => accumulate(nodes, grads, *a, g.clone()),
        Op::AddScalar(a, s) => {
            accumulate(nodes, grads, *a, g.clone());
            accumulate(nodes, grads, *s, Tensor::scalar(g.sum()));
        }
        Op::MulScalar(a, s) => {
            let c = val(*s).data()[0];
            accumulate(nodes, grads, *a, g.map(|x| x * c));
            let ds = g
                .data()
                .iter()
                .zip(val(*a).data())
                .map(|(g, x)| g * x)
                .sum();
            accumulate(nodes, grads, *s, Tensor::scalar(ds));
        }
        Op::DivScalar(a, s) => {
            let c = val(*s).data()[0];
            accumulate(nodes, grads, *a, g.map(|x| x / c));
            // d(x/c)/dc = -(x/c)/c
            let ds: f64 = g.data().iter().zip(out.data()).map(|(g, y)| g * y).sum();
            accumulate(nodes, grads, *s, Tensor::scalar(-ds / c));
        }
        Op::Exp(a) => accumulate(nodes, grads, *a, zip_map(g, out, |g, y| g * y)),
        Op::Ln(a) => accumulate(nodes, grads, *a, zip_map(g, val(*a), |g, x| g / x)),
        Op::Sigmoid(a) => accumulate(
            nodes,
            grads,
            *a,
            zip_map(g, val(*a), |g, x| g * numeric::sigmoid_slope(x)),
        ),
        Op::OneMinus(a) => accumulate(nodes, grads, *a, g.map(|x| -x)),
        Op::MatMul(a, b) => {
            let (av, bv) = (val(*a), val(*b));
            let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
            if nodes[*a].requires_grad {
                // dA = G B^T
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    for p in 0..k {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += g.data()[i * n + j] * bv.data()[p * n + j];
                        }
                        da[i * k + p] = acc;
                    }
                }
                accumulate(nodes, grads, *a, Tensor::new(vec![m, k], da).unwrap());
            }
            if nodes[*b].requires_grad {
                // dB = A^T G
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    for p in 0..k {
                        let a_ip = av.data()[i * k + p];
                        if a_ip == 0.0 {
                            continue;
                        }
                        let grow = &g.data()[i * n..(i + 1) * n];
                        for (d, gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *d += a_ip * gv;
                        }
                    }
                }
                accumulate(nodes, grads, *b, Tensor::new(vec![k, n], db).unwrap());
            }
        }
        Op::Linear { x, w, b } => {
            let (xv, wv) = (val(*x), val(*w));
            let (batch, inputs) = (xv.shape()[0], xv.shape()[1]);
            let outputs = wv.shape()[0];
            if nodes[*w].requires_grad {
                let mut dw = vec![0.0; outputs * inputs];
                for r in 0..batch {
                    let xrow = xv.row(r);
                    for o in 0..outputs {
                        let go = g.data()[r * outputs + o];
                        if go == 0.0 {
                            continue;
                        }
                        for (d, xi) in dw[o * inputs..(o + 1) * inputs].iter_mut().zip(xrow) {
                            *d += go * xi;
                        }
                    }
                }
                accumulate(
                    nodes,
                    grads,
                    *w,
                    Tensor::new(vec![outputs, inputs], dw).unwrap(),
                );
            }
            if nodes[*b].requires_grad {
                let mut db = vec![0.0; outputs];
                for r in 0..batch {
                    for (d, gv) in db.iter_mut().zip(&g.data()[r * outputs..(r + 1) * outputs]) {
                        *d += gv;
                    }
                }
                accumulate(nodes, grads, *b, Tensor::vector(db));
            }
            if nodes[*x].requires_grad {
                let mut dx = vec![0.0; batch * inputs];
                for r in 0..batch {
                    let drow = &mut dx[r * inputs..(r + 1) * inputs];
                    for o in 0..outputs {
                        let go = g.data()[r * outputs + o];
                        for (d, wv) in drow.iter_mut().zip(wv.row(o)) {
                            *d += go * wv;
                        }
                    }
                }
                accumulate(
                    nodes,
                    grads,
                    *x,
                    Tensor::new(vec![batch, inputs], dx).unwrap(),
                );
            }
        }
        Op::Transpose(a) => accumulate(nodes, grads, *a, transpose(g)),
        Op::Reshape(a) => accumulate(nodes, grads, *a, g.reshape(val(*a).shape()).unwrap()),
        Op::RollLast { x, shift } => accumulate(nodes, grads, *x, roll_last(g, -shift)),
        Op::Sum(a) => {
            let gv = g.data()[0];
            accumulate(nodes, grads, *a, Tensor::full(val(*a).shape(), gv))
        }
        Op::Mean(a) => {
            let n = val(*a).len().max(1) as f64;
            let gv = g.data()[0] / n;
            accumulate(nodes, grads, *a, Tensor::full(val(*a).shape(), gv))
        }
        Op::Lse { args, eps } => {
            let e = val(*eps).data()[0];
            let mut d_eps = 0.0;
            let mut weighted = vec![0.0; out.len()];
            for &a in args {
                let xa = val(a);
                let mut da = vec![0.0; out.len()];
                for j in 0..out.len() {
                    let p = ((xa.data()[j] - out.data()[j]) / e).exp();
                    da[j] = g.data()[j] * p;
                    weighted[j] += p * xa.data()[j];
                }
                accumulate(
                    nodes,
                    grads,
                    a,
                    Tensor::new(out.shape().to_vec(), da).unwrap(),
                );
            }
            if nodes[*eps].requires_grad {
                for j in 0..out.len() {
                    d_eps += g.data()[j] * (out.data()[j] - weighted[j]) / e;
                }
                accumulate(nodes, grads, *eps, Tensor::scalar(d_eps));
            }
        }
        Op::Heaviside { x, surrogate } => match surrogate {
            Surrogate::Zero => {}
            Surrogate::Sigmoid { beta } => {
                let d = zip_map(g, val(*x), |g, x| {
                    let s = sigmoid(beta * x);
                    g * beta * s * (1.0 - s)
                });
                accumulate(nodes, grads, *x, d);
            }
        },
        Op::DSpike { v, k, theta } => {
            let kv = val(*k).data()[0];
            let mut dk = 0.0;
            let dv = zip_map(g, val(*v), |g, v| {
                let (ds_dv, ds_dk) = dspike_partials(v, kv, *theta);
                dk += g * ds_dk;
                g * ds_dv
            });
            accumulate(nodes, grads, *v, dv);
            accumulate(nodes, grads, *k, Tensor::scalar(dk));
        }
        Op::CrossEntropy { logits, labels } => {
            let l = val(*logits);
            let classes = l.shape()[1];
            let scale = g.data()[0] / labels.len().max(1) as f64;
            let mut d = vec![0.0; l.len()];
            for (b, &y) in labels.iter().enumerate() {
                let row = l.row(b);
                let z = numeric::lse_unchecked(row, 1.0);
                for c in 0..classes {
                    let p = (row[c] - z).exp();
                    d[b * classes + c] = scale * (p - if c == y { 1.0 } else { 0.0 });
                }
            }
            accumulate(
                nodes,
                grads,
                *logits,
                Tensor::new(l.shape().to_vec(), d).unwrap(),
            );
        }
    }
}

/// Smooth DSpike function `(tanh(k(v/(2 theta) - 1/2)) + tanh(k/2)) / (2 tanh(k/2))`.
pub fn dspike_soft(v: f64, k: f64, theta: f64) -> f64 {
    let tk = (k / 2.0).tanh();
    (((v / (2.0 * theta) - 0.5) * k).tanh() + tk) / (2.0 * tk)
}

/// Partial derivatives of [`dspike_soft`] with respect to `v` and `k`.
pub fn dspike_partials(v: f64, k: f64, theta: f64) -> (f64, f64) {
    let centered = v / (2.0 * theta) - 0.5;
    let ta = (k * centered).tanh();
    let sech2_a = 1.0 - ta * ta;
    let tk = (k / 2.0).tanh();
    let sech2_k = 1.0 - tk * tk;
    let denom = 2.0 * tk;
    let ds_dv = k * sech2_a / (2.0 * theta) / denom;
    let num = ta + tk;
    let dnum_dk = sech2_a * centered + 0.5 * sech2_k;
    let ddenom_dk = sech2_k;
    let ds_dk = (dnum_dk * denom - num * ddenom_dk) / (denom * denom);
    (ds_dv, ds_dk)
}

fn transpose(t: &Tensor) -> Tensor {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    let mut data = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            data[j * r + i] = t.data()[i * c + j];
        }
    }
    Tensor::new(vec![c, r], data).unwrap()
}

/// `out[..., i] = t[..., (i - shift) mod w]` along the last axis.
fn roll_last(t: &Tensor, shift: isize) -> Tensor {
    let w = *t.shape().last().unwrap_or(&1);
    if w == 0 {
        return t.clone();
    }
    let s = shift.rem_euclid(w as isize) as usize;
    let mut data = vec![0.0; t.len()];
    for (src, dst) in t.data().chunks(w).zip(data.chunks_mut(w)) {
        for i in 0..w {
            dst[(i + s) % w] = src[i];
        }
    }
    Tensor::new(t.shape().to_vec(), data).unwrap()
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn item(&self) -> Result<f64> {
        self.value().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.needs(&[self.id])
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        let out = self.value().map(f);
        let rg = self.requires_grad();
        self.tape.push(out, op, rg)
    }

    fn binary(
        &self,
        other: Var<'t>,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'t>> {
        let out = {
            let (a, b) = (self.value(), other.value());
            if a.shape() != b.shape() {
                return Err(Error::shape(
                    name,
                    format!("{:?} vs {:?}", a.shape(), b.shape()),
                ));
            }
            zip_map(&a, &b, f)
        };
        let rg = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(out, op, rg))
    }

    fn with_scalar(
        &self,
        s: Var<'t>,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'t>> {
        let out = {
            let sv = s.value();
            if sv.len() != 1 {
                return Err(Error::shape(
                    name,
                    format!("expected a scalar operand, got {:?}", sv.shape()),
                ));
            }
            let c = sv.data()[0];
            self.value().map(|x| f(x, c))
        };
        let rg = self.tape.needs(&[self.id, s.id]);
        Ok(self.tape.push(out, op, rg))
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "add", Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "sub", Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "mul", Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, c), |x| x * c)
    }

    pub fn add_const(&self, c: f64) -> Var<'t> {
        self.unary(Op::AddConst(self.id), |x| x + c)
    }

    /// `self + s` with `s` a one-element tensor broadcast over `self`.
    pub fn add_scalar(&self, s: Var<'t>) -> Result<Var<'t>> {
        self.with_scalar(s, "add_scalar", Op::AddScalar(self.id, s.id), |x, c| x + c)
    }

    pub fn mul_scalar(&self, s: Var<'t>) -> Result<Var<'t>> {
        self.with_scalar(s, "mul_scalar", Op::MulScalar(self.id, s.id), |x, c| x * c)
    }

    pub fn div_scalar(&self, s: Var<'t>) -> Result<Var<'t>> {
        self.with_scalar(s, "div_scalar", Op::DivScalar(self.id, s.id), |x, c| x / c)
    }

    pub fn exp(&self) -> Var<'t> {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    pub fn ln(&self) -> Var<'t> {
        self.unary(Op::Ln(self.id), f64::ln)
    }

    pub fn sigmoid(&self) -> Var<'t> {
        self.unary(Op::Sigmoid(self.id), sigmoid)
    }

    pub fn one_minus(&self) -> Var<'t> {
        self.unary(Op::OneMinus(self.id), |x| 1.0 - x)
    }

    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (a, b) = (self.value(), other.value());
            if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
                return Err(Error::shape(
                    "matmul",
                    format!("{:?} x {:?}", a.shape(), b.shape()),
                ));
            }
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let mut data = vec![0.0; m * n];
            for i in 0..m {
                let orow = &mut data[i * n..(i + 1) * n];
                for p in 0..k {
                    let a_ip = a.data()[i * k + p];
                    if a_ip == 0.0 {
                        continue;
                    }
                    for (o, bv) in orow.iter_mut().zip(&b.data()[p * n..(p + 1) * n]) {
                        *o += a_ip * bv;
                    }
                }
            }
            Tensor::new(vec![m, n], data)?
        };
        let rg = self.tape.needs(&[self.id, other.id]);
        Ok(self.tape.push(out, Op::MatMul(self.id, other.id), rg))
    }

    /// Affine map `self · wᵀ + b` for `self: [batch, in]`, `w: [out, in]`, `b: [out]`.
    pub fn linear(&self, w: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let (x, wv, bv) = (self.value(), w.value(), b.value());
            if x.ndim() != 2
                || wv.ndim() != 2
                || x.shape()[1] != wv.shape()[1]
                || bv.shape() != [wv.shape()[0]]
            {
                return Err(Error::shape(
                    "linear",
                    format!("x {:?}, w {:?}, b {:?}", x.shape(), wv.shape(), bv.shape()),
                ));
            }
            let (batch, outputs) = (x.shape()[0], wv.shape()[0]);
            let mut data = Vec::with_capacity(batch * outputs);
            for r in 0..batch {
                let xrow = x.row(r);
                for o in 0..outputs {
                    let dot: f64 = xrow.iter().zip(wv.row(o)).map(|(a, b)| a * b).sum();
                    data.push(dot + bv.data()[o]);
                }
            }
            Tensor::new(vec![batch, outputs], data)?
        };
        let rg = self.tape.needs(&[self.id, w.id, b.id]);
        Ok(self.tape.push(
            out,
            Op::Linear {
                x: self.id,
                w: w.id,
                b: b.id,
            },
            rg,
        ))
    }

    pub fn transpose(&self) -> Result<Var<'t>> {
        let out = {
            let v = self.value();
            if v.ndim() != 2 {
                return Err(Error::shape("transpose", format!("{:?}", v.shape())));
            }
            transpose(&v)
        };
        let rg = self.requires_grad();
        Ok(self.tape.push(out, Op::Transpose(self.id), rg))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let out = self.value().reshape(shape)?;
        let rg = self.requires_grad();
        Ok(self.tape.push(out, Op::Reshape(self.id), rg))
    }

    /// Circular shift along the last axis: `out[.., i] = self[.., i - shift]`.
    pub fn roll_last(&self, shift: isize) -> Var<'t> {
        let out = roll_last(&self.value(), shift);
        let rg = self.requires_grad();
        self.tape.push(out, Op::RollLast { x: self.id, shift }, rg)
    }

    pub fn sum(&self) -> Var<'t> {
        let out = Tensor::scalar(self.value().sum());
        let rg = self.requires_grad();
        self.tape.push(out, Op::Sum(self.id), rg)
    }

    pub fn mean(&self) -> Var<'t> {
        let out = Tensor::scalar(self.value().mean());
        let rg = self.requires_grad();
        self.tape.push(out, Op::Mean(self.id), rg)
    }

    /// Hard spike `H(self)` whose backward pass uses `surrogate`.
    pub fn heaviside(&self, surrogate: Surrogate) -> Var<'t> {
        let rg = self.requires_grad() && surrogate != Surrogate::Zero;
        let out = self.value().map(numeric::heaviside);
        self.tape.push(
            out,
            Op::Heaviside {
                x: self.id,
                surrogate,
            },
            rg,
        )
    }

    /// Hard spike `H(v - theta)` differentiated through the DSpike tanh form
    /// with learnable sharpness `k`.
    pub fn dspike(&self, k: Var<'t>, theta: f64) -> Result<Var<'t>> {
        if k.value().len() != 1 {
            return Err(Error::shape("dspike", "sharpness must be a scalar"));
        }
        let out = self.value().map(|v| numeric::heaviside(v - theta));
        let rg = self.tape.needs(&[self.id, k.id]);
        Ok(self.tape.push(
            out,
            Op::DSpike {
                v: self.id,
                k: k.id,
                theta,
            },
            rg,
        ))
    }
}
