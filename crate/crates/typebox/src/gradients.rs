//! Scalar reverse-mode differentiation on an index-based tape.
//!
//! Every model forward pass (training and inference alike) is expressed as
//! tape primitives, so there is exactly one numerical code path for the loss.
//! A tape is single-owner and single-threaded; distinct tapes over distinct
//! examples may run on distinct threads.

use crate::error::{Error, Result};
use crate::geometry::{logsumexp2, sigmoid, softplus1};
use std::collections::HashMap;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

#[derive(Debug, Clone, Copy)]
enum Op {
    Const,
    /// Leaf reading a flat parameter-store slot.
    Param(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Exp(u32),
    Ln(u32),
    Sigmoid(u32),
    Relu(u32),
    /// ln(1 + e^x); the softplus with unit temperature.
    Softplus1(u32),
    /// Fused two-argument logsumexp with max subtraction.
    LogSumExp2(u32, u32),
    /// ln(ln(1 + e^x)), stable far into the negative tail where the inner
    /// softplus underflows.
    LogSoftplus1(u32),
    MulConst(u32, f64),
    /// The added constant is folded into the forward value and has no
    /// gradient of its own, so only the operand index is kept.
    AddConst(u32),
    /// Clamp with zero gradient outside the open interval (subgradient
    /// convention at the boundary).
    Clamp(u32, f64, f64),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    value: f64,
}

/// Append-only record of primitive operations in topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    first_non_finite: Option<usize>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape { nodes: Vec::with_capacity(n), first_non_finite: None }
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.first_non_finite = None;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.nodes[v.0 as usize].value
    }

    fn push(&mut self, op: Op, value: f64) -> Var {
        if !value.is_finite() && self.first_non_finite.is_none() {
            self.first_non_finite = Some(self.nodes.len());
        }
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node { op, value });
        Var(idx)
    }

    pub fn constant(&mut self, c: f64) -> Var {
        self.push(Op::Const, c)
    }

    /// Leaf node bound to flat parameter slot `flat` of the store.
    pub fn param(&mut self, store: &ParamStore, flat: usize) -> Var {
        self.push(Op::Param(flat as u32), store.data()[flat])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add(a.0, b.0), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(Op::Sub(a.0, b.0), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(Op::Mul(a.0, b.0), v)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) / self.value(b);
        self.push(Op::Div(a.0, b.0), v)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push(Op::Neg(a.0), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.push(Op::Exp(a.0), v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).ln();
        self.push(Op::Ln(a.0), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = sigmoid(self.value(a));
        self.push(Op::Sigmoid(a.0), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).max(0.0);
        self.push(Op::Relu(a.0), v)
    }

    pub fn softplus1(&mut self, a: Var) -> Var {
        let v = softplus1(self.value(a));
        self.push(Op::Softplus1(a.0), v)
    }

    pub fn logsumexp2(&mut self, a: Var, b: Var) -> Var {
        let v = logsumexp2(self.value(a), self.value(b));
        self.push(Op::LogSumExp2(a.0, b.0), v)
    }

    pub fn log_softplus1(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = if x < -40.0 { x } else { softplus1(x).ln() };
        self.push(Op::LogSoftplus1(a.0), v)
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(Op::MulConst(a.0, c), v)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(Op::AddConst(a.0), v)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).clamp(lo, hi);
        self.push(Op::Clamp(a.0, lo, hi), v)
    }

    /// Sum of a slice of variables, accumulated left to right.
    pub fn sum(&mut self, vars: &[Var]) -> Var {
        match vars {
            [] => self.constant(0.0),
            [first, rest @ ..] => {
                let mut acc = *first;
                for v in rest {
                    acc = self.add(acc, *v);
                }
                acc
            }
        }
    }

    /// Error if any node computed a non-finite value during the forward pass.
    pub fn assert_finite(&self) -> Result<()> {
        if let Some(idx) = self.first_non_finite {
            let node = self.nodes[idx];
            return Err(Error::Numerical(format!(
                "non-finite intermediate at node {idx} (op {}, value {})",
                Self::op_name(node.op),
                node.value
            )));
        }
        Ok(())
    }

    fn op_name(op: Op) -> &'static str {
        match op {
            Op::Const => "const",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(_) => "neg",
            Op::Exp(_) => "exp",
            Op::Ln(_) => "ln",
            Op::Sigmoid(_) => "sigmoid",
            Op::Relu(_) => "relu",
            Op::Softplus1(_) => "softplus1",
            Op::LogSumExp2(..) => "logsumexp2",
            Op::LogSoftplus1(_) => "log_softplus1",
            Op::MulConst(..) => "mul_const",
            Op::AddConst(_) => "add_const",
            Op::Clamp(..) => "clamp",
        }
    }

    /// Reverse pass from `loss` with initial adjoint `seed`, scattering
    /// parameter adjoints into `grads` (indexed by flat parameter slot).
    /// Returns the loss value.
    pub fn backward(&self, loss: Var, seed: f64, grads: &mut [f64]) -> Result<f64> {
        self.assert_finite()?;
        let mut adjoints = vec![0.0f64; loss.0 as usize + 1];
        adjoints[loss.0 as usize] = seed;
        for i in (0..=loss.0 as usize).rev() {
            let w = adjoints[i];
            if w == 0.0 {
                continue;
            }
            let node = self.nodes[i];
            match node.op {
                Op::Const => {}
                Op::Param(flat) => grads[flat as usize] += w,
                Op::Add(a, b) => {
                    adjoints[a as usize] += w;
                    adjoints[b as usize] += w;
                }
                Op::Sub(a, b) => {
                    adjoints[a as usize] += w;
                    adjoints[b as usize] -= w;
                }
                Op::Mul(a, b) => {
                    adjoints[a as usize] += w * self.nodes[b as usize].value;
                    adjoints[b as usize] += w * self.nodes[a as usize].value;
                }
                Op::Div(a, b) => {
                    let vb = self.nodes[b as usize].value;
                    adjoints[a as usize] += w / vb;
                    adjoints[b as usize] -= w * node.value / vb;
                }
                Op::Neg(a) => adjoints[a as usize] -= w,
                Op::Exp(a) => adjoints[a as usize] += w * node.value,
                Op::Ln(a) => adjoints[a as usize] += w / self.nodes[a as usize].value,
                Op::Sigmoid(a) => {
                    adjoints[a as usize] += w * node.value * (1.0 - node.value);
                }
                Op::Relu(a) => {
                    if self.nodes[a as usize].value > 0.0 {
                        adjoints[a as usize] += w;
                    }
                }
                Op::Softplus1(a) => {
                    adjoints[a as usize] += w * sigmoid(self.nodes[a as usize].value);
                }
                Op::LogSumExp2(a, b) => {
                    let va = self.nodes[a as usize].value;
                    let vb = self.nodes[b as usize].value;
                    adjoints[a as usize] += w * sigmoid(va - vb);
                    adjoints[b as usize] += w * sigmoid(vb - va);
                }
                Op::LogSoftplus1(a) => {
                    let va = self.nodes[a as usize].value;
                    let d = if va < -40.0 { 1.0 } else { sigmoid(va) / softplus1(va) };
                    adjoints[a as usize] += w * d;
                }
                Op::MulConst(a, c) => adjoints[a as usize] += w * c,
                Op::AddConst(a) => adjoints[a as usize] += w,
                Op::Clamp(a, lo, hi) => {
                    let va = self.nodes[a as usize].value;
                    if va > lo && va < hi {
                        adjoints[a as usize] += w;
                    }
                }
            }
        }
        Ok(self.value(loss))
    }
}

/// Learning-rate group of a parameter array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LrGroup {
    Encoder,
    Other,
}

#[derive(Debug, Clone)]
pub struct ParamArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub group: LrGroup,
}

/// Named flat parameter arrays with a single contiguous backing buffer.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    arrays: Vec<ParamArray>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, shape: &[usize], group: LrGroup) -> usize {
        assert!(
            !self.index.contains_key(name),
            "parameter array `{name}` registered twice"
        );
        let len: usize = shape.iter().product();
        let offset = self.data.len();
        self.arrays.push(ParamArray {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
            group,
        });
        self.index.insert(name.to_string(), self.arrays.len() - 1);
        self.data.extend(std::iter::repeat(0.0).take(len));
        self.arrays.len() - 1
    }

    pub fn arrays(&self) -> &[ParamArray] {
        &self.arrays
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn offset_of(&self, name: &str) -> usize {
        self.arrays[self.index[name]].offset
    }

    fn entry(&self, name: &str) -> &ParamArray {
        &self.arrays[self.index[name]]
    }

    pub fn slice(&self, name: &str) -> &[f64] {
        let e = self.entry(name);
        let len: usize = e.shape.iter().product();
        &self.data[e.offset..e.offset + len]
    }

    pub fn slice_mut(&mut self, name: &str) -> &mut [f64] {
        let e = self.entry(name).clone();
        let len: usize = e.shape.iter().product();
        &mut self.data[e.offset..e.offset + len]
    }

    /// Learning-rate group of the array owning flat slot `flat`.
    pub fn group_of_flat(&self, flat: usize) -> LrGroup {
        // arrays are registered in offset order
        let mut group = LrGroup::Other;
        for a in &self.arrays {
            if a.offset > flat {
                break;
            }
            group = a.group;
        }
        group
    }
}

/// Central-difference gradient check. Compares `analytic` against numeric
/// derivatives of `loss_fn` at the current parameter values; returns the max
/// relative error with denominator `max(|a|, |b|, 1e-8)`. When `indices` is
/// given only those flat slots are probed.
pub fn finite_difference_check<F>(
    mut loss_fn: F,
    params: &mut ParamStore,
    analytic: &[f64],
    h: f64,
    indices: Option<&[usize]>,
) -> f64
where
    F: FnMut(&ParamStore) -> f64,
{
    debug_assert!((1e-8..=1e-4).contains(&h), "step size out of range: {h}");
    let all: Vec<usize>;
    let probe: &[usize] = match indices {
        Some(ix) => ix,
        None => {
            all = (0..params.len()).collect();
            &all
        }
    };
    let mut max_err = 0.0f64;
    for &i in probe {
        let orig = params.data()[i];
        params.data_mut()[i] = orig + h;
        let up = loss_fn(params);
        params.data_mut()[i] = orig - h;
        let down = loss_fn(params);
        params.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        let err = (analytic[i] - numeric).abs() / denom;
        if err > max_err {
            max_err = err;
        }
    }
    max_err
}
