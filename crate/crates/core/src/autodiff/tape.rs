use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::merge::MergePattern;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, SparseMatrix};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(0);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

/// Multiplicative dropout mask. `Rows` scales whole rows, which is what
/// dropout on one-hot node features reduces to.
#[derive(Clone, Debug)]
pub enum DropoutMask {
    Elementwise(DenseMatrix),
    Rows(Vec<f64>),
}

/// Deliberate backward bugs for negative-control tests of the gradient
/// checker.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// ReLU passes the upstream gradient through ungated.
    ReluUngated,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Spmm(Arc<SparseMatrix>, Var),
    MatMul(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Dropout(Var, DropoutMask),
    MeanStack(Vec<Var>),
    SoftmaxCrossEntropy {
        logits: Var,
        rows: Vec<usize>,
        labels: Vec<usize>,
        probs: DenseMatrix,
    },
    SquaredNorm(Var),
    MergedSpmm {
        pattern: Arc<MergePattern>,
        attention: Vec<Var>,
        x: Var,
        normalized: SparseMatrix,
        degrees: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: DenseMatrix,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    fault: Option<Fault>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&DenseMatrix> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros of `shape` when nothing flowed into it.
    pub fn get_or_zeros(&self, var: Var, shape: (usize, usize)) -> DenseMatrix {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| DenseMatrix::zeros(shape.0, shape.1))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            fault: None,
        }
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: Fault) {
        self.fault = Some(fault);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: DenseMatrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn node(&self, var: Var) -> Result<&Node> {
        if var.tape != self.id {
            return Err(Error::Tape(format!(
                "variable {} was recorded on another tape",
                var.index
            )));
        }
        self.nodes
            .get(var.index)
            .ok_or_else(|| Error::Tape(format!("unrecorded variable {}", var.index)))
    }

    pub fn value(&self, var: Var) -> Result<&DenseMatrix> {
        Ok(&self.node(var)?.value)
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.index].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: DenseMatrix) -> Var {
        self.push(Op::Leaf, value, true)
    }

    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn spmm(&mut self, a: Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let value = a.spmm(&self.node(x)?.value)?;
        let rg = self.needs(x);
        Ok(self.push(Op::Spmm(a, x), value, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.node(a)?.value.matmul(&self.node(b)?.value)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.node(a)?.value.add(&self.node(b)?.value)?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let value = self.node(x)?.value.scale(c);
        let rg = self.needs(x);
        Ok(self.push(Op::Scale(x, c), value, rg))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = linalg::relu(&self.node(x)?.value);
        let rg = self.needs(x);
        Ok(self.push(Op::Relu(x), value, rg))
    }

    pub fn dropout(&mut self, x: Var, mask: DropoutMask) -> Result<Var> {
        let input = &self.node(x)?.value;
        let value = match &mask {
            DropoutMask::Elementwise(m) => input.hadamard(m)?,
            DropoutMask::Rows(f) => scale_rows(input, f)?,
        };
        let rg = self.needs(x);
        Ok(self.push(Op::Dropout(x, mask), value, rg))
    }

    pub fn mean_stack(&mut self, xs: &[Var]) -> Result<Var> {
        let values: Vec<DenseMatrix> = xs
            .iter()
            .map(|&x| self.node(x).map(|n| n.value.clone()))
            .collect::<Result<_>>()?;
        let value = linalg::mean_over_first_axis(&values)?;
        let rg = xs.iter().any(|&x| self.needs(x));
        Ok(self.push(Op::MeanStack(xs.to_vec()), value, rg))
    }

    /// Mean softmax cross-entropy over `rows`, as a 1x1 value.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        rows: &[usize],
        labels: &[usize],
    ) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("cross-entropy over an empty mask".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} rows with {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let z = &self.node(logits)?.value;
        let mut probs = DenseMatrix::zeros(rows.len(), z.cols());
        let mut total = 0.0;
        for (k, (&r, &y)) in rows.iter().zip(labels).enumerate() {
            if r >= z.rows() || y >= z.cols() {
                return Err(Error::shape(format!(
                    "row {r} / label {y} outside logits {:?}",
                    z.shape()
                )));
            }
            let row = z.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            total += log_sum - row[y];
            let p = probs.row_mut(k);
            for (dst, &v) in p.iter_mut().zip(row) {
                *dst = (v - log_sum).exp();
            }
        }
        let value = DenseMatrix::from_vec(1, 1, vec![total / rows.len() as f64])?;
        let rg = self.needs(logits);
        Ok(self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                rows: rows.to_vec(),
                labels: labels.to_vec(),
                probs,
            },
            value,
            rg,
        ))
    }

    /// `sum(x^2)` as a 1x1 value.
    pub fn squared_norm(&mut self, x: Var) -> Result<Var> {
        let v = self.node(x)?.value.squared_norm();
        let rg = self.needs(x);
        Ok(self.push(Op::SquaredNorm(x), DenseMatrix::from_vec(1, 1, vec![v])?, rg))
    }

    /// `normalize(sum_i attention_i ⊙ A_i) @ x`; see [`MergePattern`].
    pub fn merged_spmm(
        &mut self,
        pattern: Arc<MergePattern>,
        attention: &[Var],
        x: Var,
    ) -> Result<Var> {
        let weights: Vec<&DenseMatrix> = attention
            .iter()
            .map(|&a| self.node(a).map(|n| &n.value))
            .collect::<Result<_>>()?;
        let (normalized, degrees) = pattern.normalized(&weights)?;
        let value = normalized.spmm(&self.node(x)?.value)?;
        let rg = self.needs(x) || attention.iter().any(|&a| self.needs(a));
        Ok(self.push(
            Op::MergedSpmm {
                pattern,
                attention: attention.to_vec(),
                x,
                normalized,
                degrees,
            },
            value,
            rg,
        ))
    }

    /// Reverse pass from a 1x1 `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_node = self.node(loss)?;
        if loss_node.value.shape() != (1, 1) {
            return Err(Error::Tape(format!(
                "loss must be scalar, got {:?}",
                loss_node.value.shape()
            )));
        }
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; loss.index + 1];
        grads[loss.index] = Some(DenseMatrix::filled(1, 1, 1.0));

        for idx in (0..=loss.index).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Spmm(a, x) => {
                    if self.needs(*x) {
                        let gx = a.transpose().spmm(&g)?;
                        accumulate(&mut grads, *x, gx)?;
                    }
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.index].value, &self.nodes[b.index].value);
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, g.matmul_t(bv)?)?;
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, av.t_matmul(&g)?)?;
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, g.clone())?;
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, g)?;
                    }
                }
                Op::Scale(x, c) => accumulate(&mut grads, *x, g.scale(*c))?,
                Op::Relu(x) => {
                    let gx = match self.fault {
                        Some(Fault::ReluUngated) => g,
                        None => {
                            let input = &self.nodes[x.index].value;
                            let mut gx = g;
                            for (d, &v) in gx.data_mut().iter_mut().zip(input.data()) {
                                if v <= 0.0 {
                                    *d = 0.0;
                                }
                            }
                            gx
                        }
                    };
                    accumulate(&mut grads, *x, gx)?;
                }
                Op::Dropout(x, mask) => {
                    let gx = match mask {
                        DropoutMask::Elementwise(m) => g.hadamard(m)?,
                        DropoutMask::Rows(f) => scale_rows(&g, f)?,
                    };
                    accumulate(&mut grads, *x, gx)?;
                }
                Op::MeanStack(xs) => {
                    let share = g.scale(1.0 / xs.len() as f64);
                    for &x in xs {
                        if self.needs(x) {
                            accumulate(&mut grads, x, share.clone())?;
                        }
                    }
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    rows,
                    labels,
                    probs,
                } => {
                    let upstream = g.get(0, 0) / rows.len() as f64;
                    let shape = self.nodes[logits.index].value.shape();
                    let mut gz = DenseMatrix::zeros(shape.0, shape.1);
                    for (k, (&r, &y)) in rows.iter().zip(labels).enumerate() {
                        let out = gz.row_mut(r);
                        for (o, &p) in out.iter_mut().zip(probs.row(k)) {
                            *o += p * upstream;
                        }
                        out[y] -= upstream;
                    }
                    accumulate(&mut grads, *logits, gz)?;
                }
                Op::SquaredNorm(x) => {
                    let gx = self.nodes[x.index].value.scale(2.0 * g.get(0, 0));
                    accumulate(&mut grads, *x, gx)?;
                }
                Op::MergedSpmm {
                    pattern,
                    attention,
                    x,
                    normalized,
                    degrees,
                } => {
                    let xv = &self.nodes[x.index].value;
                    if self.needs(*x) {
                        accumulate(&mut grads, *x, normalized.transpose().spmm(&g)?)?;
                    }
                    if attention.iter().any(|&a| self.needs(a)) {
                        let weight_grads = pattern.backward(normalized, degrees, xv, &g)?;
                        for (&a, ga) in attention.iter().zip(weight_grads) {
                            if self.needs(a) {
                                accumulate(&mut grads, a, ga)?;
                            }
                        }
                    }
                }
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

fn accumulate(grads: &mut [Option<DenseMatrix>], var: Var, g: DenseMatrix) -> Result<()> {
    match &mut grads[var.index] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

fn scale_rows(x: &DenseMatrix, factors: &[f64]) -> Result<DenseMatrix> {
    if factors.len() != x.rows() {
        return Err(Error::shape(format!(
            "{} row factors for {} rows",
            factors.len(),
            x.rows()
        )));
    }
    let mut out = x.clone();
    for (i, &f) in factors.iter().enumerate() {
        for v in out.row_mut(i) {
            *v *= f;
        }
    }
    Ok(out)
}
