//! Intra-graph and inter-graph propagation on a tape.

use std::sync::Arc;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Identity => Ok(x),
        }
    }
}

/// Layer-0 features: one `n x n` identity per graph.
///
/// Models never materialize these; the first layer multiplies the
/// adjacency directly into the weights.
pub fn initial_features(n: usize, r: usize) -> Vec<DenseMatrix> {
    vec![DenseMatrix::identity(n); r]
}

/// `act(Â · x · w)` for one graph. The cheaper association is chosen from
/// the shapes; both are the same product.
pub fn graph_conv(
    tape: &mut Tape,
    adjacency: &Arc<SparseMatrix>,
    x: Var,
    w: Var,
) -> Result<Var> {
    let d_in = tape.value(w)?.rows();
    let d_out = tape.value(w)?.cols();
    if d_out < d_in {
        let xw = tape.matmul(x, w)?;
        tape.spmm(adjacency.clone(), xw)
    } else {
        let ax = tape.spmm(adjacency.clone(), x)?;
        tape.matmul(ax, w)
    }
}

/// Intra-graph propagation: slice `i` becomes `act(Â_i · H_i · W_i)`.
pub fn intra_propagate(
    tape: &mut Tape,
    adjacency: &[Arc<SparseMatrix>],
    features: &[Var],
    weights: &[Var],
    activation: Activation,
) -> Result<Vec<Var>> {
    if adjacency.len() != features.len() || adjacency.len() != weights.len() {
        return Err(Error::shape(format!(
            "{} graphs, {} feature slices, {} weights",
            adjacency.len(),
            features.len(),
            weights.len()
        )));
    }
    adjacency
        .iter()
        .zip(features)
        .zip(weights)
        .map(|((a, &h), &w)| {
            let z = graph_conv(tape, a, h, w)?;
            activation.apply(tape, z)
        })
        .collect()
}

/// First-layer intra propagation on identity features: `act(Â_i · W_i)`.
pub fn intra_propagate_identity(
    tape: &mut Tape,
    adjacency: &[Arc<SparseMatrix>],
    weights: &[Var],
    activation: Activation,
) -> Result<Vec<Var>> {
    if adjacency.len() != weights.len() {
        return Err(Error::shape(format!(
            "{} graphs with {} weights",
            adjacency.len(),
            weights.len()
        )));
    }
    adjacency
        .iter()
        .zip(weights)
        .map(|(a, &w)| {
            let z = tape.spmm(a.clone(), w)?;
            activation.apply(tape, z)
        })
        .collect()
}

/// Inter-graph propagation over the virtual graphs: slice `i` at every
/// node becomes `act((sum_{k != i} H_k) · W_inter)`. The mixing matrix is
/// all-ones with a zero diagonal and is never normalized.
pub fn inter_propagate(
    tape: &mut Tape,
    slices: &[Var],
    w_inter: Var,
    activation: Activation,
) -> Result<Vec<Var>> {
    let r = slices.len();
    if r < 2 {
        return Ok(slices.to_vec());
    }
    let shape = tape.value(slices[0])?.shape();
    for &s in slices {
        if tape.value(s)?.shape() != shape {
            return Err(Error::shape("feature slices differ in shape"));
        }
    }
    (0..r)
        .map(|i| {
            let mut others = slices
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, &v)| v);
            let first = others.next().expect("r >= 2");
            let sum = others.try_fold(first, |acc, v| tape.add(acc, v))?;
            let mixed = tape.matmul(sum, w_inter)?;
            activation.apply(tape, mixed)
        })
        .collect()
}
