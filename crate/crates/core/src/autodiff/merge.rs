//! Edge-wise attention merge of several adjacency matrices.
//!
//! `M = sum_i w_i ⊙ A_i` with one weight per undirected edge per graph, so
//! `M` stays symmetric. The operator applied to features is
//! `D^-1/2 (M + I) D^-1/2` with `D = rowsum(M + I)`, differentiated with
//! respect to both the features and the weights.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

#[derive(Debug)]
pub struct MergePattern {
    /// Union pattern of all graphs plus the diagonal.
    structure: SparseMatrix,
    /// Undirected edge id of every stored entry, `None` on the diagonal.
    entry_edge: Vec<Option<usize>>,
    n_edges: usize,
    /// Per graph, per attention slot: `(edge id, adjacency weight)`.
    slots: Vec<Vec<(usize, f64)>>,
}

impl MergePattern {
    /// `graphs` are raw symmetric adjacencies without self-loops. Slot `k`
    /// of graph `i` is its `k`-th upper-triangular entry in row-major order.
    pub fn new(graphs: &[Arc<SparseMatrix>]) -> Result<Self> {
        let n = graphs
            .first()
            .ok_or_else(|| Error::InvalidArgument("merge of zero graphs".into()))?
            .rows();
        let mut ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for g in graphs {
            if g.rows() != n || g.cols() != n {
                return Err(Error::shape("merged graphs must share one node set"));
            }
            for (u, v, _) in g.iter().filter(|&(u, v, _)| u < v) {
                ids.entry((u, v)).or_insert(0);
            }
        }
        for (k, id) in ids.values_mut().enumerate() {
            *id = k;
        }
        let slots = graphs
            .iter()
            .map(|g| {
                g.iter()
                    .filter(|&(u, v, _)| u < v)
                    .map(|(u, v, a)| (ids[&(u, v)], a))
                    .collect()
            })
            .collect();
        let triplets = ids
            .keys()
            .flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)])
            .chain((0..n).map(|i| (i, i, 1.0)));
        let structure = SparseMatrix::from_triplets(n, n, triplets)?;
        let entry_edge = structure
            .iter()
            .map(|(r, c, _)| (r != c).then(|| ids[&(r.min(c), r.max(c))]))
            .collect();
        Ok(Self {
            structure,
            entry_edge,
            n_edges: ids.len(),
            slots,
        })
    }

    pub fn num_graphs(&self) -> usize {
        self.slots.len()
    }

    /// Attention slots of graph `i`.
    pub fn attention_len(&self, i: usize) -> usize {
        self.slots[i].len()
    }

    pub fn num_nodes(&self) -> usize {
        self.structure.rows()
    }

    fn check(&self, weights: &[&DenseMatrix]) -> Result<()> {
        if weights.len() != self.slots.len() {
            return Err(Error::shape(format!(
                "{} attention vectors for {} graphs",
                weights.len(),
                self.slots.len()
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            if w.shape() != (self.slots[i].len(), 1) {
                return Err(Error::shape(format!(
                    "attention for graph {i} is {:?}, expected ({}, 1)",
                    w.shape(),
                    self.slots[i].len()
                )));
            }
        }
        Ok(())
    }

    /// Merged weight of every undirected edge.
    pub fn edge_weights(&self, weights: &[&DenseMatrix]) -> Result<Vec<f64>> {
        self.check(weights)?;
        let mut merged = vec![0.0; self.n_edges];
        for (slots, w) in self.slots.iter().zip(weights) {
            for (&(e, a), &wk) in slots.iter().zip(w.data()) {
                merged[e] += wk * a;
            }
        }
        Ok(merged)
    }

    /// Merged adjacency without self-loops; zero-weight edges are dropped.
    pub fn merged_adjacency(&self, weights: &[&DenseMatrix]) -> Result<SparseMatrix> {
        let merged = self.edge_weights(weights)?;
        let n = self.num_nodes();
        SparseMatrix::from_triplets(
            n,
            n,
            self.structure
                .iter()
                .zip(&self.entry_edge)
                .filter_map(|((r, c, _), e)| e.map(|e| (r, c, merged[e]))),
        )
    }

    /// Normalized merged operator on the union pattern, and the degrees of
    /// `M + I`. Entries whose merged weight is zero stay in the pattern.
    pub fn normalized(&self, weights: &[&DenseMatrix]) -> Result<(SparseMatrix, Vec<f64>)> {
        let merged = self.edge_weights(weights)?;
        let raw: Vec<f64> = self
            .entry_edge
            .iter()
            .map(|e| e.map_or(1.0, |e| merged[e]))
            .collect();
        let n = self.num_nodes();
        let indptr = self.structure.indptr();
        let mut degrees = Vec::with_capacity(n);
        for u in 0..n {
            let d: f64 = raw[indptr[u]..indptr[u + 1]].iter().sum();
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::NonPositiveDegree {
                    graph: "merged".into(),
                    node: u,
                    degree: d,
                });
            }
            degrees.push(d);
        }
        let values = self
            .structure
            .iter()
            .zip(&raw)
            .map(|((r, c, _), &v)| v / (degrees[r] * degrees[c]).sqrt())
            .collect();
        Ok((self.structure.with_values(values)?, degrees))
    }

    /// Gradients of every attention vector given the upstream gradient `g`
    /// of `normalized @ x`.
    pub fn backward(
        &self,
        normalized: &SparseMatrix,
        degrees: &[f64],
        x: &DenseMatrix,
        g: &DenseMatrix,
    ) -> Result<Vec<DenseMatrix>> {
        let n = self.num_nodes();
        // B(u, v) = dL/dÂ(u, v) = <g_u, x_v>
        let b: Vec<f64> = normalized
            .iter()
            .map(|(u, v, _)| g.row(u).iter().zip(x.row(v)).map(|(p, q)| p * q).sum())
            .collect();
        let mut row_acc = vec![0.0; n];
        let mut col_acc = vec![0.0; n];
        for ((u, v, a_hat), &bv) in normalized.iter().zip(&b) {
            row_acc[u] += bv * a_hat;
            col_acc[v] += bv * a_hat;
        }
        let d_degree: Vec<f64> = (0..n)
            .map(|u| -(row_acc[u] + col_acc[u]) / (2.0 * degrees[u]))
            .collect();
        let mut d_edge = vec![0.0; self.n_edges];
        for (((u, v, _), &bv), e) in normalized.iter().zip(&b).zip(&self.entry_edge) {
            if let Some(e) = e {
                d_edge[*e] += bv / (degrees[u] * degrees[v]).sqrt() + d_degree[u];
            }
        }
        self.slots
            .iter()
            .map(|slots| {
                let data = slots.iter().map(|&(e, a)| d_edge[e] * a).collect();
                DenseMatrix::from_vec(slots.len(), 1, data)
            })
            .collect()
    }
}
