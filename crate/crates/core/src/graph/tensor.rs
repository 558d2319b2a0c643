use std::sync::Arc;

use super::edges::EdgeList;
use crate::corpus::NodeIndex;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub const GRAPH_NAMES: [&str; 3] = ["semantic", "syntactic", "sequential"];

/// A stack of graphs sharing one node set and differing only in edges.
#[derive(Clone, Debug, PartialEq)]
pub struct TextGraphTensor {
    node_index: NodeIndex,
    names: Vec<String>,
    graphs: Vec<Arc<SparseMatrix>>,
}

impl TextGraphTensor {
    /// Checks that every graph is square over the node set, symmetric and
    /// free of self-loops.
    pub fn new(
        node_index: NodeIndex,
        names: Vec<String>,
        graphs: Vec<SparseMatrix>,
    ) -> Result<Self> {
        if graphs.is_empty() || graphs.len() != names.len() {
            return Err(Error::InvalidArgument(format!(
                "{} graphs with {} names",
                graphs.len(),
                names.len()
            )));
        }
        let n = node_index.len();
        for (name, g) in names.iter().zip(&graphs) {
            if g.rows() != n || g.cols() != n {
                return Err(Error::shape(format!(
                    "graph `{name}` is {}x{} over {n} nodes",
                    g.rows(),
                    g.cols()
                )));
            }
            if let Some((r, _, _)) = g.iter().find(|&(r, c, _)| r == c) {
                return Err(Error::InvalidArgument(format!(
                    "graph `{name}` has a self-loop at node {r}"
                )));
            }
            if !g.is_symmetric(0.0) {
                return Err(Error::InvalidArgument(format!("graph `{name}` is not symmetric")));
            }
        }
        Ok(Self {
            node_index,
            names,
            graphs: graphs.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn node_index(&self) -> &NodeIndex {
        &self.node_index
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn graphs(&self) -> &[Arc<SparseMatrix>] {
        &self.graphs
    }

    pub fn graph(&self, name: &str) -> Option<&SparseMatrix> {
        self.position(name).map(|i| self.graphs[i].as_ref())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of graphs.
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.node_index.len()
    }

    /// Sub-tensor holding the named graphs in the given order.
    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<Self> {
        let mut out_names = Vec::new();
        let mut graphs = Vec::new();
        for name in names {
            let name = name.as_ref();
            let i = self
                .position(name)
                .ok_or_else(|| Error::InvalidArgument(format!("no graph named `{name}`")))?;
            out_names.push(self.names[i].clone());
            graphs.push(self.graphs[i].clone());
        }
        if graphs.is_empty() {
            return Err(Error::InvalidArgument("empty graph selection".into()));
        }
        Ok(Self {
            node_index: self.node_index.clone(),
            names: out_names,
            graphs,
        })
    }
}

/// Joins each word–word list with the shared doc–word edges.
pub fn assemble_tensor(
    word_word: Vec<(String, EdgeList)>,
    doc_word: &EdgeList,
    node_index: &NodeIndex,
) -> Result<TextGraphTensor> {
    let n = node_index.len();
    let mut names = Vec::with_capacity(word_word.len());
    let mut graphs = Vec::with_capacity(word_word.len());
    for (name, edges) in word_word {
        let merged = edges.union(doc_word)?;
        graphs.push(SparseMatrix::from_triplets(n, n, merged.iter())?);
        names.push(name);
    }
    TextGraphTensor::new(node_index.clone(), names, graphs)
}

/// Symmetrically normalized adjacency with self-loops,
/// `D^-1/2 (A + I) D^-1/2`.
pub fn normalize_adjacency(a: &SparseMatrix, name: &str) -> Result<SparseMatrix> {
    let n = a.rows();
    let with_loops =
        SparseMatrix::from_triplets(n, n, a.iter().chain((0..n).map(|i| (i, i, 1.0))))?;
    let mut degrees = Vec::with_capacity(n);
    for i in 0..n {
        let degree: f64 = with_loops.row(i).1.iter().sum();
        if !degree.is_finite() || degree <= 0.0 {
            return Err(Error::NonPositiveDegree {
                graph: name.to_string(),
                node: i,
                degree,
            });
        }
        degrees.push(degree);
    }
    let values = with_loops
        .iter()
        .map(|(r, c, v)| v / (degrees[r] * degrees[c]).sqrt())
        .collect();
    with_loops.with_values(values)
}

/// Normalized propagation operators of a [`TextGraphTensor`].
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedTensor {
    names: Vec<String>,
    graphs: Vec<Arc<SparseMatrix>>,
    n_docs: usize,
}

impl NormalizedTensor {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn graphs(&self) -> &[Arc<SparseMatrix>] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.graphs[0].rows()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

pub fn normalize(tensor: &TextGraphTensor) -> Result<NormalizedTensor> {
    let graphs = tensor
        .names()
        .iter()
        .zip(tensor.graphs())
        .map(|(name, g)| normalize_adjacency(g, name).map(Arc::new))
        .collect::<Result<_>>()?;
    Ok(NormalizedTensor {
        names: tensor.names().to_vec(),
        graphs,
        n_docs: tensor.node_index().n_docs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn index(n_docs: usize, n_words: usize) -> NodeIndex {
        NodeIndex::from_parts(
            (0..n_docs).map(|i| format!("d{i}")).collect(),
            (0..n_words).map(|i| format!("w{i}")).collect(),
        )
    }

    #[test]
    fn normalize_two_node_graph() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let h = normalize_adjacency(&a, "g").unwrap().to_dense();
        assert_eq!(h, DenseMatrix::filled(2, 2, 0.5));
        let iso = normalize_adjacency(&SparseMatrix::zeros(3, 3), "g").unwrap();
        assert_eq!(iso, SparseMatrix::identity(3));
    }

    #[test]
    fn normalize_rejects_negative_degree() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, -3.0), (1, 0, -3.0)]).unwrap();
        match normalize_adjacency(&a, "seq") {
            Err(Error::NonPositiveDegree { graph, node, .. }) => {
                assert_eq!(graph, "seq");
                assert_eq!(node, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_matches_dense_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = 7;
            let mut edges = EdgeList::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(0.4) {
                        edges.insert_undirected(u, v, rng.random_range(0.01..2.0)).unwrap();
                    }
                }
            }
            let a = SparseMatrix::from_triplets(n, n, edges.iter()).unwrap();
            let h = normalize_adjacency(&a, "g").unwrap();

            let mut dense = a.to_dense();
            for i in 0..n {
                dense.set(i, i, 1.0);
            }
            let deg: Vec<f64> = (0..n).map(|i| dense.row(i).iter().sum()).collect();
            let want = DenseMatrix::from_fn(n, n, |i, j| dense.get(i, j) / (deg[i] * deg[j]).sqrt());
            assert!(h.to_dense().max_abs_diff(&want) <= 1e-12);
            assert!(h.is_symmetric(1e-12));
            // Pattern is the input pattern plus the diagonal.
            assert_eq!(h.nnz(), a.nnz() + n);
            for i in 0..n {
                assert!(h.get(i, i) > 0.0);
            }
        }
    }

    #[test]
    fn assemble_degenerate_and_symmetric() {
        let idx = index(2, 3);
        let doc_word = EdgeList::from_undirected([(0, 2, 1.5), (1, 3, 0.5)]).unwrap();
        let empty: Vec<(String, EdgeList)> = GRAPH_NAMES
            .iter()
            .map(|n| (n.to_string(), EdgeList::new()))
            .collect();
        let t = assemble_tensor(empty, &doc_word, &idx).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.names(), GRAPH_NAMES);
        for g in t.graphs() {
            assert_eq!(g.as_ref(), t.graphs()[0].as_ref());
            for (r, c, v) in g.iter() {
                assert_eq!(g.get(c, r), v);
            }
        }

        let ww = EdgeList::from_undirected([(2, 4, 0.25)]).unwrap();
        let single = assemble_tensor(vec![("sequential".into(), ww)], &doc_word, &idx).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.graphs()[0].nnz(), 6);
        assert!(single.select(&["semantic"]).is_err());
    }

    #[test]
    fn tensor_rejects_asymmetry_and_loops() {
        let idx = index(1, 1);
        let asym = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0)]).unwrap();
        assert!(TextGraphTensor::new(idx.clone(), vec!["g".into()], vec![asym]).is_err());
        let looped = SparseMatrix::identity(2);
        assert!(TextGraphTensor::new(idx.clone(), vec!["g".into()], vec![looped]).is_err());
        let small = SparseMatrix::zeros(1, 1);
        assert!(TextGraphTensor::new(idx, vec!["g".into()], vec![small]).is_err());
    }
}
