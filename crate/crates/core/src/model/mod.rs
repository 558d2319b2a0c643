//! TensorGCN and its comparison modes.

pub mod checkpoint;
pub mod layers;
pub mod params;
pub mod strategies;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use checkpoint::Checkpoint;
pub use layers::{inter_propagate, intra_propagate, intra_propagate_identity, Activation};
pub use params::{Dropout, Init, ModelParams, ParamSpec, ParamVars};
pub use strategies::{
    MergeEdges, ModelGraphs, ModelRegistry, Propagation, SingleGraph, TensorGcn,
};

use crate::autodiff::{MergePattern, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{normalize, TextGraphTensor};
use crate::linalg::{DenseMatrix, SparseMatrix};

/// A model mode: a registered strategy name plus an optional graph subset.
///
/// Accepted spellings: `tensor`, `merge`, `intra_only`,
/// `single(sequential)`, `single:sequential`, and subsets such as
/// `tensor:semantic,sequential`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub strategy: String,
    pub graphs: Option<Vec<String>>,
}

impl ModelSpec {
    pub fn new(strategy: impl Into<String>) -> Self {
        Self {
            strategy: strategy.into(),
            graphs: None,
        }
    }

    pub fn with_graphs(strategy: impl Into<String>, graphs: &[&str]) -> Self {
        Self {
            strategy: strategy.into(),
            graphs: Some(graphs.iter().map(|g| g.to_string()).collect()),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownMode(s.to_string());
        let s = s.trim();
        let (strategy, rest) = if let Some(open) = s.find('(') {
            let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
            (&s[..open], Some(inner))
        } else if let Some((head, tail)) = s.split_once(':') {
            (head, Some(tail))
        } else {
            (s, None)
        };
        let valid = |t: &str| {
            !t.is_empty() && t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        };
        if !valid(strategy) {
            return Err(bad());
        }
        let graphs = match rest {
            None => None,
            Some(list) => {
                let names: Vec<String> = list.split(',').map(|g| g.trim().to_string()).collect();
                if !names.iter().all(|g| valid(g)) {
                    return Err(bad());
                }
                Some(names)
            }
        };
        Ok(Self {
            strategy: strategy.to_string(),
            graphs,
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.graphs {
            None => f.write_str(&self.strategy),
            Some(g) => write!(f, "{}({})", self.strategy, g.join(",")),
        }
    }
}

/// A strategy bound to a graph tensor and layer widths.
#[derive(Debug)]
pub struct Model {
    spec: ModelSpec,
    strategy: Box<dyn Propagation>,
    graphs: ModelGraphs,
    dims: Vec<usize>,
}

impl Model {
    /// `hidden` lists the widths between the one-hot input and the class
    /// logits; one entry gives the usual two-layer model.
    pub fn new(
        registry: &ModelRegistry,
        spec: &ModelSpec,
        tensor: &TextGraphTensor,
        hidden: &[usize],
        num_classes: usize,
    ) -> Result<Self> {
        let strategy = registry.create(&spec.strategy)?;
        let raw = match &spec.graphs {
            Some(names) => tensor.select(names)?,
            None => tensor.clone(),
        };
        strategy.validate(&raw)?;
        if num_classes == 0 || hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "layer widths and class count must be positive".into(),
            ));
        }
        let normalized = normalize(&raw)?;
        let merge = if strategy.needs_merge_pattern() {
            Some(Arc::new(MergePattern::new(raw.graphs())?))
        } else {
            None
        };
        let mut dims = vec![raw.num_nodes()];
        dims.extend_from_slice(hidden);
        dims.push(num_classes);
        Ok(Self {
            spec: spec.clone(),
            strategy,
            graphs: ModelGraphs {
                raw,
                normalized,
                merge,
            },
            dims,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn strategy_name(&self) -> &'static str {
        self.strategy.name()
    }

    pub fn graphs(&self) -> &ModelGraphs {
        &self.graphs
    }

    pub fn graph_names(&self) -> &[String] {
        self.graphs.names()
    }

    /// Widths at every layer boundary, input first.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn hidden(&self) -> &[usize] {
        &self.dims[1..self.dims.len() - 1]
    }

    pub fn num_classes(&self) -> usize {
        *self.dims.last().expect("dims")
    }

    pub fn num_nodes(&self) -> usize {
        self.dims[0]
    }

    pub fn n_docs(&self) -> usize {
        self.graphs.normalized.n_docs()
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        self.strategy.param_specs(&self.graphs, &self.dims)
    }

    pub fn init_params(&self, seed: u64) -> ModelParams {
        ModelParams::initialize(&self.param_specs(), seed)
    }

    pub fn check_params(&self, params: &ModelParams) -> Result<()> {
        params.check_layout(&self.param_specs())
    }

    /// Projects parameters onto the strategy's feasible set.
    pub fn project(&self, params: &mut ModelParams) {
        self.strategy.project(&self.graphs, params);
    }

    /// Records the forward pass; returns `n x classes` logits.
    pub fn forward(&self, tape: &mut Tape, params: &ParamVars, dropout: &mut Dropout) -> Result<Var> {
        self.strategy
            .forward(tape, &self.graphs, params, &self.dims, dropout)
    }

    /// Logits with dropout off.
    pub fn logits(&self, params: &ModelParams) -> Result<DenseMatrix> {
        self.check_params(params)?;
        let mut tape = Tape::new();
        let vars = params.record(&mut tape);
        let out = self.forward(&mut tape, &vars, &mut Dropout::disabled())?;
        Ok(tape.value(out)?.clone())
    }
}

/// `sum_i attention_i ⊙ A_i`, one attention value per stored undirected
/// edge of each graph in upper-triangular row-major order.
pub fn merge_edges(tensor: &TextGraphTensor, attention: &[&DenseMatrix]) -> Result<SparseMatrix> {
    MergePattern::new(tensor.graphs())?.merged_adjacency(attention)
}
