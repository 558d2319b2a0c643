//! Interchangeable propagation schemes over a graph tensor.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::layers::{inter_propagate, intra_propagate, intra_propagate_identity, Activation};
use super::params::{Dropout, Init, ModelParams, ParamSpec, ParamVars};
use crate::autodiff::{MergePattern, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{NormalizedTensor, TextGraphTensor};

/// Graphs a model runs on: raw adjacencies, their normalized operators, and
/// the merge pattern when the strategy asks for one.
#[derive(Debug)]
pub struct ModelGraphs {
    pub raw: TextGraphTensor,
    pub normalized: NormalizedTensor,
    pub merge: Option<Arc<MergePattern>>,
}

impl ModelGraphs {
    pub fn names(&self) -> &[String] {
        self.raw.names()
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.raw.num_nodes()
    }
}

/// A propagation scheme: its parameter layout and its forward pass.
///
/// `dims` is the feature width at every layer boundary; `dims[0]` is the
/// node count (one-hot features) and the last entry the class count.
pub trait Propagation: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn validate(&self, _graphs: &TextGraphTensor) -> Result<()> {
        Ok(())
    }

    fn needs_merge_pattern(&self) -> bool {
        false
    }

    fn param_specs(&self, graphs: &ModelGraphs, dims: &[usize]) -> Vec<ParamSpec>;

    /// Maps parameters back onto their feasible set after an optimizer step.
    fn project(&self, _graphs: &ModelGraphs, _params: &mut ModelParams) {}

    /// Records the forward pass and returns `n x classes` logits.
    fn forward(
        &self,
        tape: &mut Tape,
        graphs: &ModelGraphs,
        params: &ParamVars,
        dims: &[usize],
        dropout: &mut Dropout,
    ) -> Result<Var>;
}

fn activation(layer: usize, layers: usize) -> Activation {
    if layer + 1 == layers {
        Activation::Identity
    } else {
        Activation::Relu
    }
}

fn masked(tape: &mut Tape, x: Var, dropout: &mut Dropout, identity_rows: bool) -> Result<Var> {
    let (rows, cols) = tape.value(x)?.shape();
    let mask = if identity_rows {
        dropout.rows(rows)
    } else {
        dropout.elementwise(rows, cols)
    };
    match mask {
        Some(m) => tape.dropout(x, m),
        None => Ok(x),
    }
}

pub(crate) fn intra_name(layer: usize, graph: &str) -> String {
    format!("layer{layer}.intra.{graph}")
}

pub(crate) fn inter_name(layer: usize) -> String {
    format!("layer{layer}.inter")
}

/// Per-graph GCN layers, optionally followed by virtual-graph mixing at
/// every layer, with mean pooling over graphs at the end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorGcn {
    pub inter: bool,
}

impl Propagation for TensorGcn {
    fn name(&self) -> &'static str {
        if self.inter {
            "tensor"
        } else {
            "intra_only"
        }
    }

    fn param_specs(&self, graphs: &ModelGraphs, dims: &[usize]) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        for l in 0..dims.len() - 1 {
            for g in graphs.names() {
                specs.push(ParamSpec::new(intra_name(l, g), (dims[l], dims[l + 1]), Init::Glorot));
            }
            if self.inter && graphs.len() >= 2 {
                specs.push(ParamSpec::new(
                    inter_name(l),
                    (dims[l + 1], dims[l + 1]),
                    Init::Glorot,
                ));
            }
        }
        specs
    }

    fn forward(
        &self,
        tape: &mut Tape,
        graphs: &ModelGraphs,
        params: &ParamVars,
        dims: &[usize],
        dropout: &mut Dropout,
    ) -> Result<Var> {
        let layers = dims.len() - 1;
        let adjacency = graphs.normalized.graphs();
        let mut h: Vec<Var> = Vec::new();
        for l in 0..layers {
            let act = activation(l, layers);
            let weights: Vec<Var> = graphs
                .names()
                .iter()
                .map(|g| params.get(&intra_name(l, g)))
                .collect::<Result<_>>()?;
            let intra = if l == 0 {
                let dropped: Vec<Var> = weights
                    .iter()
                    .map(|&w| masked(tape, w, dropout, true))
                    .collect::<Result<_>>()?;
                intra_propagate_identity(tape, adjacency, &dropped, act)?
            } else {
                let dropped: Vec<Var> = h
                    .iter()
                    .map(|&x| masked(tape, x, dropout, false))
                    .collect::<Result<_>>()?;
                intra_propagate(tape, adjacency, &dropped, &weights, act)?
            };
            h = if self.inter && graphs.len() >= 2 {
                let w_inter = params.get(&inter_name(l))?;
                inter_propagate(tape, &intra, w_inter, act)?
            } else {
                intra
            };
        }
        tape.mean_stack(&h)
    }
}

/// Plain two-layer GCN on exactly one graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SingleGraph;

impl Propagation for SingleGraph {
    fn name(&self) -> &'static str {
        "single"
    }

    fn validate(&self, graphs: &TextGraphTensor) -> Result<()> {
        if graphs.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "single-graph mode needs exactly one graph, got {}",
                graphs.len()
            )));
        }
        Ok(())
    }

    fn param_specs(&self, graphs: &ModelGraphs, dims: &[usize]) -> Vec<ParamSpec> {
        TensorGcn { inter: false }.param_specs(graphs, dims)
    }

    fn forward(
        &self,
        tape: &mut Tape,
        graphs: &ModelGraphs,
        params: &ParamVars,
        dims: &[usize],
        dropout: &mut Dropout,
    ) -> Result<Var> {
        TensorGcn { inter: false }.forward(tape, graphs, params, dims, dropout)
    }
}

/// Collapses the tensor into one graph with trainable per-edge attention,
/// then runs a plain GCN on it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MergeEdges;

pub(crate) fn attention_name(graph: &str) -> String {
    format!("attention.{graph}")
}

impl MergeEdges {
    fn pattern(graphs: &ModelGraphs) -> Result<&Arc<MergePattern>> {
        graphs
            .merge
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("merge pattern was not prepared".into()))
    }
}

impl Propagation for MergeEdges {
    fn name(&self) -> &'static str {
        "merge"
    }

    fn needs_merge_pattern(&self) -> bool {
        true
    }

    fn param_specs(&self, graphs: &ModelGraphs, dims: &[usize]) -> Vec<ParamSpec> {
        let mut specs: Vec<ParamSpec> = (0..dims.len() - 1)
            .map(|l| ParamSpec::new(format!("layer{l}.weight"), (dims[l], dims[l + 1]), Init::Glorot))
            .collect();
        let share = 1.0 / graphs.len() as f64;
        let pattern = graphs.merge.as_ref().expect("merge pattern");
        for (i, g) in graphs.names().iter().enumerate() {
            specs.push(ParamSpec::new(
                attention_name(g),
                (pattern.attention_len(i), 1),
                Init::Constant(share),
            ));
        }
        specs
    }

    /// Attention stays non-negative so merged degrees stay positive.
    fn project(&self, graphs: &ModelGraphs, params: &mut ModelParams) {
        for g in graphs.names() {
            if let Some(a) = params.get_mut(&attention_name(g)) {
                for v in a.data_mut() {
                    *v = v.max(0.0);
                }
            }
        }
    }

    fn forward(
        &self,
        tape: &mut Tape,
        graphs: &ModelGraphs,
        params: &ParamVars,
        dims: &[usize],
        dropout: &mut Dropout,
    ) -> Result<Var> {
        let pattern = Self::pattern(graphs)?;
        let attention: Vec<Var> = graphs
            .names()
            .iter()
            .map(|g| params.get(&attention_name(g)))
            .collect::<Result<_>>()?;
        let layers = dims.len() - 1;
        let mut h: Option<Var> = None;
        for l in 0..layers {
            let w = params.get(&format!("layer{l}.weight"))?;
            let z = match h {
                None => {
                    let x = masked(tape, w, dropout, true)?;
                    tape.merged_spmm(pattern.clone(), &attention, x)?
                }
                Some(prev) => {
                    let x = masked(tape, prev, dropout, false)?;
                    if dims[l + 1] < dims[l] {
                        let xw = tape.matmul(x, w)?;
                        tape.merged_spmm(pattern.clone(), &attention, xw)?
                    } else {
                        let ax = tape.merged_spmm(pattern.clone(), &attention, x)?;
                        tape.matmul(ax, w)?
                    }
                }
            };
            h = Some(activation(l, layers).apply(tape, z)?);
        }
        h.ok_or_else(|| Error::InvalidArgument("model has no layers".into()))
    }
}

type Constructor = Box<dyn Fn() -> Box<dyn Propagation> + Send + Sync>;

/// Propagation schemes by name.
pub struct ModelRegistry {
    entries: BTreeMap<String, Constructor>,
}

impl fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("tensor", || Box::new(TensorGcn { inter: true }));
        r.register("intra_only", || Box::new(TensorGcn { inter: false }));
        r.register("single", || Box::new(SingleGraph));
        r.register("merge", || Box::new(MergeEdges));
        r
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &str, constructor: F)
    where
        F: Fn() -> Box<dyn Propagation> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Box::new(constructor));
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn Propagation>> {
        self.entries
            .get(name)
            .map(|c| c())
            .ok_or_else(|| Error::UnknownMode(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
