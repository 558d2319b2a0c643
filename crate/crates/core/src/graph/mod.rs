//! Text graph tensor construction.
//!
//! Three word–word views of a corpus (semantic, syntactic, sequential) are
//! each joined with the same TF-IDF doc–word edges over a shared node set.

mod builders;
mod edges;
pub mod io;
mod tensor;

pub use builders::{
    pmi_edges, semantic_edges, semantic_pairs, semantic_relation, syntactic_edges,
    syntactic_pairs, tfidf_edges, window_counts, WindowCounts,
};
pub use edges::EdgeList;
pub use tensor::{
    assemble_tensor, normalize, normalize_adjacency, NormalizedTensor, TextGraphTensor,
    GRAPH_NAMES,
};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DepAnnotations, EmbeddingAnnotations, NodeIndex, Vocabulary};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub window_size: usize,
    pub rho_sem: f64,
    pub min_df: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            window_size: 20,
            rho_sem: 0.9,
            min_df: 1,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "window_size must be at least 2, got {}",
                self.window_size
            )));
        }
        if !(self.rho_sem > 0.0 && self.rho_sem <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho_sem must lie in (0, 1], got {}",
                self.rho_sem
            )));
        }
        if self.min_df == 0 {
            return Err(Error::InvalidArgument("min_df must be at least 1".into()));
        }
        Ok(())
    }
}

/// Undirected edge counts of one built tensor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuildStats {
    pub nodes: usize,
    pub docs: usize,
    pub words: usize,
    pub doc_word_edges: usize,
    /// `(graph name, word–word edges)` in tensor order.
    pub word_word_edges: Vec<(String, usize)>,
}

/// Builds the full three-graph tensor in canonical order.
pub fn build_text_graph_tensor(
    corpus: &Corpus,
    dep: &DepAnnotations,
    embeddings: &EmbeddingAnnotations,
    config: &GraphConfig,
) -> Result<(TextGraphTensor, BuildStats)> {
    config.validate()?;
    let vocab = Vocabulary::build(corpus, config.min_df)?;
    let node_index = NodeIndex::new(corpus, &vocab);
    log::info!(
        "building graphs over {} documents and {} words",
        node_index.n_docs(),
        node_index.n_words()
    );
    let doc_word = tfidf_edges(corpus, &vocab, &node_index)?;
    let semantic = semantic_edges(corpus, &vocab, &node_index, embeddings, config.rho_sem)?;
    let syntactic = syntactic_edges(corpus, &vocab, &node_index, dep)?;
    let sequential = pmi_edges(corpus, &vocab, &node_index, config.window_size)?;
    let word_word: Vec<(String, EdgeList)> = GRAPH_NAMES
        .iter()
        .map(|s| s.to_string())
        .zip([semantic, syntactic, sequential])
        .collect();
    let stats = BuildStats {
        nodes: node_index.len(),
        docs: node_index.n_docs(),
        words: node_index.n_words(),
        doc_word_edges: doc_word.num_undirected(),
        word_word_edges: word_word
            .iter()
            .map(|(n, e)| (n.clone(), e.num_undirected()))
            .collect(),
    };
    let tensor = assemble_tensor(word_word, &doc_word, &node_index)?;
    Ok((tensor, stats))
}
