//! Word–document and word–word edge builders.
//!
//! Counting is done per document in parallel and merged; every count is an
//! integer so the merge order cannot change the result.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::edges::EdgeList;
use crate::corpus::{Corpus, DepAnnotations, EmbeddingAnnotations, NodeIndex, Vocabulary};
use crate::error::Result;

type PairCounts = HashMap<(usize, usize), u64>;

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn merge_counts(mut a: PairCounts, b: PairCounts) -> PairCounts {
    if a.len() < b.len() {
        return merge_counts(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

/// In-vocabulary word ids of each document, in token order.
fn encoded_docs(corpus: &Corpus, vocab: &Vocabulary) -> Vec<Vec<usize>> {
    corpus
        .documents()
        .par_iter()
        .map(|d| d.tokens.iter().filter_map(|t| vocab.index_of(t)).collect())
        .collect()
}

/// Sorted edges from a pair map, so output never depends on hash order.
fn sorted_edges(
    node_index: &NodeIndex,
    weights: impl IntoIterator<Item = ((usize, usize), f64)>,
) -> Result<EdgeList> {
    let mut v: Vec<_> = weights.into_iter().collect();
    v.sort_by_key(|&(k, _)| k);
    EdgeList::from_undirected(
        v.into_iter()
            .map(|((a, b), w)| (node_index.word_node(a), node_index.word_node(b), w)),
    )
}

/// Doc–word edges weighted `count(w, d) * ln(N / df(w))`.
pub fn tfidf_edges(corpus: &Corpus, vocab: &Vocabulary, node_index: &NodeIndex) -> Result<EdgeList> {
    let n_docs = corpus.len() as f64;
    let mut list = EdgeList::new();
    for (d, ids) in encoded_docs(corpus, vocab).into_iter().enumerate() {
        let mut counts: Vec<(usize, u64)> = Vec::new();
        let mut sorted = ids;
        sorted.sort_unstable();
        for w in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last == w => *c += 1,
                _ => counts.push((w, 1)),
            }
        }
        for (w, count) in counts {
            let idf = (n_docs / vocab.doc_freq(w) as f64).ln();
            let weight = count as f64 * idf;
            if weight > 0.0 {
                list.insert_undirected(node_index.doc_node(d), node_index.word_node(w), weight)?;
            }
        }
    }
    Ok(list)
}

/// Raw sliding-window statistics behind the sequential graph.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WindowCounts {
    pub windows: u64,
    pub occurrence: HashMap<usize, u64>,
    pub co_occurrence: PairCounts,
}

impl WindowCounts {
    fn merge(mut self, other: Self) -> Self {
        self.windows += other.windows;
        for (k, v) in other.occurrence {
            *self.occurrence.entry(k).or_insert(0) += v;
        }
        self.co_occurrence = merge_counts(self.co_occurrence, other.co_occurrence);
        self
    }
}

/// Counts windows of `window_size` tokens with stride one; a document
/// shorter than the window is a single window. Each window counts a word
/// or a pair at most once.
pub fn window_counts(corpus: &Corpus, vocab: &Vocabulary, window_size: usize) -> WindowCounts {
    encoded_docs(corpus, vocab)
        .par_iter()
        .map(|ids| {
            let mut counts = WindowCounts::default();
            if ids.is_empty() {
                return counts;
            }
            let n_windows = if ids.len() <= window_size {
                1
            } else {
                ids.len() - window_size + 1
            };
            let mut uniq = Vec::with_capacity(window_size);
            for start in 0..n_windows {
                let end = (start + window_size).min(ids.len());
                uniq.clear();
                uniq.extend_from_slice(&ids[start..end]);
                uniq.sort_unstable();
                uniq.dedup();
                counts.windows += 1;
                for (k, &a) in uniq.iter().enumerate() {
                    *counts.occurrence.entry(a).or_insert(0) += 1;
                    for &b in &uniq[k + 1..] {
                        *counts.co_occurrence.entry((a, b)).or_insert(0) += 1;
                    }
                }
            }
            counts
        })
        .reduce(WindowCounts::default, WindowCounts::merge)
}

/// Word–word PMI edges over sliding windows; only positive PMI is kept.
pub fn pmi_edges(
    corpus: &Corpus,
    vocab: &Vocabulary,
    node_index: &NodeIndex,
    window_size: usize,
) -> Result<EdgeList> {
    if window_size < 2 {
        return Err(crate::Error::InvalidArgument(format!(
            "window size must be at least 2, got {window_size}"
        )));
    }
    let counts = window_counts(corpus, vocab, window_size);
    let total = counts.windows as f64;
    let weights = counts.co_occurrence.iter().filter_map(|(&(a, b), &co)| {
        let pmi = ((co as f64 * total)
            / (counts.occurrence[&a] as f64 * counts.occurrence[&b] as f64))
            .ln();
        (pmi > 0.0).then_some(((a, b), pmi))
    });
    sorted_edges(node_index, weights)
}

/// Cosine similarity strictly above `rho_sem`. Zero vectors relate to
/// nothing.
pub fn semantic_relation(a: &[f64], b: &[f64], rho_sem: f64) -> bool {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return false;
    }
    dot / (na.sqrt() * nb.sqrt()) > rho_sem
}

/// `#docs where the pair is related / #docs containing both words`, for
/// every pair related in at least one document.
fn document_ratio(
    corpus: &Corpus,
    vocab: &Vocabulary,
    related: &[HashSet<(usize, usize)>],
) -> Vec<((usize, usize), f64)> {
    let numerators: PairCounts = related
        .par_iter()
        .map(|set| set.iter().map(|&k| (k, 1u64)).collect::<PairCounts>())
        .reduce(PairCounts::new, merge_counts);
    if numerators.is_empty() {
        return Vec::new();
    }
    let totals: PairCounts = encoded_docs(corpus, vocab)
        .par_iter()
        .map(|ids| {
            let mut uniq = ids.clone();
            uniq.sort_unstable();
            uniq.dedup();
            let mut local = PairCounts::new();
            for (k, &a) in uniq.iter().enumerate() {
                for &b in &uniq[k + 1..] {
                    if numerators.contains_key(&(a, b)) {
                        *local.entry((a, b)).or_insert(0) += 1;
                    }
                }
            }
            local
        })
        .reduce(PairCounts::new, merge_counts);
    numerators
        .into_iter()
        .map(|(k, num)| (k, num as f64 / totals[&k] as f64))
        .collect()
}

/// Word pairs judged semantically related inside each document.
pub fn semantic_pairs(
    corpus: &Corpus,
    vocab: &Vocabulary,
    embeddings: &EmbeddingAnnotations,
    rho_sem: f64,
) -> Vec<HashSet<(usize, usize)>> {
    corpus
        .documents()
        .par_iter()
        .enumerate()
        .map(|(d, doc)| {
            let ids = vocab.encode(doc);
            let mut pairs = HashSet::new();
            for i in 0..ids.len() {
                let (Some(a), Some(vi)) = (ids[i], embeddings.vector(corpus, d, i)) else {
                    continue;
                };
                for (j, &b) in ids.iter().enumerate().skip(i + 1) {
                    let Some(b) = b else { continue };
                    if a == b || pairs.contains(&ordered(a, b)) {
                        continue;
                    }
                    if let Some(vj) = embeddings.vector(corpus, d, j) {
                        if semantic_relation(vi, vj, rho_sem) {
                            pairs.insert(ordered(a, b));
                        }
                    }
                }
            }
            pairs
        })
        .collect()
}

/// Word pairs joined by at least one dependency inside each document.
pub fn syntactic_pairs(
    corpus: &Corpus,
    vocab: &Vocabulary,
    dep: &DepAnnotations,
) -> Vec<HashSet<(usize, usize)>> {
    corpus
        .documents()
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let ids = vocab.encode(doc);
            dep.pairs(d)
                .iter()
                .filter_map(|&(i, j)| match (ids[i], ids[j]) {
                    (Some(a), Some(b)) if a != b => Some(ordered(a, b)),
                    _ => None,
                })
                .collect()
        })
        .collect()
}

/// Semantic word–word edges: fraction of co-occurring documents in which
/// the two words are related.
pub fn semantic_edges(
    corpus: &Corpus,
    vocab: &Vocabulary,
    node_index: &NodeIndex,
    embeddings: &EmbeddingAnnotations,
    rho_sem: f64,
) -> Result<EdgeList> {
    if !(rho_sem > 0.0 && rho_sem <= 1.0) {
        return Err(crate::Error::InvalidArgument(format!(
            "rho_sem must lie in (0, 1], got {rho_sem}"
        )));
    }
    let related = semantic_pairs(corpus, vocab, embeddings, rho_sem);
    sorted_edges(node_index, document_ratio(corpus, vocab, &related))
}

/// Syntactic word–word edges: fraction of co-occurring documents in which
/// the two words share a dependency.
pub fn syntactic_edges(
    corpus: &Corpus,
    vocab: &Vocabulary,
    node_index: &NodeIndex,
    dep: &DepAnnotations,
) -> Result<EdgeList> {
    let related = syntactic_pairs(corpus, vocab, dep);
    sorted_edges(node_index, document_ratio(corpus, vocab, &related))
}
