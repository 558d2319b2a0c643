//! Small seeded graph tensors for tests, gradient checks and ablations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, Masks, NodeIndex, Split, Vocabulary};
use crate::error::Result;
use crate::graph::{assemble_tensor, tfidf_edges, EdgeList, TextGraphTensor, GRAPH_NAMES};
use crate::linalg::SparseMatrix;

/// A labeled transductive task over a graph tensor.
#[derive(Clone, Debug)]
pub struct SyntheticTask {
    pub tensor: TextGraphTensor,
    pub labels: Vec<usize>,
    pub splits: Vec<Split>,
    pub num_classes: usize,
}

impl SyntheticTask {
    pub fn masks(&self, val_fraction: f64, seed: u64) -> Result<Masks> {
        Masks::from_splits(&self.splits, val_fraction, seed)
    }
}

/// `r` random symmetric graphs over `n_docs + n_words` nodes. Each
/// unordered pair carries an edge with probability `density` and a weight
/// uniform in `[0.1, 1)`.
pub fn random_tensor(n_docs: usize, n_words: usize, r: usize, density: f64, seed: u64) -> Result<TextGraphTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_docs + n_words;
    let node_index = NodeIndex::from_parts(
        (0..n_docs).map(|i| format!("d{i}")).collect(),
        (0..n_words).map(|i| format!("w{i}")).collect(),
    );
    let mut graphs = Vec::with_capacity(r);
    for _ in 0..r {
        let mut triplets = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < density {
                    let w = rng.random_range(0.1..1.0);
                    triplets.push((u, v, w));
                    triplets.push((v, u, w));
                }
            }
        }
        graphs.push(SparseMatrix::from_triplets(n, n, triplets)?);
    }
    let names = (0..r)
        .map(|i| GRAPH_NAMES.get(i).map_or_else(|| format!("g{i}"), |s| s.to_string()))
        .collect();
    TextGraphTensor::new(node_index, names, graphs)
}

/// The gradient-check fixture: three graphs over four documents and two
/// words, two classes, every document labeled.
pub fn gradcheck_task() -> Result<SyntheticTask> {
    let tensor = random_tensor(4, 2, 3, 0.6, 11)?;
    Ok(SyntheticTask {
        tensor,
        labels: vec![0, 1, 0, 1],
        splits: vec![Split::Train; 4],
        num_classes: 2,
    })
}

fn build_task(documents: Vec<Document>, classes: usize, word_word: Vec<Vec<(String, String, f64)>>) -> Result<SyntheticTask> {
    let class_names = (0..classes).map(|c| format!("c{c}")).collect();
    let corpus = Corpus::new(documents, class_names)?;
    let vocab = Vocabulary::build(&corpus, 1)?;
    let node_index = NodeIndex::new(&corpus, &vocab);
    let doc_word = tfidf_edges(&corpus, &vocab, &node_index)?;
    let node = |w: &str| node_index.word_node(vocab.index_of(w).expect("fixture word in vocabulary"));
    let mut lists = Vec::with_capacity(word_word.len());
    for (name, edges) in GRAPH_NAMES.iter().zip(word_word) {
        let mut list = EdgeList::new();
        for (a, b, w) in edges {
            list.insert_undirected(node(&a), node(&b), w)?;
        }
        lists.push((name.to_string(), list));
    }
    let tensor = assemble_tensor(lists, &doc_word, &node_index)?;
    Ok(SyntheticTask {
        labels: corpus.labels(),
        splits: corpus.documents().iter().map(|d| d.split).collect(),
        num_classes: classes,
        tensor,
    })
}

fn doc(id: String, tokens: Vec<String>, label: usize, split: Split) -> Document {
    Document {
        id,
        tokens,
        label,
        split,
    }
}

/// Eight training documents, four per class, each naming its class
/// through one dedicated word; two unlabeled test documents.
pub fn separable_task() -> Result<SyntheticTask> {
    let mut docs = Vec::new();
    for i in 0..10 {
        let label = i % 2;
        let split = if i < 8 { Split::Train } else { Split::Test };
        let tokens = vec![
            if label == 0 { "alpha" } else { "beta" }.to_string(),
            format!("filler{}", i % 3),
        ];
        docs.push(doc(format!("s{i}"), tokens, label, split));
    }
    build_task(docs, 2, vec![Vec::new(), Vec::new(), Vec::new()])
}

/// Layout of the complementary-signal task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplementaryConfig {
    pub classes: usize,
    pub anchors_per_class: usize,
    pub cues_per_class: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Weight of a cue's edge to an anchor of its own class in its home
    /// graph.
    pub signal_weight: f64,
    /// Weight of a cue's edges to anchors of random classes in the other
    /// graphs.
    pub noise_weight: f64,
}

impl Default for ComplementaryConfig {
    fn default() -> Self {
        Self {
            classes: 2,
            anchors_per_class: 4,
            cues_per_class: 9,
            train_per_class: 10,
            test_per_class: 12,
            signal_weight: 1.0,
            noise_weight: 0.5,
        }
    }
}

/// Training documents mention anchor words of their class; test documents
/// mention only cue words. Every cue is tied to an anchor of its own class
/// in exactly one home graph, and to an anchor of a random class in each
/// other graph, so every graph alone is reliable for a third of the cues.
pub fn complementary_task(config: &ComplementaryConfig, seed: u64) -> Result<SyntheticTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = config.classes;
    let a = config.anchors_per_class;
    let b = config.cues_per_class;
    let anchor = |class: usize, k: usize| format!("anchor{class}x{k}");
    let cue = |class: usize, k: usize| format!("cue{class}x{k}");
    let mut docs = Vec::new();
    for class in 0..c {
        for i in 0..config.train_per_class {
            let tokens = vec![anchor(class, i % a), anchor(class, (i + 1) % a)];
            docs.push(doc(format!("train{class}x{i}"), tokens, class, Split::Train));
        }
    }
    for class in 0..c {
        for i in 0..config.test_per_class {
            let tokens = vec![cue(class, i % b), cue(class, (i + b / 2 + 1) % b)];
            docs.push(doc(format!("test{class}x{i}"), tokens, class, Split::Test));
        }
    }
    let r = GRAPH_NAMES.len();
    let mut graphs: Vec<Vec<(String, String, f64)>> = vec![Vec::new(); r];
    for class in 0..c {
        for k in 0..b {
            let home = (k + class) % r;
            for (g, edges) in graphs.iter_mut().enumerate() {
                let (target, weight) = if g == home {
                    (class, config.signal_weight)
                } else {
                    (rng.random_range(0..c), config.noise_weight)
                };
                edges.push((cue(class, k), anchor(target, rng.random_range(0..a)), weight));
            }
        }
    }
    build_task(docs, c, graphs)
}
