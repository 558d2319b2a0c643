//! Independent dense oracles shared by the integration and acceptance
//! tests. Everything here works on plain `Vec<Vec<f64>>` so it shares no
//! kernels with the library under test.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tensorgcn::corpus::{Corpus, DepAnnotations, Document, EmbeddingAnnotations, Split, Vocabulary};
use tensorgcn::graph::TextGraphTensor;
use tensorgcn::linalg::DenseMatrix;
use tensorgcn::model::ModelParams;

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(d: &DenseMatrix) -> Mat {
    (0..d.rows()).map(|i| d.row(i).to_vec()).collect()
}

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, m);
    for i in 0..n {
        assert_eq!(a[i].len(), k);
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn relu(a: &Mat) -> Mat {
    a.iter().map(|r| r.iter().map(|&x| x.max(0.0)).collect()).collect()
}

pub fn max_abs_diff(a: &Mat, b: &DenseMatrix) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            worst = worst.max((x - b.get(i, j)).abs());
        }
    }
    worst
}

/// `D^-1/2 (A + I) D^-1/2` with the degree taken over `A + I`.
pub fn normalize(a: &Mat) -> Mat {
    let n = a.len();
    let mut t = a.clone();
    for (i, row) in t.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let deg: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| t[i][j] / (deg[i] * deg[j]).sqrt()).collect())
        .collect()
}

pub fn dense_graphs(tensor: &TextGraphTensor) -> Vec<Mat> {
    tensor.graphs().iter().map(|g| to_mat(&g.to_dense())).collect()
}

fn param(params: &ModelParams, name: &str) -> Mat {
    to_mat(params.get(name).unwrap_or_else(|| panic!("missing parameter {name}")))
}

/// Dense TensorGCN forward on one-hot features. `inter` switches the
/// virtual-graph mixing on; with one graph this is a plain GCN.
pub fn tensor_forward(graphs: &[Mat], names: &[String], params: &ModelParams, layers: usize, inter: bool) -> Mat {
    let n = graphs[0].len();
    let r = graphs.len();
    let adj: Vec<Mat> = graphs.iter().map(normalize).collect();
    let mut h: Vec<Mat> = vec![eye(n); r];
    for l in 0..layers {
        let last = l + 1 == layers;
        let act = |m: Mat| if last { m } else { relu(&m) };
        let z: Vec<Mat> = (0..r)
            .map(|i| act(mul(&mul(&adj[i], &h[i]), &param(params, &format!("layer{l}.intra.{}", names[i])))))
            .collect();
        h = if inter && r >= 2 {
            let w = param(params, &format!("layer{l}.inter"));
            (0..r)
                .map(|i| {
                    let mut sum = zeros(n, z[0][0].len());
                    for (k, zk) in z.iter().enumerate() {
                        if k != i {
                            sum = add(&sum, zk);
                        }
                    }
                    act(mul(&sum, &w))
                })
                .collect()
        } else {
            z
        };
    }
    mean(&h)
}

pub fn mean(stack: &[Mat]) -> Mat {
    let r = stack.len() as f64;
    let mut out = zeros(stack[0].len(), stack[0][0].len());
    for s in stack {
        out = add(&out, s);
    }
    out.iter().map(|row| row.iter().map(|x| x / r).collect()).collect()
}

/// Dense merge-edges forward: attention values follow each graph's stored
/// edges with `u < v` in row-major order.
pub fn merge_forward(graphs: &[Mat], names: &[String], params: &ModelParams, layers: usize) -> Mat {
    let n = graphs[0].len();
    let mut merged = zeros(n, n);
    for (g, name) in graphs.iter().zip(names) {
        let att = param(params, &format!("attention.{name}"));
        let mut k = 0;
        for u in 0..n {
            for v in u + 1..n {
                if g[u][v] != 0.0 {
                    merged[u][v] += att[k][0] * g[u][v];
                    merged[v][u] += att[k][0] * g[v][u];
                    k += 1;
                }
            }
        }
        assert_eq!(k, att.len());
    }
    let adj = normalize(&merged);
    let mut h = eye(n);
    for l in 0..layers {
        let z = mul(&mul(&adj, &h), &param(params, &format!("layer{l}.weight")));
        h = if l + 1 == layers { z } else { relu(&z) };
    }
    h
}

/// Random corpus over a small alphabet; `n_docs` documents of 1..=`max_len`
/// tokens, every third one a test document.
pub fn random_corpus(n_docs: usize, alphabet: usize, max_len: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..n_docs)
        .map(|d| {
            let len = rng.random_range(1..=max_len);
            Document {
                id: format!("doc{d}"),
                tokens: (0..len).map(|_| format!("w{}", rng.random_range(0..alphabet))).collect(),
                label: d % 2,
                split: if d % 3 == 2 { Split::Test } else { Split::Train },
            }
        })
        .collect();
    Corpus::new(docs, vec!["a".into(), "b".into()]).expect("valid corpus")
}

pub fn random_static_embeddings(corpus: &Corpus, dim: usize, seed: u64) -> EmbeddingAnnotations {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = std::collections::HashMap::new();
    for d in corpus.documents() {
        for t in &d.tokens {
            if !vectors.contains_key(t) {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                vectors.insert(t.clone(), v);
            }
        }
    }
    EmbeddingAnnotations::Static { dim, vectors }
}

pub fn random_dependencies(corpus: &Corpus, seed: u64) -> DepAnnotations {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_doc = corpus
        .documents()
        .iter()
        .map(|d| {
            let n = d.tokens.len();
            (0..n)
                .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
                .collect()
        })
        .collect();
    DepAnnotations::from_pairs(corpus, by_doc).expect("positions in range")
}

/// Node index of every in-vocabulary token, per document.
fn doc_nodes(corpus: &Corpus, vocab: &Vocabulary) -> Vec<Vec<Option<usize>>> {
    let n_docs = corpus.len();
    corpus
        .documents()
        .iter()
        .map(|d| d.tokens.iter().map(|t| vocab.index_of(t).map(|w| n_docs + w)).collect())
        .collect()
}

/// Brute-force TF-IDF: `count(w, d) * ln(N / df(w))` accumulated into a
/// dense `n x n` matrix, both directions.
pub fn tfidf_dense(corpus: &Corpus, vocab: &Vocabulary) -> Mat {
    let n_docs = corpus.len();
    let n = n_docs + vocab.len();
    let docs = doc_nodes(corpus, vocab);
    let mut df = vec![0usize; n];
    for nodes in &docs {
        let seen: BTreeSet<usize> = nodes.iter().flatten().copied().collect();
        for w in seen {
            df[w] += 1;
        }
    }
    let mut m = zeros(n, n);
    for (d, nodes) in docs.iter().enumerate() {
        let mut count = vec![0usize; n];
        for &w in nodes.iter().flatten() {
            count[w] += 1;
        }
        for w in n_docs..n {
            if count[w] > 0 {
                let weight = count[w] as f64 * (n_docs as f64 / df[w] as f64).ln();
                m[d][w] = weight;
                m[w][d] = weight;
            }
        }
    }
    m
}

/// Brute-force positive PMI over explicit sliding windows of the
/// in-vocabulary token sequence.
pub fn pmi_dense(corpus: &Corpus, vocab: &Vocabulary, window: usize) -> Mat {
    let n_docs = corpus.len();
    let n = n_docs + vocab.len();
    let mut windows: Vec<BTreeSet<usize>> = Vec::new();
    for nodes in doc_nodes(corpus, vocab) {
        let seq: Vec<usize> = nodes.into_iter().flatten().collect();
        if seq.is_empty() {
            continue;
        }
        if seq.len() <= window {
            windows.push(seq.iter().copied().collect());
        } else {
            for s in 0..=seq.len() - window {
                windows.push(seq[s..s + window].iter().copied().collect());
            }
        }
    }
    let total = windows.len() as f64;
    let mut single = vec![0.0; n];
    let mut pair = zeros(n, n);
    for w in &windows {
        for &a in w {
            single[a] += 1.0;
            for &b in w {
                if a != b {
                    pair[a][b] += 1.0;
                }
            }
        }
    }
    let mut m = zeros(n, n);
    for a in n_docs..n {
        for b in n_docs..n {
            if a != b && pair[a][b] > 0.0 {
                let pmi = ((pair[a][b] / total) / ((single[a] / total) * (single[b] / total))).ln();
                if pmi > 0.0 {
                    m[a][b] = pmi;
                }
            }
        }
    }
    m
}

/// Brute-force document ratio: documents where `related` holds for some
/// position pair of the two words, over documents containing both.
fn ratio_dense(
    corpus: &Corpus,
    vocab: &Vocabulary,
    mut related: impl FnMut(usize, usize, usize) -> bool,
) -> Mat {
    let n_docs = corpus.len();
    let n = n_docs + vocab.len();
    let mut total = zeros(n, n);
    let mut hits = zeros(n, n);
    for (d, nodes) in doc_nodes(corpus, vocab).iter().enumerate() {
        let present: BTreeSet<usize> = nodes.iter().flatten().copied().collect();
        for &a in &present {
            for &b in &present {
                if a != b {
                    total[a][b] += 1.0;
                }
            }
        }
        let mut linked: BTreeSet<(usize, usize)> = BTreeSet::new();
        for i in 0..nodes.len() {
            for j in 0..nodes.len() {
                if let (Some(a), Some(b)) = (nodes[i], nodes[j]) {
                    if i != j && a != b && related(d, i, j) {
                        linked.insert((a, b));
                        linked.insert((b, a));
                    }
                }
            }
        }
        for (a, b) in linked {
            hits[a][b] += 1.0;
        }
    }
    let mut m = zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            if hits[a][b] > 0.0 {
                m[a][b] = hits[a][b] / total[a][b];
            }
        }
    }
    m
}

pub fn semantic_dense(corpus: &Corpus, vocab: &Vocabulary, emb: &EmbeddingAnnotations, rho: f64) -> Mat {
    ratio_dense(corpus, vocab, |d, i, j| {
        match (emb.vector(corpus, d, i), emb.vector(corpus, d, j)) {
            (Some(x), Some(y)) => {
                let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                nx > 0.0 && ny > 0.0 && dot / (nx * ny) > rho
            }
            _ => false,
        }
    })
}

pub fn syntactic_dense(corpus: &Corpus, vocab: &Vocabulary, dep: &DepAnnotations) -> Mat {
    let pairs: Vec<BTreeSet<(usize, usize)>> = (0..corpus.len())
        .map(|d| dep.pairs(d).iter().copied().collect())
        .collect();
    ratio_dense(corpus, vocab, |d, i, j| pairs[d].contains(&(i.min(j), i.max(j))))
}

/// Largest difference between an edge list and a dense oracle, counting
/// missing or extra entries.
pub fn edge_error(edges: &tensorgcn::graph::EdgeList, dense: &Mat) -> f64 {
    let mut listed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (u, v, w) in edges.iter() {
        listed.insert((u, v), w);
    }
    let mut worst = 0.0f64;
    for (u, row) in dense.iter().enumerate() {
        for (v, &x) in row.iter().enumerate() {
            let got = listed.remove(&(u, v)).unwrap_or(0.0);
            worst = worst.max((got - x).abs());
        }
    }
    if !listed.is_empty() {
        return f64::INFINITY;
    }
    worst
}
