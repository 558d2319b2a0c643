//! Labeled corpora, vocabularies, node indexing and external annotations.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    classes: Vec<String>,
}

/// One line of a dataset file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRecord {
    id: String,
    text: String,
    label: String,
    split: String,
}

/// Lowercases, turns every non-alphanumeric character into a separator and
/// splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .map(str::to_lowercase)
        .filter(|t| !t.is_empty())
        .collect()
}

impl Corpus {
    /// Builds a corpus from already tokenized documents, checking the
    /// document invariants.
    pub fn new(documents: Vec<Document>, classes: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
            if doc.tokens.is_empty() {
                return Err(Error::EmptyDocument(doc.id.clone()));
            }
            if doc.label >= classes.len() {
                return Err(Error::InvalidArgument(format!(
                    "document `{}` has label {} but only {} classes exist",
                    doc.id,
                    doc.label,
                    classes.len()
                )));
            }
        }
        if documents.is_empty() {
            return Err(Error::InvalidArgument("corpus has no documents".into()));
        }
        Ok(Self { documents, classes })
    }

    /// Loads a line-delimited dataset file with `id`, `text`, `label` and
    /// `split` fields. Blank lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        let mut lines = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if !line.trim().is_empty() {
                lines.push((i + 1, line));
            }
        }

        let parsed: Vec<(usize, DatasetRecord, Vec<String>)> = lines
            .par_iter()
            .map(|(lineno, line)| {
                let rec: DatasetRecord = serde_json::from_str(line)
                    .map_err(|e| Error::parse(path, *lineno, e.to_string()))?;
                let tokens = tokenize(&rec.text);
                Ok((*lineno, rec, tokens))
            })
            .collect::<Result<_>>()?;

        let mut classes: Vec<String> = Vec::new();
        let mut class_index: HashMap<String, usize> = HashMap::new();
        let mut documents = Vec::with_capacity(parsed.len());
        for (_, rec, tokens) in parsed {
            let split = match rec.split.as_str() {
                "train" => Split::Train,
                "test" => Split::Test,
                _ => {
                    return Err(Error::UnknownSplit {
                        id: rec.id,
                        split: rec.split,
                    })
                }
            };
            let label = *class_index.entry(rec.label.clone()).or_insert_with(|| {
                classes.push(rec.label.clone());
                classes.len() - 1
            });
            documents.push(Document {
                id: rec.id,
                tokens,
                label,
                split,
            });
        }
        Self::new(documents, classes)
    }

    /// Writes the corpus in the dataset format; token sequences are joined
    /// with single spaces so reloading reproduces them exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for doc in &self.documents {
            let rec = DatasetRecord {
                id: doc.id.clone(),
                text: doc.tokens.join(" "),
                label: self.classes[doc.label].clone(),
                split: doc.split.as_str().to_string(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.documents.iter().map(|d| d.label).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.documents.iter().position(|d| d.id == id)
    }

    fn id_map(&self) -> HashMap<&str, usize> {
        self.documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i))
            .collect()
    }
}

/// Retained words in first-occurrence order with their document frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
}

impl Vocabulary {
    /// Keeps every word whose document frequency is at least `min_df`.
    pub fn build(corpus: &Corpus, min_df: usize) -> Result<Self> {
        if min_df == 0 {
            return Err(Error::InvalidArgument("min_df must be at least 1".into()));
        }
        let mut order: Vec<&str> = Vec::new();
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in corpus.documents() {
            let mut seen = HashSet::new();
            for tok in &doc.tokens {
                if seen.insert(tok.as_str()) {
                    let count = df.entry(tok.as_str()).or_insert_with(|| {
                        order.push(tok.as_str());
                        0
                    });
                    *count += 1;
                }
            }
        }
        let mut words = Vec::new();
        let mut doc_freq = Vec::new();
        for w in order {
            if df[w] >= min_df {
                words.push(w.to_string());
                doc_freq.push(df[w]);
            }
        }
        if words.is_empty() {
            return Err(Error::EmptyVocabulary(min_df));
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Ok(Self {
            words,
            index,
            doc_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn doc_freq(&self, word: usize) -> usize {
        self.doc_freq[word]
    }

    /// Vocabulary ids of a document's tokens, `None` for dropped words.
    pub fn encode(&self, doc: &Document) -> Vec<Option<usize>> {
        doc.tokens.iter().map(|t| self.index_of(t)).collect()
    }
}

/// Shared node set: documents first in corpus order, then words in
/// vocabulary order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeIndex {
    doc_ids: Vec<String>,
    words: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Doc,
    Word,
}

impl NodeIndex {
    pub fn new(corpus: &Corpus, vocab: &Vocabulary) -> Self {
        Self {
            doc_ids: corpus.documents().iter().map(|d| d.id.clone()).collect(),
            words: vocab.words().to_vec(),
        }
    }

    pub fn from_parts(doc_ids: Vec<String>, words: Vec<String>) -> Self {
        Self { doc_ids, words }
    }

    #[inline]
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    #[inline]
    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.doc_ids.len() + self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn doc_node(&self, doc: usize) -> usize {
        debug_assert!(doc < self.n_docs());
        doc
    }

    #[inline]
    pub fn word_node(&self, word: usize) -> usize {
        debug_assert!(word < self.n_words());
        self.doc_ids.len() + word
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        if node < self.n_docs() {
            NodeKind::Doc
        } else {
            NodeKind::Word
        }
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Writes one `doc<TAB>id` or `word<TAB>token` line per node.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for id in &self.doc_ids {
            writeln!(out, "doc\t{id}")?;
        }
        for w in &self.words {
            writeln!(out, "word\t{w}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path)?);
        let mut doc_ids = Vec::new();
        let mut words = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            match line.split_once('\t') {
                Some(("doc", id)) if words.is_empty() => doc_ids.push(id.to_string()),
                Some(("word", w)) => words.push(w.to_string()),
                _ => return Err(Error::parse(path, i + 1, "expected `doc\\t<id>` or `word\\t<word>`")),
            }
        }
        Ok(Self { doc_ids, words })
    }
}

/// Undirected dependency pairs per document, aligned with corpus order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DepAnnotations {
    pairs: Vec<Vec<(usize, usize)>>,
}

#[derive(Deserialize)]
struct DepRecord {
    id: String,
    edges: Vec<(usize, usize)>,
}

impl DepAnnotations {
    /// Canonicalizes `(i, j)` to `(min, max)`, drops `i == j`, deduplicates.
    pub fn from_pairs(corpus: &Corpus, by_doc: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        if by_doc.len() != corpus.len() {
            return Err(Error::shape(format!(
                "{} annotation lists for {} documents",
                by_doc.len(),
                corpus.len()
            )));
        }
        let mut pairs = Vec::with_capacity(by_doc.len());
        for (doc, raw) in corpus.documents().iter().zip(by_doc) {
            pairs.push(canonical_pairs(doc, &raw)?);
        }
        Ok(Self { pairs })
    }

    pub fn empty(corpus: &Corpus) -> Self {
        Self {
            pairs: vec![Vec::new(); corpus.len()],
        }
    }

    pub fn load(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Self> {
        let path = path.as_ref();
        let ids = corpus.id_map();
        let mut pairs = vec![Vec::new(); corpus.len()];
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DepRecord =
                serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            let &d = ids
                .get(rec.id.as_str())
                .ok_or_else(|| Error::UnknownDocument(rec.id.clone()))?;
            let doc = &corpus.documents()[d];
            let mut merged: Vec<(usize, usize)> = std::mem::take(&mut pairs[d]);
            merged.extend(rec.edges);
            pairs[d] = canonical_pairs(doc, &merged)?;
        }
        Ok(Self { pairs })
    }

    /// Canonical pairs for the document at corpus position `doc`.
    pub fn pairs(&self, doc: usize) -> &[(usize, usize)] {
        &self.pairs[doc]
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn canonical_pairs(doc: &Document, raw: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    let len = doc.tokens.len();
    let mut set = BTreeSet::new();
    for &(i, j) in raw {
        if i >= len || j >= len {
            return Err(Error::Annotation {
                id: doc.id.clone(),
                msg: format!("dependency pair ({i}, {j}) outside a {len}-token document"),
            });
        }
        if i != j {
            set.insert((i.min(j), i.max(j)));
        }
    }
    Ok(set.into_iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    Contextual,
    Static,
}

impl std::str::FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contextual" => Ok(Self::Contextual),
            "static" => Ok(Self::Static),
            _ => Err(Error::InvalidArgument(format!("unknown embedding mode `{s}`"))),
        }
    }
}

/// Token embeddings used to decide semantic relations between words.
#[derive(Clone, Debug, PartialEq)]
pub enum EmbeddingAnnotations {
    /// One row per token position, per document in corpus order. Documents
    /// missing from the file have no vectors.
    Contextual {
        dim: usize,
        docs: Vec<Option<DenseMatrix>>,
    },
    /// One vector per word, shared across every occurrence.
    Static {
        dim: usize,
        vectors: HashMap<String, Vec<f64>>,
    },
}

#[derive(Deserialize)]
struct ContextualRecord {
    id: String,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingAnnotations {
    pub fn load(path: impl AsRef<Path>, corpus: &Corpus, mode: EmbeddingMode) -> Result<Self> {
        match mode {
            EmbeddingMode::Contextual => Self::load_contextual(path.as_ref(), corpus),
            EmbeddingMode::Static => Self::load_static(path.as_ref(), corpus),
        }
    }

    fn load_contextual(path: &Path, corpus: &Corpus) -> Result<Self> {
        let ids = corpus.id_map();
        let mut docs: Vec<Option<DenseMatrix>> = vec![None; corpus.len()];
        let mut dim: Option<usize> = None;
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ContextualRecord =
                serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
            let &d = ids
                .get(rec.id.as_str())
                .ok_or_else(|| Error::UnknownDocument(rec.id.clone()))?;
            let doc = &corpus.documents()[d];
            if rec.vectors.len() != doc.tokens.len() {
                return Err(Error::Annotation {
                    id: rec.id,
                    msg: format!(
                        "{} vectors for {} tokens",
                        rec.vectors.len(),
                        doc.tokens.len()
                    ),
                });
            }
            let mut data = Vec::new();
            for v in &rec.vectors {
                let expected = *dim.get_or_insert(v.len());
                if v.len() != expected || expected == 0 {
                    return Err(Error::Annotation {
                        id: rec.id.clone(),
                        msg: format!("vector of dimension {} (expected {expected})", v.len()),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Annotation {
                        id: rec.id.clone(),
                        msg: "non-finite embedding value".into(),
                    });
                }
                data.extend_from_slice(v);
            }
            docs[d] = Some(DenseMatrix::from_vec(rec.vectors.len(), dim.unwrap_or(0), data)?);
        }
        Ok(Self::Contextual {
            dim: dim.unwrap_or(0),
            docs,
        })
    }

    fn load_static(path: &Path, corpus: &Corpus) -> Result<Self> {
        let known: HashSet<&str> = corpus
            .documents()
            .iter()
            .flat_map(|d| d.tokens.iter().map(String::as_str))
            .collect();
        let mut vectors = HashMap::new();
        let mut dim: Option<usize> = None;
        let reader = BufReader::new(File::open(path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: Vec<f64> = fields
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, i + 1, format!("{e}")))?;
            let expected = *dim.get_or_insert(values.len());
            if values.len() != expected || expected == 0 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("vector of dimension {} (expected {expected})", values.len()),
                ));
            }
            if !known.contains(word) {
                continue;
            }
            if values.iter().any(|x| !x.is_finite()) {
                return Err(Error::parse(path, i + 1, "non-finite embedding value"));
            }
            if vectors.insert(word.to_string(), values).is_some() {
                return Err(Error::parse(path, i + 1, format!("second vector for `{word}`")));
            }
        }
        Ok(Self::Static {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Contextual { dim, .. } | Self::Static { dim, .. } => *dim,
        }
    }

    pub fn mode(&self) -> EmbeddingMode {
        match self {
            Self::Contextual { .. } => EmbeddingMode::Contextual,
            Self::Static { .. } => EmbeddingMode::Static,
        }
    }

    /// Vector for token position `pos` of document `doc`, if any.
    pub fn vector<'a>(&'a self, corpus: &Corpus, doc: usize, pos: usize) -> Option<&'a [f64]> {
        match self {
            Self::Contextual { docs, .. } => docs[doc].as_ref().map(|m| m.row(pos)),
            Self::Static { vectors, .. } => corpus.documents()[doc]
                .tokens
                .get(pos)
                .and_then(|t| vectors.get(t))
                .map(Vec::as_slice),
        }
    }
}

/// Boolean masks over document nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    /// Holds out `floor(val_fraction * n_train)` (at least one) training
    /// documents for validation, drawn without replacement from a seeded
    /// generator.
    pub fn split(corpus: &Corpus, val_fraction: f64, seed: u64) -> Result<Self> {
        let splits: Vec<Split> = corpus.documents().iter().map(|d| d.split).collect();
        Self::from_splits(&splits, val_fraction, seed)
    }

    /// [`Masks::split`] over a bare list of per-document splits.
    pub fn from_splits(splits: &[Split], val_fraction: f64, seed: u64) -> Result<Self> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "val_fraction must lie in (0, 1), got {val_fraction}"
            )));
        }
        let train_docs: Vec<usize> = splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == Split::Train)
            .map(|(i, _)| i)
            .collect();
        let n_val = ((train_docs.len() as f64 * val_fraction).floor() as usize).max(1);
        let n = splits.len();
        let mut masks = Masks {
            train: vec![false; n],
            val: vec![false; n],
            test: splits.iter().map(|&s| s == Split::Test).collect(),
        };
        if n_val >= train_docs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} training documents cannot supply {n_val} validation documents and keep one for training",
                train_docs.len()
            )));
        }
        if !masks.test.iter().any(|&t| t) {
            return Err(Error::InvalidArgument("corpus has no test documents".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut held_out: Vec<usize> = sample(&mut rng, train_docs.len(), n_val).into_vec();
        held_out.sort_unstable();
        for &k in &held_out {
            masks.val[train_docs[k]] = true;
        }
        for &d in &train_docs {
            masks.train[d] = !masks.val[d];
        }
        Ok(masks)
    }

    pub fn count(mask: &[bool]) -> usize {
        mask.iter().filter(|&&m| m).count()
    }
}
