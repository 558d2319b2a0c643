//! Plain-text graph artifacts.
//!
//! ```text
//! #nodes <n> #edges <m> name <label>
//! <src> <dst> <weight>
//! ```
//!
//! Each undirected edge is written once with `src < dst`. Weights use the
//! shortest decimal form that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::tensor::{TextGraphTensor, GRAPH_NAMES};
use crate::corpus::NodeIndex;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

pub const NODE_FILE: &str = "nodes.tsv";

pub fn graph_file_name(name: &str) -> String {
    format!("{name}.graph")
}

pub fn write_graph(path: impl AsRef<Path>, name: &str, graph: &SparseMatrix) -> Result<()> {
    let edges: Vec<_> = graph.iter().filter(|&(r, c, _)| r < c).collect();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "#nodes {} #edges {} name {name}",
        graph.rows(),
        edges.len()
    )?;
    for (r, c, v) in edges {
        writeln!(out, "{r} {c} {v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a graph file back into a symmetric matrix, returning its label.
pub fn read_graph(path: impl AsRef<Path>) -> Result<(String, SparseMatrix)> {
    let path = path.as_ref();
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, m, name) = match fields.as_slice() {
        ["#nodes", n, "#edges", m, "name", name] => {
            let n: usize = n
                .parse()
                .map_err(|_| Error::parse(path, 1, "bad node count"))?;
            let m: usize = m
                .parse()
                .map_err(|_| Error::parse(path, 1, "bad edge count"))?;
            (n, m, name.to_string())
        }
        _ => return Err(Error::parse(path, 1, "expected `#nodes <n> #edges <m> name <label>`")),
    };
    let mut triplets = Vec::with_capacity(2 * m);
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(s), Some(d), Some(w), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::parse(path, lineno, "expected `src dst weight`"));
        };
        let s: usize = s.parse().map_err(|_| Error::parse(path, lineno, "bad src"))?;
        let d: usize = d.parse().map_err(|_| Error::parse(path, lineno, "bad dst"))?;
        let w: f64 = w.parse().map_err(|_| Error::parse(path, lineno, "bad weight"))?;
        if s >= d || d >= n || !w.is_finite() {
            return Err(Error::parse(path, lineno, format!("invalid edge {s} {d} {w}")));
        }
        triplets.push((s, d, w));
        triplets.push((d, s, w));
        count += 1;
    }
    if count != m {
        return Err(Error::parse(
            path,
            1,
            format!("header announces {m} edges but {count} were read"),
        ));
    }
    let before = triplets.len();
    let matrix = SparseMatrix::from_triplets(n, n, triplets)?;
    if matrix.nnz() != before {
        return Err(Error::parse(path, 1, "duplicate edges"));
    }
    Ok((name, matrix))
}

/// Writes the node file and one graph file per graph; returns written paths.
pub fn save_tensor(dir: impl AsRef<Path>, tensor: &TextGraphTensor) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let nodes = dir.join(NODE_FILE);
    tensor.node_index().save(&nodes)?;
    written.push(nodes);
    for (name, g) in tensor.names().iter().zip(tensor.graphs()) {
        let p = dir.join(graph_file_name(name));
        write_graph(&p, name, g)?;
        written.push(p);
    }
    Ok(written)
}

/// Loads every standard graph present in `dir`, in canonical order.
pub fn load_tensor(dir: impl AsRef<Path>) -> Result<TextGraphTensor> {
    let dir = dir.as_ref();
    let node_index = NodeIndex::load(dir.join(NODE_FILE))?;
    let mut names = Vec::new();
    let mut graphs = Vec::new();
    for name in GRAPH_NAMES {
        let p = dir.join(graph_file_name(name));
        if p.exists() {
            let (label, g) = read_graph(&p)?;
            if label != name {
                return Err(Error::parse(&p, 1, format!("file holds graph `{label}`")));
            }
            names.push(label);
            graphs.push(g);
        }
    }
    if graphs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no graph files found in {}",
            dir.display()
        )));
    }
    TextGraphTensor::new(node_index, names, graphs)
}
