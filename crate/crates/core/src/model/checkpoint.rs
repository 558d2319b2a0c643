//! Self-describing parameter container.
//!
//! Layout: a magic line, one line of JSON describing the model and the
//! parameter shapes, then every parameter's entries as little-endian `f64`
//! in header order. Values round-trip bitwise.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

const MAGIC: &[u8] = b"TENSORGCN-CHECKPOINT 1\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    mode: String,
    dims: Vec<usize>,
    graphs: Vec<String>,
    params: Vec<(String, usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub mode: String,
    pub dims: Vec<usize>,
    pub graphs: Vec<String>,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            mode: self.mode.clone(),
            dims: self.dims.clone(),
            graphs: self.graphs.clone(),
            params: self
                .params
                .iter()
                .map(|(n, v)| (n.to_string(), v.rows(), v.cols()))
                .collect(),
        };
        let mut out = MAGIC.to_vec();
        serde_json::to_writer(&mut out, &header)?;
        out.push(b'\n');
        for v in self.params.values() {
            for x in v.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::Checkpoint("missing magic line".into()))?;
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("unterminated header".into()))?;
        let header: Header = serde_json::from_slice(&rest[..end])?;
        let mut data = &rest[end + 1..];
        let mut entries = Vec::with_capacity(header.params.len());
        for (name, rows, cols) in header.params {
            let len = rows
                .checked_mul(cols)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| Error::Checkpoint(format!("parameter `{name}` is too large")))?;
            if data.len() < len {
                return Err(Error::Checkpoint(format!("truncated data for `{name}`")));
            }
            let (head, tail) = data.split_at(len);
            let values = head
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            entries.push((name, DenseMatrix::from_vec(rows, cols, values)?));
            data = tail;
        }
        if !data.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", data.len())));
        }
        Ok(Self {
            mode: header.mode,
            dims: header.dims,
            graphs: header.graphs,
            params: ModelParams::new(entries)?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let params = ModelParams::new(vec![
            ("a".into(), DenseMatrix::from_rows(&[vec![0.1, -2.5e-300], vec![f64::MIN_POSITIVE, 3.0]])),
            ("b".into(), DenseMatrix::filled(1, 3, 1.0 / 3.0)),
        ])
        .unwrap();
        Checkpoint {
            mode: "tensor".into(),
            dims: vec![2, 2, 3],
            graphs: vec!["semantic".into(), "sequential".into()],
            params,
        }
    }

    #[test]
    fn bitwise_round_trip() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"nope").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
