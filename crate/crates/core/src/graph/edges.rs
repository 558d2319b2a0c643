use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Weighted edges keyed by `(src, dst)`. Undirected edges are stored in
/// both directions with equal weight.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeList {
    entries: BTreeMap<(usize, usize), f64>,
}

impl EdgeList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `u -- v` in both directions. Self-loops and zero weights are
    /// ignored; inserting an existing edge with a different weight fails.
    pub fn insert_undirected(&mut self, u: usize, v: usize, weight: f64) -> Result<()> {
        if !weight.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite weight {weight} on edge ({u}, {v})"
            )));
        }
        if u == v || weight == 0.0 {
            return Ok(());
        }
        self.insert_one(u, v, weight)?;
        self.insert_one(v, u, weight)
    }

    fn insert_one(&mut self, u: usize, v: usize, weight: f64) -> Result<()> {
        match self.entries.insert((u, v), weight) {
            Some(old) if old != weight => Err(Error::ConflictingEdge {
                src: u,
                dst: v,
                a: old,
                b: weight,
            }),
            _ => Ok(()),
        }
    }

    pub fn from_undirected(edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut list = Self::new();
        for (u, v, w) in edges {
            list.insert_undirected(u, v, w)?;
        }
        Ok(list)
    }

    /// Union of two lists; shared edges must carry equal weights.
    pub fn union(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        for (&(u, v), &w) in &other.entries {
            out.insert_one(u, v, w)?;
        }
        Ok(out)
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        self.entries.get(&(u, v)).copied()
    }

    /// Directed entries in `(src, dst)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    /// Each undirected edge once, as `(min, max, weight)`.
    pub fn undirected(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.iter().filter(|&(u, v, _)| u < v)
    }

    /// Number of directed entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_undirected(&self) -> usize {
        self.undirected().count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_storage() {
        let e = EdgeList::from_undirected([(1, 3, 0.5), (2, 2, 9.0), (0, 1, 0.0)]).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.get(1, 3), Some(0.5));
        assert_eq!(e.get(3, 1), Some(0.5));
        assert_eq!(e.num_undirected(), 1);
    }

    #[test]
    fn conflicting_weights_rejected() {
        let a = EdgeList::from_undirected([(0, 1, 1.0)]).unwrap();
        let b = EdgeList::from_undirected([(1, 0, 2.0)]).unwrap();
        assert!(matches!(a.union(&b), Err(Error::ConflictingEdge { .. })));
        assert!(a.union(&a).is_ok());
        assert!(EdgeList::from_undirected([(0, 1, f64::NAN)]).is_err());
    }
}
