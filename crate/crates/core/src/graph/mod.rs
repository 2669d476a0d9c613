//! Tri-state symmetric adjacency storage.
//!
//! Every potential edge of a partially observed graph is in one of three
//! states: observed present, observed absent, or not observed at all. The
//! solver constrains only observed entries, and degree-based sampling counts
//! only observed ones, so the three states are kept distinct instead of being
//! collapsed into zeros.

mod edge_list;
mod partition;

pub use edge_list::{read_edge_list, write_edge_list};
pub use partition::{Partition, SketchIndex};

use crate::error::{Error, Result};

/// State of one adjacency entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Entry {
    ObservedZero = 0,
    ObservedOne = 1,
    Unobserved = 2,
}

impl Entry {
    #[inline]
    pub fn is_observed(self) -> bool {
        self != Entry::Unobserved
    }

    #[inline]
    pub fn is_one(self) -> bool {
        self == Entry::ObservedOne
    }

    /// Numeric value with unobserved entries filled by zero.
    #[inline]
    pub fn zero_filled(self) -> u8 {
        u8::from(self == Entry::ObservedOne)
    }
}

/// Symmetric `N x N` adjacency with an always-observed unit diagonal.
///
/// Storage is dense and holds both triangles, so a row is a contiguous slice
/// and column `j` equals row `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedGraph {
    n: usize,
    entries: Vec<Entry>,
}

impl ObservedGraph {
    /// Graph with every off-diagonal entry set to `fill`.
    pub fn new(n_nodes: usize, fill: Entry) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut entries = vec![fill; n_nodes * n_nodes];
        for i in 0..n_nodes {
            entries[i * n_nodes + i] = Entry::ObservedOne;
        }
        Ok(Self {
            n: n_nodes,
            entries,
        })
    }

    /// Builds a graph by visiting every unordered pair `i < j` in row-major order.
    pub fn from_pairs<F>(n_nodes: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Entry,
    {
        let mut g = Self::new(n_nodes, Entry::ObservedZero)?;
        for i in 0..n_nodes {
            for j in (i + 1)..n_nodes {
                let e = f(i, j);
                g.entries[i * n_nodes + j] = e;
                g.entries[j * n_nodes + i] = e;
            }
        }
        Ok(g)
    }

    /// Fully observed graph from a 0/1 predicate. Diagonal values of the
    /// predicate are ignored.
    pub fn from_adjacency<F>(n_nodes: usize, mut connected: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> bool,
    {
        Self::from_pairs(n_nodes, |i, j| {
            if connected(i, j) {
                Entry::ObservedOne
            } else {
                Entry::ObservedZero
            }
        })
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> Entry {
        self.entries[i * self.n + j]
    }

    /// Checked variant of [`entry`](Self::entry).
    pub fn get(&self, i: usize, j: usize) -> Result<Entry> {
        self.check_node(i)?;
        self.check_node(j)?;
        Ok(self.entry(i, j))
    }

    /// Sets the unordered pair `{i, j}`. Diagonal entries are fixed.
    pub fn set(&mut self, i: usize, j: usize, e: Entry) -> Result<()> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(Error::invalid(format!(
                "diagonal entry ({i},{i}) is always observed-one"
            )));
        }
        self.entries[i * self.n + j] = e;
        self.entries[j * self.n + i] = e;
        Ok(())
    }

    /// Row `i`, which is also column `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[Entry] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub(crate) fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::invalid(format!(
                "node {i} out of range for graph with {} nodes",
                self.n
            )));
        }
        Ok(())
    }

    /// Number of observed-one entries in column `j`, diagonal included.
    ///
    /// Always at least one.
    pub fn degree_l0(&self, j: usize) -> Result<usize> {
        self.check_node(j)?;
        Ok(self.degree_unchecked(j))
    }

    #[inline]
    pub(crate) fn degree_unchecked(&self, j: usize) -> usize {
        self.row(j).iter().filter(|e| e.is_one()).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|j| self.degree_unchecked(j)).collect()
    }

    /// Principal sub-graph on `idx`, in index order.
    pub fn subgraph(&self, idx: &SketchIndex) -> Result<ObservedGraph> {
        if idx.parent_size() != self.n {
            return Err(Error::invalid(format!(
                "sketch index built for {} nodes applied to graph with {}",
                idx.parent_size(),
                self.n
            )));
        }
        let ids = idx.indices();
        let m = ids.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in ids {
            let row = self.row(i);
            entries.extend(ids.iter().map(|&j| row[j]));
        }
        Ok(ObservedGraph { n: m, entries })
    }

    /// Fraction of off-diagonal entries that are observed. Zero for a 1-node graph.
    pub fn observed_fraction(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let observed = self.entries.iter().filter(|e| e.is_observed()).count() - self.n;
        observed as f64 / (self.n * (self.n - 1)) as f64
    }

    /// Off-diagonal pairs `i < j` with their state.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, Entry)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).map(move |j| (i, j, self.entry(i, j))))
    }

    /// Checks symmetry and the unit diagonal.
    pub fn check_invariants(&self) -> bool {
        (0..self.n).all(|i| {
            self.entry(i, i) == Entry::ObservedOne
                && ((i + 1)..self.n).all(|j| self.entry(i, j) == self.entry(j, i))
        })
    }
}
