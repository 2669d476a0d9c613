use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Assignment of nodes to non-empty clusters.
///
/// Labels are 0-based and contiguous internally; file formats use 1-based ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Builds a partition from arbitrary labels. Labels are compacted to
    /// `0..r` preserving their numeric order, so empty label values vanish.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("partition over zero nodes"));
        }
        let mut distinct: Vec<usize> = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let remap: HashMap<usize, usize> =
            distinct.iter().enumerate().map(|(k, &l)| (l, k)).collect();
        let mut sizes = vec![0; distinct.len()];
        let labels: Vec<usize> = labels
            .into_iter()
            .map(|l| {
                let k = remap[&l];
                sizes[k] += 1;
                k
            })
            .collect();
        Ok(Self { labels, sizes })
    }

    /// Consecutive blocks: the first `sizes[0]` nodes form cluster 0, and so on.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "cluster sizes must be non-empty and positive, got {sizes:?}"
            )));
        }
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        Ok(Self {
            labels,
            sizes: sizes.to_vec(),
        })
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_min(&self) -> usize {
        self.sizes.iter().copied().min().unwrap_or(0)
    }

    /// Cluster with the fewest nodes; the lowest label wins ties.
    pub fn smallest_cluster(&self) -> usize {
        let m = self.n_min();
        self.sizes.iter().position(|&s| s == m).unwrap_or(0)
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == cluster).then_some(i))
            .collect()
    }

    #[inline]
    pub fn same_cluster(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// True iff the two partitions agree up to renaming of clusters.
    pub fn exact_match(&self, other: &Partition) -> bool {
        if self.labels.len() != other.labels.len() || self.sizes.len() != other.sizes.len() {
            return false;
        }
        let mut fwd = vec![usize::MAX; self.sizes.len()];
        let mut bwd = vec![usize::MAX; other.sizes.len()];
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            if fwd[a] == usize::MAX && bwd[b] == usize::MAX {
                fwd[a] = b;
                bwd[b] = a;
            } else if fwd[a] != b || bwd[b] != a {
                return false;
            }
        }
        true
    }

    /// The partition induced on the nodes of a sketch. Clusters with no
    /// sampled node disappear.
    pub fn restrict(&self, idx: &SketchIndex) -> Result<Partition> {
        if idx.parent_size() != self.n_nodes() {
            return Err(Error::invalid("sketch index does not match partition size"));
        }
        Partition::from_labels(idx.indices().iter().map(|&i| self.labels[i]).collect())
    }

    /// Per-cluster counts of sampled nodes, indexed by this partition's labels.
    /// Unlike [`restrict`](Self::restrict), clusters that were missed report 0.
    pub fn sample_counts(&self, idx: &SketchIndex) -> Vec<usize> {
        let mut counts = vec![0; self.n_clusters()];
        for &i in idx.indices() {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// `"node cluster"` lines, both 1-based.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.labels.len() * 8);
        for (i, &l) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "{} {}", i + 1, l + 1);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Partition> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let mut it = line.split_whitespace();
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(parse_err(format!(
                    "expected \"node cluster\", got {line:?}"
                )));
            };
            let node: usize = a
                .parse()
                .map_err(|_| parse_err(format!("bad node id {a:?}")))?;
            let cl: usize = b
                .parse()
                .map_err(|_| parse_err(format!("bad cluster id {b:?}")))?;
            if node == 0 || cl == 0 {
                return Err(parse_err("ids are 1-based".into()));
            }
            pairs.push((node - 1, cl - 1));
        }
        pairs.sort_unstable();
        let n = pairs.len();
        if pairs.iter().enumerate().any(|(k, &(node, _))| node != k) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: format!("node ids must cover 1..={n} exactly once"),
            });
        }
        Partition::from_labels(pairs.into_iter().map(|(_, c)| c).collect())
    }
}

/// Sorted set of distinct sampled node ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SketchIndex {
    indices: Vec<usize>,
    parent_size: usize,
}

impl SketchIndex {
    /// Sorts `indices`; duplicates and out-of-range ids are rejected.
    pub fn new(mut indices: Vec<usize>, parent_size: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&last) = indices.last() {
            if last >= parent_size {
                return Err(Error::invalid(format!(
                    "sketch index {last} out of range for {parent_size} nodes"
                )));
            }
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("sketch indices must be distinct"));
        }
        Ok(Self {
            indices,
            parent_size,
        })
    }

    pub fn all(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            parent_size: n,
        }
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn parent_size(&self) -> usize {
        self.parent_size
    }

    pub fn contains(&self, node: usize) -> bool {
        self.indices.binary_search(&node).is_ok()
    }

    /// Position of `node` within the sketch, if sampled.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.indices.binary_search(&node).ok()
    }

    /// Maps an index relative to this sketch back to parent node ids.
    pub fn compose(&self, inner: &SketchIndex) -> Result<SketchIndex> {
        if inner.parent_size != self.len() {
            return Err(Error::invalid("inner index is not relative to this sketch"));
        }
        SketchIndex::new(
            inner.indices.iter().map(|&k| self.indices[k]).collect(),
            self.parent_size,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_cases() {
        let a = Partition::from_labels(vec![0, 0, 1, 1, 2]).unwrap();
        let same = Partition::from_labels(vec![0, 0, 1, 1, 2]).unwrap();
        let renamed = Partition::from_labels(vec![2, 2, 0, 0, 1]).unwrap();
        let moved = Partition::from_labels(vec![0, 1, 1, 1, 2]).unwrap();
        assert!(a.exact_match(&same));
        assert!(a.exact_match(&renamed));
        assert!(!a.exact_match(&moved));
        // a merge is not a relabeling even though one direction is a function
        let merged = Partition::from_labels(vec![0, 0, 0, 0, 1]).unwrap();
        assert!(!a.exact_match(&merged));
        assert!(!merged.exact_match(&a));
    }

    #[test]
    fn from_labels_compacts() {
        let p = Partition::from_labels(vec![7, 3, 7, 9]).unwrap();
        assert_eq!(p.labels(), &[1, 0, 1, 2]);
        assert_eq!(p.sizes(), &[1, 2, 1]);
        assert_eq!(p.n_min(), 1);
        assert_eq!(p.smallest_cluster(), 0);
    }

    #[test]
    fn from_sizes_rejects_empty_cluster() {
        assert!(Partition::from_sizes(&[3, 0, 2]).is_err());
        assert!(Partition::from_sizes(&[]).is_err());
        let p = Partition::from_sizes(&[2, 1]).unwrap();
        assert_eq!(p.labels(), &[0, 0, 1]);
    }

    #[test]
    fn sketch_index_validation() {
        assert!(SketchIndex::new(vec![3, 1, 3], 5).is_err());
        assert!(SketchIndex::new(vec![5], 5).is_err());
        let s = SketchIndex::new(vec![4, 0, 2], 5).unwrap();
        assert_eq!(s.indices(), &[0, 2, 4]);
        assert_eq!(s.position(2), Some(1));
        assert_eq!(s.position(3), None);
    }

    #[test]
    fn compose_maps_through() {
        let outer = SketchIndex::new(vec![1, 3, 5, 7], 9).unwrap();
        let inner = SketchIndex::new(vec![0, 2], 4).unwrap();
        assert_eq!(outer.compose(&inner).unwrap().indices(), &[1, 5]);
    }

    #[test]
    fn partition_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        let p = Partition::from_labels(vec![1, 0, 1, 2, 2]).unwrap();
        p.write(&path).unwrap();
        assert_eq!(Partition::read(&path).unwrap(), p);
        assert!(p.to_text().starts_with("1 2\n2 1\n"));
    }

    #[test]
    fn sample_counts_keep_missed_clusters() {
        let p = Partition::from_sizes(&[2, 2, 2]).unwrap();
        let idx = SketchIndex::new(vec![0, 1, 5], 6).unwrap();
        assert_eq!(p.sample_counts(&idx), vec![2, 0, 1]);
        assert_eq!(p.restrict(&idx).unwrap().sizes(), &[2, 1]);
    }
}
