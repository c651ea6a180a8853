//! Binary network representation, categorical nodal attributes, and the
//! plain-text adjacency / attribute file formats.
//!
//! Adjacency is stored as bit-packed rows. Directed graphs additionally keep
//! the transposed rows so that in-neighbourhoods are available as bitsets.
//! An edge list with O(1) removal backs uniform tie selection for the
//! tie-no-tie proposal.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const NO_EDGE: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    directed: bool,
    words: usize,
    out_rows: Vec<u64>,
    in_rows: Vec<u64>,
    out_deg: Vec<u32>,
    in_deg: Vec<u32>,
    // undirected edges are stored with i < j
    edges: Vec<(u32, u32)>,
    edge_pos: Vec<u32>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.directed == other.directed && self.out_rows == other.out_rows
    }
}

impl Eq for Graph {}

#[inline]
fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

impl Graph {
    /// Empty graph on `n` nodes.
    pub fn empty(n: usize, directed: bool) -> Self {
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            directed,
            words,
            out_rows: vec![0; n * words],
            in_rows: if directed {
                vec![0; n * words]
            } else {
                Vec::new()
            },
            out_deg: vec![0; n],
            in_deg: vec![0; n],
            edges: Vec::new(),
            edge_pos: vec![NO_EDGE; n * n],
        }
    }

    /// Builds a graph from 0-based edge pairs. Duplicate pairs are an error.
    pub fn from_edges(n: usize, directed: bool, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n, directed);
        for &(i, j) in edges {
            g.check_dyad(i, j)?;
            if g.has_edge(i, j) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            g.flip(i, j);
        }
        Ok(g)
    }

    /// Builds a graph from a dense 0/1 matrix.
    pub fn from_matrix(rows: &[Vec<u8>], directed: bool) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    n
                )));
            }
            if row[i] != 0 {
                return Err(Error::InvalidGraph(format!(
                    "diagonal entry ({0}, {0}) is nonzero",
                    i + 1
                )));
            }
            if let Some(&v) = row.iter().find(|&&v| v > 1) {
                return Err(Error::InvalidGraph(format!(
                    "row {} has entry {}, expected 0 or 1",
                    i + 1,
                    v
                )));
            }
        }
        let mut g = Graph::empty(n, directed);
        for i in 0..n {
            for j in 0..n {
                if rows[i][j] == 0 {
                    continue;
                }
                if directed {
                    g.flip(i, j);
                } else {
                    if rows[j][i] != 1 {
                        return Err(Error::InvalidGraph(format!(
                            "undirected matrix is not symmetric at ({}, {})",
                            i + 1,
                            j + 1
                        )));
                    }
                    if i < j {
                        g.flip(i, j);
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of free dyads: n(n-1) ordered pairs when directed, n(n-1)/2 otherwise.
    pub fn dyad_count(&self) -> usize {
        let pairs = self.n * self.n.saturating_sub(1);
        if self.directed {
            pairs
        } else {
            pairs / 2
        }
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        (self.out_rows[i * self.words + (j >> 6)] >> (j & 63)) & 1 == 1
    }

    /// Bitset of out-neighbours of `i` (all neighbours when undirected).
    #[inline]
    pub fn out_row(&self, i: usize) -> &[u64] {
        &self.out_rows[i * self.words..(i + 1) * self.words]
    }

    /// Bitset of in-neighbours of `i` (all neighbours when undirected).
    #[inline]
    pub fn in_row(&self, i: usize) -> &[u64] {
        if self.directed {
            &self.in_rows[i * self.words..(i + 1) * self.words]
        } else {
            self.out_row(i)
        }
    }

    pub fn words_per_row(&self) -> usize {
        self.words
    }

    #[inline]
    pub fn out_degree(&self, i: usize) -> usize {
        self.out_deg[i] as usize
    }

    #[inline]
    pub fn in_degree(&self, i: usize) -> usize {
        if self.directed {
            self.in_deg[i] as usize
        } else {
            self.out_deg[i] as usize
        }
    }

    /// Degree of `i` in an undirected graph; out-degree plus in-degree when directed.
    pub fn degree(&self, i: usize) -> usize {
        if self.directed {
            (self.out_deg[i] + self.in_deg[i]) as usize
        } else {
            self.out_deg[i] as usize
        }
    }

    /// Current edge list; undirected edges appear once with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(i, j)| (i as usize, j as usize))
    }

    /// The `k`-th edge of the internal edge list (used for uniform tie selection).
    #[inline]
    pub fn edge_at(&self, k: usize) -> (usize, usize) {
        let (i, j) = self.edges[k];
        (i as usize, j as usize)
    }

    /// Out-neighbours of `i` in increasing order.
    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        iter_bits(self.out_row(i))
    }

    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        iter_bits(self.in_row(i))
    }

    /// Number of nodes adjacent to both `i` and `j` (undirected sense).
    #[inline]
    pub fn common_neighbors(&self, i: usize, j: usize) -> u32 {
        popcount_and(self.out_row(i), self.out_row(j))
    }

    pub(crate) fn check_dyad(&self, i: usize, j: usize) -> Result<()> {
        for idx in [i, j] {
            if idx >= self.n {
                return Err(Error::NodeOutOfRange {
                    index: idx + 1,
                    n: self.n,
                });
            }
        }
        if i == j {
            return Err(Error::SelfTie(i + 1));
        }
        Ok(())
    }

    /// Flips dyad (i, j) in place; for undirected graphs (j, i) flips with it.
    pub fn toggle(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_dyad(i, j)?;
        self.flip(i, j);
        Ok(())
    }

    /// Returns a copy with dyad (i, j) flipped.
    pub fn toggled(&self, i: usize, j: usize) -> Result<Graph> {
        let mut g = self.clone();
        g.toggle(i, j)?;
        Ok(g)
    }

    /// Unchecked toggle used by the samplers' inner loops.
    #[inline]
    pub(crate) fn flip(&mut self, i: usize, j: usize) {
        let (i, j) = if self.directed || i < j {
            (i, j)
        } else {
            (j, i)
        };
        let w = self.words;
        let present = self.has_edge(i, j);
        self.out_rows[i * w + (j >> 6)] ^= 1 << (j & 63);
        if self.directed {
            self.in_rows[j * w + (i >> 6)] ^= 1 << (i & 63);
        } else {
            self.out_rows[j * w + (i >> 6)] ^= 1 << (i & 63);
        }
        let slot = i * self.n + j;
        if present {
            self.out_deg[i] -= 1;
            if self.directed {
                self.in_deg[j] -= 1;
            } else {
                self.out_deg[j] -= 1;
            }
            let pos = self.edge_pos[slot] as usize;
            self.edge_pos[slot] = NO_EDGE;
            let last = self.edges.len() - 1;
            self.edges.swap_remove(pos);
            if pos != last {
                let (a, b) = self.edges[pos];
                self.edge_pos[a as usize * self.n + b as usize] = pos as u32;
            }
        } else {
            self.out_deg[i] += 1;
            if self.directed {
                self.in_deg[j] += 1;
            } else {
                self.out_deg[j] += 1;
            }
            self.edge_pos[slot] = self.edges.len() as u32;
            self.edges.push((i as u32, j as u32));
        }
    }

    /// Dense 0/1 matrix, row-major.
    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.has_edge(i, j) as u8).collect())
            .collect()
    }

    /// Serializes in the adjacency file format: space-separated 0/1, one row per line.
    pub fn to_adjacency_string(&self) -> String {
        let mut s = String::with_capacity(self.n * (2 * self.n + 1));
        for i in 0..self.n {
            for j in 0..self.n {
                if j > 0 {
                    s.push(' ');
                }
                s.push(if self.has_edge(i, j) { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn write_adjacency(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_adjacency_string()).map_err(|e| Error::io(path, e))
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        let mut g = Graph::empty(self.n, self.directed);
        for (i, j) in self.edges() {
            g.flip(perm[i], perm[j]);
        }
        g
    }
}

fn iter_bits(row: &[u64]) -> impl Iterator<Item = usize> + '_ {
    row.iter().enumerate().flat_map(|(w, &word)| {
        let mut bits = word;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let t = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + t)
            }
        })
    })
}

/// Parses the whitespace-separated 0/1 adjacency format.
pub fn parse_adjacency(text: &str, directed: bool) -> std::result::Result<Graph, String> {
    let rows: Vec<Vec<u8>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(r, line)| {
            line.split_whitespace()
                .map(|tok| match tok {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(format!("row {}: entry `{}` is not 0 or 1", r + 1, other)),
                })
                .collect()
        })
        .collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err("empty adjacency matrix".into());
    }
    Graph::from_matrix(&rows, directed).map_err(|e| match e {
        Error::InvalidGraph(msg) => msg,
        other => other.to_string(),
    })
}

pub fn load_adjacency(path: impl AsRef<Path>, directed: bool) -> Result<Graph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_adjacency(&text, directed).map_err(|msg| Error::parse(path, msg))
}

/// Categorical nodal covariate. Levels are interned in order of first
/// appearance; `labels[level]` is the original token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeAttribute {
    pub name: String,
    pub values: Vec<u32>,
    pub labels: Vec<String>,
}

impl NodeAttribute {
    pub fn from_labels<S: AsRef<str>>(name: impl Into<String>, tokens: &[S]) -> Self {
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut labels = Vec::new();
        let values = tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                *index.entry(t.to_string()).or_insert_with(|| {
                    labels.push(t.to_string());
                    (labels.len() - 1) as u32
                })
            })
            .collect();
        NodeAttribute {
            name: name.into(),
            values,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn level_count(&self) -> usize {
        self.labels.len()
    }

    /// Original label of node `i`.
    pub fn label(&self, i: usize) -> &str {
        &self.labels[self.values[i] as usize]
    }

    pub fn permuted(&self, perm: &[usize]) -> NodeAttribute {
        let mut values = vec![0; self.values.len()];
        for (i, &v) in self.values.iter().enumerate() {
            values[perm[i]] = v;
        }
        NodeAttribute {
            name: self.name.clone(),
            values,
            labels: self.labels.clone(),
        }
    }
}

pub fn load_attribute(path: impl AsRef<Path>, name: &str, n: usize) -> Result<NodeAttribute> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tokens: Vec<&str> = text
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    if tokens.is_empty() {
        return Err(Error::parse(path, "attribute file is empty"));
    }
    if tokens.len() != n {
        return Err(Error::parse(
            path,
            format!("attribute file has {} rows, expected {}", tokens.len(), n),
        ));
    }
    Ok(NodeAttribute::from_labels(name, &tokens))
}

/// Named collection of nodal attributes attached to a network.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AttributeSet {
    attrs: Vec<NodeAttribute>,
}

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces an attribute by name.
    pub fn insert(&mut self, attr: NodeAttribute) {
        match self.attrs.iter_mut().find(|a| a.name == attr.name) {
            Some(slot) => *slot = attr,
            None => self.attrs.push(attr),
        }
    }

    pub fn with(mut self, attr: NodeAttribute) -> Self {
        self.insert(attr);
        self
    }

    pub fn get(&self, name: &str) -> Option<&NodeAttribute> {
        self.attrs.iter().find(|a| a.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodeAttribute> {
        self.attrs.iter()
    }

    pub fn permuted(&self, perm: &[usize]) -> AttributeSet {
        AttributeSet {
            attrs: self.attrs.iter().map(|a| a.permuted(perm)).collect(),
        }
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        for a in &self.attrs {
            let _ = write!(s, "{}({} levels) ", a.name, a.level_count());
        }
        s.trim_end().to_string()
    }
}
