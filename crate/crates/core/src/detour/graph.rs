use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use log::{info, warn};

use crate::error::{Error, Result};

/// Undirected simple graph over integer node ids.
///
/// Nodes are stored densely, in ascending id order, so comparing dense
/// indices compares ids. Adjacency lists are sorted.
#[derive(Debug, Clone, Default)]
pub struct EdgeListGraph {
    ids: Vec<u64>,
    index: BTreeMap<u64, usize>,
    adj: Vec<Vec<usize>>,
    edges: usize,
}

impl EdgeListGraph {
    /// Builds a graph from id pairs, dropping self-loops (with a warning)
    /// and duplicate edges.
    pub fn from_edges(edges: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut set = BTreeSet::new();
        let mut loops = 0usize;
        for (a, b) in edges {
            if a == b {
                loops += 1;
                continue;
            }
            set.insert((a.min(b), a.max(b)));
        }
        if loops > 0 {
            warn!("skipped {loops} self-loop(s)");
        }
        Self::from_unique(set)
    }

    fn from_unique(set: BTreeSet<(u64, u64)>) -> Self {
        let ids: Vec<u64> = set
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for &(a, b) in &set {
            let (i, j) = (index[&a], index[&b]);
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Self {
            ids,
            index,
            adj,
            edges: set.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    /// Node ids in ascending order.
    pub fn node_ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn contains(&self, id: u64) -> bool {
        self.index.contains_key(&id)
    }

    /// Degree of node `id`, zero if absent.
    pub fn degree(&self, id: u64) -> usize {
        self.index.get(&id).map_or(0, |&i| self.adj[i].len())
    }

    /// Sorted neighbour ids of `id`.
    pub fn neighbors(&self, id: u64) -> Vec<u64> {
        match self.index.get(&id) {
            Some(&i) => self.adj[i].iter().map(|&j| self.ids[j]).collect(),
            None => Vec::new(),
        }
    }

    pub fn has_edge(&self, a: u64, b: u64) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&i), Some(&j)) => self.adj[i].binary_search(&j).is_ok(),
            _ => false,
        }
    }

    /// Every edge once, as `(smaller id, larger id)`, sorted.
    pub fn edges(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::with_capacity(self.edges);
        for (i, list) in self.adj.iter().enumerate() {
            for &j in list.iter().filter(|&&j| j > i) {
                out.push((self.ids[i], self.ids[j]));
            }
        }
        out
    }

    /// Copy of the graph without the given edges.
    pub fn without_edges(&self, removed: &[(u64, u64)]) -> Self {
        let drop: BTreeSet<(u64, u64)> = removed.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        Self::from_unique(self.edges().into_iter().filter(|e| !drop.contains(e)).collect())
    }

    pub(crate) fn idx(&self, id: u64) -> Result<usize> {
        self.index
            .get(&id)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("node {id} is not in the graph")))
    }

    pub(crate) fn id(&self, idx: usize) -> u64 {
        self.ids[idx]
    }

    pub(crate) fn adj(&self, idx: usize) -> &[usize] {
        &self.adj[idx]
    }

    /// Hop distances from `source` (dense index); `u32::MAX` marks unreachable.
    pub(crate) fn bfs_distances(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.ids.len()];
        let mut queue = VecDeque::from([source]);
        dist[source] = 0;
        while let Some(x) = queue.pop_front() {
            for &y in &self.adj[x] {
                if dist[y] == u32::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}

/// Reads a whitespace-separated edge list. Lines whose first non-blank
/// character is `#` and blank lines are ignored.
pub fn parse_edge_list(reader: impl Read) -> Result<EdgeListGraph> {
    let mut edges = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected two node ids, found {} field(s)", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<u64>().map_err(|e| Error::Parse {
                line: n + 1,
                message: format!("bad node id {s:?}: {e}"),
            })
        };
        edges.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok(EdgeListGraph::from_edges(edges))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<EdgeListGraph> {
    let path = path.as_ref();
    let g = parse_edge_list(File::open(path)?)?;
    info!(
        "loaded {}: {} nodes, {} edges",
        path.display(),
        g.node_count(),
        g.edge_count()
    );
    Ok(g)
}
