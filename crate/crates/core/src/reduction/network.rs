//! Weighted multigraphs with two terminals and their reduction to one edge.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::transform::{star_to_mesh, StarGraph};
use crate::connectivity::{para2, Calculus};
use crate::error::{check_unit, Error, Result};

/// Undirected weighted multigraph over arbitrary integer node ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WeightedGraph {
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an edge. Parallel edges are kept; self-loops are rejected.
    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<()> {
        if u == v {
            return Err(Error::InvalidArgument(format!("self-loop on node {u}")));
        }
        check_unit("edge weight", weight)?;
        self.edges.push((u, v, weight));
        Ok(())
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> BTreeSet<usize> {
        self.edges.iter().flat_map(|&(u, v, _)| [u, v]).collect()
    }

    /// Replaces every weight by `f(old)`.
    pub fn map_weights(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let mut out = Self::new();
        for &(u, v, w) in &self.edges {
            out.add_edge(u, v, f(w))?;
        }
        Ok(out)
    }
}

/// A weighted graph with distinguished terminals `A` and `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoTerminalNetwork {
    graph: WeightedGraph,
    a: usize,
    b: usize,
}

impl TwoTerminalNetwork {
    pub fn new(graph: WeightedGraph, a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidArgument(format!("terminals coincide at node {a}")));
        }
        Ok(Self { graph, a, b })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn terminals(&self) -> (usize, usize) {
        (self.a, self.b)
    }
}

/// Choice of the next non-terminal node to eliminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EliminationOrder {
    /// Minimum current degree, ties broken by node id.
    #[default]
    MinDegree,
    /// Uniformly random among nodes of degree at most two when any exist,
    /// otherwise among the nodes of minimum degree.
    Random(u64),
}

/// Result of a full reduction with solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Reduction {
    pub value: f64,
    pub eliminated: usize,
    pub star_mesh_solves: usize,
    /// Largest residual over all star-mesh systems solved on the way.
    pub max_residual: f64,
}

/// Reduces `net` to the single `A`-`B` weight with the default order.
pub fn reduce_two_terminal(calculus: Calculus, net: &TwoTerminalNetwork) -> Result<f64> {
    Ok(reduce_two_terminal_detailed(calculus, net)?.value)
}

pub fn reduce_two_terminal_detailed(calculus: Calculus, net: &TwoTerminalNetwork) -> Result<Reduction> {
    reduce_two_terminal_with(calculus, net, EliminationOrder::MinDegree)
}

struct Work {
    ids: Vec<usize>,
    adj: Vec<BTreeMap<usize, f64>>,
}

impl Work {
    fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    fn merge_edge(&mut self, calculus: Calculus, u: usize, v: usize, w: f64) {
        if w <= 0.0 {
            return;
        }
        let merged = match self.adj[u].get(&v) {
            Some(&old) => para2(calculus, old, w),
            None => w,
        };
        self.adj[u].insert(v, merged);
        self.adj[v].insert(u, merged);
    }

    fn detach(&mut self, v: usize) -> Vec<(usize, f64)> {
        let legs: Vec<(usize, f64)> = std::mem::take(&mut self.adj[v]).into_iter().collect();
        for &(u, _) in &legs {
            self.adj[u].remove(&v);
        }
        legs
    }
}

/// Builds the working copy restricted to the component of `A`, or `None`
/// when `B` is unreachable.
fn working_copy(calculus: Calculus, net: &TwoTerminalNetwork) -> Option<(Work, usize, usize)> {
    let mut neighbours: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, v, w) in net.graph.edges() {
        if w > 0.0 {
            neighbours.entry(u).or_default().push(v);
            neighbours.entry(v).or_default().push(u);
        }
    }
    let mut reached = BTreeSet::from([net.a]);
    let mut queue = VecDeque::from([net.a]);
    while let Some(u) = queue.pop_front() {
        for &v in neighbours.get(&u).into_iter().flatten() {
            if reached.insert(v) {
                queue.push_back(v);
            }
        }
    }
    if !reached.contains(&net.b) {
        return None;
    }

    let ids: Vec<usize> = reached.into_iter().collect();
    let index: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut work = Work {
        adj: vec![BTreeMap::new(); ids.len()],
        ids,
    };
    for &(u, v, w) in net.graph.edges() {
        if let (Some(&iu), Some(&iv)) = (index.get(&u), index.get(&v)) {
            work.merge_edge(calculus, iu, iv, w);
        }
    }
    Some((work, index[&net.a], index[&net.b]))
}

/// Reduces `net` by parallel merges, series merges of degree-two nodes and
/// star-mesh elimination, visiting non-terminals in the given order.
///
/// The result is exact on series-parallel networks. Elsewhere the star-mesh
/// step is an approximation: it preserves every pairwise weight of the star
/// but not their correlations.
pub fn reduce_two_terminal_with(
    calculus: Calculus,
    net: &TwoTerminalNetwork,
    order: EliminationOrder,
) -> Result<Reduction> {
    let mut report = Reduction {
        value: 0.0,
        eliminated: 0,
        star_mesh_solves: 0,
        max_residual: 0.0,
    };
    let Some((mut work, a, b)) = working_copy(calculus, net) else {
        return Ok(report);
    };

    let mut rng = match order {
        EliminationOrder::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        EliminationOrder::MinDegree => None,
    };
    let mut queue: BTreeSet<(usize, usize)> = (0..work.ids.len())
        .filter(|&v| v != a && v != b)
        .map(|v| (work.degree(v), v))
        .collect();

    while let Some(&(deg, first)) = queue.iter().next() {
        let v = match rng.as_mut() {
            None => first,
            Some(rng) => {
                let pool: Vec<usize> = if deg <= 2 {
                    queue.iter().take_while(|e| e.0 <= 2).map(|e| e.1).collect()
                } else {
                    queue.iter().take_while(|e| e.0 == deg).map(|e| e.1).collect()
                };
                *pool.choose(rng).expect("pool is non-empty")
            }
        };
        queue.remove(&(work.degree(v), v));
        // only the neighbours of v change degree below
        let touched: Vec<usize> = work.adj[v].keys().copied().filter(|&u| u != a && u != b).collect();
        for &u in &touched {
            queue.remove(&(work.degree(u), u));
        }

        let legs = work.detach(v);

        match legs.len() {
            0 | 1 => {}
            2 => {
                let (u, wu) = legs[0];
                let (x, wx) = legs[1];
                work.merge_edge(calculus, u, x, wu * wx);
            }
            _ => {
                let star = StarGraph::new(legs.iter().map(|l| l.1).collect())?;
                let solved = star_to_mesh(calculus, &star).map_err(|e| Error::Elimination {
                    node: work.ids[v],
                    source: Box::new(e),
                })?;
                report.star_mesh_solves += 1;
                report.max_residual = report.max_residual.max(solved.residual);
                let mesh = solved.value;
                for i in 0..legs.len() {
                    for j in (i + 1)..legs.len() {
                        work.merge_edge(calculus, legs[i].0, legs[j].0, mesh.weight(i, j));
                    }
                }
            }
        }
        report.eliminated += 1;

        for &u in &touched {
            queue.insert((work.degree(u), u));
        }
    }

    report.value = work.adj[a].get(&b).copied().unwrap_or(0.0).clamp(0.0, 1.0);
    Ok(report)
}
