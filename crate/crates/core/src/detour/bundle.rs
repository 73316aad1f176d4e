use std::collections::{HashSet, VecDeque};

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::graph::EdgeListGraph;
use crate::connectivity::PathEnsemble;
use crate::error::{Error, Result};

/// Which overlaps are forbidden between the paths of a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Disjointness {
    /// Paths share no edge but may cross at vertices.
    #[default]
    Edge,
    /// Paths share no interior vertex.
    Vertex,
}

/// A-B paths grouped by level: group 0 holds the shortest path, group `k`
/// the paths that a detour stretches by `q^k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathBundle {
    a: u64,
    b: u64,
    paths: Vec<Vec<u64>>,
    groups: Vec<usize>,
}

fn edge_key(x: u64, y: u64) -> (u64, u64) {
    (x.min(y), x.max(y))
}

impl PathBundle {
    /// Validates that each path is a simple A-B walk over graph edges and
    /// that the paths respect `mode`.
    pub fn new(
        graph: &EdgeListGraph,
        a: u64,
        b: u64,
        paths: Vec<Vec<u64>>,
        groups: Vec<usize>,
        mode: Disjointness,
    ) -> Result<Self> {
        if paths.len() != groups.len() {
            return Err(Error::InvalidArgument(format!(
                "{} paths but {} group labels",
                paths.len(),
                groups.len()
            )));
        }
        for p in &paths {
            if p.len() < 2 || p[0] != a || p[p.len() - 1] != b {
                return Err(Error::InvalidArgument(format!("path {p:?} does not join {a} to {b}")));
            }
            let distinct: HashSet<u64> = p.iter().copied().collect();
            if distinct.len() != p.len() {
                return Err(Error::InvalidArgument(format!("path {p:?} revisits a node")));
            }
            if let Some(w) = p.windows(2).find(|w| !graph.has_edge(w[0], w[1])) {
                return Err(Error::InvalidArgument(format!("{}-{} is not an edge", w[0], w[1])));
            }
        }
        let bundle = Self { a, b, paths, groups };
        bundle.check_disjoint(mode)?;
        Ok(bundle)
    }

    pub fn terminals(&self) -> (u64, u64) {
        (self.a, self.b)
    }

    pub fn paths(&self) -> &[Vec<u64>] {
        &self.paths
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    /// Path lengths in links.
    pub fn lengths(&self) -> Vec<u64> {
        self.paths.iter().map(|p| p.len() as u64 - 1).collect()
    }

    /// Length of the shortest group-0 path.
    pub fn kept_length(&self) -> u64 {
        self.lengths()
            .into_iter()
            .zip(&self.groups)
            .filter(|(_, &g)| g == 0)
            .map(|(l, _)| l)
            .min()
            .unwrap_or(0)
    }

    pub fn ensemble(&self) -> Result<PathEnsemble> {
        PathEnsemble::from_lengths(self.lengths())
    }

    /// All edges used by the bundle, sorted, each as `(smaller, larger)`.
    pub fn edges(&self) -> Vec<(u64, u64)> {
        let mut out: Vec<_> = self
            .paths
            .iter()
            .flat_map(|p| p.windows(2).map(|w| edge_key(w[0], w[1])))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn check_disjoint(&self, mode: Disjointness) -> Result<()> {
        let mut seen_edges = HashSet::new();
        let mut seen_nodes = HashSet::new();
        for p in &self.paths {
            for w in p.windows(2) {
                if !seen_edges.insert(edge_key(w[0], w[1])) {
                    return Err(Error::InvalidArgument(format!("edge {}-{} is shared", w[0], w[1])));
                }
            }
            if mode == Disjointness::Vertex {
                for &x in &p[1..p.len() - 1] {
                    if !seen_nodes.insert(x) {
                        return Err(Error::InvalidArgument(format!("interior node {x} is shared")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Edges and interior vertices that a new path may not use, in dense indices.
#[derive(Default)]
struct Blocked {
    edges: HashSet<(usize, usize)>,
    nodes: HashSet<usize>,
}

impl Blocked {
    fn add_path(&mut self, path: &[usize], mode: Disjointness) {
        for w in path.windows(2) {
            self.edges.insert((w[0].min(w[1]), w[0].max(w[1])));
        }
        if mode == Disjointness::Vertex {
            self.nodes.extend(&path[1..path.len() - 1]);
        }
    }

    fn edge_open(&self, x: usize, y: usize) -> bool {
        !self.edges.contains(&(x.min(y), x.max(y)))
    }
}

/// Shortest A-B path avoiding `blocked`; among shortest paths the one
/// taking the smallest next node id at every step.
fn shortest_path(g: &EdgeListGraph, a: usize, b: usize, blocked: &Blocked) -> Option<Vec<usize>> {
    let mut dist = vec![u32::MAX; g.node_count()];
    dist[b] = 0;
    let mut queue = VecDeque::from([b]);
    while let Some(x) = queue.pop_front() {
        if x == a {
            break;
        }
        for &y in g.adj(x) {
            let open = blocked.edge_open(x, y);
            if dist[y] == u32::MAX && open && (y == a || !blocked.nodes.contains(&y)) {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    if dist[a] == u32::MAX {
        return None;
    }
    let mut path = vec![a];
    let mut x = a;
    while x != b {
        // adjacency is sorted, so the first admissible neighbour has the smallest id
        x = *g
            .adj(x)
            .iter()
            .find(|&&y| dist[y] != u32::MAX && dist[y] + 1 == dist[x] && blocked.edge_open(x, y))?;
        path.push(x);
    }
    Some(path)
}

/// Number of paths per group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BundleShape(pub Vec<usize>);

impl Default for BundleShape {
    fn default() -> Self {
        Self(vec![1, 3])
    }
}

impl BundleShape {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    fn labels(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
            .collect()
    }
}

/// Greedy bundle of four edge-disjoint paths: one shortest path, then three
/// more, each the shortest path over the edges left by its predecessors.
pub fn extract_bundle(graph: &EdgeListGraph, a: u64, b: u64) -> Result<PathBundle> {
    extract_bundle_with(graph, a, b, &BundleShape::default(), Disjointness::Edge)
}

pub fn extract_bundle_with(
    graph: &EdgeListGraph,
    a: u64,
    b: u64,
    shape: &BundleShape,
    mode: Disjointness,
) -> Result<PathBundle> {
    if a == b {
        return Err(Error::InvalidArgument(format!("terminals coincide ({a})")));
    }
    let (ia, ib) = (graph.idx(a)?, graph.idx(b)?);
    let labels = shape.labels();
    let mut blocked = Blocked::default();
    let mut paths = Vec::with_capacity(labels.len());
    for found in 0..labels.len() {
        let p = shortest_path(graph, ia, ib, &blocked).ok_or_else(|| {
            Error::Infeasible(format!(
                "only {found} disjoint path(s) join {a} and {b}, {} needed",
                labels.len()
            ))
        })?;
        blocked.add_path(&p, mode);
        paths.push(p.into_iter().map(|i| graph.id(i)).collect());
    }
    PathBundle::new(graph, a, b, paths, labels, mode)
}

#[derive(Debug, Clone, Serialize)]
pub struct RerouteOptions {
    /// Bundles requested per call.
    pub samples: usize,
    /// Depth-first expansions allowed per sample.
    pub budget: u64,
    /// Consecutive failed samples after which the search gives up.
    pub max_failures: usize,
    pub disjointness: Disjointness,
}

impl Default for RerouteOptions {
    fn default() -> Self {
        Self {
            samples: 20,
            budget: 1_000_000,
            max_failures: 3,
            disjointness: Disjointness::Edge,
        }
    }
}

struct ExactSearch<'a> {
    graph: &'a EdgeListGraph,
    dist_to_b: &'a [u32],
    b: usize,
    len: usize,
    on_path: Vec<bool>,
    path: Vec<usize>,
    expansions: u64,
    budget: u64,
}

impl ExactSearch<'_> {
    fn run(&mut self, a: usize, blocked: &Blocked, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
        self.path.clear();
        self.path.push(a);
        self.on_path[a] = true;
        let found = self.dfs(a, blocked, rng);
        for &x in &self.path {
            self.on_path[x] = false;
        }
        found.then(|| self.path.clone())
    }

    fn dfs(&mut self, x: usize, blocked: &Blocked, rng: &mut ChaCha8Rng) -> bool {
        if self.expansions >= self.budget {
            return false;
        }
        self.expansions += 1;
        let remaining = self.len - (self.path.len() - 1);
        if remaining == 0 {
            return x == self.b;
        }
        let mut next: Vec<usize> = self
            .graph
            .adj(x)
            .iter()
            .copied()
            .filter(|&y| {
                if self.on_path[y] || !blocked.edge_open(x, y) {
                    return false;
                }
                if y != self.b && blocked.nodes.contains(&y) {
                    return false;
                }
                if y == self.b {
                    remaining == 1
                } else {
                    self.dist_to_b[y] != u32::MAX && (self.dist_to_b[y] as usize) < remaining
                }
            })
            .collect();
        next.shuffle(rng);
        for y in next {
            self.path.push(y);
            self.on_path[y] = true;
            if self.dfs(y, blocked, rng) {
                return true;
            }
            self.on_path[y] = false;
            self.path.pop();
        }
        false
    }
}

/// Stretches a bundle: keeps group 0 and replaces every group-`k` path of
/// length `l` by a randomly drawn simple path of exactly `q^k l` links,
/// disjoint from everything already placed.
pub fn reroute_bundle(
    graph: &EdgeListGraph,
    bundle: &PathBundle,
    q: u64,
    samples: usize,
    seed: u64,
) -> Result<Vec<PathBundle>> {
    let opts = RerouteOptions {
        samples,
        ..RerouteOptions::default()
    };
    reroute_bundle_with(graph, bundle, q, seed, &opts)
}

pub fn reroute_bundle_with(
    graph: &EdgeListGraph,
    bundle: &PathBundle,
    q: u64,
    seed: u64,
    opts: &RerouteOptions,
) -> Result<Vec<PathBundle>> {
    if q == 0 {
        return Err(Error::InvalidArgument("stretch factor q must be at least 1".into()));
    }
    if q == 1 {
        return Ok(vec![bundle.clone()]);
    }
    let mode = opts.disjointness;
    let (a, b) = bundle.terminals();
    let (ia, ib) = (graph.idx(a)?, graph.idx(b)?);
    let to_idx = |p: &[u64]| p.iter().map(|&x| graph.idx(x)).collect::<Result<Vec<_>>>();

    let mut base = Blocked::default();
    let mut kept = Vec::new();
    let mut targets = Vec::new();
    for (p, &g) in bundle.paths().iter().zip(bundle.groups()) {
        if g == 0 {
            base.add_path(&to_idx(p)?, mode);
            kept.push(p.clone());
        } else {
            let len = u32::try_from(g)
                .ok()
                .and_then(|g| q.checked_pow(g))
                .and_then(|s| s.checked_mul(p.len() as u64 - 1))
                .ok_or_else(|| Error::Overflow(format!("detour length {q}^{g} * {}", p.len() - 1)))?;
            targets.push((g, len as usize));
        }
    }

    let dist_to_b = graph.bfs_distances(ib);
    let mut search = ExactSearch {
        graph,
        dist_to_b: &dist_to_b,
        b: ib,
        len: 0,
        on_path: vec![false; graph.node_count()],
        path: Vec::new(),
        expansions: 0,
        budget: opts.budget,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(opts.samples);
    let mut failures = 0;
    while out.len() < opts.samples && failures < opts.max_failures {
        search.expansions = 0;
        let mut blocked = Blocked {
            edges: base.edges.clone(),
            nodes: base.nodes.clone(),
        };
        let mut paths = kept.clone();
        let mut groups = vec![0; kept.len()];
        // draw the detours in a random order so early ones do not always win
        let order = index::sample(&mut rng, targets.len(), targets.len());
        let mut placed = vec![None; targets.len()];
        let mut ok = true;
        for t in order.iter() {
            search.len = targets[t].1;
            match search.run(ia, &blocked, &mut rng) {
                Some(p) => {
                    blocked.add_path(&p, mode);
                    placed[t] = Some(p);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            failures += 1;
            continue;
        }
        failures = 0;
        for ((g, _), p) in targets.iter().zip(placed) {
            paths.push(p.expect("placed").into_iter().map(|i| graph.id(i)).collect());
            groups.push(*g);
        }
        out.push(PathBundle::new(graph, a, b, paths, groups, mode)?);
    }
    if out.len() < opts.samples {
        warn!(
            "pair ({a}, {b}), q = {q}: found {} of {} detour samples",
            out.len(),
            opts.samples
        );
    }
    Ok(out)
}

/// Draws up to `count` distinct hub pairs (both degrees at least
/// `min_degree`) that admit a full bundle, uniformly among feasible pairs.
pub fn select_hub_pairs(graph: &EdgeListGraph, min_degree: usize, count: usize, seed: u64) -> Vec<(u64, u64)> {
    select_hub_pairs_with(
        graph,
        min_degree,
        count,
        seed,
        &BundleShape::default(),
        Disjointness::Edge,
    )
}

pub fn select_hub_pairs_with(
    graph: &EdgeListGraph,
    min_degree: usize,
    count: usize,
    seed: u64,
    shape: &BundleShape,
    mode: Disjointness,
) -> Vec<(u64, u64)> {
    let hubs: Vec<u64> = graph
        .node_ids()
        .iter()
        .copied()
        .filter(|&id| graph.degree(id) >= min_degree)
        .collect();
    let h = hubs.len() as u64;
    let total = h * h.saturating_sub(1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tried = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count && (tried.len() as u64) < total {
        let pick = index::sample(&mut rng, hubs.len(), 2);
        let (i, j) = (pick.index(0).min(pick.index(1)), pick.index(0).max(pick.index(1)));
        if !tried.insert((i, j)) {
            continue;
        }
        if extract_bundle_with(graph, hubs[i], hubs[j], shape, mode).is_ok() {
            out.push((hubs[i], hubs[j]));
        }
    }
    if out.len() < count {
        warn!(
            "only {} feasible hub pair(s) among {} hubs of degree >= {min_degree}; {count} requested",
            out.len(),
            hubs.len()
        );
    }
    out
}
