//! Independent oracles and graph builders shared by the integration tests.
//!
//! Nothing here calls into the library's composition code: the values are
//! computed from first principles so that they can check it.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowerperc::{TwoTerminalNetwork, WeightedGraph};

/// Probability that `a` and `b` are connected when each edge is open
/// independently with probability `p`, summed over all `2^E` subsets.
pub fn enumerate_classical(edges: &[(usize, usize)], a: usize, b: usize, p: f64) -> f64 {
    let e = edges.len();
    assert!(e <= 24, "enumeration over {e} edges is too expensive");
    let nodes = edges.iter().map(|&(x, y)| x.max(y)).max().unwrap_or(0).max(a).max(b) + 1;
    let mut total = 0.0;
    let mut parent = vec![0usize; nodes];
    for mask in 0u32..(1u32 << e) {
        for (i, slot) in parent.iter_mut().enumerate() {
            *slot = i;
        }
        let mut open = 0;
        for (k, &(x, y)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                open += 1;
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                parent[rx] = ry;
            }
        }
        if find(&mut parent, a) == find(&mut parent, b) {
            total += p.powi(open) * (1.0 - p).powi(e as i32 - open);
        }
    }
    total
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn fidelity(c: f64) -> f64 {
    (1.0 + (1.0 - c * c).sqrt()) / 2.0
}

pub fn concurrence(f: f64) -> f64 {
    2.0 * (f * (1.0 - f)).sqrt()
}

/// `1 - F(c)` without cancellation.
pub fn infidelity(c: f64) -> f64 {
    c * c / (2.0 * (1.0 + (1.0 - c * c).sqrt()))
}

/// Reference two-link parallel rule for concurrences, carried in `1 - F`.
pub fn quantum_para(a: f64, b: f64) -> f64 {
    let (ga, gb) = (infidelity(a), infidelity(b));
    let g = (ga + gb - ga * gb).min(0.5);
    2.0 * ((1.0 - g) * g).sqrt()
}

pub fn classical_para(a: f64, b: f64) -> f64 {
    1.0 - (1.0 - a) * (1.0 - b)
}

/// A two-terminal series-parallel graph together with its exact weights,
/// tracked during construction.
#[derive(Debug, Clone)]
pub struct SpGraph {
    pub edges: Vec<(usize, usize)>,
    pub a: usize,
    pub b: usize,
    pub nodes: usize,
    pub classical: f64,
    pub quantum: f64,
}

impl SpGraph {
    pub fn link(p: f64, c: f64) -> Self {
        Self {
            edges: vec![(0, 1)],
            a: 0,
            b: 1,
            nodes: 2,
            classical: p,
            quantum: c,
        }
    }

    fn shifted(&self, by: usize) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(x, y)| (x + by, y + by)).collect()
    }

    /// `self` then `other`, joined at `self.b == other.a`.
    pub fn series(&self, other: &Self) -> Self {
        let shift = self.nodes;
        let relabel = |x: usize| if x == other.a + shift { self.b } else { x };
        let mut edges = self.edges.clone();
        edges.extend(other.shifted(shift).into_iter().map(|(x, y)| (relabel(x), relabel(y))));
        compact(Self {
            edges,
            a: self.a,
            b: relabel(other.b + shift),
            nodes: self.nodes + other.nodes,
            classical: self.classical * other.classical,
            quantum: self.quantum * other.quantum,
        })
    }

    pub fn parallel(&self, other: &Self) -> Self {
        let shift = self.nodes;
        let relabel = |x: usize| {
            if x == other.a + shift {
                self.a
            } else if x == other.b + shift {
                self.b
            } else {
                x
            }
        };
        let mut edges = self.edges.clone();
        edges.extend(other.shifted(shift).into_iter().map(|(x, y)| (relabel(x), relabel(y))));
        compact(Self {
            edges,
            a: self.a,
            b: self.b,
            nodes: self.nodes + other.nodes,
            classical: classical_para(self.classical, other.classical),
            quantum: quantum_para(self.quantum, other.quantum),
        })
    }

    pub fn network(&self, weight: impl Fn(usize) -> f64) -> TwoTerminalNetwork {
        let mut g = WeightedGraph::new();
        for (k, &(x, y)) in self.edges.iter().enumerate() {
            g.add_edge(x, y, weight(k)).unwrap();
        }
        TwoTerminalNetwork::new(g, self.a, self.b).unwrap()
    }
}

/// Renumbers nodes densely in order of first appearance.
fn compact(mut g: SpGraph) -> SpGraph {
    let mut map = std::collections::BTreeMap::new();
    let mut next = 0;
    let mut id = |x: usize, map: &mut std::collections::BTreeMap<usize, usize>| {
        *map.entry(x).or_insert_with(|| {
            next += 1;
            next - 1
        })
    };
    g.a = id(g.a, &mut map);
    g.b = id(g.b, &mut map);
    g.edges = g
        .edges
        .iter()
        .map(|&(x, y)| (id(x, &mut map), id(y, &mut map)))
        .collect();
    g.nodes = map.len();
    g
}

/// Random series-parallel graph with exactly `edges` links, all of weight
/// `(p, c)`.
pub fn random_sp(rng: &mut impl Rng, edges: usize, p: f64, c: f64) -> SpGraph {
    assert!(edges >= 1);
    if edges == 1 {
        return SpGraph::link(p, c);
    }
    let left = rng.gen_range(1..edges);
    let (x, y) = (random_sp(rng, left, p, c), random_sp(rng, edges - left, p, c));
    if rng.gen_bool(0.5) {
        x.series(&y)
    } else {
        x.parallel(&y)
    }
}

/// Classical two-terminal network from an unweighted edge list.
pub fn uniform_network(edges: &[(usize, usize)], a: usize, b: usize, w: f64) -> TwoTerminalNetwork {
    let mut g = WeightedGraph::new();
    for &(x, y) in edges {
        g.add_edge(x, y, w).unwrap();
    }
    TwoTerminalNetwork::new(g, a, b).unwrap()
}

/// Wheatstone bridge between 0 and 3.
pub fn wheatstone() -> Vec<(usize, usize)> {
    vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]
}

pub fn complete(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// `side x side` square grid, nodes numbered row by row.
pub fn grid(side: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            if c + 1 < side {
                e.push((i, i + 1));
            }
            if r + 1 < side {
                e.push((i, i + side));
            }
        }
    }
    e
}

/// Generation-`n` `(u, v)` flower by repeated link replacement, terminals 0
/// and 1.
pub fn flower_edges(u: usize, v: usize, n: u32) -> Vec<(usize, usize)> {
    let mut edges = vec![(0usize, 1usize)];
    let mut next = 2;
    for _ in 0..n {
        let mut grown = Vec::new();
        for &(a, b) in &edges {
            for arm in [u, v] {
                let mut prev = a;
                for _ in 1..arm {
                    grown.push((prev, next));
                    prev = next;
                    next += 1;
                }
                grown.push((prev, b));
            }
        }
        edges = grown;
    }
    edges
}

/// Nested renormalization of the flower crossing, written out directly.
pub fn nested_rg(quantum: bool, u: i32, v: i32, n: u32, w: f64) -> f64 {
    (0..n).fold(w, |x, _| {
        let (a, b) = (x.powi(u), x.powi(v));
        if quantum {
            quantum_para(a, b)
        } else {
            classical_para(a, b)
        }
    })
}

/// Barabasi-Albert graph: each new node attaches to `m` distinct existing
/// nodes chosen proportionally to degree.
pub fn barabasi_albert(nodes: usize, m: usize, seed: u64) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut targets: Vec<u64> = Vec::new();
    for i in 0..=m as u64 {
        for j in 0..i {
            edges.push((j, i));
            targets.extend([i, j]);
        }
    }
    for new in (m as u64 + 1)..nodes as u64 {
        let mut chosen: Vec<u64> = Vec::with_capacity(m);
        while chosen.len() < m {
            let t = *targets.choose(&mut rng).unwrap();
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for t in chosen {
            edges.push((t, new));
            targets.extend([t, new]);
        }
    }
    edges
}
