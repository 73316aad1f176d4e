//! Star-mesh and mesh-star transforms.
//!
//! A star with root `r` and leaves `1..s` is replaced by a complete graph on
//! the leaves whose pairwise two-terminal weights reproduce the star's
//! pairwise series weights:
//!
//! ```text
//! seri(w_i, w_j) = cross(i, j; mesh)    for all i < j
//! ```
//!
//! `cross` on a complete graph is itself evaluated by eliminating the other
//! nodes one by one with smaller star-mesh transforms (a double recursion),
//! so the `s(s-1)/2` equations are solved numerically with Broyden's method.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::broyden::{broyden_solve, BroydenOptions, BroydenSolution, EPS};
use super::network::{reduce_two_terminal_detailed, TwoTerminalNetwork, WeightedGraph};
use crate::connectivity::{para2, Calculus};
use crate::error::{check_unit, Error, Result};

/// Residual budget for every solved transform.
pub const TRANSFORM_TOL: f64 = 1e-10;

/// Largest star solved as a full mesh. Every residual evaluation reduces
/// the candidate mesh recursively, so the cost grows faster than
/// factorially with the number of legs.
pub const MAX_STAR_LEGS: usize = 6;

/// Star with one root and `s >= 2` leaves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarGraph {
    pub leaf_weights: Vec<f64>,
}

impl StarGraph {
    pub fn new(leaf_weights: Vec<f64>) -> Result<Self> {
        if leaf_weights.len() < 2 {
            return Err(Error::InvalidArgument("a star needs at least two leaves".into()));
        }
        for &w in &leaf_weights {
            check_unit("leaf weight", w)?;
        }
        Ok(Self { leaf_weights })
    }

    pub fn size(&self) -> usize {
        self.leaf_weights.len()
    }
}

/// Complete graph on `s` nodes, weights stored row-major over `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshGraph {
    size: usize,
    weights: Vec<f64>,
}

fn pair_index(size: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    // offset of row i in the strict upper triangle
    i * (2 * size - i - 1) / 2 + (j - i - 1)
}

impl MeshGraph {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            weights: vec![0.0; size * size.saturating_sub(1) / 2],
        }
    }

    /// Builds a mesh from the upper-triangle weights
    /// `(0,1), (0,2), ..., (0,s-1), (1,2), ...`.
    pub fn from_upper(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size < 2 || weights.len() != size * (size - 1) / 2 {
            return Err(Error::InvalidArgument(format!(
                "a {size}-node mesh needs {} weights, got {}",
                size * size.saturating_sub(1) / 2,
                weights.len()
            )));
        }
        for &w in &weights {
            check_unit("mesh weight", w)?;
        }
        Ok(Self { size, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[pair_index(self.size, i, j)]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        let k = pair_index(self.size, i, j);
        self.weights[k] = w;
    }

    pub fn upper(&self) -> &[f64] {
        &self.weights
    }

    /// Removes `node`, renumbering the remaining nodes in order.
    fn without(&self, node: usize) -> MeshGraph {
        let keep: Vec<usize> = (0..self.size).filter(|&v| v != node).collect();
        let mut out = MeshGraph::zeros(self.size - 1);
        for (a, &u) in keep.iter().enumerate() {
            for (b, &v) in keep.iter().enumerate().skip(a + 1) {
                out.set_weight(a, b, self.weight(u, v));
            }
        }
        out
    }
}

/// A solved transform together with its max-norm residual.
#[derive(Debug, Clone, Serialize)]
pub struct Solved<T> {
    pub value: T,
    pub residual: f64,
}

/// Net two-terminal weight between `i` and `j` in `mesh`, by recursive
/// elimination of every other node.
pub fn cross_weight(calculus: Calculus, mesh: &MeshGraph, i: usize, j: usize) -> Result<f64> {
    let s = mesh.size();
    if i == j || i >= s || j >= s {
        return Err(Error::InvalidArgument(format!(
            "cross weight needs two distinct nodes of a {s}-node mesh, got ({i}, {j})"
        )));
    }
    cross_unchecked(calculus, mesh, i, j)
}

fn cross_unchecked(calculus: Calculus, mesh: &MeshGraph, i: usize, j: usize) -> Result<f64> {
    let s = mesh.size();
    if s == 2 {
        return Ok(mesh.weight(0, 1));
    }
    // eliminate the highest-numbered node that is not a terminal
    let k = (0..s).rev().find(|&v| v != i && v != j).expect("s >= 3");
    let legs: Vec<f64> = (0..s).filter(|&v| v != k).map(|v| mesh.weight(k, v)).collect();
    let sub = star_to_mesh_legs(calculus, &legs)?.value;
    let mut comb = mesh.without(k);
    for a in 0..comb.size() {
        for b in (a + 1)..comb.size() {
            let w = para2(calculus, comb.weight(a, b), sub.weight(a, b));
            comb.set_weight(a, b, w);
        }
    }
    let remap = |v: usize| if v > k { v - 1 } else { v };
    cross_unchecked(calculus, &comb, remap(i), remap(j))
}

/// Replaces a star by the complete graph on its leaves.
pub fn star_to_mesh(calculus: Calculus, star: &StarGraph) -> Result<Solved<MeshGraph>> {
    star_to_mesh_legs(calculus, &star.leaf_weights)
}

fn star_to_mesh_legs(calculus: Calculus, legs: &[f64]) -> Result<Solved<MeshGraph>> {
    let s = legs.len();
    let mut mesh = MeshGraph::zeros(s);
    // leaves hanging on a dead leg are cut off from everything
    let live: Vec<usize> = (0..s).filter(|&i| legs[i] > 0.0).collect();
    match live.len() {
        0 | 1 => {
            return Ok(Solved {
                value: mesh,
                residual: 0.0,
            })
        }
        2 => {
            let (a, b) = (live[0], live[1]);
            mesh.set_weight(a, b, legs[a] * legs[b]);
            return Ok(Solved {
                value: mesh,
                residual: 0.0,
            });
        }
        _ => {}
    }

    // A perfect leg fuses its leaf with the centre, which leaves a star on
    // that leaf. The mesh solution then sits on the boundary of the box,
    // where the quantum Jacobian vanishes, so it is written down directly.
    if let Some(&hub) = live.iter().find(|&&i| legs[i] >= 1.0 - EPS) {
        for &i in live.iter().filter(|&&i| i != hub) {
            mesh.set_weight(hub.min(i), hub.max(i), legs[i]);
        }
        return Ok(Solved {
            value: mesh,
            residual: 0.0,
        });
    }

    let sub_legs: Vec<f64> = live.iter().map(|&i| legs[i]).collect();
    let sub = solve_full_star(calculus, &sub_legs)?;
    for (a, &u) in live.iter().enumerate() {
        for (b, &v) in live.iter().enumerate().skip(a + 1) {
            mesh.set_weight(u, v, sub.value.weight(a, b));
        }
    }
    Ok(Solved {
        value: mesh,
        residual: sub.residual,
    })
}

fn solve_full_star(calculus: Calculus, legs: &[f64]) -> Result<Solved<MeshGraph>> {
    let s = legs.len();
    if s > MAX_STAR_LEGS {
        return Err(Error::Infeasible(format!(
            "a star with {s} live legs exceeds the supported maximum of {MAX_STAR_LEGS}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..s).flat_map(|i| ((i + 1)..s).map(move |j| (i, j))).collect();
    let targets: Vec<f64> = pairs.iter().map(|&(i, j)| legs[i] * legs[j]).collect();

    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let mesh = MeshGraph {
            size: s,
            weights: x.to_vec(),
        };
        pairs
            .iter()
            .zip(&targets)
            .map(|(&(i, j), &t)| Ok(cross_unchecked(calculus, &mesh, i, j)? - t))
            .collect()
    };

    let opts = BroydenOptions {
        accept: TRANSFORM_TOL,
        ..BroydenOptions::default()
    };
    // Near perfect links the quantum parallel rule saturates and the
    // Jacobian vanishes at the natural start, so smaller starts are tried.
    let mut last = None;
    let mut sol = None;
    for power in [1, 2, 4] {
        let start: Vec<f64> = targets.iter().map(|t| t.powi(power)).collect();
        match broyden_solve(&residual, &start, opts) {
            Ok(found) => {
                sol = Some(found);
                break;
            }
            Err(e @ Error::Solver { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    let sol = match sol {
        Some(sol) => sol,
        None => continuation(&pairs, legs, opts, |t: &[f64], x: &[f64]| {
            let mesh = MeshGraph {
                size: s,
                weights: x.to_vec(),
            };
            pairs
                .iter()
                .zip(t)
                .map(|(&(i, j), &t)| Ok(cross_unchecked(calculus, &mesh, i, j)? - t))
                .collect()
        })
        .map_err(|_| {
            log::debug!("{calculus:?} star with legs {legs:?} did not converge");
            last.expect("at least one attempt")
        })?,
    };
    Ok(Solved {
        value: MeshGraph {
            size: s,
            weights: sol.x,
        },
        residual: sol.residual,
    })
}

/// Follows the solution from legs scaled down to `legs / 4`, where the mesh
/// is almost the bare pair products, up to the requested legs.
fn continuation(
    pairs: &[(usize, usize)],
    legs: &[f64],
    opts: BroydenOptions,
    residual: impl Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
) -> Result<BroydenSolution> {
    let targets_at = |lambda: f64| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(i, j)| lambda * lambda * legs[i] * legs[j])
            .collect()
    };
    let mut lambda = 0.25;
    let mut x = targets_at(lambda);
    let mut step = 0.05;
    let mut last: Option<BroydenSolution> = None;
    while step > 1e-4 {
        let next = (lambda + step).min(1.0);
        let t = targets_at(next);
        match broyden_solve(|x: &[f64]| residual(&t, x), &x, opts) {
            Ok(found) => {
                lambda = next;
                x.clone_from(&found.x);
                if lambda >= 1.0 {
                    return Ok(found);
                }
                last = Some(found);
                step *= 1.5;
            }
            Err(Error::Solver { .. }) => step /= 2.0,
            Err(e) => return Err(e),
        }
    }
    let residual = last.map_or(f64::INFINITY, |s| s.residual);
    Err(Error::Solver {
        iterations: 0,
        residual,
    })
}

/// Replaces a subgraph, seen from its `boundary` nodes, by a star whose
/// pairwise series weights equal the subgraph's pairwise cross weights.
///
/// Since series composition is a product in both calculi, the equations are
/// linear in `ln w`. Two boundary nodes give a symmetric split, three give
/// the unique solution, more are solved in the least-squares sense and
/// rejected when the residual exceeds [`TRANSFORM_TOL`].
pub fn mesh_to_star(calculus: Calculus, graph: &WeightedGraph, boundary: &[usize]) -> Result<Solved<StarGraph>> {
    let k = boundary.len();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "mesh-star needs at least two boundary nodes".into(),
        ));
    }
    let mut cross = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let net = TwoTerminalNetwork::new(graph.clone(), boundary[a], boundary[b])?;
            let c = reduce_two_terminal_detailed(calculus, &net)?.value;
            cross[(a, b)] = c;
            cross[(b, a)] = c;
        }
    }

    // a boundary node with no connection to anyone gets a dead leg
    let dead: Vec<bool> = (0..k)
        .map(|a| (0..k).filter(|&b| b != a).all(|b| cross[(a, b)] == 0.0))
        .collect();
    let live: Vec<usize> = (0..k).filter(|&a| !dead[a]).collect();
    let mut legs = vec![0.0; k];

    match live.len() {
        0 => {}
        1 => {
            return Err(Error::Inconsistent {
                residual: 0.0,
                tolerance: TRANSFORM_TOL,
            })
        }
        2 => {
            let c = cross[(live[0], live[1])];
            legs[live[0]] = c.sqrt();
            legs[live[1]] = c.sqrt();
        }
        m => {
            let mut normal = DMatrix::<f64>::zeros(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            for a in 0..m {
                for b in 0..m {
                    if a == b {
                        continue;
                    }
                    let c = cross[(live[a], live[b])];
                    if c <= 0.0 {
                        return Err(Error::Inconsistent {
                            residual: f64::INFINITY,
                            tolerance: TRANSFORM_TOL,
                        });
                    }
                    normal[(a, a)] += 1.0;
                    normal[(a, b)] += 1.0;
                    rhs[a] += c.ln();
                }
            }
            let logs = normal
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::InvalidArgument("singular mesh-star system".into()))?;
            for (a, &u) in live.iter().enumerate() {
                legs[u] = logs[a].exp();
            }
        }
    }

    let mut residual: f64 = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            residual = residual.max((legs[a] * legs[b] - cross[(a, b)]).abs());
        }
    }
    if residual > TRANSFORM_TOL {
        return Err(Error::Inconsistent {
            residual,
            tolerance: TRANSFORM_TOL,
        });
    }
    if legs.iter().any(|&w| w > 1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "mesh-star legs {legs:?} exceed a perfect link"
        )));
    }
    for w in legs.iter_mut() {
        *w = w.min(1.0);
    }
    Ok(Solved {
        value: StarGraph { leaf_weights: legs },
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Calculus::*;

    fn seri2(a: f64, b: f64) -> f64 {
        a * b
    }

    #[test]
    fn pair_indexing_covers_upper_triangle() {
        let s = 5;
        let mut seen = vec![false; s * (s - 1) / 2];
        for i in 0..s {
            for j in (i + 1)..s {
                let k = pair_index(s, i, j);
                assert!(!seen[k]);
                seen[k] = true;
                assert_eq!(k, pair_index(s, j, i));
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn two_node_mesh_cross_is_its_edge() {
        let m = MeshGraph::from_upper(2, vec![0.42]).unwrap();
        assert_eq!(cross_weight(Quantum, &m, 0, 1).unwrap(), 0.42);
        assert!(cross_weight(Quantum, &m, 0, 0).is_err());
    }

    #[test]
    fn triangle_cross_is_series_parallel() {
        // nodes i=0, j=1, k=2; a on i-k, b on k-j, d on i-j
        let (a, b, d) = (0.7, 0.4, 0.3);
        let m = MeshGraph::from_upper(3, vec![d, a, b]).unwrap();
        for calc in Calculus::BOTH {
            let got = cross_weight(calc, &m, 0, 1).unwrap();
            assert!((got - para2(calc, d, seri2(a, b))).abs() < 1e-15);
        }
    }

    #[test]
    fn dead_star_gives_dead_mesh() {
        let star = StarGraph::new(vec![0.0; 4]).unwrap();
        let m = star_to_mesh(Quantum, &star).unwrap().value;
        assert!(m.upper().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn symmetric_three_leaf_star_classical() {
        let star = StarGraph::new(vec![0.9; 3]).unwrap();
        let sol = star_to_mesh(Classical, &star).unwrap();
        let m = &sol.value;
        let w = m.weight(0, 1);
        assert!((m.weight(0, 2) - w).abs() < 1e-10 && (m.weight(1, 2) - w).abs() < 1e-10);
        // para(w, w^2) = 0.81 by substitution
        assert!((w + w * w - w * w * w - 0.81).abs() < 1e-10);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((cross_weight(Classical, m, i, j).unwrap() - 0.81).abs() < 1e-10);
        }
        assert!(sol.residual <= TRANSFORM_TOL);
    }

    #[test]
    fn symmetric_three_leaf_star_quantum() {
        let star = StarGraph::new(vec![0.85; 3]).unwrap();
        let sol = star_to_mesh(Quantum, &star).unwrap();
        let m = &sol.value;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let c = cross_weight(Quantum, m, i, j).unwrap();
            assert!((c - 0.85 * 0.85).abs() < 1e-10);
        }
        assert!((m.weight(0, 1) - m.weight(1, 2)).abs() < 1e-9);
    }

    #[test]
    fn four_leaf_star_round_trips_through_cross() {
        let legs = vec![0.9, 0.7, 0.8, 0.6];
        for calc in Calculus::BOTH {
            let star = StarGraph::new(legs.clone()).unwrap();
            let sol = star_to_mesh(calc, &star).unwrap();
            assert!(sol.residual <= TRANSFORM_TOL);
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let c = cross_weight(calc, &sol.value, i, j).unwrap();
                    assert!((c - legs[i] * legs[j]).abs() < 1e-10, "{calc} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn perfect_leg_makes_its_leaf_the_hub() {
        let cases = [
            vec![0.9, 1.0, 0.8],
            vec![1.0, 1.0, 0.47, 0.92, 0.97],
            vec![0.993, 1.0, 0.986, 0.176],
        ];
        for legs in cases {
            for calc in Calculus::BOTH {
                let star = StarGraph::new(legs.clone()).unwrap();
                let sol = star_to_mesh(calc, &star).unwrap();
                let s = legs.len();
                for i in 0..s {
                    for j in (i + 1)..s {
                        let c = cross_weight(calc, &sol.value, i, j).unwrap();
                        assert!((c - legs[i] * legs[j]).abs() < 1e-12, "{calc} {legs:?} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn dead_leg_isolates_its_leaf() {
        let star = StarGraph::new(vec![0.9, 0.0, 0.8]).unwrap();
        let m = star_to_mesh(Classical, &star).unwrap().value;
        assert_eq!(m.weight(0, 1), 0.0);
        assert_eq!(m.weight(1, 2), 0.0);
        assert!((m.weight(0, 2) - 0.72).abs() < 1e-15);
    }

    #[test]
    fn star_needs_two_leaves() {
        assert!(StarGraph::new(vec![0.5]).is_err());
        assert!(StarGraph::new(vec![0.5, 1.5]).is_err());
    }

    fn five_cycle(w: [f64; 5]) -> WeightedGraph {
        // edges 1-3, 1-5, 2-5, 2-4, 3-4 of the five-node loop
        let mut g = WeightedGraph::new();
        let e = [(1, 3), (1, 5), (2, 5), (2, 4), (3, 4)];
        for (k, &(u, v)) in e.iter().enumerate() {
            g.add_edge(u, v, w[k]).unwrap();
        }
        g
    }

    #[test]
    fn five_node_loop_to_star() {
        let [w13, w15, w25, w24, w34] = [0.9, 0.8, 0.85, 0.7, 0.75];
        let g = five_cycle([w13, w15, w25, w24, w34]);
        for calc in Calculus::BOTH {
            let sol = mesh_to_star(calc, &g, &[1, 2, 3]).unwrap();
            let t = &sol.value.leaf_weights;
            let p = |a, b| para2(calc, a, b);
            let eqs = [
                (t[0] * t[1], p(w15 * w25, w13 * w34 * w24)),
                (t[0] * t[2], p(w13, w15 * w25 * w24 * w34)),
                (t[1] * t[2], p(w24 * w34, w13 * w15 * w25)),
            ];
            for (lhs, rhs) in eqs {
                assert!((lhs - rhs).abs() < 1e-12, "{calc}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn single_path_gives_degenerate_star() {
        let mut g = WeightedGraph::new();
        g.add_edge(0, 1, 0.8).unwrap();
        g.add_edge(1, 2, 0.5).unwrap();
        let sol = mesh_to_star(Quantum, &g, &[0, 2]).unwrap();
        let t = &sol.value.leaf_weights;
        assert!((t[0] * t[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn symmetric_cycle_gives_equal_legs() {
        let mut g = WeightedGraph::new();
        for (u, v) in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)] {
            g.add_edge(u, v, 0.8).unwrap();
        }
        let sol = mesh_to_star(Quantum, &g, &[0, 2, 4]).unwrap();
        let t = &sol.value.leaf_weights;
        assert!((t[0] - t[1]).abs() < 1e-12 && (t[1] - t[2]).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_four_boundary_system_is_rejected() {
        // a path 0-1-2-3 cannot be a four-leaf star under multiplicative series
        let mut g = WeightedGraph::new();
        g.add_edge(0, 1, 0.5).unwrap();
        g.add_edge(1, 2, 0.9).unwrap();
        g.add_edge(2, 3, 0.3).unwrap();
        g.add_edge(0, 3, 0.2).unwrap();
        match mesh_to_star(Classical, &g, &[0, 1, 2, 3]) {
            Err(Error::Inconsistent { residual, .. }) => assert!(residual > TRANSFORM_TOL),
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }
}
