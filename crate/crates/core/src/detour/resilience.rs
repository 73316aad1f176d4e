use std::f64::consts::FRAC_PI_4;
use std::ops::RangeInclusive;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bundle::{
    extract_bundle_with, reroute_bundle_with, select_hub_pairs_with, BundleShape, PathBundle, RerouteOptions,
};
use super::graph::EdgeListGraph;
use crate::bisect::bisect;
use crate::connectivity::{ensemble_crossing_value, Calculus, PathEnsemble};
use crate::error::{Error, Result};
use crate::flower::{arm_ensemble, check_uv};
use crate::reduction::{reduce_two_terminal, TwoTerminalNetwork, WeightedGraph};

/// Bisection tolerance on `theta`.
pub const THETA_TOL: f64 = 1e-12;

/// Crossing target of the detour experiments.
pub const DEFAULT_TARGET: f64 = 0.99;

fn check_target(target: f64) -> Result<()> {
    if target > 0.0 && target < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "target",
            value: target,
            domain: "(0, 1)",
        })
    }
}

fn link_value(calculus: Calculus, theta: f64) -> f64 {
    match calculus {
        Calculus::Classical => 2.0 * theta.sin().powi(2),
        Calculus::Quantum => (2.0 * theta).sin(),
    }
    .min(1.0)
}

/// Solves `crossing(theta) = target` on `[0, pi/4]` for a crossing that is
/// increasing in `theta`.
fn theta_root(target: f64, crossing: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    check_target(target)?;
    let top = crossing(FRAC_PI_4)?;
    if top < target {
        return Err(Error::NoRoot(format!(
            "crossing at theta = pi/4 is {top}, below the target {target}"
        )));
    }
    let mut failure = None;
    let f = |theta: f64| match crossing(theta) {
        Ok(v) => v - target,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let root = bisect(f, 0.0, FRAC_PI_4, THETA_TOL);
    match failure {
        Some(e) => Err(e),
        None => root,
    }
}

/// Link angle at which the parallel-of-series crossing of `ensemble`
/// reaches `target`.
pub fn ensemble_threshold(calculus: Calculus, ensemble: &PathEnsemble, target: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("empty path ensemble".into()));
    }
    theta_root(target, |theta| {
        Ok(ensemble_crossing_value(calculus, ensemble, link_value(calculus, theta)))
    })
}

/// Threshold of a single path of `length` links.
pub fn shortest_only_threshold(calculus: Calculus, length: u64, target: f64) -> Result<f64> {
    if length == 0 {
        return Err(Error::InvalidArgument("path length must be at least 1".into()));
    }
    ensemble_threshold(calculus, &PathEnsemble::new([(length, 1)])?, target)
}

/// `q (theta_th(inf) - theta_th(q))`, where `theta_th(inf)` keeps only the
/// shortest path.
pub fn anomalous_resilience(
    calculus: Calculus,
    ensemble: &PathEnsemble,
    shortest_length: u64,
    q: f64,
    target: f64,
) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::Domain {
            name: "q",
            value: q,
            domain: "[1, inf)",
        });
    }
    let inf = shortest_only_threshold(calculus, shortest_length, target)?;
    Ok(q * (inf - ensemble_threshold(calculus, ensemble, target)?))
}

/// Decomposed generation-`n` flower whose long arm has been stretched to
/// `qV` links.
pub fn flower_detour_ensemble(u: u64, v: u64, n: u32, q: u64) -> Result<PathEnsemble> {
    check_uv(u, v)?;
    if q == 0 {
        return Err(Error::InvalidArgument("stretch factor q must be at least 1".into()));
    }
    let qv = v
        .checked_mul(q)
        .ok_or_else(|| Error::Overflow(format!("q V = {q} * {v} exceeds 64 bits")))?;
    arm_ensemble(u, qv, n)
}

/// How a bundle is turned into a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ThresholdModel {
    /// Parallel-of-series over the path lengths.
    #[default]
    Ensemble,
    /// Full two-terminal reduction of the bundle subgraph; differs from
    /// `Ensemble` only when paths cross at vertices.
    Reduction,
}

/// Threshold of a bundle at `target`.
pub fn bundle_threshold(calculus: Calculus, bundle: &PathBundle, target: f64, model: ThresholdModel) -> Result<f64> {
    match model {
        ThresholdModel::Ensemble => ensemble_threshold(calculus, &bundle.ensemble()?, target),
        ThresholdModel::Reduction => {
            let (a, b) = bundle.terminals();
            let edges = bundle.edges();
            let mut ids: Vec<u64> = edges.iter().flat_map(|&(x, y)| [x, y]).collect();
            ids.sort_unstable();
            ids.dedup();
            let pos = |id: u64| ids.binary_search(&id).expect("bundle node");
            let net = |theta: f64| -> Result<f64> {
                let w = link_value(calculus, theta);
                if w >= 1.0 - 1e-12 {
                    // the bundle joins A and B, so perfect links always cross
                    return Ok(1.0);
                }
                let mut g = WeightedGraph::new();
                for &(x, y) in &edges {
                    g.add_edge(pos(x), pos(y), w)?;
                }
                reduce_two_terminal(calculus, &TwoTerminalNetwork::new(g, pos(a), pos(b))?)
            };
            theta_root(target, net)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResilienceOptions {
    pub q_range: RangeInclusive<u64>,
    pub target: f64,
    pub seed: u64,
    pub min_degree: usize,
    pub pairs: usize,
    pub shape: BundleShape,
    pub reroute: RerouteOptions,
    pub model: ThresholdModel,
}

impl Default for ResilienceOptions {
    fn default() -> Self {
        Self {
            q_range: 2..=8,
            target: DEFAULT_TARGET,
            seed: 0,
            min_degree: 7,
            pairs: 10,
            shape: BundleShape::default(),
            reroute: RerouteOptions::default(),
            model: ThresholdModel::Ensemble,
        }
    }
}

/// Sample statistics of one calculus at one `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResilienceStats {
    pub theta_mean: f64,
    pub theta_stderr: f64,
    /// Mean shortest-path-only threshold over the same samples.
    pub theta_inf: f64,
    pub a: f64,
    pub a_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResiliencePoint {
    pub q: u64,
    pub samples: usize,
    pub pairs: usize,
    pub classical: ResilienceStats,
    pub quantum: ResilienceStats,
}

impl ResiliencePoint {
    pub fn stats(&self, calculus: Calculus) -> &ResilienceStats {
        match calculus {
            Calculus::Classical => &self.classical,
            Calculus::Quantum => &self.quantum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResilienceCurve {
    pub hub_pairs: Vec<(u64, u64)>,
    /// Ascending in `q`.
    pub points: Vec<ResiliencePoint>,
    /// `q` values for which no detour sample was found.
    pub omitted: Vec<u64>,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn stats(q: u64, thetas: &[f64], infs: &[f64]) -> ResilienceStats {
    let (theta_mean, theta_stderr) = mean_stderr(thetas);
    let (theta_inf, _) = mean_stderr(infs);
    let gaps: Vec<f64> = infs.iter().zip(thetas).map(|(i, t)| q as f64 * (i - t)).collect();
    let (a, a_stderr) = mean_stderr(&gaps);
    ResilienceStats {
        theta_mean,
        theta_stderr,
        theta_inf,
        a,
        a_stderr,
    }
}

/// Resilience curve of a real topology: hub pairs are drawn once, each
/// pair's bundle is stretched for every `q`, and the thresholds of all
/// stretched samples are averaged.
pub fn real_network_resilience(graph: &EdgeListGraph, opts: &ResilienceOptions) -> Result<ResilienceCurve> {
    check_target(opts.target)?;
    if *opts.q_range.start() < 1 || opts.q_range.is_empty() {
        return Err(Error::InvalidArgument(format!("bad q range {:?}", opts.q_range)));
    }
    let mode = opts.reroute.disjointness;
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);
    let hub_pairs = select_hub_pairs_with(graph, opts.min_degree, opts.pairs, master.gen(), &opts.shape, mode);
    if hub_pairs.is_empty() {
        return Err(Error::Infeasible(format!(
            "no hub pair of degree >= {} admits a bundle",
            opts.min_degree
        )));
    }
    let bundles = hub_pairs
        .iter()
        .map(|&(a, b)| extract_bundle_with(graph, a, b, &opts.shape, mode))
        .collect::<Result<Vec<_>>>()?;
    let target = opts.target;
    let mut infs = Vec::with_capacity(bundles.len());
    for bundle in &bundles {
        let len = bundle.kept_length();
        infs.push([
            shortest_only_threshold(Calculus::Classical, len, target)?,
            shortest_only_threshold(Calculus::Quantum, len, target)?,
        ]);
    }

    let mut points = Vec::new();
    let mut omitted = Vec::new();
    for q in opts.q_range.clone() {
        let mut theta = [Vec::new(), Vec::new()];
        let mut inf = [Vec::new(), Vec::new()];
        let mut used_pairs = 0;
        for (bundle, pair_inf) in bundles.iter().zip(&infs) {
            let samples = reroute_bundle_with(graph, bundle, q, master.gen(), &opts.reroute)?;
            if samples.is_empty() {
                continue;
            }
            used_pairs += 1;
            for s in &samples {
                s.check_disjoint(mode)?;
                for (c, calc) in [Calculus::Classical, Calculus::Quantum].into_iter().enumerate() {
                    theta[c].push(bundle_threshold(calc, s, target, opts.model)?);
                    inf[c].push(pair_inf[c]);
                }
            }
        }
        if theta[0].is_empty() {
            warn!("q = {q}: no detour samples, omitted from the curve");
            omitted.push(q);
            continue;
        }
        points.push(ResiliencePoint {
            q,
            samples: theta[0].len(),
            pairs: used_pairs,
            classical: stats(q, &theta[0], &inf[0]),
            quantum: stats(q, &theta[1], &inf[1]),
        });
    }
    Ok(ResilienceCurve {
        hub_pairs,
        points,
        omitted,
    })
}
