use anyhow::{Context, Result};
use flowerperc::asymptotics::{asymptotic_exponents, flower_resilience, quantum_d_minus_df, resilience_theory};
use flowerperc::detour::{
    ensemble_threshold, flower_detour_ensemble, load_edge_list, real_network_resilience, shortest_only_threshold,
    RerouteOptions, ResilienceOptions,
};
use flowerperc::flower::{decompose_paths, finite_size_threshold, nu_exact, nu_fit, threshold_exact, FlowerSpec};
use flowerperc::reduction::reduce_two_terminal_detailed;
use flowerperc::strength::{
    beta_fit, critical_ratio, fractal_dimension_fit, hyperscaling_residual, strength_iterate, BetaMethod, DF_FIT_RANGE,
};
use flowerperc::{Calculus, TwoTerminalNetwork, WeightedGraph};
use serde_json::json;
use std::f64::consts::FRAC_PI_4;

use crate::config::{Command, IntRange, RunConfig};
use crate::output::{num, text, Report};

pub fn run(cfg: &RunConfig) -> Result<Report> {
    match cfg.command {
        Command::Threshold => cmd_threshold(cfg),
        Command::Exponents => cmd_exponents(cfg),
        Command::Strength => cmd_strength(cfg),
        Command::Asymptotics => cmd_asymptotics(cfg),
        Command::Detour => cmd_detour(cfg),
        Command::Decompose => cmd_decompose(cfg),
        Command::Reduce => cmd_reduce(cfg),
    }
}

fn generations(cfg: &RunConfig) -> Result<Vec<u32>> {
    if let Some(n) = cfg.n {
        return Ok(vec![n]);
    }
    match cfg.n_range {
        Some(IntRange { start, end }) => (start..=end)
            .map(|n| u32::try_from(n).context("generation out of range"))
            .collect(),
        None => Ok(Vec::new()),
    }
}

fn theta_of(calc: Calculus, value: f64) -> Result<f64> {
    Ok(calc.weight_of(value)?.theta())
}

pub fn cmd_threshold(cfg: &RunConfig) -> Result<Report> {
    let mut r = Report::new(&[
        "calculus",
        "u",
        "v",
        "kind",
        "n",
        "target",
        "value",
        "theta",
        "theta_over_quarter_pi",
    ]);
    for calc in cfg.calculus.calculi() {
        let exact = threshold_exact(calc, cfg.u, cfg.v)?;
        let th = theta_of(calc, exact)?;
        r.push(vec![
            text(calc.name()),
            json!(cfg.u),
            json!(cfg.v),
            text("exact"),
            text(""),
            text(""),
            num(exact),
            num(th),
            num(th / FRAC_PI_4),
        ]);
        if let Some(target) = cfg.target {
            for n in generations(cfg)? {
                let w = finite_size_threshold(calc, FlowerSpec::new(cfg.u, cfg.v, n)?, target)?;
                let th = theta_of(calc, w)?;
                r.push(vec![
                    text(calc.name()),
                    json!(cfg.u),
                    json!(cfg.v),
                    text("finite_size"),
                    json!(n),
                    num(target),
                    num(w),
                    num(th),
                    num(th / FRAC_PI_4),
                ]);
            }
        }
    }
    Ok(r)
}

pub fn cmd_exponents(cfg: &RunConfig) -> Result<Report> {
    let mut r = Report::new(&["calculus", "quantity", "method", "value", "stderr"]);
    let range = cfg.n_range.context("exponents needs an n range")?;
    let range = u32::try_from(range.start)?..=u32::try_from(range.end)?;
    let target = cfg.target.context("exponents needs a target")?;
    let mut details = Vec::new();
    for calc in cfg.calculus.calculi() {
        let (u, v) = (cfg.u, cfg.v);
        let name = calc.name();
        let nu = nu_exact(calc, u, v)?;
        let nu_fitted = nu_fit(calc, u, v, range.clone(), target)?;
        let beta_op = beta_fit(calc, u, v, BetaMethod::OrderParameter)?;
        let beta_slope = beta_fit(calc, u, v, BetaMethod::Slope)?;
        let ratio = critical_ratio(calc, u, v)?;
        let df_fit = fractal_dimension_fit(calc, u, v, DF_FIT_RANGE)?;
        let hyper = hyperscaling_residual(calc, u, v)?;
        let rows = [
            ("nu", "exact", nu, 0.0),
            ("nu", "fit", nu_fitted.exponent, nu_fitted.stderr),
            ("beta", "order_parameter", beta_op.exponent, beta_op.stderr),
            ("beta", "slope", beta_slope.exponent, beta_slope.stderr),
            ("d_f", "ratio", ratio.fractal_dimension, 0.0),
            ("d_f", "fit", df_fit.exponent, df_fit.stderr),
            ("hyperscaling_residual", "slope", hyper.residual, 0.0),
        ];
        for (quantity, method, value, stderr) in rows {
            r.push(vec![text(name), text(quantity), text(method), num(value), num(stderr)]);
        }
        details.push(json!({
            "calculus": name,
            "nu_fit": nu_fitted,
            "critical_ratio": ratio,
            "hyperscaling": hyper,
        }));
    }
    r.with_details(details)
}

pub fn cmd_strength(cfg: &RunConfig) -> Result<Report> {
    let mut r = Report::new(&["calculus", "w", "n", "ln_strength", "strength"]);
    let n = cfg.n.context("strength needs --n")?;
    let sweep = cfg.sweep.context("strength needs --sweep")?;
    for calc in cfg.calculus.calculi() {
        for w in sweep.values() {
            let w = w.clamp(0.0, 1.0);
            let ln_t = strength_iterate(calc, cfg.u, cfg.v, n, w)?;
            r.push(vec![text(calc.name()), num(w), json!(n), num(ln_t), num(ln_t.exp())]);
        }
    }
    Ok(r)
}

pub fn cmd_asymptotics(cfg: &RunConfig) -> Result<Report> {
    let ln_v = cfg.ln_v.context("asymptotics needs --lnv")?;
    let rep = asymptotic_exponents(cfg.u, ln_v)?;
    let mut r = Report::new(&["quantity", "value"]);
    let rows = [
        ("m", rep.m_root),
        ("p_th_one_minus", rep.p_th_one_minus),
        ("c_th_one_minus", rep.c_th_one_minus),
        ("classical_nu", rep.classical.nu),
        ("classical_d_minus_df", rep.classical.d_minus_df),
        ("classical_beta", rep.classical.beta),
        ("quantum_nu", rep.quantum.nu),
        ("quantum_d_minus_df", rep.quantum.d_minus_df),
        ("quantum_d_minus_df_corrected", quantum_d_minus_df(cfg.u, ln_v)?),
        ("quantum_beta", rep.quantum.beta),
        ("lambda_full", rep.lambda.full),
        ("lambda_linear", rep.lambda.linear),
        ("lambda_loglog", rep.lambda.loglog),
        ("quantum_nu_full", rep.nu_quantum_tiers[0]),
        ("quantum_nu_linear", rep.nu_quantum_tiers[1]),
        ("quantum_nu_loglog", rep.nu_quantum_tiers[2]),
        ("long_path_crossing_classical", rep.long_path_crossing.0),
        ("long_path_crossing_quantum", rep.long_path_crossing.1),
    ];
    for (k, v) in rows {
        r.push(vec![text(k), num(v)]);
    }
    r.with_details(rep)
}

const DETOUR_COLUMNS: [&str; 6] = ["q", "calculus", "theta_mean", "theta_stderr", "A", "samples"];

pub fn cmd_detour(cfg: &RunConfig) -> Result<Report> {
    let q = cfg.q_range.context("detour needs --q")?;
    let target = cfg.target.context("detour needs --target")?;
    let mut r = Report::new(&DETOUR_COLUMNS);
    if let Some(path) = &cfg.input {
        let graph = load_edge_list(path)?;
        let opts = ResilienceOptions {
            q_range: q.start..=q.end,
            target,
            seed: cfg.seed,
            min_degree: cfg.min_degree,
            pairs: cfg.pairs,
            reroute: RerouteOptions {
                samples: cfg.samples,
                ..RerouteOptions::default()
            },
            ..ResilienceOptions::default()
        };
        let curve = real_network_resilience(&graph, &opts)?;
        for p in &curve.points {
            for calc in cfg.calculus.calculi() {
                let s = p.stats(calc);
                r.push(vec![
                    json!(p.q),
                    text(calc.name()),
                    num(s.theta_mean),
                    num(s.theta_stderr),
                    num(s.a),
                    json!(p.samples),
                ]);
            }
        }
        return r.with_details(json!({
            "nodes": graph.node_count(),
            "edges": graph.edge_count(),
            "curve": curve,
        }));
    }

    let n = cfg.n.context("flower detour needs --n")?;
    let shortest = cfg.u.checked_pow(n).context("shortest path length overflows")?;
    let mut theory = Vec::new();
    for qv in q.start..=q.end {
        let ensemble = flower_detour_ensemble(cfg.u, cfg.v, n, qv)?;
        for calc in cfg.calculus.calculi() {
            let inf = shortest_only_threshold(calc, shortest, target)?;
            let th = ensemble_threshold(calc, &ensemble, target)?;
            r.push(vec![
                json!(qv),
                text(calc.name()),
                num(th),
                num(0.0),
                num(qv as f64 * (inf - th)),
                json!(1),
            ]);
        }
        let entry = if cfg.u >= 2 {
            let (a_p, a_c) = resilience_theory(cfg.u, cfg.v, qv as f64)?;
            json!({
                "q": qv,
                "a_p_infinite_flower": flower_resilience(Calculus::Classical, cfg.u, cfg.v, qv)?,
                "a_c_infinite_flower": flower_resilience(Calculus::Quantum, cfg.u, cfg.v, qv)?,
                "a_p_theory": a_p,
                "a_c_theory": a_c,
            })
        } else {
            json!({ "q": qv })
        };
        theory.push(entry);
    }
    r.with_details(json!({ "n": n, "shortest_length": shortest, "theory": theory }))
}

pub fn cmd_decompose(cfg: &RunConfig) -> Result<Report> {
    let n = cfg.n.context("decompose needs --n")?;
    let e = decompose_paths(cfg.u, cfg.v, n)?;
    let mut r = Report::new(&["length", "multiplicity"]);
    for &(len, mult) in e.entries() {
        r.push(vec![json!(len), json!(mult)]);
    }
    r.with_details(json!({ "total_paths": e.total_paths().to_string() }))
}

pub fn cmd_reduce(cfg: &RunConfig) -> Result<Report> {
    let path = cfg.input.as_ref().context("reduce needs --input")?;
    let (a, b) = cfg.terminals.context("reduce needs --terminals")?;
    let w = cfg.weight.context("reduce needs --weight")?;
    let graph = load_edge_list(path)?;
    let ids = graph.node_ids();
    let pos = |id: u64| {
        ids.binary_search(&id)
            .map_err(|_| anyhow::anyhow!("terminal {id} is not in {}", path.display()))
    };
    let (ia, ib) = (pos(a)?, pos(b)?);
    let mut r = Report::new(&[
        "calculus",
        "a",
        "b",
        "weight",
        "value",
        "eliminated",
        "star_mesh_solves",
        "max_residual",
    ]);
    for calc in cfg.calculus.calculi() {
        let mut wg = WeightedGraph::new();
        for (x, y) in graph.edges() {
            wg.add_edge(pos(x)?, pos(y)?, w)?;
        }
        let red = reduce_two_terminal_detailed(calc, &TwoTerminalNetwork::new(wg, ia, ib)?)?;
        r.push(vec![
            text(calc.name()),
            json!(a),
            json!(b),
            num(w),
            num(red.value),
            json!(red.eliminated),
            json!(red.star_mesh_solves),
            num(red.max_residual),
        ]);
    }
    Ok(r)
}
