use anyhow::{bail, ensure, Result};
use serde_json::json;

use treebolic::fdsolver::{discrete_green_column, solve_dirichlet, StripGrid, DEFAULT_MAX_ITER};
use treebolic::geometry::{HtPoint, HtPointWire, Node, Params, TreeEnd};
use treebolic::kernels::{
    is_minimal, liouville_predicate, minimal_harmonic_ht, tree_kernel_residual, BoundaryParam, BoundaryParamWire,
};
use treebolic::simulate::{estimate_drift, ExitSample, MeanAccumulator, McEstimate, Side, Simulator, StripDomain};
use treebolic::stats::{chi_square_uniform, linear_fit};

use crate::config::ExperimentConfig;
use crate::output::{num, Report, Table};

fn start_point(cfg: &ExperimentConfig) -> HtPoint<f64> {
    HtPoint::on_line(0.0, cfg.center(), &cfg.params)
}

pub fn embedded_chain(cfg: &ExperimentConfig) -> Result<Report> {
    let params = &cfg.params;
    let stats = cfg.simulator()?.embedded_stats(cfg.sim.n, cfg.sim.replicas)?;
    let a = params.a();
    let target = a / (1.0 + a);
    let up = stats.up_probability();
    let down = stats.down_probability();
    let tau = stats.mean_duration();
    let up_ok = up.within(target, cfg.thresholds.sigma);
    let chi = (params.p() > 1).then(|| chi_square_uniform(&stats.child_counts));
    let chi_ok = chi.is_none_or(|c| c.p_value > cfg.thresholds.chi_square_p);

    let mut main = Table::new("main", vec!["quantity", "estimate", "stderr", "target"]);
    main.push(vec!["up_probability".into(), num(up.mean), num(up.stderr), num(target)]);
    main.push(vec!["down_probability".into(), num(down.mean), num(down.stderr), num(1.0 - target)]);
    main.push(vec!["mean_duration".into(), num(tau.mean), num(tau.stderr), String::new()]);
    let mut children = Table::new("children", vec!["child", "count", "expected"]);
    let expected = stats.up as f64 / params.p() as f64;
    for (k, c) in stats.child_counts.iter().enumerate() {
        children.push(vec![k.to_string(), c.to_string(), num(expected)]);
    }
    Ok(Report {
        command: "embedded-chain",
        pass: up_ok && chi_ok,
        summary: json!({
            "params": params,
            "n": stats.n,
            "a": a,
            "target": target,
            "up_probability": up,
            "down_probability": down,
            "mean_duration": tau,
            "child_counts": stats.child_counts,
            "children_chi_square": chi,
            "up_within_sigma": up_ok,
            "children_uniform": chi_ok,
        }),
        tables: vec![main, children],
    })
}

pub fn drift(cfg: &ExperimentConfig) -> Result<Report> {
    let params = &cfg.params;
    let stats = cfg.simulator()?.embedded_stats(cfg.sim.n, cfg.sim.replicas)?;
    let d = estimate_drift(&stats, params.ln_q());
    let (liouville, sign) = liouville_predicate(params);
    let k = cfg.thresholds.sigma;
    let pass = if liouville {
        d.ell.abs() <= k * d.stderr
    } else {
        d.ell.signum() == f64::from(sign) && d.ell.abs() > k * d.stderr
    };
    let verdict = if liouville { "weak Liouville: yes" } else { "weak Liouville: no" };
    let mut t = Table::new("main", vec!["a", "ell", "stderr", "mean_y", "mean_tau", "n", "predicted_sign", "verdict"]);
    t.push(vec![
        num(params.a()),
        num(d.ell),
        num(d.stderr),
        num(d.mean_y),
        num(d.mean_tau),
        d.n.to_string(),
        sign.to_string(),
        verdict.into(),
    ]);
    Ok(Report {
        command: "drift",
        pass,
        summary: json!({ "params": params, "drift": d, "predicted_sign": sign, "verdict": verdict }),
        tables: vec![t],
    })
}

fn default_kernels() -> Vec<BoundaryParamWire> {
    let end = |word: &str, anchor: Option<Node>| BoundaryParamWire::TreeEnd { word: word.into(), anchor };
    vec![
        end("0.0.0.0.0.0.0.0", None),
        end("1.0.1.1.0.1.1.0", None),
        end("0.1.0.1.0.0.1.0", Some(Node::root_ancestor(1))),
        BoundaryParamWire::Real { zeta: -1.0 },
        BoundaryParamWire::Real { zeta: 0.0 },
        BoundaryParamWire::Real { zeta: 2.0 },
        BoundaryParamWire::One,
    ]
}

/// Mean of h over exit points minus h at the start.
fn exit_residual(h: impl Fn(&HtPoint<f64>) -> Result<f64>, start: &HtPoint<f64>, exits: &[ExitSample<f64>]) -> Result<McEstimate> {
    let h0 = h(start)?;
    let mut acc = MeanAccumulator::default();
    for e in exits {
        acc.push(h(&e.point)? - h0);
    }
    Ok(acc.estimate())
}

pub fn harmonicity(cfg: &ExperimentConfig) -> Result<Report> {
    let params = cfg.params;
    ensure!(params.is_beta_p_one(), "harmonicity needs beta*p = 1, got {}", params.beta_p());
    let wires = if cfg.kernels.is_empty() { default_kernels() } else { cfg.kernels.clone() };
    let sim = cfg.simulator()?;
    let start = start_point(cfg);
    let star = StripDomain::star(cfg.center());
    let domain = cfg.domain_or(Some(2.0))?;
    let star_exits = sim.exits_par(&start, &star, cfg.sim.n, cfg.sim.replicas)?;
    let domain_exits = sim.exits_par(&start, &domain, cfg.sim.n, cfg.sim.replicas)?;
    let ball = StripDomain::<f64>::ball(&cfg.center(), 3, params.p())?;
    let k = cfg.thresholds.sigma;

    let mut table = Table::new(
        "main",
        vec!["kernel", "minimal", "star_residual", "star_stderr", "domain_residual", "domain_stderr", "tree_residual", "pass"],
    );
    let mut rows = Vec::new();
    let mut pass = true;
    for wire in &wires {
        let xi: BoundaryParam<f64> = wire.to_param()?;
        let h = |z: &HtPoint<f64>| Ok(minimal_harmonic_ht(z, &xi, &params)?);
        let s = exit_residual(h, &start, &star_exits)?;
        let d = exit_residual(h, &start, &domain_exits)?;
        let tree = match &xi {
            BoundaryParam::Tree(e) => Some(tree_residual(e, &ball, &params)?),
            _ => None,
        };
        let ok = s.within(0.0, k) && d.within(0.0, k) && tree.is_none_or(|r| r < 1e-12);
        pass &= ok;
        table.push(vec![
            xi.label(),
            is_minimal(&xi, &params).to_string(),
            num(s.mean),
            num(s.stderr),
            num(d.mean),
            num(d.stderr),
            tree.map(num).unwrap_or_default(),
            ok.to_string(),
        ]);
        rows.push(json!({
            "kernel": wire,
            "minimal": is_minimal(&xi, &params),
            "star_residual": s,
            "domain_residual": d,
            "tree_residual": tree,
            "pass": ok,
        }));
    }
    Ok(Report { command: "harmonicity", pass, summary: json!({ "params": params, "kernels": rows }), tables: vec![table] })
}

/// Largest walk-harmonicity defect of the tree kernel over the vertices of `ball`.
fn tree_residual(end: &TreeEnd, ball: &StripDomain<f64>, params: &Params<f64>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for v in ball.vertices(params.p()) {
        worst = worst.max(tree_kernel_residual(&v, end, params)?);
    }
    Ok(worst)
}

pub fn dirichlet_compare(cfg: &ExperimentConfig) -> Result<Report> {
    let params = cfg.params;
    let domain = cfg.domain_or(Some(3.0))?;
    let data = cfg.data.clone().unwrap_or(BoundaryParamWire::Real { zeta: 0.5 });
    let xi: BoundaryParam<f64> = data.to_param()?;
    if !matches!(xi, BoundaryParam::One) {
        ensure!(params.is_beta_p_one(), "harmonic boundary data needs beta*p = 1, got {}", params.beta_p());
    }
    let f = |z: &HtPoint<f64>| match xi {
        BoundaryParam::One => 1.0,
        _ => minimal_harmonic_ht(z, &xi, &params).expect("validated kernel"),
    };
    let center = cfg.center();
    let th = &cfg.thresholds;

    let mut refinement = Table::new("main", vec!["level", "nx", "nu", "hx", "hu", "sup_error", "ratio", "max_principle", "kernel_mass"]);
    let mut errors: Vec<f64> = Vec::new();
    let mut pass = true;
    let mut finest = None;
    let mut levels = Vec::new();
    for level in 0..cfg.grid.levels {
        let (nx, nu) = (cfg.grid.nx << level, cfg.grid.nu << level);
        let grid = StripGrid::new(&domain, &params, nx, nu)?;
        let sol = solve_dirichlet(&grid, f, cfg.grid.tol, DEFAULT_MAX_ITER)?;
        let mut err: f64 = 0.0;
        for s in 0..grid.strips().len() {
            for j in 0..=nu {
                for i in 0..=nx {
                    err = err.max((sol.at(&grid, s, i, j) - f(&grid.point(s, i, j))).abs());
                }
            }
        }
        let ratio = errors.last().map(|prev| prev / err);
        // Ratios are only meaningful above round-off.
        if let Some(r) = ratio {
            if err > 1e-9 && (r - 4.0).abs() > th.ratio_band {
                pass = false;
            }
        }
        let principle = sol.max_principle_holds(1e-8);
        pass &= principle;
        let source = (grid.strip_id(&center).expect("center strip in domain"), nx / 2, nu / 2);
        let (_, kernel) = discrete_green_column(&grid, source, cfg.grid.tol, DEFAULT_MAX_ITER)?;
        let mass = kernel.mass();
        let h = grid.hx().max(grid.hu());
        let positive = kernel.weights.iter().zip(&kernel.horizontal).all(|(&w, &hor)| !hor || w > 0.0);
        pass &= positive && (mass - 1.0).abs() <= h;
        refinement.push(vec![
            level.to_string(),
            nx.to_string(),
            nu.to_string(),
            num(grid.hx()),
            num(grid.hu()),
            num(err),
            ratio.map(num).unwrap_or_default(),
            principle.to_string(),
            num(mass),
        ]);
        levels.push(json!({
            "nx": nx, "nu": nu, "sup_error": err, "ratio": ratio,
            "max_principle": principle, "kernel_mass": mass, "kernel_positive": positive,
            "iterations": sol.iterations,
        }));
        errors.push(err);
        finest = Some((grid, sol));
    }
    let (grid, sol) = finest.expect("at least one level");
    let fd_err = *errors.last().expect("at least one level");

    let l = params.ln_q();
    let base = center.height() as f64 * l;
    let candidates = [
        (0.0f64, base, center.clone()),
        (1.0, base - l / 2.0, center.clone()),
        (-1.5, base + l / 2.0, center.child(0)),
        (0.5, base + l / 4.0, center.child(1 % params.p())),
        (2.0, base - l / 4.0, center.clone()),
    ];
    let sim = cfg.simulator()?;
    let mut probes = Table::new("probes", vec!["x", "u", "w", "fd", "mc", "mc_stderr", "exact", "pass"]);
    let mut probe_rows = Vec::new();
    for (x, u, w) in candidates {
        if domain.x_bound().is_some_and(|r| x.abs() >= r) || !domain.contains_strip(&w) {
            continue;
        }
        let Ok(z) = HtPoint::new(x, u, w, &params) else { continue };
        let Some(fd) = sol.at_point(&grid, &z) else { continue };
        let mc = sim.dirichlet_mc_par(&z, &domain, f, cfg.sim.n, cfg.sim.replicas)?;
        let ok = (mc.mean - fd).abs() <= (th.sigma * mc.stderr).max(fd_err);
        pass &= ok;
        probes.push(vec![num(x), num(u), z.edge().to_string(), num(fd), num(mc.mean), num(mc.stderr), num(f(&z)), ok.to_string()]);
        probe_rows.push(json!({ "point": z.to_wire(), "fd": fd, "mc": mc, "exact": f(&z), "pass": ok }));
    }
    if probe_rows.is_empty() {
        bail!("no probe point lies on a node of the finest grid");
    }
    Ok(Report {
        command: "dirichlet-compare",
        pass,
        summary: json!({ "params": params, "data": data, "levels": levels, "probes": probe_rows }),
        tables: vec![refinement, probes],
    })
}

pub fn exit_tails(cfg: &ExperimentConfig) -> Result<Report> {
    let params = cfg.params;
    let radii = if cfg.radii.is_empty() { vec![2.0, 3.0, 4.0, 5.0, 6.0] } else { cfg.radii.clone() };
    ensure!(radii.len() >= 2, "exit-tails needs at least two radii");
    let base = cfg.domain_or(None)?;
    let sim = cfg.simulator()?;
    let start = start_point(cfg);
    let n = cfg.sim.n;
    let mut table = Table::new("main", vec!["r", "vertical_exits", "n", "tail_mass", "stderr"]);
    let mut masses = Vec::new();
    for &r in &radii {
        let exits = sim.exits_par(&start, &base.clone().with_x_bound(r)?, n, cfg.sim.replicas)?;
        let count = exits.iter().filter(|e| e.side == Side::Vertical).count();
        let m = count as f64 / n as f64;
        let se = (m * (1.0 - m) / n as f64).sqrt();
        table.push(vec![num(r), count.to_string(), n.to_string(), num(m), num(se)]);
        masses.push(m);
    }
    let decreasing = masses.windows(2).all(|w| w[1] < w[0]);
    let fit = if masses.iter().all(|&m| m > 0.0) {
        let logs: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
        Some(linear_fit(&radii, &logs))
    } else {
        None
    };
    let rate = fit.map(|f| f.slope.exp());
    let pass = decreasing
        && fit.is_some_and(|f| f.r_squared > cfg.thresholds.r_squared)
        && rate.is_some_and(|r| r > 0.0 && r < 1.0);
    Ok(Report {
        command: "exit-tails",
        pass,
        summary: json!({
            "params": params, "radii": radii, "tail_mass": masses,
            "decreasing": decreasing, "fit": fit, "rate": rate,
        }),
        tables: vec![table],
    })
}

/// Exit samples from the configured domain, one JSON object per line.
pub fn sample_exits(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let sim: Simulator<f64> = cfg.simulator()?;
    let domain = cfg.domain_or(Some(2.0))?;
    let exits = sim.exits_par(&start_point(cfg), &domain, cfg.sim.n, cfg.sim.replicas)?;
    Ok(exits.iter().map(|e| serde_json::to_string(&e.to_wire()).expect("exit serializes")).collect())
}

pub fn eval_kernel(cfg: &ExperimentConfig, kernel: &str, point: &str) -> Result<Report> {
    let params = cfg.params;
    let wire: BoundaryParamWire = serde_json::from_str(kernel)?;
    let pw: HtPointWire = serde_json::from_str(point)?;
    let xi: BoundaryParam<f64> = wire.to_param()?;
    let z = HtPoint::from_wire(&pw, &params)?;
    let value = minimal_harmonic_ht(&z, &xi, &params)?;
    let mut t = Table::new("main", vec!["kernel", "x", "u", "w", "t", "value"]);
    t.push(vec![xi.label(), num(pw.x), num(pw.u), pw.w.to_string(), num(pw.t), num(value)]);
    Ok(Report {
        command: "eval-kernel",
        pass: true,
        summary: json!({ "kernel": wire, "point": pw, "value": value, "minimal": is_minimal(&xi, &params) }),
        tables: vec![t],
    })
}
