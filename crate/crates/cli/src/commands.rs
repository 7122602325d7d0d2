use std::f64::consts::{FRAC_PI_4, PI, TAU};

use hmono_core::geometry::{
    jacobian_check, lemma_sequence, polytope_bound, sector_bound_check, vertical_bound_probe,
    SphericalAngle, JACOBIAN_REL_TOL,
};
use hmono_core::monotone::{check_cyclic, close_chain, sample_cyclic, sample_h_pairs, ChainMode};
use hmono_core::resolvent::{fiber_sample, lipschitz_check, minty_solve, MintyOptions};
use hmono_core::sampling::{trial_rng, SampleBox};
use hmono_core::{HVec, OperatorSpec, Point};
use rand::Rng;
use serde_json::{json, Value};

use crate::args::*;
use crate::report::{num, CliError, CliResult, Report, Table};

pub fn run(command: &Command) -> CliResult<(Report, &Output)> {
    Ok(match command {
        Command::CheckMonotone(a) => (check_monotone(a)?, &a.output),
        Command::CheckCyclic(a) => (check_cyclic_cmd(a)?, &a.output),
        Command::SearchCyclic(a) => (search_cyclic(a)?, &a.output),
        Command::Resolve(a) => (resolve(a)?, &a.output),
        Command::Fiber(a) => (fiber(a)?, &a.output),
        Command::Lipschitz(a) => (lipschitz(a)?, &a.output),
        Command::LemmaSeq(a) => (lemma_seq(a)?, &a.output),
        Command::SectorCheck(a) => (sector_check(a)?, &a.output),
        Command::JacobianCheck(a) => (jacobian(a)?, &a.output),
        Command::Polytope(a) => (polytope(a)?, &a.output),
        Command::VerticalProbe(a) => (vertical_probe(a)?, &a.output),
    })
}

fn load_operator(args: &OpArgs) -> CliResult<OperatorSpec> {
    let op = match args.op.as_str() {
        "example1" => OperatorSpec::example1(),
        "negated" => OperatorSpec::example1_negated(),
        "gauge" => OperatorSpec::GaugeSubdiff,
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::usage("op", format!("{path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| CliError::usage("op", format!("{path}: {e}")))?
        }
    };
    if let Some(n) = args.n {
        if n != op.n() {
            return Err(CliError::usage("n", format!("--n {n} but the operator acts on ℍ^{}", op.n())));
        }
    }
    Ok(op)
}

fn op_json(args: &OpArgs, op: &OperatorSpec) -> Value {
    json!({ "source": args.op, "spec": op, "n": op.n() })
}

fn check_dims(field: &str, got: usize, n: usize) -> CliResult<()> {
    if got == n {
        Ok(())
    } else {
        Err(CliError::usage(field, format!("has n = {got}, operator has n = {n}")))
    }
}

fn solver_options(s: &SolverArgs, start: Option<HVec>) -> MintyOptions {
    MintyOptions {
        tol: s.solver_tol,
        max_iter: s.max_iter,
        start,
    }
}

fn check_monotone(a: &CheckMonotoneArgs) -> CliResult<Report> {
    let op = load_operator(&a.op)?;
    if !(a.half_width > 0.0) {
        return Err(CliError::usage("box", "must be positive"));
    }
    let verdict = sample_h_pairs(&op, &SampleBox::symmetric(a.half_width), a.trials, a.seed, a.tol)?;
    let config = json!({
        "operator": op_json(&a.op, &op),
        "trials": a.trials,
        "seed": a.seed,
        "tolerances": { "tol": a.tol },
        "box": a.half_width,
    });
    let ok = verdict.ok && verdict.witness.is_none();
    Report::new("check-monotone", config, ok, verdict)
}

fn parse_chain(s: &str) -> CliResult<Vec<Point>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse::<Point>().map_err(|e| CliError::usage("chain", e)))
        .collect()
}

fn check_cyclic_cmd(a: &CheckCyclicArgs) -> CliResult<Report> {
    let op = load_operator(&a.op)?;
    let points = parse_chain(&a.chain)?;
    let Some(first) = points.first() else {
        return Err(CliError::usage("chain", "needs at least two points"));
    };
    for p in &points {
        check_dims("chain", p.n(), op.n())?;
    }
    let mode = match a.mode {
        Mode::Validate => ChainMode::Validate,
        Mode::Adjust => ChainMode::Adjust,
    };
    let xy: Vec<HVec> = points.iter().map(|p| p.xi1().clone()).collect();
    let chain = match mode {
        // validate checks the given heights, not just the projected polygon
        ChainMode::Validate => hmono_core::monotone::ClosedHChain::new(points.clone(), a.tol)?,
        ChainMode::Adjust => close_chain(&xy, first.t(), mode, a.tol)?,
    };
    let verdict = check_cyclic(&op, &chain, a.tol)?;
    let config = json!({
        "operator": op_json(&a.op, &op),
        "chain": points,
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "tolerances": { "tol": a.tol },
    });
    let ok = verdict.ok && verdict.witness.is_none();
    Report::new("check-cyclic", config, ok, json!({ "chain": chain, "verdict": verdict }))
}

fn search_cyclic(a: &SearchCyclicArgs) -> CliResult<Report> {
    let op = load_operator(&a.op)?;
    if !(a.half_width > 0.0) {
        return Err(CliError::usage("box", "must be positive"));
    }
    let search = sample_cyclic(&op, a.max_len, &SampleBox::symmetric(a.half_width), a.trials, a.seed, a.tol)?;
    let config = json!({
        "operator": op_json(&a.op, &op),
        "max_len": a.max_len,
        "trials": a.trials,
        "seed": a.seed,
        "tolerances": { "tol": a.tol },
        "box": a.half_width,
    });
    let ok = search.witness.is_none();
    Report::new("search-cyclic", config, ok, search)
}

fn resolve(a: &ResolveArgs) -> CliResult<Report> {
    let op = load_operator(&a.op)?;
    check_dims("base", a.base.n(), op.n())?;
    check_dims("target", a.target.n(), op.n())?;
    if let Some(s) = &a.start {
        check_dims("start", s.n(), op.n())?;
    }
    let opts = solver_options(&a.solver, a.start.clone());
    let sol = minty_solve(&op, &a.base, a.lambda, &a.target, &opts)?;
    let config = json!({
        "operator": op_json(&a.op, &op),
        "lambda": a.lambda,
        "base": a.base,
        "target": a.target,
        "start": a.start,
        "tolerances": { "solver_tol": a.solver.solver_tol },
        "max_iter": a.solver.max_iter,
    });
    Report::new("resolve", config, true, sol)
}

fn fiber(a: &FiberArgs) -> CliResult<Report> {
    let op = load_operator(&a.op)?;
    check_dims("target", a.target.n(), op.n())?;
    let opts = solver_options(&a.solver, None);
    let sample = fiber_sample(&op, &a.target, a.lambda, &a.heights.0, &opts)?;
    let n = op.n();
    let mut table = Table::new(
        ["height".to_string()]
            .into_iter()
            .chain(coord_names("zeta", n))
            .chain(["residual".into(), "iterations".into()]),
    );
    for i in 0..sample.points.len() {
        table.push(
            [num(sample.heights[i])]
                .into_iter()
                .chain(sample.points[i].to_vec().into_iter().map(num))
                .chain([num(sample.residuals[i]), sample.iterations[i].to_string()]),
        );
    }
    let config = json!({
        "operator": op_json(&a.op, &op),
        "lambda": a.lambda,
        "target": a.target,
        "heights": a.heights.0,
        "tolerances": { "solver_tol": a.solver.solver_tol },
        "max_iter": a.solver.max_iter,
    });
    Ok(Report::new("fiber", config, true, sample)?.with_table(table))
}

fn lipschitz(a: &LipschitzArgs) -> CliResult<Report> {
    let op = load_operator(&a.op)?;
    check_dims("target", a.target.n(), op.n())?;
    check_dims("target2", a.target2.n(), op.n())?;
    let opts = solver_options(&a.solver, None);
    let rep = lipschitz_check(&op, a.lambda, &a.target, &a.target2, &a.heights.0, a.tol, &opts)?;
    let config = json!({
        "operator": op_json(&a.op, &op),
        "lambda": a.lambda,
        "target": a.target,
        "target2": a.target2,
        "heights": a.heights.0,
        "tolerances": { "tol": a.tol, "solver_tol": a.solver.solver_tol },
        "max_iter": a.solver.max_iter,
    });
    let ok = rep.ok;
    Report::new("lipschitz", config, ok, rep)
}

fn lemma_seq(a: &LemmaSeqArgs) -> CliResult<Report> {
    let eta = a.eta.clone().unwrap_or_else(|| Point::identity(a.eta_prime.n()));
    check_dims("eta_prime", a.eta_prime.n(), eta.n())?;
    if a.k == 0 {
        return Err(CliError::usage("k", "must be ≥ 1"));
    }
    let n = eta.n();
    let etas: Vec<Point> = (1..=a.k)
        .map(|k| eta.mul(&Point::vertical(n, 1.0 / k as f64)))
        .collect::<Result<_, _>>()?;
    let steps = lemma_sequence(&eta, &a.eta_prime, &etas, a.tol)?;
    let mut table = Table::new(
        ["k", "a", "b", "c", "sign", "eps"]
            .into_iter()
            .map(String::from)
            .chain(coord_names("eta_k_prime", n))
            .chain(["dist_to_eta_prime".into(), "residual_prime".into(), "residual_k".into()]),
    );
    let mut distances = Vec::with_capacity(steps.len());
    for (k, s) in (1..).zip(&steps) {
        let d = s.point.dist(&a.eta_prime)?;
        distances.push(d);
        table.push(
            [k.to_string(), num(s.a), num(s.b), num(s.c), num(s.sign), num(s.eps)]
                .into_iter()
                .chain(s.point.to_vec().into_iter().map(num))
                .chain([num(d), num(s.residual_prime), num(s.residual_k)]),
        );
    }
    let config = json!({
        "eta": eta,
        "eta_prime": a.eta_prime,
        "k": a.k,
        "sequence": "eta_k = eta * (0, 0, 1/k)",
        "tolerances": { "tol": a.tol },
    });
    let result = json!({ "steps": steps, "distances": distances });
    Ok(Report::new("lemma-seq", config, true, result)?.with_table(table))
}

fn sector_check(a: &SectorCheckArgs) -> CliResult<Report> {
    if a.step_div < 32 {
        return Err(CliError::usage("step_div", "grid step π/step_div must be ≤ π/32"));
    }
    let rep = sector_bound_check(a.n, PI / a.step_div as f64)?;
    let mut table = Table::new(["cube", "min_inner", "bound"]);
    for c in &rep.cubes {
        let idx: Vec<String> = c.cube.as_slice().iter().map(u8::to_string).collect();
        table.push([idx.join(" "), num(c.min_inner), num(rep.bound)]);
    }
    let config = json!({ "n": a.n, "step_div": a.step_div });
    let ok = rep.violations == 0;
    Ok(Report::new("sector-check", config, ok, rep)?.with_table(table))
}

// Angle in a uniformly chosen π/4 cube, at least `margin` from its faces.
fn cube_interior_angle<R: Rng>(max: f64, margin: f64, rng: &mut R) -> f64 {
    let cubes = (max / FRAC_PI_4).round() as u32;
    let k = rng.gen_range(0..cubes) as f64;
    k * FRAC_PI_4 + rng.gen_range(margin..FRAC_PI_4 - margin)
}

fn jacobian(a: &JacobianCheckArgs) -> CliResult<Report> {
    if a.n == 0 {
        return Err(CliError::usage("n", "must be ≥ 1"));
    }
    if !(a.margin >= 0.0 && a.margin < FRAC_PI_4 / 2.0) {
        return Err(CliError::usage("margin", "must lie in [0, π/8)"));
    }
    let mut table = Table::new(
        ["trial", "t", "rho"]
            .into_iter()
            .map(String::from)
            .chain((1..2 * a.n).map(|j| format!("theta{j}")))
            .chain(["closed_form", "numeric", "rel_err", "richardson"].map(String::from)),
    );
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for i in 0..a.trials {
        let mut rng = trial_rng(a.seed, i as u64);
        let t = rng.gen_range(1.0..=2.0);
        let rho = rng.gen_range(1.0..=2.0);
        let mut theta: Vec<f64> = (0..2 * a.n - 2)
            .map(|_| cube_interior_angle(PI, a.margin, &mut rng))
            .collect();
        theta.push(cube_interior_angle(TAU, a.margin, &mut rng));
        let angle = SphericalAngle::new(theta.clone())?;
        let rep = jacobian_check(a.n, t, rho, &angle, a.fd_step)?;
        if rep.degenerate || rep.rel_err > JACOBIAN_REL_TOL {
            failures.push(i);
        }
        worst = worst.max(rep.rel_err);
        table.push(
            [i.to_string(), num(t), num(rho)]
                .into_iter()
                .chain(theta.into_iter().map(num))
                .chain([num(rep.closed_form), num(rep.numeric), num(rep.rel_err), rep.richardson.to_string()]),
        );
    }
    let config = json!({
        "n": a.n,
        "trials": a.trials,
        "seed": a.seed,
        "fd_step": a.fd_step,
        "margin": a.margin,
        "tolerances": { "rel_tol": JACOBIAN_REL_TOL },
    });
    let ok = failures.is_empty();
    let result = json!({ "max_rel_err": worst, "failures": failures });
    Ok(Report::new("jacobian-check", config, ok, result)?.with_table(table))
}

fn polytope(a: &PolytopeArgs) -> CliResult<Report> {
    if a.n == 0 {
        return Err(CliError::usage("n", "must be ≥ 1"));
    }
    let points = match &a.xi {
        Some(xi) => {
            check_dims("xi", xi.n(), a.n)?;
            vec![xi.clone()]
        }
        None => {
            if a.grid < 2 {
                return Err(CliError::usage("grid", "need at least 2 points per axis"));
            }
            inscribed_grid(a.n, a.r, a.grid)
        }
    };
    let mut table = Table::new(
        coord_names("xi", a.n)
            .into_iter()
            .chain(["bounded", "grid_margin", "recession_max", "vertices", "radius_bound"].map(String::from)),
    );
    let mut summary = Vec::with_capacity(points.len());
    let mut unbounded = 0;
    let mut max_radius = 0.0f64;
    for xi in &points {
        let rep = polytope_bound(xi, a.k, a.r, a.grid_div)?;
        if !rep.bounded {
            unbounded += 1;
        }
        max_radius = max_radius.max(rep.radius_bound);
        table.push(
            xi.to_vec().into_iter().map(num).chain([
                rep.bounded.to_string(),
                num(rep.grid_margin),
                num(rep.recession_max),
                rep.vertices.to_string(),
                num(rep.radius_bound),
            ]),
        );
        summary.push(rep);
    }
    let config = json!({
        "n": a.n,
        "xi": a.xi,
        "grid": if a.xi.is_some() { Value::Null } else { json!(a.grid) },
        "r": a.r,
        "k": a.k,
        "grid_div": a.grid_div,
    });
    let result = if summary.len() == 1 {
        serde_json::to_value(&summary[0]).map_err(|e| CliError::Failure(e.to_string()))?
    } else {
        json!({ "points": summary.len(), "unbounded": unbounded, "max_radius_bound": max_radius })
    };
    Ok(Report::new("polytope", config, unbounded == 0, result)?.with_table(table))
}

/// Regular grid of `per_axis` points per coordinate inside the gauge ball of
/// radius r: |x|, |y| ≤ r/(2√n) and |t| ≤ (√3/2) r² give N ≤ r.
fn inscribed_grid(n: usize, r: f64, per_axis: usize) -> Vec<Point> {
    let dims = 2 * n + 1;
    let half_xy = r / (2.0 * (n as f64).sqrt());
    let half_t = 3f64.sqrt() / 2.0 * r * r;
    (0..per_axis.pow(dims as u32))
        .map(|flat| {
            let mut rest = flat;
            let coords: Vec<f64> = (0..dims)
                .map(|j| {
                    let u = -1.0 + 2.0 * (rest % per_axis) as f64 / (per_axis - 1) as f64;
                    rest /= per_axis;
                    u * if j < 2 * n { half_xy } else { half_t }
                })
                .collect();
            Point::from_slice(&coords).expect("odd coordinate count")
        })
        .collect()
}

fn vertical_probe(a: &VerticalProbeArgs) -> CliResult<Report> {
    let op = load_operator(&a.op)?;
    check_dims("x", a.x.n(), op.n())?;
    let &[lo, hi] = a.t_range.0.as_slice() else {
        return Err(CliError::usage("t_range", "expected two reals lo,hi"));
    };
    let probe = vertical_bound_probe(&op, &a.x, (lo, hi), a.samples)?;
    let ok = a.max_diameter.is_none_or(|m| probe.diameter <= m);
    let config = json!({
        "operator": op_json(&a.op, &op),
        "x": a.x,
        "t_range": [lo, hi],
        "samples": a.samples,
        "max_diameter": a.max_diameter,
    });
    Report::new("vertical-probe", config, ok, probe)
}

fn coord_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("{prefix}_x{i}"))
        .chain((1..=n).map(|i| format!("{prefix}_y{i}")))
        .chain([format!("{prefix}_t")])
        .collect()
}
