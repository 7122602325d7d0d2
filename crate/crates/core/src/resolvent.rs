//! Horizontal Minty resolvent: given a base η, λ > 0 and p ∈ V₁, find
//! ζ ∈ H_η with p ∈ ξ₁(ζ) + λ T(ζ).
//!
//! Writing ζ(w) = η ∘ exp(w), the equation becomes F(w) = 0 with
//! F(w) = ξ₁(η) + w + λ T(ζ(w)) − p. The identity part makes F strongly
//! monotone with modulus 1 whenever T is monotone along the plane, and the
//! iteration w ← w − α F(w) with residual backtracking converges.
//!
//! Points of one horizontal plane are not horizontal to each other, so an
//! H-monotone T need not be monotone along the plane (∂_H N is not), and the
//! iteration can stall at a local minimum of ‖F‖. For n = 1 the solver then
//! brackets a root by winding numbers and polishes it with Newton steps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::heis::{HPlane, HVec, Point};
use crate::setval::{check_lambda, OperatorSpec, ValueSet};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MintyOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial first-layer offset from the base; defaults to the origin of the
    /// plane (ζ = base) or, when T is set-valued there, to `p − ξ₁(base)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<HVec>,
}

impl Default for MintyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MintySolution {
    pub zeta: Point,
    pub residual: f64,
    pub iterations: usize,
    /// Residual norms of the accepted iterates, starting with the initial one.
    #[serde(skip)]
    pub history: Vec<f64>,
}

fn single_value(op: &OperatorSpec, p: &Point) -> Result<HVec> {
    let set = op.eval_unchecked(p);
    set.as_point()
        .cloned()
        .ok_or_else(|| Error::SetValuedIterate(format!("T({p}) is not a singleton")))
}

struct Residual<'a> {
    op: &'a OperatorSpec,
    base: &'a Point,
    lam: f64,
    target: HVec,
}

impl Residual<'_> {
    fn eval(&self, w: &HVec) -> Result<HVec> {
        let zeta = self.base.exp_h_unchecked(w);
        let v = single_value(self.op, &zeta)?;
        Ok(self.base.xi1().add(w).axpy(self.lam, &v).sub(&self.target))
    }
}

// Lipschitz estimate of w ↦ T(base ∘ exp(w)) from finite probes around `w0`.
fn lipschitz_estimate(op: &OperatorSpec, base: &Point, w0: &HVec) -> f64 {
    if let OperatorSpec::Linear(m) = op {
        return m.spectral_norm();
    }
    let n = base.n();
    let center = base.exp_h_unchecked(w0);
    let Ok(v0) = single_value(op, &center) else {
        return 1.0;
    };
    let mut best = 0.0f64;
    for scale in [1e-3, 1e-1, 1.0] {
        for k in 0..2 * n {
            for sign in [-1.0, 1.0] {
                let dw = HVec::basis(n, k).scale(sign * scale);
                let q = base.exp_h_unchecked(&w0.add(&dw));
                if let Ok(v) = single_value(op, &q) {
                    best = best.max(v.dist(&v0) / scale);
                }
            }
        }
    }
    best
}

/// Solves p ∈ ξ₁(ζ) + λ T(ζ) for ζ in the horizontal plane of `base`.
pub fn minty_solve(
    op: &OperatorSpec,
    base: &Point,
    lam: f64,
    p: &HVec,
    opts: &MintyOptions,
) -> Result<MintySolution> {
    check_lambda(lam)?;
    base.check_n(op.n())?;
    p.check_n(op.n())?;
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {}", opts.tol)));
    }

    // Where the plane meets the vertical axis T may be set-valued (the gauge
    // subdifferential at the identity); test membership there exactly.
    let plane = HPlane::new(base.clone());
    let axis = plane.axis_point();
    let axis_set = op.eval_unchecked(&axis);
    if !axis_set.is_singleton() {
        let lifted = axis_set.affine(axis.xi1(), lam);
        let residual = lifted.distance_to(p);
        if residual <= opts.tol {
            return Ok(MintySolution {
                zeta: axis,
                residual,
                iterations: 0,
                history: vec![residual],
            });
        }
    }

    let f = Residual {
        op,
        base,
        lam,
        target: p.clone(),
    };
    let mut w = match &opts.start {
        Some(s) => {
            s.check_n(op.n())?;
            s.clone()
        }
        None if op.eval_unchecked(base).is_singleton() => HVec::zeros(op.n()),
        None => p.sub(base.xi1()),
    };
    let mut fw = f.eval(&w)?;
    let mut r = fw.norm();
    let mut history = vec![r];

    let step0 = 1.0 / (1.0 + lam * lipschitz_estimate(op, base, &w));
    let mut step = step0;
    let mut iterations = 0;
    while r > opts.tol {
        if iterations >= opts.max_iter || step < 1e-300 {
            if step < 1e-300 && op.n() == 1 {
                // The iteration stalls at local minima of ‖F‖ when T is not
                // monotone across the plane; in two dimensions a root can
                // always be bracketed by its winding number instead.
                let start = p.sub(base.xi1());
                let (w, extra) = match winding_bisection(&f, &start, lam, opts, &mut history) {
                    Ok(found) => found,
                    Err(_) => newton_multistart(&f, base, &start, lam, opts, &mut history)?,
                };
                let zeta = base.exp_h_unchecked(&w);
                return Ok(MintySolution {
                    residual: resolvent_residual(op, &zeta, lam, p),
                    zeta,
                    iterations: iterations + extra,
                    history,
                });
            }
            return Err(Error::NonConvergence {
                iterations,
                residual: r,
            });
        }
        iterations += 1;
        let trial = w.axpy(-step, &fw);
        let ft = match f.eval(&trial) {
            Ok(v) => v,
            Err(Error::SetValuedIterate(_)) => {
                step *= 0.5;
                continue;
            }
            Err(e) => return Err(e),
        };
        let rt = ft.norm();
        if rt < r {
            w = trial;
            fw = ft;
            r = rt;
            history.push(r);
            step = (2.0 * step).min(step0);
        } else {
            step *= 0.5;
        }
    }
    let zeta = base.exp_h_unchecked(&w);
    Ok(MintySolution {
        residual: resolvent_residual(op, &zeta, lam, p),
        zeta,
        iterations,
        history,
    })
}

// Residual on the plane, treating the (measure-zero) set-valued points by
// nudging off them.
fn eval_nudged(f: &Residual, w: &HVec) -> Result<HVec> {
    match f.eval(w) {
        Err(Error::SetValuedIterate(_)) => f.eval(&w.add(&HVec::raw(vec![1e-13, 7e-14]))),
        other => other,
    }
}

enum Boundary {
    Winding(i64),
    Root(HVec),
}

// Winding number of F (n = 1) around the axis-aligned square `center ± half`.
fn winding(f: &Residual, center: &HVec, half: f64, tol: f64) -> Result<Boundary> {
    let (cx, cy) = (center.as_slice()[0], center.as_slice()[1]);
    let corners = [
        (cx - half, cy - half),
        (cx + half, cy - half),
        (cx + half, cy + half),
        (cx - half, cy + half),
    ];
    let at = |u: (f64, f64)| HVec::raw(vec![u.0, u.1]);
    let angle = |v: &HVec| v.as_slice()[1].atan2(v.as_slice()[0]);
    let mut total = 0.0;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        // stack of (s0, s1) parameter intervals with the angle at s0 known
        let lerp = |s: f64| (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
        let fa = eval_nudged(f, &at(a))?;
        if fa.norm() <= tol {
            return Ok(Boundary::Root(at(a)));
        }
        let mut pending = vec![(0.0, 1.0, angle(&fa), 0)];
        while let Some((s0, s1, th0, depth)) = pending.pop() {
            let fv = eval_nudged(f, &at(lerp(s1)))?;
            if fv.norm() <= tol {
                return Ok(Boundary::Root(at(lerp(s1))));
            }
            let th1 = angle(&fv);
            let mut d = th1 - th0;
            d -= std::f64::consts::TAU * (d / std::f64::consts::TAU).round();
            if d.abs() > std::f64::consts::FRAC_PI_4 && depth < 40 {
                let mid = 0.5 * (s0 + s1);
                // process [mid, s1] after [s0, mid]
                let fm = eval_nudged(f, &at(lerp(mid)))?;
                pending.push((mid, s1, angle(&fm), depth + 1));
                pending.push((s0, mid, th0, depth + 1));
            } else {
                total += d;
            }
        }
    }
    Ok(Boundary::Winding((total / std::f64::consts::TAU).round() as i64))
}

// Brackets a root of F by recursive quadrant splitting on the winding number,
// then polishes it with finite-difference Newton steps.
fn winding_bisection(
    f: &Residual,
    center: &HVec,
    lam: f64,
    opts: &MintyOptions,
    history: &mut Vec<f64>,
) -> Result<(HVec, usize)> {
    let fail = |iterations: usize, residual: f64| Error::NonConvergence { iterations, residual };
    let mut c = center.clone();
    let mut half = lam + 1.0;
    let mut steps = 0;
    loop {
        match winding(f, &c, half, opts.tol)? {
            Boundary::Root(w) => return Ok((w, steps)),
            Boundary::Winding(0) if half < 1e12 => half *= 2.0,
            Boundary::Winding(0) => return Err(fail(steps, f64::NAN)),
            Boundary::Winding(_) => break,
        }
        steps += 1;
    }
    while half > 1e-7 * c.norm().max(1.0) {
        steps += 1;
        let q = 0.5 * half;
        let (cx, cy) = (c.as_slice()[0], c.as_slice()[1]);
        let mut next = None;
        // Quadrants first, then the overlapping squares centred on the middle
        // and the edge midpoints: a root on a quadrant edge sits well inside
        // one of those.
        let offsets = [(-q, -q), (q, -q), (q, q), (-q, q), (0.0, 0.0), (0.0, -q), (q, 0.0), (0.0, q), (-q, 0.0)];
        for (dx, dy) in offsets {
            let sub = HVec::raw(vec![cx + dx, cy + dy]);
            match winding(f, &sub, q, opts.tol)? {
                Boundary::Root(w) => return Ok((w, steps)),
                Boundary::Winding(0) => {}
                Boundary::Winding(_) => {
                    next = Some(sub);
                    break;
                }
            }
        }
        let Some(sub) = next else {
            return Err(fail(steps, eval_nudged(f, &c)?.norm()));
        };
        c = sub;
        half = q;
        record(eval_nudged(f, &c)?.norm(), history);
    }

    let (w, r, polish) = newton_polish(f, c, opts.tol, history)?;
    steps += polish;
    if r > opts.tol {
        return Err(fail(steps, r));
    }
    Ok((w, steps))
}

fn record(r: f64, history: &mut Vec<f64>) {
    if history.last().is_none_or(|&last| r < last) {
        history.push(r);
    }
}

// Damped Newton with a central-difference Jacobian; returns the best point,
// its residual and the number of steps taken.
#[allow(clippy::needless_range_loop)]
fn newton_polish(f: &Residual, w0: HVec, tol: f64, history: &mut Vec<f64>) -> Result<(HVec, f64, usize)> {
    let mut w = w0;
    let mut fw = eval_nudged(f, &w)?;
    let mut r = fw.norm();
    let mut steps = 0;
    // difference step, shrunk when a Newton direction fails to descend
    let mut h_rel = 1e-7;
    while r > tol && steps < 80 {
        steps += 1;
        let h = h_rel * w.norm().max(1.0);
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let e = HVec::basis(1, j).scale(h);
            let fp = eval_nudged(f, &w.add(&e))?;
            let fm = eval_nudged(f, &w.sub(&e))?;
            for i in 0..2 {
                jac[i][j] = (fp.as_slice()[i] - fm.as_slice()[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let (f0, f1) = (fw.as_slice()[0], fw.as_slice()[1]);
        let dw = HVec::raw(vec![
            (jac[1][1] * f0 - jac[0][1] * f1) / det,
            (jac[0][0] * f1 - jac[1][0] * f0) / det,
        ]);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let trial = w.axpy(-t, &dw);
            let ft = eval_nudged(f, &trial)?;
            if ft.norm() < r {
                w = trial;
                r = ft.norm();
                fw = ft;
                record(r, history);
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            if h_rel < 1e-12 {
                break;
            }
            h_rel *= 1e-2;
        }
    }
    Ok((w, r, steps))
}

// Last resort for n = 1: Newton from a fixed list of starts. Besides a grid
// over the square that must contain a root when T is bounded by 1, the list
// rings the point where the plane passes closest to the identity, where the
// gauge subdifferential turns through a full circle on a tiny scale.
fn newton_multistart(
    f: &Residual,
    base: &Point,
    center: &HVec,
    lam: f64,
    opts: &MintyOptions,
    history: &mut Vec<f64>,
) -> Result<(HVec, usize)> {
    let mut starts = Vec::new();
    let normal = HVec::raw(vec![2.0 * base.y()[0], -2.0 * base.x()[0]]);
    if normal.norm() > 0.0 {
        // xy of minimal norm on which the plane has height 0
        let xy0 = normal.scale(-base.t() / normal.dot(&normal));
        let core = xy0.sub(base.xi1());
        let scale = xy0.norm().max(1e-8);
        starts.push(core.clone());
        for radius in [0.25, 0.5, 1.0, 2.0, 4.0] {
            for k in 0..8 {
                let a = std::f64::consts::FRAC_PI_4 * k as f64;
                starts.push(core.add(&HVec::raw(vec![a.cos(), a.sin()]).scale(radius * scale)));
            }
        }
    }
    let half = lam + 1.0;
    let m = 8;
    for i in 0..=m {
        for j in 0..=m {
            let u = -half + 2.0 * half * i as f64 / m as f64;
            let v = -half + 2.0 * half * j as f64 / m as f64;
            starts.push(center.add(&HVec::raw(vec![u, v])));
        }
    }
    let mut steps = 0;
    let mut best = f64::INFINITY;
    for s in starts {
        let (w, r, k) = newton_polish(f, s, opts.tol, &mut Vec::new())?;
        steps += k;
        best = best.min(r);
        if r <= opts.tol {
            record(r, history);
            return Ok((w, steps));
        }
    }
    Err(Error::NonConvergence {
        iterations: steps,
        residual: best,
    })
}

/// Distance from `p` to ξ₁(ζ) + λ T(ζ).
pub fn resolvent_residual(op: &OperatorSpec, zeta: &Point, lam: f64, p: &HVec) -> f64 {
    let set: ValueSet = op.eval_unchecked(zeta).affine(zeta.xi1(), lam);
    set.distance_to(p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberSample {
    pub v: HVec,
    pub lam: f64,
    pub heights: Vec<f64>,
    pub points: Vec<Point>,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

/// Points of Q_λ(v) on the planes H_{(0,0,h)} for each requested height.
pub fn fiber_sample(
    op: &OperatorSpec,
    v: &HVec,
    lam: f64,
    heights: &[f64],
    opts: &MintyOptions,
) -> Result<FiberSample> {
    if heights.is_empty() {
        return Err(invalid("heights", "need at least one height"));
    }
    let n = op.n();
    let solved: Vec<Result<MintySolution>> = heights
        .par_iter()
        .map(|&h| {
            minty_solve(op, &Point::vertical(n, h), lam, v, opts).map_err(|e| match e {
                Error::NonConvergence { iterations, residual } => Error::Internal(format!(
                    "fiber solve failed at height {h} after {iterations} iterations (residual {residual:e})"
                )),
                other => other,
            })
        })
        .collect();
    let mut sample = FiberSample {
        v: v.clone(),
        lam,
        heights: heights.to_vec(),
        points: Vec::with_capacity(heights.len()),
        residuals: Vec::with_capacity(heights.len()),
        iterations: Vec::with_capacity(heights.len()),
    };
    for s in solved {
        let s = s?;
        sample.points.push(s.zeta);
        sample.residuals.push(s.residual);
        sample.iterations.push(s.iterations);
    }
    Ok(sample)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzPair {
    pub height: f64,
    pub eta: Point,
    pub eta2: Point,
    /// d_H(η, η′), equal to ‖ξ₁(η) − ξ₁(η′)‖ since η′ ∈ H_η.
    pub distance: f64,
    pub xi1_distance: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub lam: f64,
    pub v: HVec,
    pub v2: HVec,
    pub tol: f64,
    pub ok: bool,
    pub pairs: Vec<LipschitzPair>,
}

/// For each η ∈ Q_λ(v) on the planes H_{(0,0,h)}, finds η′ ∈ H_η ∩ Q_λ(v2)
/// and checks ‖ξ₁(η) − ξ₁(η′)‖ ≤ ‖v − v2‖ + tol.
pub fn lipschitz_check(
    op: &OperatorSpec,
    lam: f64,
    v: &HVec,
    v2: &HVec,
    heights: &[f64],
    tol: f64,
    opts: &MintyOptions,
) -> Result<LipschitzReport> {
    let fiber = fiber_sample(op, v, lam, heights, opts)?;
    let bound = v.dist(v2);
    let pairs: Vec<Result<LipschitzPair>> = fiber
        .points
        .par_iter()
        .zip(&fiber.heights)
        .map(|(eta, &height)| {
            let sol = minty_solve(op, eta, lam, v2, opts)?;
            let xi1_distance = eta.xi1().dist(sol.zeta.xi1());
            let distance = eta.dist(&sol.zeta)?;
            Ok(LipschitzPair {
                height,
                eta: eta.clone(),
                eta2: sol.zeta,
                distance,
                xi1_distance,
                bound,
                ok: xi1_distance <= bound + tol,
            })
        })
        .collect();
    let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(LipschitzReport {
        lam,
        v: v.clone(),
        v2: v2.clone(),
        tol,
        ok: pairs.iter().all(|p| p.ok),
        pairs,
    })
}
