//! H-monotonicity and H-cyclical monotonicity checks.
//!
//! All checks take the worst case over set-valued selections, computed
//! exactly through support functions: for a pair `(a, b)` with
//! `d = ξ₁(a) − ξ₁(b)`,
//!
//! ```text
//! min_{v ∈ T(a), v' ∈ T(b)} ⟨v − v', d⟩ = −σ_{T(a)}(−d) − σ_{T(b)}(d)
//! ```
//!
//! and the cyclic sum separates term by term in the selections.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::heis::{HVec, Point};
use crate::sampling::{horizontal_offset, trial_rng, SampleBox};
use crate::setval::OperatorSpec;

/// Violations must be below `-WITNESS_THRESHOLD` to be reported as witnesses.
pub const WITNESS_THRESHOLD: f64 = 1e-6;

/// Horizontal offsets drawn by [`sample_h_pairs`] have length in this range.
pub const OFFSET_LEN: (f64, f64) = (1e-3, 10.0);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneVerdict {
    pub ok: bool,
    pub worst_slack: f64,
    pub samples: usize,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Pair {
        #[serde(skip_serializing_if = "Option::is_none")]
        sample: Option<usize>,
        a: Point,
        b: Point,
        v_a: HVec,
        v_b: HVec,
        slack: f64,
    },
    Chain {
        #[serde(skip_serializing_if = "Option::is_none")]
        trial: Option<usize>,
        points: Vec<Point>,
        selections: Vec<HVec>,
        slack: f64,
    },
}

impl Witness {
    pub fn slack(&self) -> f64 {
        match self {
            Witness::Pair { slack, .. } | Witness::Chain { slack, .. } => *slack,
        }
    }
}

fn witness_cut(tol: f64) -> f64 {
    -(tol.max(WITNESS_THRESHOLD))
}

struct PairEval {
    slack: f64,
    v_a: HVec,
    v_b: HVec,
}

fn pair_slack(op: &OperatorSpec, a: &Point, b: &Point) -> PairEval {
    let d = a.xi1().sub(b.xi1());
    let nd = d.scale(-1.0);
    let ta = op.eval_unchecked(a);
    let tb = op.eval_unchecked(b);
    PairEval {
        slack: -ta.support(&nd) - tb.support(&d),
        v_a: ta.support_point(&nd),
        v_b: tb.support_point(&d),
    }
}

/// Worst-case H-monotonicity slack of `T` on the horizontal pair `(a, b)`.
pub fn check_h_pair(op: &OperatorSpec, a: &Point, b: &Point, tol: f64) -> Result<MonotoneVerdict> {
    a.check_n(op.n())?;
    let residual = a.hplane_residual(b)?;
    if residual.abs() > tol {
        return Err(Error::NotHorizontal { residual });
    }
    let ev = pair_slack(op, a, b);
    let witness = (ev.slack < witness_cut(tol)).then(|| Witness::Pair {
        sample: None,
        a: a.clone(),
        b: b.clone(),
        v_a: ev.v_a,
        v_b: ev.v_b,
        slack: ev.slack,
    });
    Ok(MonotoneVerdict {
        ok: ev.slack >= -tol,
        worst_slack: ev.slack,
        samples: 1,
        violations: usize::from(ev.slack < -tol),
        witness,
    })
}

fn draw_pair(n: usize, region: &SampleBox, seed: u64, index: usize) -> (Point, Point) {
    let mut rng = trial_rng(seed, index as u64);
    let a = region.point(n, &mut rng);
    let w = horizontal_offset(n, OFFSET_LEN.0, OFFSET_LEN.1, &mut rng);
    let b = a.exp_h_unchecked(&w);
    (a, b)
}

/// Samples `count` horizontal pairs `(a, a ∘ exp(w))` with `a` uniform in the
/// box and aggregates the pair verdicts. The witness is the first sample (in
/// index order) whose slack falls below the witness threshold.
pub fn sample_h_pairs(
    op: &OperatorSpec,
    region: &SampleBox,
    count: usize,
    seed: u64,
    tol: f64,
) -> Result<MonotoneVerdict> {
    if count == 0 {
        return Err(invalid("count", "must be ≥ 1"));
    }
    let n = op.n();
    let slacks: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (a, b) = draw_pair(n, region, seed, i);
            pair_slack(op, &a, &b).slack
        })
        .collect();
    let worst_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = slacks.iter().filter(|&&s| s < -tol).count();
    let cut = witness_cut(tol);
    let witness = slacks.iter().position(|&s| s < cut).map(|i| {
        let (a, b) = draw_pair(n, region, seed, i);
        let ev = pair_slack(op, &a, &b);
        Witness::Pair {
            sample: Some(i),
            a,
            b,
            v_a: ev.v_a,
            v_b: ev.v_b,
            slack: ev.slack,
        }
    });
    Ok(MonotoneVerdict {
        ok: worst_slack >= -tol,
        worst_slack,
        samples: count,
        violations,
        witness,
    })
}

/// Cyclic sequence η₀, …, η_m with η_{i+1} ∈ H_{η_i} (indices mod m + 1).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ClosedHChain {
    points: Vec<Point>,
}

impl ClosedHChain {
    /// Validates horizontality of every consecutive pair, including the
    /// wrap-around, and the symplectic closure.
    pub fn new(points: Vec<Point>, tol: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidChain(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        let n = points[0].n();
        for p in &points {
            p.check_n(n)?;
        }
        let xy: Vec<HVec> = points.iter().map(|p| p.xi1().clone()).collect();
        let closure = symplectic_closure(&xy);
        if closure.abs() > tol {
            return Err(Error::InvalidChain(format!(
                "symplectic closure sum {closure:e} exceeds {tol:e}"
            )));
        }
        let m = points.len();
        for i in 0..m {
            let r = points[i].hplane_residual(&points[(i + 1) % m])?;
            if r.abs() > tol {
                return Err(Error::InvalidChain(format!(
                    "point {} is not in the horizontal plane of point {i} (residual {r:e})",
                    (i + 1) % m
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn closure(&self) -> f64 {
        let xy: Vec<HVec> = self.points.iter().map(|p| p.xi1().clone()).collect();
        symplectic_closure(&xy)
    }
}

/// Σᵢ (⟨yᵢ, x_{i+1}⟩ − ⟨xᵢ, y_{i+1}⟩) over the cyclic polygon. The t-lift of
/// the polygon returns to its start iff this vanishes.
pub fn symplectic_closure(xy: &[HVec]) -> f64 {
    let m = xy.len();
    (0..m).map(|i| xy[i].symplectic(&xy[(i + 1) % m])).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    /// Move the last vertex so the closure sum vanishes.
    Adjust,
    /// Accept the polygon as given.
    Validate,
}

/// Builds a closed H-chain over a first-layer polygon, lifting heights from
/// `t0` with `t_{i+1} = t_i + 2(⟨y_i, x_{i+1}⟩ − ⟨x_i, y_{i+1}⟩)`.
pub fn close_chain(xy_list: &[HVec], t0: f64, mode: ChainMode, tol: f64) -> Result<ClosedHChain> {
    let first = xy_list
        .first()
        .ok_or_else(|| Error::InvalidChain("empty polygon".into()))?;
    let n = first.n();
    for v in xy_list {
        v.check_n(n)?;
    }
    let mut xy = xy_list.to_vec();
    match mode {
        ChainMode::Validate => {
            let s = symplectic_closure(&xy);
            if s.abs() > tol {
                return Err(Error::InvalidChain(format!(
                    "symplectic closure sum {s:e} exceeds {tol:e}"
                )));
            }
        }
        ChainMode::Adjust => {
            let m = xy.len();
            if m < 3 {
                return Err(Error::InvalidChain(format!(
                    "adjust needs at least 3 vertices, got {m}"
                )));
            }
            // The closure sum is affine in the last vertex p with gradient
            // (u_b − v_b, v_a − u_a), u the previous vertex and v the first.
            let u = &xy[m - 2];
            let v = &xy[0];
            let mut g: Vec<f64> = u.b().iter().zip(v.b()).map(|(ub, vb)| ub - vb).collect();
            g.extend(v.a().iter().zip(u.a()).map(|(va, ua)| va - ua));
            let g = HVec::raw(g);
            let g2 = g.dot(&g);
            let scale = xy.iter().map(|p| p.dot(p)).fold(0.0, f64::max).max(1.0);
            if g2 <= 1e-24 * scale {
                return Err(Error::DegenerateChain);
            }
            let s = symplectic_closure(&xy);
            xy[m - 1] = xy[m - 1].axpy(-s / g2, &g);
        }
    }
    let mut points = Vec::with_capacity(xy.len());
    let mut t = t0;
    for (i, p) in xy.iter().enumerate() {
        if i > 0 {
            t += 2.0 * xy[i - 1].symplectic(p);
        }
        points.push(Point::raw(p.clone(), t));
    }
    ClosedHChain::new(points, tol)
}

struct ChainEval {
    slack: f64,
    selections: Vec<HVec>,
}

fn chain_slack(op: &OperatorSpec, points: &[Point]) -> ChainEval {
    let m = points.len();
    let mut slack = 0.0;
    let mut selections = Vec::with_capacity(m);
    for i in 0..m {
        let nd = points[(i + 1) % m].xi1().sub(points[i].xi1());
        let set = op.eval_unchecked(&points[i]);
        slack -= set.support(&nd);
        selections.push(set.support_point(&nd));
    }
    ChainEval { slack, selections }
}

/// Worst-case cyclic slack Σᵢ ⟨ξ₁(ηᵢ) − ξ₁(η_{i+1}), vᵢ⟩ over selections
/// vᵢ ∈ T(ηᵢ).
pub fn check_cyclic(op: &OperatorSpec, chain: &ClosedHChain, tol: f64) -> Result<MonotoneVerdict> {
    chain.points[0].check_n(op.n())?;
    let ev = chain_slack(op, &chain.points);
    let witness = (ev.slack < witness_cut(tol)).then(|| Witness::Chain {
        trial: None,
        points: chain.points.clone(),
        selections: ev.selections,
        slack: ev.slack,
    });
    Ok(MonotoneVerdict {
        ok: ev.slack >= -tol,
        worst_slack: ev.slack,
        samples: 1,
        violations: usize::from(ev.slack < -tol),
        witness,
    })
}

/// Random closed H-chain with between 3 and `max_len` vertices drawn in the
/// box; `None` when the closure adjustment degenerates.
pub fn random_closed_chain<R: Rng>(
    n: usize,
    max_len: usize,
    region: &SampleBox,
    tol: f64,
    rng: &mut R,
) -> Option<ClosedHChain> {
    let len = rng.gen_range(3..=max_len);
    let xy: Vec<HVec> = (0..len).map(|_| region.hvec(n, rng)).collect();
    let t0 = rng.gen_range(region.lo..=region.hi);
    close_chain(&xy, t0, ChainMode::Adjust, tol).ok()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CyclicSearch {
    pub trials: usize,
    /// Trials whose closure adjustment degenerated and were skipped.
    pub skipped: usize,
    pub worst_slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// Aggregated cyclic check over `trials` random closed chains in `region`.
pub fn sample_cyclic(
    op: &OperatorSpec,
    max_len: usize,
    region: &SampleBox,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<CyclicSearch> {
    if max_len < 3 {
        return Err(invalid("max_len", format!("must be ≥ 3, got {max_len}")));
    }
    let n = op.n();
    let chain_at = |i: usize| {
        let mut rng = trial_rng(seed, i as u64);
        random_closed_chain(n, max_len, region, tol, &mut rng)
    };
    let slacks: Vec<Option<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| chain_at(i).map(|c| chain_slack(op, c.points()).slack))
        .collect();
    let skipped = slacks.iter().filter(|s| s.is_none()).count();
    let worst_slack = slacks.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let cut = witness_cut(tol);
    let witness = slacks
        .iter()
        .position(|s| matches!(s, Some(v) if *v < cut))
        .map(|i| {
            let chain = chain_at(i).expect("chain regenerated from the same stream");
            let ev = chain_slack(op, chain.points());
            Witness::Chain {
                trial: Some(i),
                points: chain.points,
                selections: ev.selections,
                slack: ev.slack,
            }
        });
    Ok(CyclicSearch {
        trials,
        skipped,
        worst_slack,
        witness,
    })
}

/// First random zero-area chain (by trial index) on which `T` violates
/// H-cyclical monotonicity. A `None` result is not a proof of cyclical
/// monotonicity.
pub fn search_cyclic_violation(
    op: &OperatorSpec,
    max_len: usize,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<Option<Witness>> {
    Ok(sample_cyclic(op, max_len, &SampleBox::symmetric(5.0), trials, seed, tol)?.witness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heis::DEFAULT_TOL;
    use approx::assert_abs_diff_eq;

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    fn hv(c: &[f64]) -> HVec {
        HVec::from_vec(c.to_vec()).unwrap()
    }

    #[test]
    fn pair_examples() {
        let e = Point::identity(1);
        let b = p(&[1., 0., 0.]);
        let v = check_h_pair(&OperatorSpec::example1(), &e, &b, DEFAULT_TOL).unwrap();
        assert!(v.ok);
        assert_eq!(v.worst_slack, 3.0);

        let v = check_h_pair(&OperatorSpec::GaugeSubdiff, &e, &b, DEFAULT_TOL).unwrap();
        assert!(v.ok);
        assert_abs_diff_eq!(v.worst_slack, 0.0, epsilon = 1e-15);

        let q = p(&[0.3, -2.0, 1.0]);
        let v = check_h_pair(&OperatorSpec::example1(), &q, &q, DEFAULT_TOL).unwrap();
        assert_eq!(v.worst_slack, 0.0);
    }

    #[test]
    fn gauge_pair_slack_matches_ball_brute_force() {
        // Minimum of ⟨v − (1,0), (−1,0)⟩ over v on a fine grid of the unit ball.
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=200 {
                let (vx, vy) = (-1.0 + i as f64 / 100.0, -1.0 + j as f64 / 100.0);
                if vx * vx + vy * vy <= 1.0 {
                    best = best.min(-(vx - 1.0));
                }
            }
        }
        let v = check_h_pair(&OperatorSpec::GaugeSubdiff, &Point::identity(1), &p(&[1., 0., 0.]), 1e-9)
            .unwrap();
        assert_abs_diff_eq!(v.worst_slack, best, epsilon = 1e-12);
    }

    #[test]
    fn pair_requires_horizontality() {
        let r = check_h_pair(
            &OperatorSpec::example1(),
            &Point::identity(1),
            &p(&[0., 0., 1.]),
            DEFAULT_TOL,
        );
        assert!(matches!(r, Err(Error::NotHorizontal { .. })));
    }

    #[test]
    fn negated_operator_fails_at_first_sample() {
        let v = sample_h_pairs(
            &OperatorSpec::example1_negated(),
            &SampleBox::symmetric(5.0),
            100,
            7,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(!v.ok);
        match v.witness {
            Some(Witness::Pair { sample, slack, .. }) => {
                assert_eq!(sample, Some(0));
                assert!(slack < -WITNESS_THRESHOLD);
            }
            other => panic!("expected pair witness, got {other:?}"),
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let region = SampleBox::symmetric(5.0);
        let a = sample_h_pairs(&OperatorSpec::GaugeSubdiff, &region, 500, 3, 1e-9).unwrap();
        let b = sample_h_pairs(&OperatorSpec::GaugeSubdiff, &region, 500, 3, 1e-9).unwrap();
        assert_eq!(a, b);
        assert!(sample_h_pairs(&OperatorSpec::GaugeSubdiff, &region, 0, 3, 1e-9).is_err());
    }

    #[test]
    fn collinear_loop_is_flat() {
        let xy = [hv(&[0., 0.]), hv(&[1., 0.]), hv(&[2., 0.]), hv(&[0., 0.])];
        let chain = close_chain(&xy, 0.0, ChainMode::Validate, DEFAULT_TOL).unwrap();
        assert!(chain.points().iter().all(|q| q.t() == 0.0));
    }

    #[test]
    fn triangle_fails_validation() {
        let xy = [hv(&[0., 0.]), hv(&[1., 0.]), hv(&[0., 1.])];
        assert_eq!(symplectic_closure(&xy), -1.0);
        assert!(matches!(
            close_chain(&xy, 0.0, ChainMode::Validate, DEFAULT_TOL),
            Err(Error::InvalidChain(_))
        ));
        let fixed = close_chain(&xy, 0.0, ChainMode::Adjust, DEFAULT_TOL).unwrap();
        assert!(fixed.closure().abs() <= 1e-12);
    }

    #[test]
    fn bowtie_adjusts() {
        let xy = [hv(&[0., 0.]), hv(&[2., 0.]), hv(&[0., 1.]), hv(&[2., 1.])];
        let chain = close_chain(&xy, 0.5, ChainMode::Adjust, DEFAULT_TOL).unwrap();
        assert!(chain.closure().abs() <= 1e-12);
        assert_eq!(chain.points()[0].t(), 0.5);
        let again: Vec<HVec> = chain.points().iter().map(|q| q.xi1().clone()).collect();
        close_chain(&again, 0.5, ChainMode::Validate, DEFAULT_TOL).unwrap();
    }

    #[test]
    fn degenerate_adjust_is_reported() {
        // previous vertex equals the first: the last vertex cannot change the sum
        let deg = [hv(&[1., 0.]), hv(&[0., 2.]), hv(&[1., 0.]), hv(&[4., 4.])];
        assert_eq!(
            close_chain(&deg, 0.0, ChainMode::Adjust, DEFAULT_TOL),
            Err(Error::DegenerateChain)
        );
        assert!(close_chain(&deg[..2], 0.0, ChainMode::Adjust, DEFAULT_TOL).is_err());
    }

    #[test]
    fn cyclic_examples() {
        let same = close_chain(
            &[hv(&[1., 2.]), hv(&[1., 2.]), hv(&[1., 2.])],
            0.0,
            ChainMode::Validate,
            DEFAULT_TOL,
        )
        .unwrap();
        let v = check_cyclic(&OperatorSpec::GaugeSubdiff, &same, DEFAULT_TOL).unwrap();
        assert_eq!(v.worst_slack, 0.0);

        // 0 → 2 → 1 → 0 along the x-axis; terms ⟨ξᵢ − ξ_{i+1}, 3xᵢ e₁ − 2xᵢ e₂⟩
        let chain = close_chain(
            &[hv(&[0., 0.]), hv(&[2., 0.]), hv(&[1., 0.])],
            0.0,
            ChainMode::Validate,
            DEFAULT_TOL,
        )
        .unwrap();
        let brute: f64 = [(0.0, 2.0), (2.0, 1.0), (1.0, 0.0)]
            .iter()
            .map(|&(a, b)| (a - b) * 3.0 * a)
            .sum();
        let v = check_cyclic(&OperatorSpec::example1(), &chain, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(v.worst_slack, brute, epsilon = 1e-12);
        assert!(v.ok && v.worst_slack >= 0.0);
    }

    #[test]
    fn identity_and_gauge_have_no_cyclic_witness() {
        assert!(search_cyclic_violation(&OperatorSpec::identity(1), 6, 2000, 11, DEFAULT_TOL)
            .unwrap()
            .is_none());
        assert!(search_cyclic_violation(&OperatorSpec::GaugeSubdiff, 6, 2000, 11, DEFAULT_TOL)
            .unwrap()
            .is_none());
        assert!(search_cyclic_violation(&OperatorSpec::GaugeSubdiff, 2, 10, 11, DEFAULT_TOL).is_err());
    }

    #[test]
    fn skew_operator_in_two_dimensions_has_cyclic_witness() {
        // I + 5K with K rotating the (x₁, x₂) coordinates: H-monotone (its
        // symmetric part is I) but the skew part is not a multiple of the
        // symplectic form, so zero-area chains can pick up negative sums.
        let rows = vec![
            vec![1.0, 5.0, 0.0, 0.0],
            vec![-5.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ];
        let op = OperatorSpec::linear(2, &rows).unwrap();
        let v = sample_h_pairs(&op, &SampleBox::symmetric(5.0), 2000, 1, DEFAULT_TOL).unwrap();
        assert!(v.ok);
        let w = search_cyclic_violation(&op, 6, 2000, 1, DEFAULT_TOL).unwrap();
        let Some(Witness::Chain { points, slack, .. }) = w else {
            panic!("expected a chain witness");
        };
        let chain = ClosedHChain::new(points, DEFAULT_TOL).unwrap();
        let again = check_cyclic(&op, &chain, DEFAULT_TOL).unwrap();
        assert_eq!(again.worst_slack, slack);
        assert!(!again.ok);
    }
}
