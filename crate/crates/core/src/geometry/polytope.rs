use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::spherical::spherical_dir_grid;
use crate::error::{invalid, Error, Result};
use crate::heis::{HVec, Point};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Halfspace {
    pub normal: HVec,
    pub offset: f64,
}

/// {u ∈ V₁ : ⟨u, v_j^±(ξ)⟩ ≤ 2K for all j}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportPolyhedron {
    pub halfspaces: Vec<Halfspace>,
}

impl SupportPolyhedron {
    pub fn contains(&self, u: &HVec, tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.normal.dot(u) <= h.offset + tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolytopeReport {
    pub xi: Point,
    pub k: f64,
    pub r: f64,
    pub polyhedron: SupportPolyhedron,
    /// Heights s at which H_ξ meets the segments I_j^± = {(±e_j, 0, s)} and
    /// {(0, ±e_j, s)}, in the order of the halfspaces.
    pub heights: Vec<f64>,
    /// min over grid directions d of max_j ⟨d, v_j⟩; positive on a bounded
    /// polyhedron.
    pub grid_margin: f64,
    pub grid_directions: usize,
    /// Largest value of ±d_i over the recession cone intersected with the unit box.
    pub recession_max: f64,
    pub bounded: bool,
    pub vertices: usize,
    /// max ‖u‖ over the vertices, an upper bound for |T(ξ)|.
    pub radius_bound: f64,
}

/// Polyhedron P(ξ) cut out by the monotonicity inequalities against the 4n
/// points H_ξ ∩ I_j^±, with its boundedness certified by a sphere-grid scan
/// and an exact recession-cone LP, and its vertex radius.
pub fn polytope_bound(xi: &Point, k: f64, r: f64, grid_div: usize) -> Result<PolytopeReport> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("K", format!("must be positive, got {k}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid("r", format!("must lie in (0, 1), got {r}")));
    }
    if xi.gauge() > r {
        return Err(invalid("xi", format!("N(ξ) = {} exceeds r = {r}", xi.gauge())));
    }
    let n = xi.n();
    let mut halfspaces = Vec::with_capacity(4 * n);
    let mut heights = Vec::with_capacity(4 * n);
    for slot in 0..2 * n {
        for sign in [1.0, -1.0] {
            let target = HVec::basis(n, slot).scale(sign);
            let v = target.sub(xi.xi1());
            let s = xi.hplane_t_unchecked(&target);
            if s.abs() > 1.0 {
                return Err(invalid(
                    "r",
                    format!("H_ξ misses segment {slot}{} (height {s})", if sign > 0.0 { "+" } else { "−" }),
                ));
            }
            heights.push(s);
            halfspaces.push(Halfspace {
                normal: v,
                offset: 2.0 * k,
            });
        }
    }
    let normals: Vec<&HVec> = halfspaces.iter().map(|h| &h.normal).collect();

    let dirs = spherical_dir_grid(n, grid_div);
    let grid_margin = dirs
        .iter()
        .map(|d| normals.iter().map(|v| v.dot(d)).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);

    let recession_max = recession_cone_extent(&normals)?;
    let bounded = recession_max <= 1e-9 && grid_margin > 0.0;

    let (vertices, radius_bound) = if bounded {
        vertex_radius(&halfspaces)
    } else {
        (0, f64::INFINITY)
    };

    Ok(PolytopeReport {
        xi: xi.clone(),
        k,
        r,
        polyhedron: SupportPolyhedron { halfspaces },
        heights,
        grid_margin,
        grid_directions: dirs.len(),
        recession_max,
        bounded,
        vertices,
        radius_bound,
    })
}

// max over i and ± of ±d_i subject to ⟨d, v_j⟩ ≤ 0 and |d_i| ≤ 1; zero iff the
// recession cone is trivial.
fn recession_cone_extent(normals: &[&HVec]) -> Result<f64> {
    let dim = normals[0].as_slice().len();
    let mut best = 0.0f64;
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut lp = Problem::new(OptimizationDirection::Maximize);
            let vars: Vec<_> = (0..dim)
                .map(|j| lp.add_var(if j == i { sign } else { 0.0 }, (-1.0, 1.0)))
                .collect();
            for v in normals {
                lp.add_constraint(
                    vars.iter().zip(v.as_slice()).map(|(&var, &c)| (var, c)),
                    ComparisonOp::Le,
                    0.0,
                );
            }
            let sol = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
            best = best.max(sol.objective());
        }
    }
    Ok(best)
}

fn vertex_radius(halfspaces: &[Halfspace]) -> (usize, f64) {
    let dim = halfspaces[0].normal.as_slice().len();
    let scale = halfspaces.iter().map(|h| h.offset.abs()).fold(1.0, f64::max);
    let mut count = 0;
    let mut radius = 0.0f64;
    for subset in combinations(halfspaces.len(), dim) {
        let a = DMatrix::from_fn(dim, dim, |r, c| halfspaces[subset[r]].normal.as_slice()[c]);
        let b = DVector::from_iterator(dim, subset.iter().map(|&s| halfspaces[s].offset));
        let Some(u) = a.lu().solve(&b) else {
            continue;
        };
        if u.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let feasible = halfspaces.iter().all(|h| {
            let lhs: f64 = h.normal.as_slice().iter().zip(u.iter()).map(|(p, q)| p * q).sum();
            lhs <= h.offset + 1e-9 * scale
        });
        if feasible {
            count += 1;
            radius = radius.max(u.norm());
        }
    }
    (count, radius)
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            go(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, m, k, &mut Vec::with_capacity(k), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    #[test]
    fn identity_gives_the_box() {
        let rep = polytope_bound(&Point::identity(1), 1.0, 0.5, 16).unwrap();
        let normals: Vec<Vec<f64>> = rep
            .polyhedron
            .halfspaces
            .iter()
            .map(|h| h.normal.as_slice().to_vec())
            .collect();
        assert_eq!(normals, vec![vec![1., 0.], vec![-1., 0.], vec![0., 1.], vec![0., -1.]]);
        assert!(rep.polyhedron.halfspaces.iter().all(|h| h.offset == 2.0));
        assert!(rep.bounded);
        assert_eq!(rep.vertices, 4);
        assert_abs_diff_eq!(rep.radius_bound, 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn shifted_center() {
        let rep = polytope_bound(&p(&[0.1, 0., 0.]), 1.0, 0.5, 16).unwrap();
        let normals: Vec<Vec<f64>> = rep
            .polyhedron
            .halfspaces
            .iter()
            .map(|h| h.normal.as_slice().to_vec())
            .collect();
        let want = [[0.9, 0.], [-1.1, 0.], [-0.1, 1.], [-0.1, -1.]];
        for (got, want) in normals.iter().zip(want) {
            assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-15);
            assert_abs_diff_eq!(got[1], want[1], epsilon = 1e-15);
        }
        assert!(rep.bounded);
    }

    #[test]
    fn radius_is_homogeneous_in_k() {
        let xi = p(&[0.05, -0.1, 0.02]);
        let r1 = polytope_bound(&xi, 1.0, 0.5, 16).unwrap().radius_bound;
        let r3 = polytope_bound(&xi, 3.0, 0.5, 16).unwrap().radius_bound;
        assert_abs_diff_eq!(r3, 3.0 * r1, epsilon = 1e-12);
    }

    #[test]
    fn argument_checks() {
        assert!(polytope_bound(&p(&[0.9, 0., 0.]), 1.0, 0.5, 16).is_err());
        assert!(polytope_bound(&Point::identity(1), 0.0, 0.5, 16).is_err());
        assert!(polytope_bound(&Point::identity(1), 1.0, 1.0, 16).is_err());
    }

    #[test]
    fn recession_lp_detects_unbounded_cones() {
        let a = HVec::from_vec(vec![1., 0.]).unwrap();
        let b = HVec::from_vec(vec![0., 1.]).unwrap();
        assert!(recession_cone_extent(&[&a, &b]).unwrap() > 0.5);
        let c = HVec::from_vec(vec![-1., -1.]).unwrap();
        assert!(recession_cone_extent(&[&a, &b, &c]).unwrap() <= 1e-12);
    }

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(8, 4).len(), 70);
    }
}
