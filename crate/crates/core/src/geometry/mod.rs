//! Constructive geometry from the local-boundedness and semicontinuity
//! arguments: spherical sectors and the sector map Jacobian, the auxiliary
//! sequence η′ₖ ∈ H_{η′} ∩ H_{ηₖ}, the support polyhedron P(ξ), and probes of
//! operators along vertical segments.

mod lemma;
mod polytope;
mod spherical;

pub use lemma::{lemma_sequence, lemma_sequence_in_frame, LemmaStep};
pub use polytope::{polytope_bound, Halfspace, PolytopeReport, SupportPolyhedron};
pub use spherical::{
    jacobian_check, jacobian_closed_form, sector_bound, sector_bound_check, sector_map,
    spherical_dir, spherical_dir_grid, CubeIndex, JacobianReport, SectorReport, SphericalAngle,
    JACOBIAN_REL_TOL,
};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::heis::{HVec, Point};
use crate::setval::{union_diameter, OperatorSpec};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerticalProbe {
    pub x: HVec,
    pub t_range: (f64, f64),
    pub samples: usize,
    pub diameter: f64,
    /// Largest norm of any value met along the segment.
    pub max_norm: f64,
}

/// Samples `T` on the vertical segment {(x, t) : t ∈ t_range} and returns the
/// diameter of the union of the sampled value sets.
pub fn vertical_bound_probe(
    op: &OperatorSpec,
    x: &HVec,
    t_range: (f64, f64),
    samples: usize,
) -> Result<VerticalProbe> {
    if samples < 2 {
        return Err(invalid("samples", format!("must be ≥ 2, got {samples}")));
    }
    x.check_n(op.n())?;
    let (lo, hi) = t_range;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(invalid("t_range", format!("expected finite lo ≤ hi, got ({lo}, {hi})")));
    }
    let sets: Vec<_> = (0..samples)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            op.eval_unchecked(&Point::raw(x.clone(), t))
        })
        .collect();
    let origin = crate::setval::ValueSet::singleton(HVec::zeros(op.n()));
    let max_norm = sets
        .iter()
        .map(|s| s.farthest_distance(&origin))
        .fold(0.0, f64::max);
    Ok(VerticalProbe {
        x: x.clone(),
        t_range,
        samples,
        diameter: union_diameter(&sets),
        max_norm,
    })
}
