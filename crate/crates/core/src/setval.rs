//! Closed convex value sets in V₁ and the catalogue of set-valued operators
//! `T: ℍⁿ ⇉ V₁`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heis::{HVec, Point};

/// Nonempty, closed, convex, bounded subset of V₁.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueSet {
    Singleton { v: HVec },
    Ball { center: HVec, radius: f64 },
    /// Convex hull of the stored vertices.
    Polytope { vertices: Vec<HVec> },
}

impl ValueSet {
    pub fn singleton(v: HVec) -> Self {
        ValueSet::Singleton { v }
    }

    pub fn ball(center: HVec, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("must be finite and ≥ 0, got {radius}")));
        }
        Ok(ValueSet::Ball { center, radius })
    }

    pub fn polytope(vertices: Vec<HVec>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::EmptySet)?;
        let n = first.n();
        for v in &vertices {
            v.check_n(n)?;
        }
        Ok(ValueSet::Polytope { vertices })
    }

    pub fn n(&self) -> usize {
        match self {
            ValueSet::Singleton { v } => v.n(),
            ValueSet::Ball { center, .. } => center.n(),
            ValueSet::Polytope { vertices } => vertices[0].n(),
        }
    }

    pub fn is_singleton(&self) -> bool {
        match self {
            ValueSet::Singleton { .. } => true,
            ValueSet::Ball { radius, .. } => *radius == 0.0,
            ValueSet::Polytope { vertices } => vertices.iter().all(|v| v == &vertices[0]),
        }
    }

    /// The unique element, when the set is a single point.
    pub fn as_point(&self) -> Option<&HVec> {
        if !self.is_singleton() {
            return None;
        }
        Some(match self {
            ValueSet::Singleton { v } => v,
            ValueSet::Ball { center, .. } => center,
            ValueSet::Polytope { vertices } => &vertices[0],
        })
    }

    /// Support function σ_S(d) = sup_{v ∈ S} ⟨v, d⟩.
    pub fn support(&self, d: &HVec) -> f64 {
        match self {
            ValueSet::Singleton { v } => v.dot(d),
            ValueSet::Ball { center, radius } => center.dot(d) + radius * d.norm(),
            ValueSet::Polytope { vertices } => vertices
                .iter()
                .map(|v| v.dot(d))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// An element attaining the support function in direction `d`.
    pub fn support_point(&self, d: &HVec) -> HVec {
        match self {
            ValueSet::Singleton { v } => v.clone(),
            ValueSet::Ball { center, radius } => {
                let nd = d.norm();
                if nd == 0.0 {
                    center.clone()
                } else {
                    center.axpy(radius / nd, d)
                }
            }
            ValueSet::Polytope { vertices } => {
                let mut best = &vertices[0];
                let mut best_val = best.dot(d);
                for v in &vertices[1..] {
                    let val = v.dot(d);
                    if val > best_val {
                        best = v;
                        best_val = val;
                    }
                }
                best.clone()
            }
        }
    }

    /// `shift + scale · S`, with `scale ≥ 0`.
    pub fn affine(&self, shift: &HVec, scale: f64) -> ValueSet {
        debug_assert!(scale >= 0.0);
        match self {
            ValueSet::Singleton { v } => ValueSet::Singleton {
                v: shift.axpy(scale, v),
            },
            ValueSet::Ball { center, radius } => ValueSet::Ball {
                center: shift.axpy(scale, center),
                radius: scale * radius,
            },
            ValueSet::Polytope { vertices } => ValueSet::Polytope {
                vertices: vertices.iter().map(|v| shift.axpy(scale, v)).collect(),
            },
        }
    }

    /// Euclidean distance from `p` to the set. Exact for singletons and balls;
    /// for polytopes it is approximated by Frank–Wolfe iterations over the hull.
    pub fn distance_to(&self, p: &HVec) -> f64 {
        match self {
            ValueSet::Singleton { v } => v.dist(p),
            ValueSet::Ball { center, radius } => (center.dist(p) - radius).max(0.0),
            ValueSet::Polytope { vertices } => hull_distance(vertices, p),
        }
    }

    pub fn contains(&self, p: &HVec, tol: f64) -> bool {
        match self {
            ValueSet::Polytope { vertices } => hull_contains(vertices, p, tol),
            _ => self.distance_to(p) <= tol,
        }
    }

    /// sup { ‖u − u'‖ : u ∈ self, u' ∈ other }.
    pub fn farthest_distance(&self, other: &ValueSet) -> f64 {
        let (pa, ra) = self.generators();
        let (pb, rb) = other.generators();
        let mut best = 0.0f64;
        for u in &pa {
            for w in &pb {
                best = best.max(u.dist(w));
            }
        }
        best + ra + rb
    }

    // Finite point set plus an inflation radius whose Minkowski sum is the set.
    fn generators(&self) -> (Vec<HVec>, f64) {
        match self {
            ValueSet::Singleton { v } => (vec![v.clone()], 0.0),
            ValueSet::Ball { center, radius } => (vec![center.clone()], *radius),
            ValueSet::Polytope { vertices } => (vertices.clone(), 0.0),
        }
    }
}

/// Diameter of a finite union of value sets.
pub fn union_diameter(sets: &[ValueSet]) -> f64 {
    let mut best = 0.0f64;
    for (i, s) in sets.iter().enumerate() {
        for u in &sets[i..] {
            best = best.max(s.farthest_distance(u));
        }
    }
    best
}

fn hull_contains(vertices: &[HVec], p: &HVec, tol: f64) -> bool {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};

    // Feasibility of λ ≥ 0, Σλ = 1, |Σ λ_i v_i − p|_∞ ≤ tol.
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = vertices
        .iter()
        .map(|_| lp.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();
    lp.add_constraint(vars.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for k in 0..p.as_slice().len() {
        let row: Vec<_> = vars
            .iter()
            .zip(vertices)
            .map(|(&var, v)| (var, v.as_slice()[k]))
            .collect();
        lp.add_constraint(row.clone(), ComparisonOp::Le, p.as_slice()[k] + tol);
        lp.add_constraint(row, ComparisonOp::Ge, p.as_slice()[k] - tol);
    }
    lp.solve().is_ok()
}

fn hull_distance(vertices: &[HVec], p: &HVec) -> f64 {
    // Frank–Wolfe with exact line search on ½‖Σλ_i v_i − p‖² over the simplex.
    let mut x = vertices
        .iter()
        .min_by(|a, b| a.dist(p).total_cmp(&b.dist(p)))
        .cloned()
        .expect("polytope is nonempty");
    for _ in 0..10_000 {
        let grad = x.sub(p);
        let s = vertices
            .iter()
            .min_by(|a, b| a.dot(&grad).total_cmp(&b.dot(&grad)))
            .expect("polytope is nonempty");
        let dir = s.sub(&x);
        let gap = -grad.dot(&dir);
        if gap <= 1e-15 {
            break;
        }
        let step = (gap / dir.dot(&dir)).min(1.0);
        x = x.axpy(step, &dir);
    }
    x.dist(p)
}

/// Linear (affine) first-layer operator `T(η) = A ξ₁(η) + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    n: usize,
    matrix: DMatrix<f64>,
    offset: Option<HVec>,
}

impl LinearMap {
    pub fn new(n: usize, matrix: DMatrix<f64>, offset: Option<HVec>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be ≥ 1"));
        }
        if matrix.nrows() != 2 * n || matrix.ncols() != 2 * n {
            return Err(invalid(
                "matrix",
                format!(
                    "expected {}×{} for n = {n}, got {}×{}",
                    2 * n,
                    2 * n,
                    matrix.nrows(),
                    matrix.ncols()
                ),
            ));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        if let Some(b) = &offset {
            b.check_n(n)?;
        }
        Ok(Self { n, matrix, offset })
    }

    pub fn from_rows(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(invalid("matrix", "rows have unequal lengths"));
        }
        let m = DMatrix::from_fn(nr, nc, |i, j| rows[i][j]);
        Self::new(n, m, None)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> Option<&HVec> {
        self.offset.as_ref()
    }

    pub fn apply(&self, xy: &HVec) -> HVec {
        let v = &self.matrix * nalgebra::DVector::from_column_slice(xy.as_slice());
        let out = HVec::raw(v.as_slice().to_vec());
        match &self.offset {
            Some(b) => out.add(b),
            None => out,
        }
    }

    pub fn scaled(&self, c: f64) -> LinearMap {
        LinearMap {
            n: self.n,
            matrix: &self.matrix * c,
            offset: self.offset.as_ref().map(|b| b.scale(c)),
        }
    }

    /// Smallest eigenvalue of the symmetric part (A + Aᵀ)/2; the map is
    /// monotone on V₁ iff this is ≥ 0.
    pub fn min_sym_eigenvalue(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.matrix.clone().svd(false, false).singular_values.max()
    }
}

/// Declarative description of a set-valued operator `T: ℍⁿ ⇉ V₁`, always with
/// full domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorConfig", into = "OperatorConfig")]
pub enum OperatorSpec {
    /// `T(η) = {A ξ₁(η) + b}`.
    Linear(LinearMap),
    /// Horizontal subdifferential of the gauge N on ℍ¹.
    GaugeSubdiff,
    /// `ξ₁ + λ · inner`.
    ShiftScale { inner: Box<OperatorSpec>, lam: f64 },
}

impl OperatorSpec {
    pub fn linear(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        Ok(OperatorSpec::Linear(LinearMap::from_rows(n, rows)?))
    }

    /// `T(x, y, t) = (3x, −2x + 4y)` on ℍ¹.
    pub fn example1() -> Self {
        OperatorSpec::linear(1, &[vec![3.0, 0.0], vec![-2.0, 4.0]]).expect("valid matrix")
    }

    /// Negation of [`OperatorSpec::example1`]; not H-monotone.
    pub fn example1_negated() -> Self {
        OperatorSpec::linear(1, &[vec![-3.0, 0.0], vec![2.0, -4.0]]).expect("valid matrix")
    }

    pub fn identity(n: usize) -> Self {
        OperatorSpec::Linear(
            LinearMap::new(n, DMatrix::identity(2 * n, 2 * n), None).expect("valid matrix"),
        )
    }

    pub fn n(&self) -> usize {
        match self {
            OperatorSpec::Linear(m) => m.n,
            OperatorSpec::GaugeSubdiff => 1,
            OperatorSpec::ShiftScale { inner, .. } => inner.n(),
        }
    }

    pub fn eval(&self, p: &Point) -> Result<ValueSet> {
        p.check_n(self.n())?;
        Ok(self.eval_unchecked(p))
    }

    pub(crate) fn eval_unchecked(&self, p: &Point) -> ValueSet {
        match self {
            OperatorSpec::Linear(m) => ValueSet::singleton(m.apply(p.xi1())),
            OperatorSpec::GaugeSubdiff => gauge_subdiff(p),
            OperatorSpec::ShiftScale { inner, lam } => inner.eval_unchecked(p).affine(p.xi1(), *lam),
        }
    }

    /// `T_λ = ξ₁ + λ T`.
    pub fn t_lambda(&self, lam: f64) -> Result<OperatorSpec> {
        check_lambda(lam)?;
        Ok(OperatorSpec::ShiftScale {
            inner: Box::new(self.clone()),
            lam,
        })
    }

    /// Short human-readable name for reports.
    pub fn label(&self) -> String {
        match self {
            OperatorSpec::Linear(_) => "linear".into(),
            OperatorSpec::GaugeSubdiff => "gauge_subdiff".into(),
            OperatorSpec::ShiftScale { inner, lam } => format!("t_lambda({}, {lam})", inner.label()),
        }
    }
}

pub(crate) fn check_lambda(lam: f64) -> Result<()> {
    if lam > 0.0 && lam.is_finite() {
        Ok(())
    } else {
        Err(invalid("lambda", format!("must be positive and finite, got {lam}")))
    }
}

/// ∂_H N on ℍ¹: the closed unit ball at the identity, otherwise the singleton
/// `(x(x²+y²) + y t, y(x²+y²) − x t) / N³`.
fn gauge_subdiff(p: &Point) -> ValueSet {
    let (x, y, t) = (p.x()[0], p.y()[0], p.t());
    if x == 0.0 && y == 0.0 && t == 0.0 {
        return ValueSet::Ball {
            center: HVec::zeros(1),
            radius: 1.0,
        };
    }
    let r2 = x * x + y * y;
    let n3 = p.gauge().powi(3);
    ValueSet::singleton(HVec::raw(vec![(x * r2 + y * t) / n3, (y * r2 - x * t) / n3]))
}

/// JSON form of [`OperatorSpec`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Linear {
        n: usize,
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    GaugeSubdiff {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    TLambda {
        lambda: f64,
        inner: Box<OperatorConfig>,
    },
}

impl TryFrom<OperatorConfig> for OperatorSpec {
    type Error = Error;

    fn try_from(cfg: OperatorConfig) -> Result<Self> {
        match cfg {
            OperatorConfig::Linear { n, matrix, offset } => {
                let offset = offset.map(HVec::from_vec).transpose()?;
                let base = LinearMap::from_rows(n, &matrix)?;
                Ok(OperatorSpec::Linear(LinearMap::new(n, base.matrix, offset)?))
            }
            OperatorConfig::GaugeSubdiff { n } => match n {
                None | Some(1) => Ok(OperatorSpec::GaugeSubdiff),
                Some(k) => Err(Error::GaugeDimension(k)),
            },
            OperatorConfig::TLambda { lambda, inner } => {
                OperatorSpec::try_from(*inner)?.t_lambda(lambda)
            }
        }
    }
}

impl From<OperatorSpec> for OperatorConfig {
    fn from(op: OperatorSpec) -> Self {
        match op {
            OperatorSpec::Linear(m) => OperatorConfig::Linear {
                n: m.n,
                matrix: (0..m.matrix.nrows())
                    .map(|i| m.matrix.row(i).iter().copied().collect())
                    .collect(),
                offset: m.offset.map(HVec::into_vec),
            },
            OperatorSpec::GaugeSubdiff => OperatorConfig::GaugeSubdiff { n: None },
            OperatorSpec::ShiftScale { inner, lam } => OperatorConfig::TLambda {
                lambda: lam,
                inner: Box::new((*inner).into()),
            },
        }
    }
}
