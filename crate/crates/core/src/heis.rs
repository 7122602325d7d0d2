//! Heisenberg group ℍⁿ = ℝⁿ × ℝⁿ × ℝ with product
//!
//! ```text
//! (x, y, t) ∘ (x', y', t') = (x + x', y + y', t + t' + 2(⟨x', y⟩ − ⟨x, y'⟩))
//! ```
//!
//! together with the first-layer projection ξ₁, the homogeneous gauge N, the
//! Korányi–Cygan distance and horizontal planes.
//!
//! Horizontal distance collapse: if `q ∈ H_p` then `p⁻¹ ∘ q` has zero
//! t-coordinate. Writing `q = p ∘ (w, 0)` gives `p⁻¹ ∘ q = (w, 0)`, hence
//! `d(p, q) = N(w, 0) = ‖w‖ = ‖ξ₁(q) − ξ₁(p)‖`.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

/// Default absolute tolerance used across the crate.
pub const DEFAULT_TOL: f64 = 1e-9;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Element of the first layer V₁ ≅ ℝ²ⁿ, stored as `[a₁..aₙ, b₁..bₙ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HVec {
    data: Vec<f64>,
}

impl HVec {
    pub fn new(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        let mut data = Vec::with_capacity(2 * a.len());
        data.extend_from_slice(a);
        data.extend_from_slice(b);
        Self::from_vec(data)
    }

    /// Builds from the flat layout `[a…, b…]`; the length must be even and nonzero.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() || !data.len().is_multiple_of(2) {
            return Err(invalid(
                "HVec",
                format!("expected an even number (≥ 2) of coordinates, got {}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("HVec"));
        }
        Ok(Self { data })
    }

    pub(crate) fn raw(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty() && data.len().is_multiple_of(2));
        Self { data }
    }

    pub fn zeros(n: usize) -> Self {
        Self::raw(vec![0.0; 2 * n])
    }

    /// `k`-th standard basis vector of ℝ²ⁿ.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.data[k] = 1.0;
        v
    }

    pub fn n(&self) -> usize {
        self.data.len() / 2
    }

    pub fn a(&self) -> &[f64] {
        &self.data[..self.n()]
    }

    pub fn b(&self) -> &[f64] {
        &self.data[self.n()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &HVec) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn add(&self, other: &HVec) -> HVec {
        HVec::raw(self.data.iter().zip(&other.data).map(|(u, v)| u + v).collect())
    }

    pub fn sub(&self, other: &HVec) -> HVec {
        HVec::raw(self.data.iter().zip(&other.data).map(|(u, v)| u - v).collect())
    }

    pub fn scale(&self, s: f64) -> HVec {
        HVec::raw(self.data.iter().map(|u| s * u).collect())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &HVec) -> HVec {
        HVec::raw(self.data.iter().zip(&other.data).map(|(u, v)| u + s * v).collect())
    }

    pub fn dist(&self, other: &HVec) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt()
    }

    /// Symplectic pairing ⟨b, a'⟩ − ⟨a, b'⟩, the t-increment (halved) of
    /// `(self, 0) ∘ (other, 0)`.
    pub fn symplectic(&self, other: &HVec) -> f64 {
        dot(self.b(), other.a()) - dot(self.a(), other.b())
    }

    pub(crate) fn check_n(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.n(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for HVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_csv(f, &self.data)
    }
}

impl FromStr for HVec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        HVec::from_vec(parse_reals(s)?)
    }
}

impl Serialize for HVec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.data.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = Vec::<f64>::deserialize(d)?;
        HVec::from_vec(data).map_err(D::Error::custom)
    }
}

/// Point of ℍⁿ, stored as its first-layer part `(x, y)` and height `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    xy: HVec,
    t: f64,
}

impl Point {
    pub fn new(x: &[f64], y: &[f64], t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFinite("Point"));
        }
        Ok(Self {
            xy: HVec::new(x, y)?,
            t,
        })
    }

    pub fn from_parts(xy: HVec, t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFinite("Point"));
        }
        Ok(Self { xy, t })
    }

    pub(crate) fn raw(xy: HVec, t: f64) -> Self {
        Self { xy, t }
    }

    /// Builds from the flat layout `[x…, y…, t]`.
    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        if coords.len() < 3 || coords.len().is_multiple_of(2) {
            return Err(invalid(
                "Point",
                format!("expected 2n + 1 coordinates (n ≥ 1), got {}", coords.len()),
            ));
        }
        let (xy, t) = coords.split_at(coords.len() - 1);
        Point::from_parts(HVec::from_vec(xy.to_vec())?, t[0])
    }

    pub fn identity(n: usize) -> Self {
        Self::raw(HVec::zeros(n), 0.0)
    }

    /// The point `(0, 0, h)` on the vertical axis.
    pub fn vertical(n: usize, h: f64) -> Self {
        Self::raw(HVec::zeros(n), h)
    }

    pub fn n(&self) -> usize {
        self.xy.n()
    }

    pub fn x(&self) -> &[f64] {
        self.xy.a()
    }

    pub fn y(&self) -> &[f64] {
        self.xy.b()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.xy.as_slice().to_vec();
        v.push(self.t);
        v
    }

    /// Group product `self ∘ other`.
    pub fn mul(&self, other: &Point) -> Result<Point> {
        check_same(self, other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Point) -> Point {
        let t = self.t + other.t + 2.0 * self.xy.symplectic(&other.xy);
        Point::raw(self.xy.add(&other.xy), t)
    }

    pub fn inv(&self) -> Point {
        Point::raw(self.xy.scale(-1.0), -self.t)
    }

    /// Anisotropic dilation δ_λ(x, y, t) = (λx, λy, λ²t).
    pub fn dilate(&self, lam: f64) -> Result<Point> {
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(invalid("lambda", format!("dilation factor must be positive, got {lam}")));
        }
        Ok(Point::raw(self.xy.scale(lam), lam * lam * self.t))
    }

    /// Homogeneous gauge N = ((‖x‖² + ‖y‖²)² + t²)^{1/4}.
    pub fn gauge(&self) -> f64 {
        let r2 = self.xy.dot(&self.xy);
        // hypot keeps the squares from overflowing for large coordinates
        r2.hypot(self.t).sqrt()
    }

    /// Korányi–Cygan distance d(a, b) = N(b⁻¹ ∘ a).
    pub fn dist(&self, other: &Point) -> Result<f64> {
        check_same(self, other)?;
        Ok(other.inv().mul_unchecked(self).gauge())
    }

    /// First-layer projection ξ₁.
    pub fn xi1(&self) -> &HVec {
        &self.xy
    }

    /// Horizontal exponential `self ∘ (w, 0)`.
    pub fn exp_h(&self, w: &HVec) -> Result<Point> {
        w.check_n(self.n())?;
        Ok(self.exp_h_unchecked(w))
    }

    pub(crate) fn exp_h_unchecked(&self, w: &HVec) -> Point {
        let t = self.t + 2.0 * self.xy.symplectic(w);
        Point::raw(self.xy.add(w), t)
    }

    /// Height of the horizontal plane `H_self` above the first-layer point `xy`.
    pub fn hplane_t(&self, xy: &HVec) -> Result<f64> {
        xy.check_n(self.n())?;
        Ok(self.hplane_t_unchecked(xy))
    }

    pub(crate) fn hplane_t_unchecked(&self, xy: &HVec) -> f64 {
        self.t + 2.0 * (dot(self.y(), xy.a()) - dot(self.x(), xy.b()))
    }

    /// Signed t-residual of `q` against the plane `H_self`.
    pub fn hplane_residual(&self, q: &Point) -> Result<f64> {
        check_same(self, q)?;
        Ok(q.t - self.hplane_t_unchecked(&q.xy))
    }

    pub fn in_hplane(&self, q: &Point, tol: f64) -> Result<bool> {
        Ok(self.hplane_residual(q)?.abs() <= tol)
    }

    pub fn check_n(&self, n: usize) -> Result<()> {
        self.xy.check_n(n)
    }
}

fn check_same(a: &Point, b: &Point) -> Result<()> {
    b.check_n(a.n())
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_csv(f, &self.to_vec())
    }
}

impl FromStr for Point {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Point::from_slice(&parse_reals(s)?)
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let data = Vec::<f64>::deserialize(d)?;
        Point::from_slice(&data).map_err(D::Error::custom)
    }
}

/// The horizontal plane H_base = {(x, y, t) : t = t₀ + 2(⟨y₀, x⟩ − ⟨x₀, y⟩)}.
#[derive(Clone, Debug, PartialEq)]
pub struct HPlane {
    pub base: Point,
}

impl HPlane {
    pub fn new(base: Point) -> Self {
        Self { base }
    }

    pub fn height_at(&self, xy: &HVec) -> Result<f64> {
        self.base.hplane_t(xy)
    }

    pub fn contains(&self, q: &Point, tol: f64) -> Result<bool> {
        self.base.in_hplane(q, tol)
    }

    /// Point of the plane lying over `xy`.
    pub fn lift(&self, xy: &HVec) -> Result<Point> {
        let t = self.height_at(xy)?;
        Ok(Point::raw(xy.clone(), t))
    }

    /// Intersection with the vertical axis x = y = 0.
    pub fn axis_point(&self) -> Point {
        Point::vertical(self.base.n(), self.base.t())
    }
}

/// Parses a comma-separated list of reals such as `"1,-0.5,2e-3"`.
pub fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>()
                .map_err(|_| invalid("real list", format!("cannot parse {tok:?} in {s:?}")))
        })
        .collect()
}

fn write_csv(f: &mut fmt::Formatter<'_>, v: &[f64]) -> fmt::Result {
    for (i, c) in v.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{c}")?;
    }
    Ok(())
}
