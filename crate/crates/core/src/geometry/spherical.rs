use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::heis::{HVec, Point};

/// Angles Φ = (φ¹, …, φ^{2n−1}) with φʲ ∈ [0, π] for j < 2n − 1 and the last
/// angle in [0, 2π).
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SphericalAngle {
    phi: Vec<f64>,
}

impl SphericalAngle {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if phi.is_empty() || phi.len().is_multiple_of(2) {
            return Err(invalid(
                "angles",
                format!("expected 2n − 1 angles (n ≥ 1), got {}", phi.len()),
            ));
        }
        let last = phi.len() - 1;
        for (index, &value) in phi.iter().enumerate() {
            let ok = if index < last {
                (0.0..=PI).contains(&value)
            } else {
                (0.0..TAU).contains(&value)
            };
            if !ok {
                return Err(Error::AngleOutOfRange { index, value });
            }
        }
        Ok(Self { phi })
    }

    pub fn n(&self) -> usize {
        self.phi.len().div_ceil(2)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.phi
    }
}

/// Multi-index of a cube I^i in the subdivision of the angle domain into
/// boxes of side π/4: iⱼ ∈ {1..4} for j < 2n − 1 and the last in {1..8}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct CubeIndex {
    i: Vec<u8>,
}

impl CubeIndex {
    pub fn new(i: Vec<u8>) -> Result<Self> {
        if i.is_empty() || i.len().is_multiple_of(2) {
            return Err(invalid("cube index", format!("expected 2n − 1 entries, got {}", i.len())));
        }
        let last = i.len() - 1;
        for (j, &v) in i.iter().enumerate() {
            let max = if j < last { 4 } else { 8 };
            if !(1..=max).contains(&v) {
                return Err(invalid("cube index", format!("entry {j} = {v} outside 1..={max}")));
            }
        }
        Ok(Self { i })
    }

    /// All cubes for the given n, in lexicographic order.
    pub fn all(n: usize) -> Vec<CubeIndex> {
        let dims = 2 * n - 1;
        let mut out = vec![Vec::with_capacity(dims)];
        for j in 0..dims {
            let max = if j + 1 < dims { 4 } else { 8 };
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (1..=max).map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(|i| CubeIndex { i }).collect()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.i
    }

    /// Lower corner of the half-open cube.
    pub fn lower(&self) -> Vec<f64> {
        self.i.iter().map(|&v| f64::from(v - 1) * FRAC_PI_4).collect()
    }
}

fn dir_unchecked(phi: &[f64]) -> Vec<f64> {
    let m = phi.len() + 1;
    let mut out = Vec::with_capacity(m);
    let mut sines = 1.0;
    for &p in phi {
        out.push(sines * p.cos());
        sines *= p.sin();
    }
    out.push(sines);
    out
}

/// ω(Φ) ∈ S^{2n−1}: ω¹ = cos φ¹, ωᵏ = sin φ¹ ⋯ sin φ^{k−1} cos φᵏ, and
/// ω^{2n} = sin φ¹ ⋯ sin φ^{2n−1}. The first n components fill the x-slot.
pub fn spherical_dir(phi: &SphericalAngle) -> HVec {
    HVec::raw(dir_unchecked(&phi.phi))
}

/// Directions ω(Φ) over the grid φʲ ∈ {kπ/div}, covering S^{2n−1}.
pub fn spherical_dir_grid(n: usize, div: usize) -> Vec<HVec> {
    let dims = 2 * n - 1;
    let step = PI / div as f64;
    let mut angles = vec![Vec::with_capacity(dims)];
    for j in 0..dims {
        let count = if j + 1 < dims { div + 1 } else { 2 * div };
        angles = angles
            .into_iter()
            .flat_map(|prefix| {
                (0..count).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k as f64 * step);
                    p
                })
            })
            .collect();
    }
    angles.iter().map(|phi| HVec::raw(dir_unchecked(phi))).collect()
}

pub fn sector_bound(n: usize) -> f64 {
    2f64.powf(-((2 * n - 1) as f64) / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeMinimum {
    pub cube: CubeIndex,
    pub min_inner: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorReport {
    pub n: usize,
    pub grid_step: f64,
    pub points_per_axis: usize,
    pub bound: f64,
    pub min_inner: f64,
    pub pairs: u64,
    pub violations: u64,
    pub cubes: Vec<CubeMinimum>,
}

/// Minimum of ⟨ω(Φ), ω(Ψ)⟩ over all grid pairs Φ, Ψ sharing a cube, checked
/// against 2^{−(2n−1)/2}.
pub fn sector_bound_check(n: usize, grid_step: f64) -> Result<SectorReport> {
    if n == 0 {
        return Err(invalid("n", "must be ≥ 1"));
    }
    if !(grid_step > 0.0 && grid_step <= PI / 32.0 * (1.0 + 1e-12)) {
        return Err(invalid("grid_step", format!("must lie in (0, π/32], got {grid_step}")));
    }
    let dims = 2 * n - 1;
    // grid offsets k·step inside the half-open side [0, π/4)
    let per_axis = ((FRAC_PI_4 / grid_step) - 1e-9).ceil() as usize;
    let bound = sector_bound(n);
    let cut = bound - 1e-12;

    let cubes: Vec<(CubeMinimum, u64, u64)> = CubeIndex::all(n)
        .into_par_iter()
        .map(|cube| {
            let lower = cube.lower();
            let total = per_axis.pow(dims as u32);
            let mut dirs = Vec::with_capacity(total * 2 * n);
            let mut phi = vec![0.0; dims];
            for flat in 0..total {
                let mut rest = flat;
                for j in 0..dims {
                    phi[j] = lower[j] + (rest % per_axis) as f64 * grid_step;
                    rest /= per_axis;
                }
                dirs.extend(dir_unchecked(&phi));
            }
            let m = 2 * n;
            let mut min_inner = f64::INFINITY;
            let mut violations = 0u64;
            for a in 0..total {
                let u = &dirs[a * m..(a + 1) * m];
                for b in a..total {
                    let v = &dirs[b * m..(b + 1) * m];
                    let ip: f64 = u.iter().zip(v).map(|(p, q)| p * q).sum();
                    if ip < min_inner {
                        min_inner = ip;
                    }
                    if ip < cut {
                        violations += 1;
                    }
                }
            }
            let pairs = (total as u64) * (total as u64 + 1) / 2;
            (CubeMinimum { cube, min_inner }, pairs, violations)
        })
        .collect();

    let min_inner = cubes.iter().map(|c| c.0.min_inner).fold(f64::INFINITY, f64::min);
    Ok(SectorReport {
        n,
        grid_step,
        points_per_axis: per_axis,
        bound,
        min_inner,
        pairs: cubes.iter().map(|c| c.1).sum(),
        violations: cubes.iter().map(|c| c.2).sum(),
        cubes: cubes.into_iter().map(|c| c.0).collect(),
    })
}

fn sector_map_unchecked(t: f64, rho: f64, theta: &[f64], h: f64, omega_base: &HVec) -> Point {
    let n = omega_base.n();
    let nu = Point::vertical(n, h).exp_h_unchecked(&omega_base.scale(t));
    nu.exp_h_unchecked(&HVec::raw(dir_unchecked(theta)).scale(rho))
}

/// F(t, ρ, Θ) = ν(t) ∘ exp(ρ ω(Θ)) with ν(t) = (0, 0, h) ∘ exp(t ω_base).
pub fn sector_map(
    t: f64,
    rho: f64,
    theta: &SphericalAngle,
    h: f64,
    omega_base: &HVec,
) -> Result<Point> {
    if theta.n() != omega_base.n() {
        return Err(Error::DimensionMismatch {
            expected: omega_base.n(),
            found: theta.n(),
        });
    }
    if (omega_base.norm() - 1.0).abs() > 1e-12 {
        return Err(invalid("omega_base", "must be a unit vector"));
    }
    for (name, v) in [("t", t), ("rho", rho)] {
        if !(1.0..=2.0).contains(&v) && v != 0.0 {
            return Err(invalid(name, format!("must lie in [1, 2], got {v}")));
        }
    }
    Ok(sector_map_unchecked(t, rho, &theta.phi, h, omega_base))
}

/// |det JF| = 2ρ^{2n} |ω^{n+1}(Θ)| sin^{2n−2}θ¹ sin^{2n−3}θ² ⋯ sin θ^{2n−2},
/// where ω^{n+1}(Θ) = sin θ¹ ⋯ sin θⁿ cos θ^{n+1} for n ≥ 2 and sin θ for n = 1
/// (giving 2ρ²|sin θ|).
pub fn jacobian_closed_form(rho: f64, theta: &SphericalAngle) -> f64 {
    let n = theta.n();
    let phi = &theta.phi;
    let omega = dir_unchecked(phi);
    let mut out = 2.0 * rho.powi(2 * n as i32) * omega[n].abs();
    for (j, &th) in phi.iter().take(2 * n - 2).enumerate() {
        out *= th.sin().abs().powi((2 * n - 2 - j) as i32);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JacobianReport {
    pub closed_form: f64,
    pub numeric: f64,
    pub rel_err: f64,
    pub degenerate: bool,
    pub richardson: bool,
}

/// Relative tolerance between the closed-form and finite-difference determinants.
pub const JACOBIAN_REL_TOL: f64 = 1e-6;

fn fd_jacobian(z: &[f64], n: usize, step: f64) -> DMatrix<f64> {
    let dim = 2 * n + 1;
    let base = HVec::basis(n, 0);
    let f = |z: &[f64]| sector_map_unchecked(z[0], z[1], &z[2..], 0.0, &base).to_vec();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut zp = z.to_vec();
    let mut zm = z.to_vec();
    for j in 0..dim {
        zp[j] = z[j] + step;
        zm[j] = z[j] - step;
        let (fp, fm) = (f(&zp), f(&zm));
        for i in 0..dim {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
        zp[j] = z[j];
        zm[j] = z[j];
    }
    jac
}

/// Compares the closed-form |det JF| with the determinant of a central
/// finite-difference Jacobian of [`sector_map`] (ω_base = e₁, h = 0),
/// falling back to one Richardson extrapolation step when the first estimate
/// misses the relative tolerance.
pub fn jacobian_check(
    n: usize,
    t: f64,
    rho: f64,
    theta: &SphericalAngle,
    fd_step: f64,
) -> Result<JacobianReport> {
    if theta.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: theta.n(),
        });
    }
    if !(1e-7..=1e-4).contains(&fd_step) {
        return Err(invalid("fd_step", format!("must lie in [1e-7, 1e-4], got {fd_step}")));
    }
    let closed_form = jacobian_closed_form(rho, theta);
    let mut z = vec![t, rho];
    z.extend_from_slice(&theta.phi);

    let j1 = fd_jacobian(&z, n, fd_step);
    let mut numeric = j1.determinant().abs();
    let degenerate = closed_form < 1e-12;
    let rel = |num: f64| (num - closed_form).abs() / closed_form;
    let mut richardson = false;
    if !degenerate && rel(numeric) > JACOBIAN_REL_TOL {
        let j2 = fd_jacobian(&z, n, fd_step / 2.0);
        let extrapolated = (j2 * 4.0 - j1) / 3.0;
        numeric = extrapolated.determinant().abs();
        richardson = true;
    }
    Ok(JacobianReport {
        closed_form,
        numeric,
        rel_err: if degenerate { f64::NAN } else { rel(numeric) },
        degenerate,
        richardson,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn ang(v: &[f64]) -> SphericalAngle {
        SphericalAngle::new(v.to_vec()).unwrap()
    }

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    #[test]
    fn directions() {
        let d = spherical_dir(&ang(&[0.0]));
        assert_eq!(d.as_slice(), &[1.0, 0.0]);
        let d = spherical_dir(&ang(&[FRAC_PI_2]));
        assert_abs_diff_eq!(d.as_slice()[0], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(d.as_slice()[1], 1.0, epsilon = 1e-16);
        let d = spherical_dir(&ang(&[FRAC_PI_2, FRAC_PI_2, 0.0]));
        for (got, want) in d.as_slice().iter().zip([0.0, 0.0, 1.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn angle_ranges_enforced() {
        assert!(SphericalAngle::new(vec![]).is_err());
        assert!(SphericalAngle::new(vec![0.1, 0.2]).is_err());
        assert!(matches!(
            SphericalAngle::new(vec![4.0, 0.0, 0.0]),
            Err(Error::AngleOutOfRange { index: 0, .. })
        ));
        assert!(SphericalAngle::new(vec![TAU]).is_err());
        assert!(SphericalAngle::new(vec![PI, PI, 6.0]).is_ok());
    }

    #[test]
    fn cube_enumeration() {
        assert_eq!(CubeIndex::all(1).len(), 8);
        assert_eq!(CubeIndex::all(2).len(), 4 * 4 * 8);
        assert!(CubeIndex::new(vec![5, 1, 1]).is_err());
        assert!(CubeIndex::new(vec![4, 4, 8]).is_ok());
    }

    #[test]
    fn sector_bound_n1() {
        let r = sector_bound_check(1, PI / 64.0).unwrap();
        assert_abs_diff_eq!(r.bound, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(r.points_per_axis, 16);
        assert_eq!(r.violations, 0);
        // widest grid gap in a cube is 15·π/64
        assert_abs_diff_eq!(r.min_inner, (15.0 * PI / 64.0).cos(), epsilon = 1e-12);
        assert!(sector_bound_check(1, PI / 16.0).is_err());
    }

    #[test]
    fn sector_map_examples() {
        let e1 = HVec::basis(1, 0);
        assert_eq!(sector_map(1., 1., &ang(&[FRAC_PI_2]), 0., &e1).unwrap().to_vec()[2], -2.0);
        let q = sector_map(1., 1., &ang(&[FRAC_PI_2]), 0., &e1).unwrap();
        assert_abs_diff_eq!(q.x()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.y()[0], 1.0, epsilon = 1e-15);
        let q = sector_map(2., 1., &ang(&[FRAC_PI_2]), 1., &e1).unwrap();
        let want = p(&[2., 1., -3.]);
        assert!(q.dist(&want).unwrap() < 1e-12);
        let q = sector_map(1.5, 0.0, &ang(&[1.0]), 0.5, &e1).unwrap();
        assert_eq!(q, p(&[1.5, 0.0, 0.5]));
    }

    #[test]
    fn sector_map_matches_printed_coordinates() {
        // n = 2, ω_base = e₁: last coordinate h − 2tρ sinθ¹ sinθ² cosθ³
        let th = [0.7, 1.1, 2.5];
        let (t, rho, h) = (1.3, 1.8, -0.4);
        let q = sector_map(t, rho, &ang(&th), h, &HVec::basis(2, 0)).unwrap();
        let want_t = h - 2.0 * t * rho * th[0].sin() * th[1].sin() * th[2].cos();
        assert_abs_diff_eq!(q.t(), want_t, epsilon = 1e-14);
        assert_abs_diff_eq!(q.x()[0], t + rho * th[0].cos(), epsilon = 1e-14);
    }

    #[test]
    fn jacobian_closed_form_examples() {
        assert_abs_diff_eq!(jacobian_closed_form(1.0, &ang(&[FRAC_PI_2])), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(jacobian_closed_form(2.0, &ang(&[PI / 6.0])), 4.0, epsilon = 1e-14);
        let r = jacobian_check(1, 1.5, 1.0, &ang(&[0.0]), 1e-6).unwrap();
        assert_eq!(r.closed_form, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn jacobian_matches_fd_at_sample_points() {
        for (n, th) in [(1, vec![0.9]), (2, vec![0.8, 2.0, 4.0]), (2, vec![2.2, 0.5, 0.3])] {
            let r = jacobian_check(n, 1.4, 1.7, &ang(&th), 1e-6).unwrap();
            assert!(r.rel_err <= JACOBIAN_REL_TOL, "{r:?}");
        }
        assert!(jacobian_check(1, 1.0, 1.0, &ang(&[1.0]), 1e-2).is_err());
    }
}
