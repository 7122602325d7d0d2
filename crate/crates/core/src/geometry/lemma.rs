use serde::Serialize;

use crate::error::{Error, Result};
use crate::heis::{dot, HVec, Point};

/// One element η′ₖ of the auxiliary sequence together with the data of the
/// quadratic aₖAₖε² + bₖε + cₖ = 0 that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaStep {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Aₖ = −sgn(tₖ + 2(⟨x′, yₖ⟩ − ⟨y′, xₖ⟩)).
    pub sign: f64,
    pub eps: f64,
    pub point: Point,
    /// t-residual of η′ₖ against H_{η′}.
    pub residual_prime: f64,
    /// t-residual of η′ₖ against H_{ηₖ}.
    pub residual_k: f64,
}

/// Builds η′ₖ ∈ H_{η′} ∩ H_{ηₖ} in the normalized frame η = e,
/// η′ = (x′, y′, 0) with x′ ≠ 0:
///
/// ```text
/// x′ₖ = (1 + εₖ) x′,  y′ₖ = (1 + εₖ) y′ + Aₖ εₖ² x′,
/// t′ₖ = 2(⟨y′, x′ₖ⟩ − ⟨x′, y′ₖ⟩)
/// ```
///
/// with εₖ > 0 the root of aₖAₖε² + bₖε + cₖ = 0 selected by the sign of Aₖ.
pub fn lemma_sequence_in_frame(eta_prime: &Point, etas: &[Point], tol: f64) -> Result<Vec<LemmaStep>> {
    if eta_prime.t().abs() > tol {
        return Err(Error::LemmaHypothesis(format!(
            "η′ must lie in H_e (t′ = 0), got t′ = {}",
            eta_prime.t()
        )));
    }
    let (xp, yp) = (eta_prime.x(), eta_prime.y());
    let xp2 = dot(xp, xp);
    if xp2 == 0.0 {
        return Err(Error::LemmaHypothesis("x′ must be nonzero".into()));
    }
    etas.iter()
        .enumerate()
        .map(|(k, eta_k)| {
            eta_k.check_n(eta_prime.n())?;
            let (xk, yk, tk) = (eta_k.x(), eta_k.y(), eta_k.t());
            let b = dot(xp, yk) - dot(yp, xk);
            let c = tk / 2.0 + b;
            if c.abs() <= tol / 2.0 {
                return Err(Error::LemmaHypothesis(format!(
                    "η_{k} lies in H_η′ (c = {c:e})"
                )));
            }
            let a = xp2 - dot(xp, xk);
            if a <= 0.0 {
                return Err(Error::LemmaHypothesis(format!(
                    "a = {a:e} ≤ 0 at index {k}: η_{k} is too far from e"
                )));
            }
            let sign = -c.signum();
            let disc = (b * b + 4.0 * a * c.abs()).sqrt();
            let eps = if sign > 0.0 {
                (-b + disc) / (2.0 * sign * a)
            } else {
                (-b - disc) / (2.0 * sign * a)
            };
            if !(eps > 0.0) {
                return Err(Error::Internal(format!("ε = {eps:e} ≤ 0 at index {k}")));
            }
            let x: Vec<f64> = xp.iter().map(|v| (1.0 + eps) * v).collect();
            let y: Vec<f64> = yp
                .iter()
                .zip(xp)
                .map(|(y, x)| (1.0 + eps) * y + sign * eps * eps * x)
                .collect();
            let t = 2.0 * (dot(yp, &x) - dot(xp, &y));
            let point = Point::raw(HVec::new(&x, &y)?, t);
            let residual_prime = eta_prime.hplane_residual(&point)?;
            let residual_k = eta_k.hplane_residual(&point)?;
            if residual_prime.abs() > tol || residual_k.abs() > tol {
                return Err(Error::Internal(format!(
                    "η′_{k} misses a plane (residuals {residual_prime:e}, {residual_k:e})"
                )));
            }
            Ok(LemmaStep {
                a,
                b,
                c,
                sign,
                eps,
                point,
                residual_prime,
                residual_k,
            })
        })
        .collect()
}

// (x, y, t) ↦ (y, −x, t) is a group automorphism preserving horizontal planes
// and ξ₁-distances; it moves a nonzero y-part into the x-slot.
fn rotate(p: &Point) -> Point {
    let neg_x: Vec<f64> = p.x().iter().map(|v| -v).collect();
    Point::raw(HVec::raw([p.y(), &neg_x[..]].concat()), p.t())
}

fn unrotate(p: &Point) -> Point {
    let neg_y: Vec<f64> = p.y().iter().map(|v| -v).collect();
    Point::raw(HVec::raw([&neg_y[..], p.x()].concat()), p.t())
}

/// General-frame version: left-translates by η⁻¹ (and swaps the x and y
/// slots when x′ = 0) to reach the normalized frame, builds the sequence
/// there and maps it back.
pub fn lemma_sequence(eta: &Point, eta_prime: &Point, etas: &[Point], tol: f64) -> Result<Vec<LemmaStep>> {
    eta_prime.check_n(eta.n())?;
    if eta == eta_prime {
        return Err(Error::LemmaHypothesis("η′ must differ from η".into()));
    }
    let residual = eta.hplane_residual(eta_prime)?;
    if residual.abs() > tol {
        return Err(Error::LemmaHypothesis(format!(
            "η′ must lie in H_η (residual {residual:e})"
        )));
    }
    let g = eta.inv();
    let mut ep = g.mul(eta_prime)?;
    // the plane through e is exactly t = 0 after translation
    ep = Point::raw(ep.xi1().clone(), 0.0);
    let mut ks: Vec<Point> = etas.iter().map(|p| g.mul(p)).collect::<Result<_>>()?;
    let rotated = ep.x().iter().all(|&v| v == 0.0);
    if rotated {
        ep = rotate(&ep);
        ks = ks.iter().map(rotate).collect();
    }
    let mut steps = lemma_sequence_in_frame(&ep, &ks, tol)?;
    for (step, eta_k) in steps.iter_mut().zip(etas) {
        let local = if rotated { unrotate(&step.point) } else { step.point.clone() };
        step.point = eta.mul(&local)?;
        step.residual_prime = eta_prime.hplane_residual(&step.point)?;
        step.residual_k = eta_k.hplane_residual(&step.point)?;
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    #[test]
    fn k_equals_two_by_hand() {
        // a = 1, b = 0, c = 1/4, A = −1 ⇒ ε = 1/2, η′₂ = (1.5, −0.25, 0.5)
        let steps = lemma_sequence_in_frame(&p(&[1., 0., 0.]), &[p(&[0., 0., 0.5])], 1e-12).unwrap();
        let s = &steps[0];
        assert_eq!((s.a, s.b, s.c, s.sign), (1.0, 0.0, 0.25, -1.0));
        assert_eq!(s.eps, 0.5);
        assert_eq!(s.point, p(&[1.5, -0.25, 0.5]));
        assert_eq!(s.residual_prime, 0.0);
        assert_eq!(s.residual_k, 0.0);
    }

    #[test]
    fn canonical_sequence_converges() {
        let etas: Vec<Point> = (1..=200).map(|k| p(&[0., 0., 1.0 / k as f64])).collect();
        let eta_prime = p(&[1., 0., 0.]);
        let steps = lemma_sequence_in_frame(&eta_prime, &etas, 1e-10).unwrap();
        for (k, s) in (1..).zip(&steps) {
            // closed-form root ε = √(2/k)/2
            assert_abs_diff_eq!(s.eps, (2.0 / k as f64).sqrt() / 2.0, epsilon = 1e-14);
        }
        let dists: Vec<f64> = steps.iter().map(|s| s.point.dist(&eta_prime).unwrap()).collect();
        assert!(dists.windows(2).all(|w| w[1] < w[0]));
        let last = steps.last().unwrap();
        let dir = last.point.xi1().sub(eta_prime.xi1());
        let dir = dir.scale(1.0 / dir.norm());
        assert!(dir.as_slice()[0] > 0.99);
    }

    #[test]
    fn hypothesis_violations() {
        let ep = p(&[1., 0., 0.]);
        // (0, 0, 0) ∈ H_η′ since c = 0
        assert!(matches!(
            lemma_sequence_in_frame(&ep, &[p(&[0., 0., 0.])], 1e-12),
            Err(Error::LemmaHypothesis(_))
        ));
        assert!(lemma_sequence_in_frame(&p(&[0., 1., 0.]), &[p(&[0., 0., 1.])], 1e-12).is_err());
        assert!(lemma_sequence_in_frame(&p(&[1., 0., 0.3]), &[p(&[0., 0., 1.])], 1e-12).is_err());
        // a ≤ 0 when ηₖ is far beyond η′ along x
        assert!(lemma_sequence_in_frame(&ep, &[p(&[2., 0., 1.])], 1e-12).is_err());
    }

    #[test]
    fn general_frame_by_conjugation() {
        let eta = p(&[0.3, -0.2, 1.0, 0.5, 0.7]);
        // η′ = η ∘ exp(w) with w having zero x-part exercises the slot swap
        let w = HVec::from_vec(vec![0.0, 0.0, 0.8, -0.4]).unwrap();
        let eta_prime = eta.exp_h(&w).unwrap();
        let etas: Vec<Point> = (1..=20)
            .map(|k| {
                let d = p(&[0.01 / k as f64, 0.0, 0.0, 0.02 / k as f64, 0.5 / k as f64]);
                eta.mul(&d).unwrap()
            })
            .collect();
        let steps = lemma_sequence(&eta, &eta_prime, &etas, 1e-9).unwrap();
        for s in &steps {
            assert!(s.eps > 0.0);
            assert!(s.residual_prime.abs() <= 1e-10);
            assert!(s.residual_k.abs() <= 1e-10);
        }
        assert!(steps.last().unwrap().point.dist(&eta_prime).unwrap() < steps[0].point.dist(&eta_prime).unwrap());
    }
}
