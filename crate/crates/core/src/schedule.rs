//! Generalized variance-preserving (GVP) coefficient schedule.
//!
//! The state at regression time `r` and generation time `g` is
//!
//! ```text
//! x(r, g) = cos g * (alpha(r) x0 + beta(r) x1) + sin g * z
//! ```
//!
//! with `alpha`/`beta` chosen so that `alpha^2 + beta^2 + 2 rho alpha beta = 1`
//! for correlated unit-variance `x0`, `x1`. The closed form
//!
//! ```text
//! alpha(r) = (cos r / sqrt(1 + rho) - sin r / sqrt(1 - rho)) / sqrt(2)
//! beta(r)  = (cos r / sqrt(1 + rho) + sin r / sqrt(1 - rho)) / sqrt(2)
//! ```
//!
//! is a spherical interpolation in disguise: with `phi = arccos(rho) / 2`,
//! `alpha(r) = sin(phi - r) / sin(2 phi)` and `beta(r) = sin(phi + r) / sin(2 phi)`.
//! We evaluate the latter, which makes every boundary value exact in floating
//! point (`alpha(phi)` is `sin(0)`, `alpha(-phi)` is `sin(2 phi) / sin(2 phi)`).

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffSet {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub gamma: f64,
}

/// Derivatives of [`CoeffSet`]: `dalpha`, `dbeta` with respect to `r`,
/// `dlambda`, `dgamma` with respect to `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffDerivs {
    pub dalpha: f64,
    pub dbeta: f64,
    pub dlambda: f64,
    pub dgamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvpSchedule {
    rho: f64,
    sigma_d: f64,
    phi: f64,
    /// `sin(2 phi)`, equal to `sqrt(1 - rho^2)`.
    norm: f64,
}

impl GvpSchedule {
    pub fn new(rho: f64, sigma_d: f64) -> Result<Self> {
        if !rho.is_finite() || rho.abs() >= 1.0 {
            return Err(Error::Domain(format!("rho must lie in (-1, 1), got {rho}")));
        }
        if !sigma_d.is_finite() || sigma_d <= 0.0 {
            return Err(Error::Domain(format!("sigma_d must be positive, got {sigma_d}")));
        }
        let phi = rho.acos() / 2.0;
        Ok(Self {
            rho,
            sigma_d,
            phi,
            norm: (phi + phi).sin(),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sigma_d(&self) -> f64 {
        self.sigma_d
    }

    /// Regression half-range: `r` runs over `[-phi, phi]`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn contains(&self, r: f64, g: f64) -> bool {
        (-self.phi..=self.phi).contains(&r) && (0.0..=FRAC_PI_2).contains(&g)
    }

    pub fn check(&self, r: f64, g: f64) -> Result<()> {
        if self.contains(r, g) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "(r, g) = ({r}, {g}) outside [-{phi}, {phi}] x [0, pi/2]",
                phi = self.phi
            )))
        }
    }

    // Unchecked scalar evaluations. Callers that accept user input go
    // through `coeffs` / `coeff_derivs`.

    #[inline]
    pub fn alpha(&self, r: f64) -> f64 {
        (self.phi - r).sin() / self.norm
    }

    #[inline]
    pub fn beta(&self, r: f64) -> f64 {
        (self.phi + r).sin() / self.norm
    }

    #[inline]
    pub fn dalpha(&self, r: f64) -> f64 {
        -(self.phi - r).cos() / self.norm
    }

    #[inline]
    pub fn dbeta(&self, r: f64) -> f64 {
        (self.phi + r).cos() / self.norm
    }

    pub fn coeffs(&self, r: f64, g: f64) -> Result<CoeffSet> {
        self.check(r, g)?;
        Ok(CoeffSet {
            alpha: self.alpha(r),
            beta: self.beta(r),
            lambda: lambda(g),
            gamma: gamma(g),
        })
    }

    pub fn coeff_derivs(&self, r: f64, g: f64) -> Result<CoeffDerivs> {
        self.check(r, g)?;
        Ok(CoeffDerivs {
            dalpha: self.dalpha(r),
            dbeta: self.dbeta(r),
            dlambda: -gamma(g),
            dgamma: lambda(g),
        })
    }
}

/// `cos g`, snapped to exactly zero at `g = pi/2`.
#[inline]
pub fn lambda(g: f64) -> f64 {
    if g == FRAC_PI_2 {
        0.0
    } else {
        g.cos()
    }
}

/// `sin g`. Exact at both ends of `[0, pi/2]` without snapping.
#[inline]
pub fn gamma(g: f64) -> f64 {
    g.sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_6};

    /// Expanded form, kept independent of the slerp evaluation.
    fn alpha_expanded(rho: f64, r: f64) -> f64 {
        (r.cos() / (1.0 + rho).sqrt() - r.sin() / (1.0 - rho).sqrt()) / 2f64.sqrt()
    }

    fn beta_expanded(rho: f64, r: f64) -> f64 {
        (r.cos() / (1.0 + rho).sqrt() + r.sin() / (1.0 - rho).sqrt()) / 2f64.sqrt()
    }

    fn dalpha_expanded(rho: f64, r: f64) -> f64 {
        (-r.sin() / (1.0 + rho).sqrt() - r.cos() / (1.0 - rho).sqrt()) / 2f64.sqrt()
    }

    fn dbeta_expanded(rho: f64, r: f64) -> f64 {
        (-r.sin() / (1.0 + rho).sqrt() + r.cos() / (1.0 - rho).sqrt()) / 2f64.sqrt()
    }

    #[test]
    fn phi_values() {
        let s = GvpSchedule::new(0.0, 1.0).unwrap();
        assert!((s.phi() - FRAC_PI_4).abs() < 1e-15);
        let s = GvpSchedule::new(0.5, 1.0).unwrap();
        assert!((s.phi() - FRAC_PI_6).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(matches!(GvpSchedule::new(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(GvpSchedule::new(-1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(GvpSchedule::new(0.2, 0.0), Err(Error::Domain(_))));
        assert!(matches!(GvpSchedule::new(f64::NAN, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_matches_numerical_root_of_beta() {
        // Bisection on the expanded beta over [-pi/2, 0]: beta(-phi) = 0.
        for &rho in &[-0.9, -0.3, 0.0, 0.25, 0.5, 0.7482, 0.95] {
            let (mut lo, mut hi) = (-std::f64::consts::FRAC_PI_2, 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if beta_expanded(rho, mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s = GvpSchedule::new(rho, 1.0).unwrap();
            assert!((-0.5 * (lo + hi) - s.phi()).abs() < 1e-12, "rho = {rho}");
        }
    }

    #[test]
    fn boundary_tuples() {
        let s = GvpSchedule::new(0.3, 1.0).unwrap();
        let p = s.phi();
        let c = s.coeffs(-p, 0.0).unwrap();
        assert_eq!((c.alpha, c.beta, c.lambda, c.gamma), (1.0, 0.0, 1.0, 0.0));
        let c = s.coeffs(p, 0.0).unwrap();
        assert_eq!((c.alpha, c.beta, c.lambda, c.gamma), (0.0, 1.0, 1.0, 0.0));
        let c = s.coeffs(0.0, FRAC_PI_2).unwrap();
        assert_eq!((c.lambda, c.gamma), (0.0, 1.0));
    }

    #[test]
    fn midpoint_at_zero_correlation() {
        let s = GvpSchedule::new(0.0, 1.0).unwrap();
        let c = s.coeffs(0.0, 0.0).unwrap();
        assert!((c.alpha - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((c.beta - FRAC_1_SQRT_2).abs() < 1e-15);
        let d = s.coeff_derivs(0.0, 0.0).unwrap();
        assert!((d.dalpha + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((d.dbeta - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!((d.dlambda, d.dgamma), (0.0, 1.0));
    }

    #[test]
    fn out_of_rectangle_is_an_error() {
        let s = GvpSchedule::new(0.5, 1.0).unwrap();
        assert!(s.coeffs(s.phi() + 1e-9, 0.1).is_err());
        assert!(s.coeffs(0.0, -1e-12).is_err());
        assert!(s.coeffs(0.0, FRAC_PI_2 + 1e-9).is_err());
        assert!(s.coeff_derivs(-s.phi() - 1e-9, 0.1).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences_on_grid() {
        let h = 1e-6;
        for &rho in &[-0.6, 0.0, 0.5, 0.9] {
            let s = GvpSchedule::new(rho, 1.0).unwrap();
            let p = s.phi();
            for i in 0..20 {
                for j in 0..20 {
                    // keep the stencil inside the rectangle
                    let r = -p + h + (2.0 * p - 2.0 * h) * i as f64 / 19.0;
                    let g = h + (FRAC_PI_2 - 2.0 * h) * j as f64 / 19.0;
                    let d = s.coeff_derivs(r, g).unwrap();
                    let cp = s.coeffs(r + h, g).unwrap();
                    let cm = s.coeffs(r - h, g).unwrap();
                    let gp = s.coeffs(r, g + h).unwrap();
                    let gm = s.coeffs(r, g - h).unwrap();
                    assert!((d.dalpha - (cp.alpha - cm.alpha) / (2.0 * h)).abs() < 1e-8);
                    assert!((d.dbeta - (cp.beta - cm.beta) / (2.0 * h)).abs() < 1e-8);
                    assert!((d.dlambda - (gp.lambda - gm.lambda) / (2.0 * h)).abs() < 1e-8);
                    assert!((d.dgamma - (gp.gamma - gm.gamma) / (2.0 * h)).abs() < 1e-8);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn slerp_form_matches_expanded_form(rho in -0.99f64..0.99, u in 0.0f64..=1.0) {
            let s = GvpSchedule::new(rho, 1.0).unwrap();
            let r = -s.phi() + 2.0 * s.phi() * u;
            prop_assert!((s.alpha(r) - alpha_expanded(rho, r)).abs() < 1e-12);
            prop_assert!((s.beta(r) - beta_expanded(rho, r)).abs() < 1e-12);
            prop_assert!((s.dalpha(r) - dalpha_expanded(rho, r)).abs() < 1e-11);
            prop_assert!((s.dbeta(r) - dbeta_expanded(rho, r)).abs() < 1e-11);
        }

        #[test]
        fn variance_identity(rho in -0.99f64..0.99, u in 0.0f64..=1.0) {
            let s = GvpSchedule::new(rho, 1.0).unwrap();
            let r = -s.phi() + 2.0 * s.phi() * u;
            let (a, b) = (s.alpha(r), s.beta(r));
            prop_assert!((a * a + b * b + 2.0 * rho * a * b - 1.0).abs() < 1e-12);
        }

        #[test]
        fn boundaries_exact_for_random_rho(rho in -0.99f64..0.99) {
            let s = GvpSchedule::new(rho, 1.0).unwrap();
            let lo = s.coeffs(-s.phi(), 0.0).unwrap();
            let hi = s.coeffs(s.phi(), 0.0).unwrap();
            prop_assert!((lo.alpha - 1.0).abs() <= 1e-12 && lo.beta.abs() <= 1e-12);
            prop_assert!(hi.alpha.abs() <= 1e-12 && (hi.beta - 1.0).abs() <= 1e-12);
        }
    }
}
