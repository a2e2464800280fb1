//! Decoupled velocity fields and a reference Euler integrator for the
//! two-time probability-flow ODE `dx = v_r dr + v_g dg`.

use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::error::{check_dim, Error, Result};
use crate::process::interpolate_parts;
use crate::schedule::GvpSchedule;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityPair {
    pub v_r: Vec<f64>,
    pub v_g: Vec<f64>,
}

/// `v_g = cot g x - csc g (alpha x0_hat + beta x1)` and
/// `v_r = cos g (alpha' x0_hat + beta' x1)`.
pub fn velocities(
    sched: &GvpSchedule,
    x: &[f64],
    x0hat: &[f64],
    x1: &[f64],
    r: f64,
    g: f64,
) -> Result<VelocityPair> {
    check_dim(x.len(), x0hat.len())?;
    check_dim(x.len(), x1.len())?;
    sched.check(r, g)?;
    if g <= 0.0 {
        return Err(Error::SingularTime { g });
    }
    let (a, b) = (sched.alpha(r), sched.beta(r));
    let (s, c) = g.sin_cos();
    let (cot, csc) = (c / s, 1.0 / s);
    let v_g = x
        .iter()
        .zip(x0hat)
        .zip(x1)
        .map(|((&xv, &u), &v)| cot * xv - csc * (a * u + b * v))
        .collect();
    Ok(VelocityPair { v_r: velocity_r(sched, x0hat, x1, r, g)?, v_g })
}

/// The `v_r` component alone, defined on the whole rectangle.
pub fn velocity_r(sched: &GvpSchedule, x0hat: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>> {
    check_dim(x0hat.len(), x1.len())?;
    let d = sched.coeff_derivs(r, g)?;
    let lam = crate::schedule::lambda(g);
    Ok(x0hat
        .iter()
        .zip(x1)
        .map(|(&u, &v)| lam * (d.dalpha * u + d.dbeta * v))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerConfig {
    pub n_steps: usize,
    /// Below this noise level, on the descending approach to `g = 0`, the
    /// singular `v_g dg` term is dropped.
    #[serde(default = "default_floor")]
    pub g_floor: f64,
    /// Parameter offset of the starting point on paths that begin at `g = 0`.
    #[serde(default = "default_floor")]
    pub boot_epsilon: f64,
}

fn default_floor() -> f64 {
    1e-3
}

impl EulerConfig {
    pub fn new(n_steps: usize) -> Self {
        Self { n_steps, g_floor: default_floor(), boot_epsilon: default_floor() }
    }
}

/// Integrates the probability-flow ODE along `traj` with explicit Euler
/// steps, calling the denoiser once per step.
///
/// Paths that begin at `g = 0` cannot be entered through `v_g`. Integration
/// starts instead at the parameter `t_start + boot_epsilon` (in the direction
/// of travel) from the forward state built with the prediction made at the
/// path start, which is the state a fully stochastic first step lands on.
pub fn euler_integrate<D: Denoiser + ?Sized>(
    sched: &GvpSchedule,
    traj: &Trajectory,
    denoiser: &D,
    x1: &[f64],
    z: &[f64],
    cfg: &EulerConfig,
) -> Result<Vec<f64>> {
    check_dim(x1.len(), z.len())?;
    if cfg.n_steps == 0 {
        return Err(Error::Domain("n_steps must be at least 1".into()));
    }
    if !(cfg.g_floor > 0.0) {
        return Err(Error::Domain(format!("g_floor must be positive, got {}", cfg.g_floor)));
    }
    let (t_start, t_end) = traj.t_range();
    let (r0, g0) = traj.point(t_start)?;

    let (grid, mut x) = if traj.is_pure_regression() || !traj.starts_noiseless() {
        let x = interpolate_parts(sched, x1, x1, z, r0, g0)?;
        (traj.discretize(cfg.n_steps)?, x)
    } else {
        if !(cfg.boot_epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "boot_epsilon must be positive, got {}",
                cfg.boot_epsilon
            )));
        }
        let x0hat = denoiser.predict(x1, x1, r0, g0)?;
        let t_boot = t_start + cfg.boot_epsilon * traj.direction();
        let (rb, gb) = traj.point(t_boot)?;
        let x = interpolate_parts(sched, &x0hat, x1, z, rb, gb)?;
        (traj.discretize_between(t_boot, t_end, cfg.n_steps)?, x)
    };

    for (p, q) in grid.steps() {
        let x0hat = denoiser.predict(&x, x1, p.r, p.g)?;
        let (dr, dg) = (q.r - p.r, q.g - p.g);
        let keep_vg = p.g > 0.0 && (p.g >= cfg.g_floor || dg > 0.0);
        if keep_vg {
            let v = velocities(sched, &x, &x0hat, x1, p.r, p.g)?;
            for ((xv, vr), vg) in x.iter_mut().zip(&v.v_r).zip(&v.v_g) {
                *xv += vr * dr + vg * dg;
            }
        } else {
            let vr = velocity_r(sched, &x0hat, x1, p.r, p.g)?;
            for (xv, vr) in x.iter_mut().zip(&vr) {
                *xv += vr * dr;
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::{CheatOracle, GaussianOracle};
    use crate::exec::rng_from_seed;
    use rand::Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn vg_at_pure_noise() {
        let s = GvpSchedule::new(0.3, 1.0).unwrap();
        let (x, u, v) = ([0.4, -0.2], [1.0, 2.0], [-0.5, 0.25]);
        let vp = velocities(&s, &x, &u, &v, 0.1, FRAC_PI_2).unwrap();
        let (a, b) = (s.alpha(0.1), s.beta(0.1));
        for i in 0..2 {
            let expect = -(a * u[i] + b * v[i]);
            assert!((vp.v_g[i] - expect).abs() < 1e-15);
            assert_eq!(vp.v_r[i], 0.0);
        }
    }

    #[test]
    fn vr_at_zero_correlation_midpoint() {
        let s = GvpSchedule::new(0.0, 1.0).unwrap();
        let vr = velocity_r(&s, &[1.0, 0.0], &[0.0, 3.0], 0.0, 0.0).unwrap();
        assert!((vr[0] + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((vr[1] - 3.0 * FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn singular_and_mismatched() {
        let s = GvpSchedule::new(0.3, 1.0).unwrap();
        assert!(matches!(velocities(&s, &[1.0], &[1.0], &[1.0], 0.0, 0.0), Err(Error::SingularTime { .. })));
        assert!(velocity_r(&s, &[1.0], &[1.0, 2.0], 0.0, 0.3).is_err());
        let vr = velocity_r(&s, &[1.0], &[1.0], 0.2, 0.5).unwrap();
        let vp = velocities(&s, &[0.0], &[1.0], &[1.0], 0.2, 0.5).unwrap();
        assert_eq!(vr, vp.v_r);
    }

    #[test]
    fn velocities_jointly_linear() {
        let s = GvpSchedule::new(0.45, 1.0).unwrap();
        let mut rng = rng_from_seed(8);
        for _ in 0..200 {
            let mut v = || -> Vec<f64> { (0..3).map(|_| rng.random_range(-2.0..2.0)).collect() };
            let (xa, ua, wa, xb, ub, wb) = (v(), v(), v(), v(), v(), v());
            let (ca, cb) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let r = rng.random_range(-s.phi()..s.phi());
            let g = rng.random_range(0.05..FRAC_PI_2);
            let comb = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(a, b)| ca * a + cb * b).collect() };
            let va = velocities(&s, &xa, &ua, &wa, r, g).unwrap();
            let vb = velocities(&s, &xb, &ub, &wb, r, g).unwrap();
            let vc = velocities(&s, &comb(&xa, &xb), &comb(&ua, &ub), &comb(&wa, &wb), r, g).unwrap();
            for i in 0..3 {
                assert!((vc.v_r[i] - (ca * va.v_r[i] + cb * vb.v_r[i])).abs() < 1e-12);
                assert!((vc.v_g[i] - (ca * va.v_g[i] + cb * vb.v_g[i])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_steps_rejected() {
        let s = GvpSchedule::new(0.3, 1.0).unwrap();
        let traj = Trajectory::regression(s.phi()).unwrap();
        let o = CheatOracle::new(vec![1.0], 1.0);
        let err = euler_integrate(&s, &traj, &o, &[0.0], &[0.0], &EulerConfig::new(0));
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    /// With the true `x0` the regression ODE is `dx/dr = alpha' x0 + beta' x1`;
    /// the left Riemann sum tracks `alpha x0 + beta x1` to first order.
    #[test]
    fn regression_path_tracks_forward_state() {
        let s = GvpSchedule::new(0.5, 1.0).unwrap();
        let x0 = vec![0.8, -1.1];
        let x1 = vec![0.3, 0.9];
        let o = CheatOracle::new(x0.clone(), 1.0);
        let traj = Trajectory::regression(s.phi()).unwrap();
        let z = [0.0, 0.0];
        for n in [10, 100, 1000] {
            let out = euler_integrate(&s, &traj, &o, &x1, &z, &EulerConfig::new(n)).unwrap();
            let err = out.iter().zip(&x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 3.0 / n as f64, "n {n}: {err}");
        }
        // intermediate: stop halfway along the path
        let half = Trajectory::regression(s.phi()).unwrap();
        let grid = half.discretize_between(0.0, 0.5, 500).unwrap();
        let mut x = x1.clone();
        for (p, q) in grid.steps() {
            let vr = velocity_r(&s, &x0, &x1, p.r, p.g).unwrap();
            for (xv, v) in x.iter_mut().zip(&vr) {
                *xv += v * (q.r - p.r);
            }
        }
        for i in 0..2 {
            let exact = s.alpha(0.0) * x0[i] + s.beta(0.0) * x1[i];
            assert!((x[i] - exact).abs() < 3e-3);
        }
    }

    #[test]
    fn first_order_convergence_on_elliptical_path() {
        let rho = 0.5;
        let s = GvpSchedule::new(rho, 1.0).unwrap();
        let o = GaussianOracle::new(rho, 1.0).unwrap();
        let traj = Trajectory::elliptical(s.phi(), FRAC_PI_4).unwrap();
        let x1 = [0.7, -1.3];
        let z = [0.4, 0.9];
        let run = |n| euler_integrate(&s, &traj, &o, &x1, &z, &EulerConfig::new(n)).unwrap();
        let reference = run(8000);
        let err = |n| -> f64 {
            run(n).iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        for n in [100, 200] {
            let ratio = err(n) / err(2 * n);
            assert!((1.6..=2.4).contains(&ratio), "n {n}: ratio {ratio}");
        }
    }
}
