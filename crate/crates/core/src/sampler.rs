//! Analytic hybrid sampler and the pure regression sampler.
//!
//! A hybrid step from `(r1, g1)` to `(r2, g2)` solves the linear part of the
//! probability-flow ODE exactly while holding `x0_hat` fixed:
//!
//! `x2 = k^s x1_state + cos g2 (a2 x0_hat + b2 x1) - k^s cos g1 (a1 x0_hat + b1 x1) + kappa z`
//!
//! with `k = sin g2 / sin g1`, `s = sqrt(1 - eta^2)` and
//! `kappa = eta (sin g2 - k^s sin g1) / (1 - s)`, set to zero when `eta = 0`.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::error::{check_dim, Error, Result};
use crate::exec::{derive_seed, rng_from_seed, Exec};
use crate::process::sample_noise;
use crate::schedule::{gamma, lambda, GvpSchedule};
use crate::trajectory::{Trajectory, TrajectoryKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub trajectory: TrajectoryKind,
    /// Number of denoiser evaluations.
    pub n_steps: usize,
    #[serde(default)]
    pub eta: f64,
    /// Parameter length of the booting step on paths that start at `g = 0`.
    #[serde(default = "default_boot_epsilon")]
    pub boot_epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_boot_epsilon() -> f64 {
    1e-3
}

impl SamplerConfig {
    pub fn new(trajectory: TrajectoryKind, n_steps: usize, eta: f64, seed: u64) -> Self {
        Self { trajectory, n_steps, eta, boot_epsilon: default_boot_epsilon(), seed }
    }

    /// One-step regression: the fast, distortion-oriented preset.
    pub fn disi_r(seed: u64) -> Self {
        Self::new(TrajectoryKind::Regression, 1, 0.0, seed)
    }

    /// Ten deterministic steps on an elliptical path with booting.
    pub fn disi_g(delta: f64, seed: u64) -> Self {
        Self::new(TrajectoryKind::Elliptical { delta }, 10, 0.0, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.boot_epsilon > 0.0 && self.boot_epsilon < FRAC_PI_2) {
            return Err(Error::Config(format!(
                "boot_epsilon must lie in (0, pi/2), got {}",
                self.boot_epsilon
            )));
        }
        Ok(())
    }
}

/// Noise coefficient of the hybrid step.
///
/// Evaluated as `-eta sin g2 expm1(-(1 - s) ln k) / (1 - s)` with
/// `1 - s = eta^2 / (1 + s)`, which stays accurate as `eta -> 0`.
pub fn kappa(eta: f64, g1: f64, g2: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("eta must lie in [0, 1], got {eta}")));
    }
    if g1 <= 0.0 {
        return Err(Error::SingularStart);
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let (s1, s2) = (gamma(g1), gamma(g2));
    if eta == 1.0 {
        return Ok(s2 - s1);
    }
    let k = s2 / s1;
    if k == 0.0 {
        return Ok(0.0);
    }
    let s = (1.0 - eta * eta).sqrt();
    let one_minus_s = eta * eta / (1.0 + s);
    Ok(-eta * s2 * (-one_minus_s * k.ln()).exp_m1() / one_minus_s)
}

fn mix(sched: &GvpSchedule, x0hat: &[f64], x1: &[f64], r: f64, g: f64) -> Vec<f64> {
    let lam = lambda(g);
    let (a, b) = (lam * sched.alpha(r), lam * sched.beta(r));
    x0hat.iter().zip(x1).map(|(&u, &v)| a * u + b * v).collect()
}

fn check_step_dims(x_prev: &[f64], x0hat: &[f64], x1: &[f64], z: &[f64]) -> Result<()> {
    check_dim(x_prev.len(), x0hat.len())?;
    check_dim(x_prev.len(), x1.len())?;
    check_dim(x_prev.len(), z.len())
}

/// One hybrid step from `from = (r1, g1)` to `to = (r2, g2)`; requires `g1 > 0`.
pub fn hybrid_step(
    sched: &GvpSchedule,
    x_prev: &[f64],
    x0hat: &[f64],
    x1: &[f64],
    from: (f64, f64),
    to: (f64, f64),
    eta: f64,
    z: &[f64],
) -> Result<Vec<f64>> {
    check_step_dims(x_prev, x0hat, x1, z)?;
    let ((r1, g1), (r2, g2)) = (from, to);
    sched.check(r1, g1)?;
    sched.check(r2, g2)?;
    let kap = kappa(eta, g1, g2)?;
    let s = (1.0 - eta * eta).sqrt();
    let ks = (gamma(g2) / gamma(g1)).powf(s);
    let m1 = mix(sched, x0hat, x1, r1, g1);
    let m2 = mix(sched, x0hat, x1, r2, g2);
    Ok((0..x_prev.len())
        .map(|i| ks * x_prev[i] + m2[i] - ks * m1[i] + kap * z[i])
        .collect())
}

/// Fully stochastic step, valid from `g1 = 0`:
/// `x + cos g2 (a2 x0_hat + b2 x1) - cos g1 (a1 x0_hat + b1 x1) + (sin g2 - sin g1) z`.
pub fn boot_step(
    sched: &GvpSchedule,
    x_prev: &[f64],
    x0hat: &[f64],
    x1: &[f64],
    from: (f64, f64),
    to: (f64, f64),
    z: &[f64],
) -> Result<Vec<f64>> {
    check_step_dims(x_prev, x0hat, x1, z)?;
    let ((r1, g1), (r2, g2)) = (from, to);
    sched.check(r1, g1)?;
    sched.check(r2, g2)?;
    let kap = gamma(g2) - gamma(g1);
    let m1 = mix(sched, x0hat, x1, r1, g1);
    let m2 = mix(sched, x0hat, x1, r2, g2);
    Ok((0..x_prev.len())
        .map(|i| (x_prev[i] - m1[i]) + m2[i] + kap * z[i])
        .collect())
}

/// `x_prev + (alpha(r2) - alpha(r1)) x0_hat + (beta(r2) - beta(r1)) x1`.
pub fn regression_step(
    sched: &GvpSchedule,
    x_prev: &[f64],
    x0hat: &[f64],
    x1: &[f64],
    r1: f64,
    r2: f64,
) -> Result<Vec<f64>> {
    check_dim(x_prev.len(), x0hat.len())?;
    check_dim(x_prev.len(), x1.len())?;
    sched.check(r1, 0.0)?;
    sched.check(r2, 0.0)?;
    let da = sched.alpha(r2) - sched.alpha(r1);
    let db = sched.beta(r2) - sched.beta(r1);
    // the x1 term first: on a full one-step sweep it cancels x_prev = x1 exactly
    Ok((0..x_prev.len())
        .map(|i| (x_prev[i] + db * x1[i]) + da * x0hat[i])
        .collect())
}

/// Restores `x1` along the configured path, drawing noise from `rng`.
pub fn restore<D, R>(
    sched: &GvpSchedule,
    denoiser: &D,
    x1: &[f64],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    D: Denoiser + ?Sized,
    R: Rng + ?Sized,
{
    let sigma = sched.sigma_d();
    let dim = x1.len();
    restore_with(sched, denoiser, x1, cfg, || sample_noise(rng, dim, sigma))
}

/// [`restore`] with an explicit noise source, called once per stochastic
/// draw in path order: the initial state (only when it is noisy), then
/// every step whose noise coefficient is nonzero.
pub fn restore_with<D, F>(
    sched: &GvpSchedule,
    denoiser: &D,
    x1: &[f64],
    cfg: &SamplerConfig,
    mut noise: F,
) -> Result<Vec<f64>>
where
    D: Denoiser + ?Sized,
    F: FnMut() -> Vec<f64>,
{
    cfg.validate()?;
    let traj = Trajectory::new(cfg.trajectory, sched.phi())?;
    let dim = x1.len();
    let mut draw = |active: bool| -> Result<Vec<f64>> {
        if !active {
            return Ok(vec![0.0; dim]);
        }
        let z = noise();
        check_dim(dim, z.len())?;
        Ok(z)
    };

    if traj.is_pure_regression() {
        let grid = Trajectory::regression(sched.phi())?.discretize(cfg.n_steps)?;
        let mut x = x1.to_vec();
        for (p, q) in grid.steps() {
            let x0hat = denoiser.predict(&x, x1, p.r, 0.0)?;
            x = regression_step(sched, &x, &x0hat, x1, p.r, q.r)?;
        }
        return Ok(x);
    }

    let (t_start, t_end) = traj.t_range();
    let (r0, g0) = traj.point(t_start)?;
    let z0 = draw(gamma(g0) != 0.0)?;
    let mut x: Vec<f64> = x1
        .iter()
        .zip(&z0)
        .map(|(&v, &w)| lambda(g0) * sched.beta(r0) * v + gamma(g0) * w)
        .collect();

    let grid = if traj.starts_noiseless() {
        if cfg.n_steps == 1 && cfg.eta != 1.0 {
            return Err(Error::Config(format!(
                "a single step on the {} path must be fully stochastic (eta = 1), got eta = {}",
                cfg.trajectory.name(),
                cfg.eta
            )));
        }
        let t_boot = if cfg.n_steps == 1 {
            t_end
        } else {
            t_start + cfg.boot_epsilon * traj.direction()
        };
        let (rb, gb) = traj.point(t_boot)?;
        let x0hat = denoiser.predict(&x, x1, r0, g0)?;
        let z = draw(gamma(gb) != gamma(g0))?;
        x = boot_step(sched, &x, &x0hat, x1, (r0, g0), (rb, gb), &z)?;
        if cfg.n_steps == 1 {
            return Ok(x);
        }
        traj.discretize_between(t_boot, t_end, cfg.n_steps - 1)?
    } else {
        traj.discretize(cfg.n_steps)?
    };

    for (p, q) in grid.steps() {
        let x0hat = denoiser.predict(&x, x1, p.r, p.g)?;
        let kap = kappa(cfg.eta, p.g, q.g)?;
        let z = draw(kap != 0.0)?;
        x = hybrid_step(sched, &x, &x0hat, x1, (p.r, p.g), (q.r, q.g), cfg.eta, &z)?;
    }
    Ok(x)
}

/// Restores every input; item `i` draws its noise from a stream seeded by
/// `(cfg.seed, i)`, so results do not depend on `exec`.
pub fn restore_batch<D: Denoiser + ?Sized>(
    exec: Exec,
    sched: &GvpSchedule,
    denoiser: &D,
    inputs: &[Vec<f64>],
    cfg: &SamplerConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    exec.try_map(inputs.len(), |i| {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, i as u64));
        restore(sched, denoiser, &inputs[i], cfg, &mut rng)
    })
}
