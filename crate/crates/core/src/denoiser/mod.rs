//! Clean-sample predictors `x0_hat = sigma_d * F(x / sigma_d, x1 / sigma_d, r, g)`.
//!
//! Three implementations share the [`Denoiser`] contract: [`CheatOracle`]
//! (returns the true `x0`), [`GaussianOracle`] (exact posterior mean for
//! correlated Gaussian pairs) and the trainable [`MlpDenoiser`].

mod embedding;
mod mlp;

pub use embedding::{embed_into, time_embed};
pub use mlp::{gelu, gelu_grad, Example, ForwardCache, Mlp, MlpDenoiser};

use crate::error::{check_dim, Result};
use crate::schedule::{gamma, lambda, GvpSchedule};

pub trait Denoiser: Sync {
    fn sigma_d(&self) -> f64;

    /// The core map `F` in unit-variance coordinates.
    fn normalized(&self, x: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>>;

    fn predict(&self, x: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>> {
        check_dim(x.len(), x1.len())?;
        let s = self.sigma_d();
        let xn: Vec<f64> = x.iter().map(|v| v / s).collect();
        let x1n: Vec<f64> = x1.iter().map(|v| v / s).collect();
        let out = self.normalized(&xn, &x1n, r, g)?;
        Ok(out.into_iter().map(|v| v * s).collect())
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn sigma_d(&self) -> f64 {
        (**self).sigma_d()
    }

    fn normalized(&self, x: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>> {
        (**self).normalized(x, x1, r, g)
    }

    fn predict(&self, x: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>> {
        (**self).predict(x, x1, r, g)
    }
}

/// Peeks at the label: always returns the true clean point.
#[derive(Debug, Clone, PartialEq)]
pub struct CheatOracle {
    pub x0: Vec<f64>,
    pub sigma_d: f64,
}

impl CheatOracle {
    pub fn new(x0: Vec<f64>, sigma_d: f64) -> Self {
        Self { x0, sigma_d }
    }
}

impl Denoiser for CheatOracle {
    fn sigma_d(&self) -> f64 {
        self.sigma_d
    }

    fn normalized(&self, x: &[f64], _x1: &[f64], _r: f64, _g: f64) -> Result<Vec<f64>> {
        check_dim(self.x0.len(), x.len())?;
        Ok(self.x0.iter().map(|v| v / self.sigma_d).collect())
    }

    fn predict(&self, x: &[f64], _x1: &[f64], _r: f64, _g: f64) -> Result<Vec<f64>> {
        check_dim(self.x0.len(), x.len())?;
        Ok(self.x0.clone())
    }
}

/// Posterior mean `E[x0 | x(r, g), x1]` for zero-mean pairs with
/// `Var(x0) = Var(x1) = sigma_d^2` and `Cov(x0, x1) = rho sigma_d^2` per
/// coordinate.
///
/// Given `x1`, `x0 ~ N(rho x1, (1 - rho^2) sigma_d^2)` and the state is the
/// linear observation `y = x - lambda beta x1 = a x0 + gamma z` with
/// `a = lambda alpha`. Standard Gaussian conditioning gives
/// `m + a s^2 / (a^2 s^2 + gamma^2 sigma_d^2) (y - a m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianOracle {
    sched: GvpSchedule,
}

impl GaussianOracle {
    pub fn new(rho: f64, sigma_d: f64) -> Result<Self> {
        Ok(Self { sched: GvpSchedule::new(rho, sigma_d)? })
    }

    pub fn from_schedule(sched: GvpSchedule) -> Self {
        Self { sched }
    }

    pub fn rho(&self) -> f64 {
        self.sched.rho()
    }

    /// True where the state carries no information about `x0` at all
    /// (`r = phi`, `g = 0`); the prediction there is the prior mean.
    pub fn is_degenerate(&self, r: f64, g: f64) -> bool {
        let a = lambda(g) * self.sched.alpha(r);
        let gam = gamma(g);
        a * a * (1.0 - self.rho() * self.rho()) + gam * gam == 0.0
    }
}

impl Denoiser for GaussianOracle {
    fn sigma_d(&self) -> f64 {
        self.sched.sigma_d()
    }

    fn normalized(&self, x: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>> {
        check_dim(x.len(), x1.len())?;
        let c = self.sched.coeffs(r, g)?;
        let rho = self.sched.rho();
        let s2 = 1.0 - rho * rho;
        let a = c.lambda * c.alpha;
        let den = a * a * s2 + c.gamma * c.gamma;
        Ok(x.iter()
            .zip(x1)
            .map(|(&xv, &x1v)| {
                let m = rho * x1v;
                if den == 0.0 {
                    return m;
                }
                let y = xv - c.lambda * c.beta * x1v;
                m + a * s2 / den * (y - a * m)
            })
            .collect())
    }
}
