//! Forward two-time interpolant states.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::exec::{derive_seed, rng_from_seed, Exec};
use crate::schedule::GvpSchedule;

/// A clean point `x0` with its degraded counterpart `x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

impl PairSample {
    pub fn new(x0: Vec<f64>, x1: Vec<f64>) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::Domain("pair dimension must be at least 1".into()));
        }
        check_dim(x0.len(), x1.len())?;
        Ok(Self { x0, x1 })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyState {
    pub x: Vec<f64>,
    pub r: f64,
    pub g: f64,
}

/// `x = lambda(g) (alpha(r) x0 + beta(r) x1) + gamma(g) z`.
pub fn interpolate(
    sched: &GvpSchedule,
    pair: &PairSample,
    z: &[f64],
    r: f64,
    g: f64,
) -> Result<NoisyState> {
    let x = interpolate_parts(sched, &pair.x0, &pair.x1, z, r, g)?;
    Ok(NoisyState { x, r, g })
}

/// [`interpolate`] on borrowed components.
pub fn interpolate_parts(
    sched: &GvpSchedule,
    x0: &[f64],
    x1: &[f64],
    z: &[f64],
    r: f64,
    g: f64,
) -> Result<Vec<f64>> {
    check_dim(x0.len(), x1.len())?;
    check_dim(x0.len(), z.len())?;
    let c = sched.coeffs(r, g)?;
    let (a, b) = (c.lambda * c.alpha, c.lambda * c.beta);
    Ok(x0
        .iter()
        .zip(x1)
        .zip(z)
        .map(|((&u, &v), &w)| a * u + b * v + c.gamma * w)
        .collect())
}

/// I.i.d. `N(0, sigma_d^2)` components.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, dim: usize, sigma_d: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| sigma_d * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

const VARIANCE_CHUNK: usize = 8192;

/// Monte-Carlo estimate of `Var(x(r, g))` per coordinate, averaged over
/// coordinates. Pairs are resampled uniformly from `dataset` and paired
/// with fresh noise.
pub fn empirical_variance(
    sched: &GvpSchedule,
    dataset: &[PairSample],
    r: f64,
    g: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    empirical_variance_with(Exec::default(), sched, dataset, r, g, n, seed)
}

/// [`empirical_variance`] under an explicit execution policy. Chunks of
/// draws are seeded by chunk index, so the estimate does not depend on
/// `exec` or the worker count.
pub fn empirical_variance_with(
    exec: Exec,
    sched: &GvpSchedule,
    dataset: &[PairSample],
    r: f64,
    g: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    if n < 2 {
        return Err(Error::InsufficientData { need: 2, got: n });
    }
    sched.check(r, g)?;
    let dim = first.dim();
    let n_chunks = n.div_ceil(VARIANCE_CHUNK);

    let partials = exec.try_map(n_chunks, |c| -> Result<Vec<(f64, f64)>> {
        let mut rng = rng_from_seed(derive_seed(seed, c as u64));
        let len = VARIANCE_CHUNK.min(n - c * VARIANCE_CHUNK);
        let mut acc = vec![(0.0, 0.0); dim];
        for _ in 0..len {
            let pair = &dataset[rng.random_range(0..dataset.len())];
            let z = sample_noise(&mut rng, dim, sched.sigma_d());
            let x = interpolate_parts(sched, &pair.x0, &pair.x1, &z, r, g)?;
            for (a, v) in acc.iter_mut().zip(x) {
                a.0 += v;
                a.1 += v * v;
            }
        }
        Ok(acc)
    })?;

    let mut total = vec![(0.0, 0.0); dim];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.0 += p.0;
            t.1 += p.1;
        }
    }
    let nf = n as f64;
    let var = total
        .iter()
        .map(|&(s, ss)| (ss - s * s / nf) / (nf - 1.0))
        .sum::<f64>()
        / dim as f64;
    Ok(var)
}
