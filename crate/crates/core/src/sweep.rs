//! Grid evaluation of the elliptical sampler over peak noise `delta`,
//! stochasticity `eta` and evaluation count.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::process::PairSample;
use crate::sampler::{restore_batch, SamplerConfig};
use crate::schedule::GvpSchedule;
use crate::toydata::{energy_distance_with, format_f64, mse};
use crate::trajectory::TrajectoryKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub etas: Vec<f64>,
    pub nfes: Vec<usize>,
    pub boot_epsilon: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.0, FRAC_PI_8, FRAC_PI_4, FRAC_PI_2],
            etas: vec![0.0, 0.2, 0.5, 1.0],
            nfes: vec![1, 2, 5, 15, 50],
            boot_epsilon: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub eta: f64,
    pub nfe: usize,
    /// `None` where the configuration is not applicable.
    pub mse: Option<f64>,
    pub energy: Option<f64>,
}

/// Whether the sampler accepts this cell: a single evaluation on a path that
/// starts noiseless must be fully stochastic.
pub fn cell_applicable(delta: f64, eta: f64, nfe: usize) -> bool {
    !(nfe == 1 && delta > 0.0 && eta < 1.0)
}

impl SweepConfig {
    pub fn sampler(&self, delta: f64, eta: f64, nfe: usize) -> SamplerConfig {
        SamplerConfig {
            boot_epsilon: self.boot_epsilon,
            ..SamplerConfig::new(TrajectoryKind::Elliptical { delta }, nfe, eta, self.seed)
        }
    }
}

/// Restored cloud for one cell, or `None` for not-applicable cells. Item `i`
/// uses the same noise stream in every cell, so booted runs share their
/// boot noise.
pub fn restore_cell<D: Denoiser + ?Sized>(
    exec: Exec,
    sched: &GvpSchedule,
    denoiser: &D,
    degraded: &[Vec<f64>],
    cfg: &SweepConfig,
    delta: f64,
    eta: f64,
    nfe: usize,
) -> Result<Option<Vec<Vec<f64>>>> {
    if !cell_applicable(delta, eta, nfe) {
        return Ok(None);
    }
    restore_batch(exec, sched, denoiser, degraded, &cfg.sampler(delta, eta, nfe)).map(Some)
}

pub fn run_sweep<D: Denoiser + ?Sized>(
    exec: Exec,
    sched: &GvpSchedule,
    denoiser: &D,
    test: &[PairSample],
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let clean: Vec<Vec<f64>> = test.iter().map(|p| p.x0.clone()).collect();
    let degraded: Vec<Vec<f64>> = test.iter().map(|p| p.x1.clone()).collect();
    let mut rows = Vec::new();
    for &delta in &cfg.deltas {
        for &eta in &cfg.etas {
            for &nfe in &cfg.nfes {
                let out = restore_cell(exec, sched, denoiser, &degraded, cfg, delta, eta, nfe)?;
                let (m, e) = match out {
                    Some(cloud) => (
                        Some(mse(&cloud, &clean)?),
                        Some(energy_distance_with(exec, &cloud, &clean)?),
                    ),
                    None => (None, None),
                };
                rows.push(SweepRow { delta, eta, nfe, mse: m, energy: e });
            }
        }
    }
    Ok(rows)
}

/// CSV with columns `delta,eta,nfe,mse,energy`; not-applicable cells read `NA`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), format_f64);
    let mut s = String::from("delta,eta,nfe,mse,energy\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            format_f64(r.delta),
            format_f64(r.eta),
            r.nfe,
            cell(r.mse),
            cell(r.energy)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::GaussianOracle;
    use crate::toydata::make_gaussian_pairs;

    #[test]
    fn na_cells_and_regression_rows() {
        let rho = 0.5;
        let sched = GvpSchedule::new(rho, 1.0).unwrap();
        let o = GaussianOracle::new(rho, 1.0).unwrap();
        let test = make_gaussian_pairs(rho, 60, 2, 1.0, 1).unwrap().pairs;
        let cfg = SweepConfig { nfes: vec![1, 2, 5], ..SweepConfig::default() };
        let rows = run_sweep(Exec::default(), &sched, &o, &test, &cfg).unwrap();
        assert_eq!(rows.len(), 4 * 4 * 3);
        for r in &rows {
            assert_eq!(r.mse.is_none(), r.nfe == 1 && r.delta > 0.0 && r.eta < 1.0, "{r:?}");
        }
        let reg: Vec<&SweepRow> = rows.iter().filter(|r| r.delta == 0.0).collect();
        for r in &reg {
            let same = reg.iter().find(|q| q.nfe == r.nfe && q.eta == 0.0).unwrap();
            assert_eq!(r.mse, same.mse);
            assert_eq!(r.energy, same.energy);
        }
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("delta,eta,nfe,mse,energy\n"));
        assert_eq!(csv.lines().filter(|l| l.ends_with("NA,NA")).count(), 3 * 3);
    }
}
