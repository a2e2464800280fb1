//! Toy datasets (S-curve restoration, correlated Gaussian pairs), correlation
//! estimation, metrics and CSV storage.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::exec::{derive_seed, rng_from_seed, Exec};
use crate::process::PairSample;

/// Point of the S-curve at `s` in `[0, 1]`: two half circles of radius 1
/// joined at the origin.
pub fn scurve_point(s: f64) -> [f64; 2] {
    let theta = 3.0 * PI * (s - 0.5);
    [theta.sin(), theta.signum() * (theta.cos() - 1.0)]
}

/// Distance-free membership test used by the tests: `x^2 + (|y| - 1)^2 = 1`.
pub fn scurve_residual(p: &[f64]) -> f64 {
    p[0] * p[0] + (p[1].abs() - 1.0).powi(2) - 1.0
}

/// Unstandardized S-curve samples with isotropic Gaussian jitter.
pub fn make_scurve_raw(n: usize, jitter: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 points, got {n}")));
    }
    if !(jitter >= 0.0) {
        return Err(Error::Domain(format!("jitter must be non-negative, got {jitter}")));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let p = scurve_point(rng.random());
            p.iter().map(|c| c + jitter * rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .collect())
}

/// S-curve samples standardized to per-coordinate mean 0 and std `sigma_d`.
pub fn make_scurve(n: usize, jitter: f64, sigma_d: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    standardize(&make_scurve_raw(n, jitter, seed)?, sigma_d)
}

fn column_stats(points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = points.first().ok_or(Error::EmptyDataset)?;
    if points.len() < 2 {
        return Err(Error::InsufficientData { need: 2, got: points.len() });
    }
    let d = first.len();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        check_dim(d, p.len())?;
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for p in points {
        for ((s, v), m) in var.iter_mut().zip(p).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let std = var.into_iter().map(|s| (s / (n - 1.0)).sqrt()).collect();
    Ok((mean, std))
}

/// Per-coordinate affine map to sample mean 0 and sample std `sigma_d`.
pub fn standardize(points: &[Vec<f64>], sigma_d: f64) -> Result<Vec<Vec<f64>>> {
    if !(sigma_d > 0.0) {
        return Err(Error::Domain(format!("sigma_d must be positive, got {sigma_d}")));
    }
    let (mean, std) = column_stats(points)?;
    if let Some(j) = std.iter().position(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::Domain(format!("coordinate {j} has zero or non-finite spread")));
    }
    Ok(points
        .iter()
        .map(|p| {
            p.iter()
                .zip(&mean)
                .zip(&std)
                .map(|((v, m), s)| (v - m) / s * sigma_d)
                .collect()
        })
        .collect())
}

/// Shear-and-squash degradation `x1 = S x0 + noise` with
/// `S = [[1, strength], [0, 1 - strength / 2]]`, then standardized to `sigma_d`.
pub fn degrade(
    clean: &[Vec<f64>],
    strength: f64,
    noise: f64,
    sigma_d: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if !(strength >= 0.0 && noise >= 0.0) {
        return Err(Error::Domain(format!(
            "strength and noise must be non-negative, got {strength} and {noise}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let raw = clean
        .iter()
        .map(|p| {
            check_dim(2, p.len())?;
            let mut e = [0.0; 2];
            for v in &mut e {
                *v = noise * rng.sample::<f64, _>(StandardNormal);
            }
            Ok(vec![p[0] + strength * p[1] + e[0], (1.0 - strength / 2.0) * p[1] + e[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    standardize(&raw, sigma_d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub pairs: Vec<PairSample>,
    pub sigma_d: f64,
    pub rho_hat: f64,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    kind: String,
    params: BTreeMap<String, f64>,
    rho_hat: f64,
    seed: u64,
    sigma_d: f64,
}

impl ToyDataset {
    pub fn dim(&self) -> usize {
        self.pairs.first().map_or(0, PairSample::dim)
    }

    pub fn clean(&self) -> Vec<Vec<f64>> {
        self.pairs.iter().map(|p| p.x0.clone()).collect()
    }

    pub fn degraded(&self) -> Vec<Vec<f64>> {
        self.pairs.iter().map(|p| p.x1.clone()).collect()
    }

    /// Splits off the last `n_test` pairs.
    pub fn split(mut self, n_test: usize) -> (ToyDataset, ToyDataset) {
        let cut = self.pairs.len().saturating_sub(n_test);
        let test = self.pairs.split_off(cut);
        let test = ToyDataset { pairs: test, ..self.clone() };
        (self, test)
    }

    pub fn sidecar_path(csv: &Path) -> PathBuf {
        let mut s = csv.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes the pair CSV and its JSON sidecar (`<path>.json`).
    pub fn save(&self, path: &Path) -> Result<()> {
        write_pairs_csv(path, &self.pairs)?;
        let side = Sidecar {
            kind: self.provenance.kind.clone(),
            params: self.provenance.params.clone(),
            rho_hat: self.rho_hat,
            seed: self.provenance.seed,
            sigma_d: self.sigma_d,
        };
        std::fs::write(Self::sidecar_path(path), serde_json::to_string_pretty(&side)? + "\n")?;
        Ok(())
    }

    /// Reads a pair CSV. Without a sidecar, `sigma_d` and `rho_hat` are
    /// estimated from the data.
    pub fn load(path: &Path) -> Result<Self> {
        let pairs = read_pairs_csv(path)?;
        let side = Self::sidecar_path(path);
        if side.exists() {
            let s: Sidecar = serde_json::from_str(&std::fs::read_to_string(side)?)?;
            return Ok(Self {
                pairs,
                sigma_d: s.sigma_d,
                rho_hat: s.rho_hat,
                provenance: Provenance { kind: s.kind, params: s.params, seed: s.seed },
            });
        }
        let clean: Vec<Vec<f64>> = pairs.iter().map(|p| p.x0.clone()).collect();
        let (_, std) = column_stats(&clean)?;
        let sigma_d = std.iter().sum::<f64>() / std.len() as f64;
        let rho_hat = estimate_rho(&pairs)?;
        Ok(Self {
            pairs,
            sigma_d,
            rho_hat,
            provenance: Provenance { kind: "file".into(), params: BTreeMap::new(), seed: 0 },
        })
    }
}

fn zip_pairs(x0: Vec<Vec<f64>>, x1: Vec<Vec<f64>>) -> Result<Vec<PairSample>> {
    check_dim(x0.len(), x1.len())?;
    x0.into_iter().zip(x1).map(|(a, b)| PairSample::new(a, b)).collect()
}

/// Standardized S-curve with its shear-degraded counterpart.
pub fn scurve_dataset(
    n: usize,
    jitter: f64,
    strength: f64,
    noise: f64,
    sigma_d: f64,
    seed: u64,
) -> Result<ToyDataset> {
    let clean = make_scurve(n, jitter, sigma_d, derive_seed(seed, 0))?;
    let degraded = degrade(&clean, strength, noise, sigma_d, derive_seed(seed, 1))?;
    let pairs = zip_pairs(clean, degraded)?;
    let rho_hat = estimate_rho(&pairs)?;
    let params = [("jitter", jitter), ("n", n as f64), ("noise", noise), ("strength", strength)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    Ok(ToyDataset {
        pairs,
        sigma_d,
        rho_hat,
        provenance: Provenance { kind: "scurve".into(), params, seed },
    })
}

/// Pairs with `x0 ~ N(0, sigma_d^2 I)` and `x1 = rho x0 + sqrt(1 - rho^2) u`.
pub fn make_gaussian_pairs(rho: f64, n: usize, dim: usize, sigma_d: f64, seed: u64) -> Result<ToyDataset> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("|rho| must be below 1, got {rho}")));
    }
    if !(sigma_d > 0.0) || dim == 0 {
        return Err(Error::Domain(format!("need sigma_d > 0 and dim >= 1, got {sigma_d} and {dim}")));
    }
    if n < 2 {
        return Err(Error::InsufficientData { need: 2, got: n });
    }
    let mut rng = rng_from_seed(seed);
    let c = (1.0 - rho * rho).sqrt();
    let pairs = (0..n)
        .map(|_| {
            let x0: Vec<f64> = (0..dim).map(|_| sigma_d * rng.sample::<f64, _>(StandardNormal)).collect();
            let x1 = x0.iter().map(|v| rho * v + c * sigma_d * rng.sample::<f64, _>(StandardNormal)).collect();
            PairSample { x0, x1 }
        })
        .collect::<Vec<_>>();
    let rho_hat = estimate_rho(&pairs)?;
    let params = [("dim", dim as f64), ("n", n as f64), ("rho", rho)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    Ok(ToyDataset {
        pairs,
        sigma_d,
        rho_hat,
        provenance: Provenance { kind: "gaussian".into(), params, seed },
    })
}

/// Pearson correlation between `x0` and `x1` per coordinate, averaged.
pub fn estimate_rho(pairs: &[PairSample]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData { need: 2, got: pairs.len() });
    }
    let d = pairs[0].dim();
    let n = pairs.len() as f64;
    let mut total = 0.0;
    for j in 0..d {
        let (mut ma, mut mb) = (0.0, 0.0);
        for p in pairs {
            check_dim(d, p.x0.len())?;
            check_dim(d, p.x1.len())?;
            ma += p.x0[j];
            mb += p.x1[j];
        }
        ma /= n;
        mb /= n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for p in pairs {
            let (a, b) = (p.x0[j] - ma, p.x1[j] - mb);
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        if saa == 0.0 || sbb == 0.0 {
            return Err(Error::Domain(format!("coordinate {j} is constant; correlation undefined")));
        }
        total += (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0);
    }
    Ok(total / d as f64)
}

/// Mean squared Euclidean gap between paired points.
pub fn mse(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut s = 0.0;
    for (p, q) in a.iter().zip(b) {
        check_dim(p.len(), q.len())?;
        s += p.iter().zip(q).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
    }
    Ok(s / a.len() as f64)
}

fn dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

fn mean_pair_distance(exec: Exec, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let rows = exec.map(a.len(), |i| b.iter().map(|q| dist(&a[i], q)).sum::<f64>());
    rows.iter().sum::<f64>() / (a.len() * b.len()) as f64
}

/// `2 E|A - B| - E|A - A'| - E|B - B'|` over all ordered pairs (diagonal
/// included), which is zero for identical samples and never negative.
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    energy_distance_with(Exec::default(), a, b)
}

pub fn energy_distance_with(exec: Exec, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let d = a.first().ok_or(Error::EmptyDataset)?.len();
    if b.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for p in a.iter().chain(b) {
        check_dim(d, p.len())?;
    }
    let ab = mean_pair_distance(exec, a, b);
    let aa = mean_pair_distance(exec, a, a);
    let bb = mean_pair_distance(exec, b, b);
    Ok((2.0 * ab - aa - bb).max(0.0))
}

/// Round-trip float formatting with 17 significant digits; integral
/// values below 2^53 print as integers.
pub fn format_f64(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9_007_199_254_740_992.0 {
        format!("{v}")
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_pairs_csv(path: &Path, pairs: &[PairSample]) -> Result<()> {
    let d = pairs.first().ok_or(Error::EmptyDataset)?.dim();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x0_{i}")).collect();
    header.extend((1..=d).map(|i| format!("x1_{i}")));
    let rows = pairs.iter().map(|p| p.x0.iter().chain(&p.x1).copied().collect::<Vec<_>>());
    write_rows(path, &header, rows)
}

pub fn read_pairs_csv(path: &Path) -> Result<Vec<PairSample>> {
    let (header, rows) = read_rows(path)?;
    if header.len() % 2 != 0 || header.is_empty() {
        return Err(Error::Parse(format!("{}: pair CSV needs an even column count", path.display())));
    }
    let d = header.len() / 2;
    rows.into_iter()
        .map(|r| PairSample::new(r[..d].to_vec(), r[d..].to_vec()))
        .collect()
}

/// Writes numeric rows under a header, formatting with [`format_f64`].
pub fn write_rows<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    write_rows_to(std::fs::File::create(path)?, header, rows)
}

/// [`write_rows`] into any writer.
pub fn write_rows_to<W, I>(out: W, header: &[String], rows: I) -> Result<()>
where
    W: std::io::Write,
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        check_dim(header.len(), row.len())?;
        w.write_record(row.iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV with a header row.
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("{} row {}: {s:?}: {e}", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a point cloud, one point per row.
pub fn read_cloud_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(read_rows(path)?.1)
}

pub fn write_cloud_csv(path: &Path, prefix: &str, points: &[Vec<f64>]) -> Result<()> {
    let d = points.first().ok_or(Error::EmptyDataset)?.len();
    let header: Vec<String> = (1..=d).map(|i| format!("{prefix}_{i}")).collect();
    write_rows(path, &header, points.iter().cloned())
}
