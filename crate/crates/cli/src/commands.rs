use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use disi::checkpoint::Checkpoint;
use disi::denoiser::{Denoiser, GaussianOracle};
use disi::dynamics::{euler_integrate, EulerConfig};
use disi::exec::{derive_seed, rng_from_seed, Exec};
use disi::process::{interpolate_parts, sample_noise, PairSample};
use disi::sampler::{restore_batch, restore_with, SamplerConfig};
use disi::schedule::GvpSchedule;
use disi::sweep::{run_sweep, sweep_csv, SweepConfig};
use disi::toydata::{make_gaussian_pairs, read_rows, scurve_dataset, write_rows, write_rows_to, ToyDataset};
use disi::training::{train_with, TimeSamplerKind, TrainConfig};
use disi::trajectory::{Trajectory, TrajectoryKind};
use disi::verify;

use crate::config::{load, load_split, output};
use crate::error::{at, usage, CliError, CliResult};
use crate::{
    BenchArgs, DataKind, DenoiserArgs, GenDataArgs, Mode, OracleKind, PathArgs, PathKind, RestoreArgs, SamplerName,
    ScheduleDumpArgs, SimulateArgs, SweepArgs, TrainArgs, TrajArgs, VerifyArgs,
};

pub const SCURVE_JITTER: f64 = 0.05;
pub const SCURVE_STRENGTH: f64 = 0.5;
pub const SCURVE_NOISE: f64 = 0.1;
const DEFAULT_DELTA: f64 = FRAC_PI_8;

fn path_kind(kind: PathKind, path: &PathArgs) -> TrajectoryKind {
    let delta = path.delta.unwrap_or(DEFAULT_DELTA);
    match kind {
        PathKind::Elliptical => TrajectoryKind::Elliptical { delta },
        PathKind::Linear => TrajectoryKind::Linear { delta },
        PathKind::Regression => TrajectoryKind::Regression,
        PathKind::Vpath => TrajectoryKind::VPath { delta, p: path.p },
        PathKind::QuadBezier => TrajectoryKind::QuadBezier { delta },
    }
}

fn with_delta(kind: TrajectoryKind, delta: f64) -> TrajectoryKind {
    match kind {
        TrajectoryKind::Elliptical { .. } => TrajectoryKind::Elliptical { delta },
        TrajectoryKind::Linear { .. } => TrajectoryKind::Linear { delta },
        TrajectoryKind::Regression => TrajectoryKind::Regression,
        TrajectoryKind::VPath { p, .. } => TrajectoryKind::VPath { delta, p },
        TrajectoryKind::QuadBezier { .. } => TrajectoryKind::QuadBezier { delta },
    }
}

fn write_csv(out: Option<&Path>, header: &[&str], rows: Vec<Vec<f64>>) -> CliResult<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_rows_to(output(out)?, &header, rows)?;
    Ok(())
}

pub fn schedule_dump(a: ScheduleDumpArgs) -> CliResult<()> {
    if a.grid < 2 {
        return usage("--grid must be at least 2");
    }
    let s = GvpSchedule::new(a.rho, a.sigma_d)?;
    let (phi, n) = (s.phi(), a.grid);
    let at = |i: usize, lo: f64, hi: f64| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        let r = at(i, -phi, phi);
        for j in 0..n {
            let g = at(j, 0.0, FRAC_PI_2);
            let c = s.coeffs(r, g)?;
            rows.push(vec![r, g, c.alpha, c.beta, c.lambda, c.gamma, s.dalpha(r), s.dbeta(r)]);
        }
    }
    write_csv(a.out.as_deref(), &["r", "g", "alpha", "beta", "lambda", "gamma", "dalpha", "dbeta"], rows)
}

pub fn traj(a: TrajArgs) -> CliResult<()> {
    let phi = GvpSchedule::new(a.rho, 1.0)?.phi();
    let grid = Trajectory::new(path_kind(a.kind, &a.path), phi)?.discretize(a.steps)?;
    let rows = grid.points.iter().map(|p| vec![p.t, p.r, p.g]).collect();
    write_csv(a.out.as_deref(), &["t", "r", "g"], rows)
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let ds = at(&a.pairs, ToyDataset::load(&a.pairs))?;
    let sched = GvpSchedule::new(ds.rho_hat, ds.sigma_d)?;
    let grid = Trajectory::new(path_kind(a.traj, &a.path), sched.phi())?.discretize(a.steps)?;
    let dim = ds.dim();
    let mut rows = Vec::new();
    for (i, pair) in ds.pairs.iter().enumerate() {
        // one noise draw per pair, held along the path
        let z = sample_noise(&mut rng_from_seed(derive_seed(a.seed, i as u64)), dim, ds.sigma_d);
        for p in &grid.points {
            let x = interpolate_parts(&sched, &pair.x0, &pair.x1, &z, p.r, p.g)?;
            let mut row = vec![i as f64, p.t, p.r, p.g];
            row.extend(x);
            rows.push(row);
        }
    }
    let mut header: Vec<String> = ["pair", "t", "r", "g"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=dim).map(|k| format!("x_{k}")));
    write_rows_to(output(a.out.as_deref())?, &header, rows)?;
    Ok(())
}

pub fn bench(a: BenchArgs) -> CliResult<()> {
    let OracleKind::Gaussian = a.oracle;
    if a.noises == 0 || a.sampler_steps.is_empty() {
        return usage("--noises and --sampler-steps must be non-empty");
    }
    let sched = GvpSchedule::new(a.rho, 1.0)?;
    let oracle = GaussianOracle::from_schedule(sched);
    let kind = path_kind(a.traj, &a.path);
    let traj = Trajectory::new(kind, sched.phi())?;
    let data = make_gaussian_pairs(a.rho, a.noises.max(2), 1, 1.0, derive_seed(a.seed, 0))?;
    let exec = Exec::default();
    let inputs: Vec<(Vec<f64>, Vec<f64>)> = (0..a.noises)
        .map(|i| {
            let z = sample_noise(&mut rng_from_seed(derive_seed(a.seed, 1 + i as u64)), 1, 1.0);
            (data.pairs[i].x1.clone(), z)
        })
        .collect();
    let euler_cfg = EulerConfig::new(a.euler_steps);
    let refs = exec.try_map(inputs.len(), |i| euler_integrate(&sched, &traj, &oracle, &inputs[i].0, &inputs[i].1, &euler_cfg))?;
    let mut rows = Vec::new();
    for &n in &a.sampler_steps {
        let cfg = SamplerConfig::new(kind, n, 0.0, a.seed);
        let gaps = exec.try_map(inputs.len(), |i| -> disi::Result<f64> {
            let (x1, z) = &inputs[i];
            let out = restore_with(&sched, &oracle, x1, &cfg, || z.clone())?;
            Ok((out[0] - refs[i][0]).abs())
        })?;
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let max = gaps.iter().copied().fold(0.0, f64::max);
        rows.push(vec![n as f64, a.euler_steps as f64, mean, max]);
    }
    write_csv(a.out.as_deref(), &["sampler_steps", "euler_steps", "mean_gap", "max_gap"], rows)
}

/// A checkpoint's EMA model or the Gaussian oracle, with its schedule.
fn resolve_denoiser(
    model: Option<PathBuf>,
    oracle: Option<OracleKind>,
    rho: Option<f64>,
    sigma_d: Option<f64>,
) -> CliResult<(Box<dyn Denoiser>, GvpSchedule)> {
    match (model, oracle) {
        (Some(_), Some(_)) => usage("--model and --oracle are mutually exclusive"),
        (Some(path), None) => {
            if rho.is_some() || sigma_d.is_some() {
                return usage("--rho and --sigma-d apply to the oracle only; a checkpoint carries its own");
            }
            let ck = at(&path, Checkpoint::load(&path))?;
            let sched = GvpSchedule::new(ck.rho, ck.sigma_d)?;
            Ok((Box::new(ck.eval_model()?), sched))
        }
        (None, Some(OracleKind::Gaussian)) => {
            let Some(rho) = rho else {
                return usage("--oracle gaussian needs --rho");
            };
            let sched = GvpSchedule::new(rho, sigma_d.unwrap_or(1.0))?;
            Ok((Box::new(GaussianOracle::from_schedule(sched)), sched))
        }
        (None, None) => usage("select a denoiser with --model or --oracle"),
    }
}

/// Rows of a cloud CSV; for a pair CSV, the degraded (`x1_*`) columns.
fn read_degraded(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let (header, rows) = at(path, read_rows(path))?;
    let cols: Vec<usize> = header.iter().enumerate().filter(|(_, h)| h.starts_with("x1_")).map(|(i, _)| i).collect();
    if cols.is_empty() {
        return Ok(rows);
    }
    Ok(rows.into_iter().map(|r| cols.iter().map(|&i| r[i]).collect()).collect())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RestoreFile {
    trajectory: Option<TrajectoryKind>,
    n_steps: Option<usize>,
    eta: Option<f64>,
    boot_epsilon: Option<f64>,
    seed: Option<u64>,
    mode: Option<Mode>,
    model: Option<PathBuf>,
    oracle: Option<OracleKind>,
    rho: Option<f64>,
    sigma_d: Option<f64>,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
}

pub fn restore(a: RestoreArgs) -> CliResult<()> {
    let file: RestoreFile = match &a.config {
        Some(p) => load(p)?,
        None => RestoreFile::default(),
    };
    let mut cfg = match a.mode.or(file.mode) {
        Some(Mode::DisiG) => SamplerConfig::disi_g(DEFAULT_DELTA, 0),
        Some(Mode::DisiR) | None => SamplerConfig::disi_r(0),
    };
    if let Some(t) = file.trajectory {
        cfg.trajectory = t;
    }
    match a.traj {
        Some(kind) => {
            let path = PathArgs { delta: a.path.delta.or(Some(cfg.trajectory.delta())), p: a.path.p };
            cfg.trajectory = path_kind(kind, &path);
        }
        None => {
            if let Some(d) = a.path.delta {
                cfg.trajectory = with_delta(cfg.trajectory, d);
            }
        }
    }
    cfg.n_steps = a.steps.or(file.n_steps).unwrap_or(cfg.n_steps);
    cfg.eta = a.eta.or(file.eta).unwrap_or(cfg.eta);
    cfg.boot_epsilon = a.boot_epsilon.or(file.boot_epsilon).unwrap_or(cfg.boot_epsilon);
    cfg.seed = a.seed.or(file.seed).unwrap_or(cfg.seed);
    cfg.validate()?;

    let DenoiserArgs { model, oracle, rho, sigma_d } = a.denoiser;
    let (den, sched) = resolve_denoiser(
        model.or(file.model),
        oracle.or(file.oracle),
        rho.or(file.rho),
        sigma_d.or(file.sigma_d),
    )?;
    let Some(input) = a.input.or(file.input) else {
        return usage("restore needs --input");
    };
    let degraded = read_degraded(&input)?;
    let restored = restore_batch(Exec::default(), &sched, den.as_ref(), &degraded, &cfg)?;
    let dim = restored.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=dim).map(|k| format!("x_{k}")).collect();
    write_rows_to(output(a.out.or(file.out).as_deref())?, &header, restored)?;
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepIo {
    model: Option<PathBuf>,
    oracle: Option<OracleKind>,
    rho: Option<f64>,
    sigma_d: Option<f64>,
    data: Option<PathBuf>,
    n: Option<usize>,
    out: Option<PathBuf>,
}

const SWEEP_IO: [&str; 7] = ["model", "oracle", "rho", "sigma_d", "data", "n", "out"];

pub fn sweep(a: SweepArgs) -> CliResult<()> {
    let (io, mut cfg): (SweepIo, SweepConfig) = match &a.config {
        Some(p) => load_split(p, &SWEEP_IO)?,
        None => Default::default(),
    };
    if !a.deltas.is_empty() {
        cfg.deltas = a.deltas;
    }
    if !a.etas.is_empty() {
        cfg.etas = a.etas;
    }
    if !a.nfes.is_empty() {
        cfg.nfes = a.nfes;
    }
    cfg.boot_epsilon = a.boot_epsilon.unwrap_or(cfg.boot_epsilon);
    cfg.seed = a.seed.unwrap_or(cfg.seed);

    let DenoiserArgs { model, oracle, rho, sigma_d } = a.denoiser;
    let model = model.or(io.model);
    let from_model = model.is_some();
    let (den, sched) = resolve_denoiser(model, oracle.or(io.oracle), rho.or(io.rho), sigma_d.or(io.sigma_d))?;
    let test: Vec<PairSample> = match a.data.or(io.data) {
        Some(p) => at(&p, ToyDataset::load(&p))?.pairs,
        None if !from_model => {
            let n = a.n.or(io.n).unwrap_or(500);
            make_gaussian_pairs(sched.rho(), n, 2, sched.sigma_d(), derive_seed(cfg.seed, u64::MAX))?.pairs
        }
        None => return usage("sweep with --model needs --data"),
    };
    let rows = run_sweep(Exec::default(), &sched, den.as_ref(), &test, &cfg)?;
    let mut out = output(a.out.or(io.out).as_deref())?;
    out.write_all(sweep_csv(&rows).as_bytes())?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainIo {
    data: Option<String>,
    n: Option<usize>,
    rho: Option<f64>,
    data_seed: Option<u64>,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
}

const TRAIN_IO: [&str; 6] = ["data", "n", "rho", "data_seed", "out", "trace"];

fn time_sampler(name: SamplerName) -> TimeSamplerKind {
    match name {
        SamplerName::Elliptical => TimeSamplerKind::EllipticalSpecialist,
        SamplerName::Linear => TimeSamplerKind::LinearSpecialist,
        SamplerName::Regression => TimeSamplerKind::RegressionSpecialist,
        SamplerName::Uniform => TimeSamplerKind::Uniform,
        SamplerName::LogitNormal => TimeSamplerKind::LogitNormal { m_r: 0.0, s_r: 1.0, m_g: 0.0, s_g: 1.0 },
    }
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let (io, mut cfg): (TrainIo, TrainConfig) = match &a.config {
        Some(p) => load_split(p, &TRAIN_IO)?,
        None => Default::default(),
    };
    if let Some(s) = a.time_sampler {
        cfg.time_sampler = time_sampler(s);
    }
    cfg.n_steps = a.steps.unwrap_or(cfg.n_steps);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    cfg.learning_rate = a.lr.unwrap_or(cfg.learning_rate);
    cfg.ema_decay = a.ema_decay.unwrap_or(cfg.ema_decay);
    if !a.hidden.is_empty() {
        cfg.hidden = a.hidden;
    }
    cfg.emb_dim = a.emb_dim.unwrap_or(cfg.emb_dim);
    if a.no_adaptive {
        cfg.adaptive_weighting = false;
    }
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.validate()?;

    let Some(out) = a.out.or(io.out) else {
        return usage("train needs --out");
    };
    let n = a.n.or(io.n).unwrap_or(2000);
    let data_seed = a.data_seed.or(io.data_seed).unwrap_or(0);
    let ds = match a.data.or(io.data).as_deref().unwrap_or("scurve") {
        "scurve" => scurve_dataset(n, SCURVE_JITTER, SCURVE_STRENGTH, SCURVE_NOISE, 1.0, data_seed)?,
        "gaussian" => make_gaussian_pairs(a.rho.or(io.rho).unwrap_or(0.5), n, 2, 1.0, data_seed)?,
        path => at(Path::new(path), ToyDataset::load(Path::new(path)))?,
    };
    eprintln!(
        "training on {} pairs (dim {}, sigma_d {}, rho_hat {:.4}) for {} steps",
        ds.pairs.len(),
        ds.dim(),
        ds.sigma_d,
        ds.rho_hat,
        cfg.n_steps
    );
    let every = (cfg.n_steps / 10).max(1);
    let result = train_with(Exec::default(), &ds.pairs, ds.sigma_d, ds.rho_hat, &cfg, |step, loss| {
        if (step + 1) % every == 0 {
            eprintln!("step {:>7}  loss {loss:.5}", step + 1);
        }
    })?;
    Checkpoint::from_model(&result.model, Some(&result.ema)).save(&out)?;
    if let Some(trace) = a.trace.or(io.trace) {
        let header = vec!["step".to_string(), "loss".to_string()];
        let rows = result.loss_trace.iter().enumerate().map(|(i, &l)| vec![(i + 1) as f64, l]);
        write_rows(&trace, &header, rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportCheck<'a> {
    criterion: u32,
    #[serde(flatten)]
    check: &'a verify::CheckResult,
}

#[derive(Serialize)]
struct Report<'a> {
    pass: bool,
    checks: Vec<ReportCheck<'a>>,
}

pub fn verify(a: VerifyArgs) -> CliResult<()> {
    let criteria = verify::run(Exec::default(), a.only.as_deref())?;
    let checks: Vec<ReportCheck> = criteria
        .iter()
        .flat_map(|c| c.checks.iter().map(|k| ReportCheck { criterion: c.id, check: k }))
        .collect();
    let failed = checks.iter().filter(|c| !c.check.pass).count();
    let total = checks.len();
    let text = serde_json::to_string_pretty(&Report { pass: failed == 0, checks })? + "\n";
    for c in &criteria {
        eprintln!("{} [{:>2}] {}", if c.pass() { "PASS" } else { "FAIL" }, c.id, c.title);
    }
    print!("{text}");
    if let Some(p) = &a.report {
        std::fs::write(p, &text)?;
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total });
    }
    Ok(())
}

pub fn gen_data(a: GenDataArgs) -> CliResult<()> {
    let ds = match a.kind {
        DataKind::Scurve => scurve_dataset(a.n, a.jitter, a.strength, a.noise, a.sigma_d, a.seed)?,
        DataKind::Gaussian => make_gaussian_pairs(a.rho, a.n, a.dim, a.sigma_d, a.seed)?,
    };
    ds.save(&a.out)?;
    Ok(())
}
