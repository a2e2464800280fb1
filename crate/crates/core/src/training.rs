//! Time samplers, the adaptive-weighted loss and the training loop.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::denoiser::{embed_into, ForwardCache, Mlp, MlpDenoiser};
use crate::error::{Error, Result};
use crate::exec::{rng_from_seed, Exec};
use crate::process::{interpolate_parts, sample_noise, PairSample};
use crate::schedule::GvpSchedule;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeSamplerKind {
    /// Random elliptical path, random point on it.
    #[default]
    EllipticalSpecialist,
    /// Random linear path, random point on it.
    LinearSpecialist,
    /// `g = 0`, uniform `r`.
    RegressionSpecialist,
    /// Uniform over the whole rectangle.
    Uniform,
    /// Logistic-squashed normals mapped onto the rectangle.
    LogitNormal { m_r: f64, s_r: f64, m_g: f64, s_g: f64 },
}

/// One `(r, g)` draw; specialists also report the path they picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeDraw {
    pub r: f64,
    pub g: f64,
    /// Peak noise level of the sampled path (specialists only).
    pub delta: Option<f64>,
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

pub fn sample_time<R: Rng + ?Sized>(kind: &TimeSamplerKind, phi: f64, rng: &mut R) -> (f64, f64) {
    let d = sample_time_draw(kind, phi, rng);
    (d.r, d.g)
}

pub fn sample_time_draw<R: Rng + ?Sized>(kind: &TimeSamplerKind, phi: f64, rng: &mut R) -> TimeDraw {
    match *kind {
        TimeSamplerKind::EllipticalSpecialist => {
            let delta = rng.random_range(0.0..FRAC_PI_2);
            let t: f64 = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            TimeDraw { r: phi * t.sin(), g: delta * t.cos(), delta: Some(delta) }
        }
        TimeSamplerKind::LinearSpecialist => {
            let delta = rng.random_range(0.0..FRAC_PI_2);
            let t: f64 = rng.random();
            TimeDraw { r: 2.0 * phi * t - phi, g: delta * t, delta: Some(delta) }
        }
        TimeSamplerKind::RegressionSpecialist => {
            TimeDraw { r: rng.random_range(-phi..=phi), g: 0.0, delta: Some(0.0) }
        }
        TimeSamplerKind::Uniform => TimeDraw {
            r: rng.random_range(-phi..=phi),
            g: rng.random_range(0.0..=FRAC_PI_2),
            delta: None,
        },
        TimeSamplerKind::LogitNormal { m_r, s_r, m_g, s_g } => {
            let ur = logistic(m_r + s_r * rng.sample::<f64, _>(StandardNormal));
            let ug = logistic(m_g + s_g * rng.sample::<f64, _>(StandardNormal));
            TimeDraw { r: (-phi + 2.0 * phi * ur).clamp(-phi, phi), g: (FRAC_PI_2 * ug).min(FRAC_PI_2), delta: None }
        }
    }
}

/// `e^w |x0_hat - x0|^2 - w`.
pub fn weighted_loss(x0hat: &[f64], x0: &[f64], w: f64) -> f64 {
    let l: f64 = x0hat.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum();
    w.exp() * l - w
}

/// The learned log-weight `w(r, g)`: sinusoidal features of both times,
/// one GELU layer, scalar output starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveWeight {
    net: Mlp,
    emb_dim: usize,
}

impl AdaptiveWeight {
    pub const EMB_DIM: usize = 16;
    pub const HIDDEN: usize = 32;

    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        let e = Self::EMB_DIM;
        Ok(Self { net: Mlp::new(&[2 * e, Self::HIDDEN, 1], rng)?, emb_dim: e })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    fn input(&self, r: f64, g: f64) -> Vec<f64> {
        let mut v = vec![0.0; 2 * self.emb_dim];
        let (a, b) = v.split_at_mut(self.emb_dim);
        embed_into(r, a);
        embed_into(g, b);
        v
    }

    pub fn weight(&self, r: f64, g: f64) -> f64 {
        self.forward_cached(r, g).0
    }

    pub fn forward_cached(&self, r: f64, g: f64) -> (f64, ForwardCache) {
        let (out, cache) = self.net.forward_cached(&self.input(r, g)).expect("fixed input width");
        (out[0], cache)
    }

    pub fn backward(&self, cache: &ForwardCache, d_w: f64, grad: &mut [f64]) {
        self.net.backward(cache, &[d_w], grad);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub time_sampler: TimeSamplerKind,
    pub batch_size: usize,
    pub n_steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub ema_decay: f64,
    pub adaptive_weighting: bool,
    pub hidden: Vec<usize>,
    pub emb_dim: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            time_sampler: TimeSamplerKind::default(),
            batch_size: 16,
            n_steps: 2000,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 1e-2,
            ema_decay: 0.9999,
            adaptive_weighting: true,
            hidden: vec![128, 128],
            emb_dim: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return bad(format!("ema_decay must lie in [0, 1), got {}", self.ema_decay));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("adam betas must lie in [0, 1), got ({}, {})", self.beta1, self.beta2));
        }
        if !(self.adam_eps > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("adam_eps must be positive and weight_decay non-negative".into());
        }
        if !self.emb_dim.is_multiple_of(2) || self.hidden.contains(&0) {
            return bad(format!("emb_dim must be even and hidden widths positive ({}, {:?})", self.emb_dim, self.hidden));
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(n_params: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            params[i] *= 1.0 - self.lr * self.weight_decay;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// `ema <- d ema + (1 - d) params`.
pub fn ema_update(ema: &mut [f64], params: &[f64], decay: f64) {
    for (e, p) in ema.iter_mut().zip(params) {
        *e = decay * *e + (1.0 - decay) * p;
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: MlpDenoiser,
    /// Bias-corrected exponential moving average of the model weights, used
    /// for evaluation.
    pub ema: MlpDenoiser,
    pub weight_net: AdaptiveWeight,
    /// Mean batch loss per step.
    pub loss_trace: Vec<f64>,
}

/// One training example: a clean/degraded pair, its noisy state and the
/// time it was drawn at.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub x: Vec<f64>,
    pub r: f64,
    pub g: f64,
}

/// Mean batch objective and its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGrad {
    pub loss: f64,
    pub denoiser: Vec<f64>,
    /// Empty when no weight net is given.
    pub weight_net: Vec<f64>,
    /// First non-finite per-example loss as `(r, g, loss)`.
    pub non_finite: Option<(f64, f64, f64)>,
}

struct ChunkGrad {
    den: Vec<f64>,
    wnet: Vec<f64>,
    loss: f64,
    bad: Option<(f64, f64, f64)>,
}

const GRAD_CHUNK: usize = 4;

/// Mean over the batch of `e^w |x0_hat - x0|^2 - w`, with `w = 0` when no
/// weight net is given.
pub fn batch_objective(model: &MlpDenoiser, wnet: Option<&AdaptiveWeight>, batch: &[TrainSample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for s in batch {
        let pred = model.forward_cached(&s.x, &s.x1, s.r, s.g)?.0;
        let w = wnet.map_or(0.0, |n| n.weight(s.r, s.g));
        total += weighted_loss(&pred, &s.x0, w);
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of [`batch_objective`]. Per-example gradients are summed in
/// fixed chunks of four and the chunks reduced in order, so the result does
/// not depend on `exec`.
pub fn batch_grad(
    exec: Exec,
    model: &MlpDenoiser,
    wnet: Option<&AdaptiveWeight>,
    batch: &[TrainSample],
) -> Result<BatchGrad> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::EmptyDataset);
    }
    let n_w = wnet.map_or(0, |n| n.net().n_params());
    let chunks = exec.try_map(b.div_ceil(GRAD_CHUNK), |c| -> Result<ChunkGrad> {
        let mut out = ChunkGrad { den: vec![0.0; model.net().n_params()], wnet: vec![0.0; n_w], loss: 0.0, bad: None };
        let bf = b as f64;
        for s in &batch[c * GRAD_CHUNK..((c + 1) * GRAD_CHUNK).min(b)] {
            let (pred, cache) = model.forward_cached(&s.x, &s.x1, s.r, s.g)?;
            let sq: f64 = pred.iter().zip(&s.x0).map(|(p, t)| (p - t).powi(2)).sum();
            let (w, wcache) = match wnet {
                Some(n) => {
                    let (w, c) = n.forward_cached(s.r, s.g);
                    (w, Some(c))
                }
                None => (0.0, None),
            };
            let ew = w.exp();
            let loss = ew * sq - w;
            if !loss.is_finite() && out.bad.is_none() {
                out.bad = Some((s.r, s.g, loss));
            }
            out.loss += loss;
            let d: Vec<f64> = pred.iter().zip(&s.x0).map(|(p, t)| 2.0 * ew * (p - t) / bf).collect();
            model.backward(&cache, &d, &mut out.den);
            if let (Some(n), Some(wc)) = (wnet, wcache) {
                n.backward(&wc, (ew * sq - 1.0) / bf, &mut out.wnet);
            }
        }
        Ok(out)
    })?;

    let mut acc = BatchGrad {
        loss: 0.0,
        denoiser: vec![0.0; model.net().n_params()],
        weight_net: vec![0.0; n_w],
        non_finite: None,
    };
    for ch in chunks {
        acc.non_finite = acc.non_finite.or(ch.bad);
        acc.loss += ch.loss;
        for (a, v) in acc.denoiser.iter_mut().zip(&ch.den) {
            *a += v;
        }
        for (a, v) in acc.weight_net.iter_mut().zip(&ch.wnet) {
            *a += v;
        }
    }
    acc.loss /= b as f64;
    Ok(acc)
}

/// Trains a denoiser on `pairs` (assumed standardized to `sigma_d` with
/// correlation `rho`).
pub fn train(pairs: &[PairSample], sigma_d: f64, rho: f64, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with(Exec::default(), pairs, sigma_d, rho, cfg, |_, _| {})
}

/// [`train`] under an explicit execution policy, with a per-step callback
/// receiving the step index and the mean batch loss.
///
/// All random draws come from one stream in a fixed order and per-example
/// gradients are summed in fixed chunks, so the result is bitwise identical
/// for every `exec`.
pub fn train_with<F: FnMut(usize, f64)>(
    exec: Exec,
    pairs: &[PairSample],
    sigma_d: f64,
    rho: f64,
    cfg: &TrainConfig,
    mut on_step: F,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let first = pairs.first().ok_or(Error::EmptyDataset)?;
    let dim = first.dim();
    let sched = GvpSchedule::new(rho, sigma_d)?;
    let mut rng = rng_from_seed(cfg.seed);

    let mut model = MlpDenoiser::new(dim, cfg.emb_dim, &cfg.hidden, sigma_d, rho, &mut rng)?;
    let mut wnet = AdaptiveWeight::new(&mut rng)?;
    let mut ema = vec![0.0; model.net().n_params()];
    let mut ema_mass = 0.0;
    let mut opt_den = AdamW::new(model.net().n_params(), cfg);
    let mut opt_w = AdamW::new(wnet.net().n_params(), cfg);
    let mut trace = Vec::with_capacity(cfg.n_steps);
    let b = cfg.batch_size;

    for step in 0..cfg.n_steps {
        let mut batch = Vec::with_capacity(b);
        for _ in 0..b {
            let pair = &pairs[rng.random_range(0..pairs.len())];
            let (r, g) = sample_time(&cfg.time_sampler, sched.phi(), &mut rng);
            let z = sample_noise(&mut rng, dim, sigma_d);
            let x = interpolate_parts(&sched, &pair.x0, &pair.x1, &z, r, g)?;
            batch.push(TrainSample { x0: pair.x0.clone(), x1: pair.x1.clone(), x, r, g });
        }

        let bg = batch_grad(exec, &model, cfg.adaptive_weighting.then_some(&wnet), &batch)?;
        if let Some((r, g, l)) = bg.non_finite {
            return Err(Error::NonFiniteLoss { step, r, g, loss: l });
        }
        let (loss, g_den, g_w) = (bg.loss, bg.denoiser, bg.weight_net);

        opt_den.step(model.net_mut().params_mut(), &g_den);
        if cfg.adaptive_weighting {
            opt_w.step(wnet.net_mut().params_mut(), &g_w);
        }
        ema_update(&mut ema, model.net().params(), cfg.ema_decay);
        ema_mass = cfg.ema_decay * ema_mass + (1.0 - cfg.ema_decay);
        trace.push(loss);
        on_step(step, loss);
    }

    // the average starts from zero; dividing by its total weight removes
    // that bias, so no trace of the initial weights remains
    if ema_mass > 0.0 {
        ema.iter_mut().for_each(|e| *e /= ema_mass);
    } else {
        ema.copy_from_slice(model.net().params());
    }
    let ema_net = Mlp::from_params(model.net().widths(), ema)?;
    let ema_model = MlpDenoiser::from_net(ema_net, dim, cfg.emb_dim, sigma_d, rho)?;
    Ok(TrainOutput { model, ema: ema_model, weight_net: wnet, loss_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::Denoiser;

    fn pairs(n: usize, rho: f64, seed: u64) -> Vec<PairSample> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let u = sample_noise(&mut rng, 2, 1.0);
                let v = sample_noise(&mut rng, 2, 1.0);
                let x1 = u.iter().zip(&v).map(|(a, b)| rho * a + (1.0 - rho * rho).sqrt() * b).collect();
                PairSample::new(u, x1).unwrap()
            })
            .collect()
    }

    #[test]
    fn specialist_draws_lie_on_their_paths() {
        let phi = 0.6;
        let mut rng = rng_from_seed(3);
        for _ in 0..100_000 {
            let d = sample_time_draw(&TimeSamplerKind::EllipticalSpecialist, phi, &mut rng);
            let delta = d.delta.unwrap();
            if delta > 0.0 {
                let e = (d.r / phi).powi(2) + (d.g / delta).powi(2);
                assert!((e - 1.0).abs() < 1e-12);
            }
            assert!(d.r.abs() <= phi && d.g <= FRAC_PI_2 && d.g >= 0.0);
            let d = sample_time_draw(&TimeSamplerKind::LinearSpecialist, phi, &mut rng);
            let delta = d.delta.unwrap();
            if delta > 0.0 {
                assert!((d.r / -phi + d.g / (delta / 2.0) - 1.0).abs() < 1e-12);
            }
            let d = sample_time_draw(&TimeSamplerKind::RegressionSpecialist, phi, &mut rng);
            assert_eq!(d.g, 0.0);
        }
    }

    #[test]
    fn uniform_deciles() {
        let phi = 0.5;
        let n = 100_000;
        let mut rng = rng_from_seed(4);
        let (mut cr, mut cg) = ([0usize; 10], [0usize; 10]);
        for _ in 0..n {
            let (r, g) = sample_time(&TimeSamplerKind::Uniform, phi, &mut rng);
            cr[(((r + phi) / (2.0 * phi)) * 10.0).min(9.0) as usize] += 1;
            cg[((g / FRAC_PI_2) * 10.0).min(9.0) as usize] += 1;
        }
        for c in cr.iter().chain(&cg) {
            assert!((*c as f64 - n as f64 / 10.0).abs() < 0.05 * n as f64 / 10.0);
        }
    }

    #[test]
    fn logit_normal_stays_in_range() {
        let phi = 0.4;
        let kind = TimeSamplerKind::LogitNormal { m_r: 0.0, s_r: 3.0, m_g: 1.0, s_g: 5.0 };
        let mut rng = rng_from_seed(5);
        for _ in 0..100_000 {
            let (r, g) = sample_time(&kind, phi, &mut rng);
            assert!(r.abs() <= phi && (0.0..=FRAC_PI_2).contains(&g));
        }
    }

    #[test]
    fn weighted_loss_examples() {
        let (a, b) = ([1.0, 2.0], [0.0, 0.0]);
        assert_eq!(weighted_loss(&a, &b, 0.0), 5.0);
        assert_eq!(weighted_loss(&a, &a, 0.7), -0.7);
        // grid scan: the minimizer over w is -ln L
        let l: f64 = 5.0;
        let best = (0..=40_000)
            .map(|i| -5.0 + i as f64 * 2.5e-4)
            .min_by(|x, y| weighted_loss(&a, &b, *x).total_cmp(&weighted_loss(&a, &b, *y)))
            .unwrap();
        assert!((best + l.ln()).abs() < 5e-4);
    }

    #[test]
    fn weight_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(6);
        for _ in 0..10 {
            let mut wn = AdaptiveWeight::new(&mut rng).unwrap();
            for p in wn.net_mut().params_mut() {
                *p += 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
            let (r, g) = (rng.random_range(-0.5..0.5), rng.random_range(0.0..FRAC_PI_2));
            let sq: f64 = rng.random_range(0.1..3.0);
            let f = |n: &AdaptiveWeight| {
                let w = n.weight(r, g);
                w.exp() * sq - w
            };
            let (w, cache) = wn.forward_cached(r, g);
            let mut grad = vec![0.0; wn.net().n_params()];
            wn.backward(&cache, w.exp() * sq - 1.0, &mut grad);
            let h = 1e-5;
            for i in 0..grad.len() {
                let mut p = wn.clone();
                p.net_mut().params_mut()[i] += h;
                let mut m = wn.clone();
                m.net_mut().params_mut()[i] -= h;
                let fd = (f(&p) - f(&m)) / (2.0 * h);
                let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
                assert!(err < 1e-4, "{i}: {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn adamw_first_step_moves_by_lr() {
        let cfg = TrainConfig { weight_decay: 0.0, ..TrainConfig::default() };
        let mut opt = AdamW::new(2, &cfg);
        let mut p = [1.0, -1.0];
        opt.step(&mut p, &[0.5, -2.0]);
        assert!((p[0] - (1.0 - 1e-4)).abs() < 1e-10);
        assert!((p[1] - (-1.0 + 1e-4)).abs() < 1e-10);
    }

    #[test]
    fn deterministic_and_exec_independent() {
        let data = pairs(200, 0.5, 1);
        let cfg = TrainConfig { n_steps: 30, hidden: vec![16, 16], emb_dim: 8, seed: 9, ..TrainConfig::default() };
        let a = train_with(Exec::Sequential, &data, 1.0, 0.5, &cfg, |_, _| {}).unwrap();
        let b = train_with(Exec::Sequential, &data, 1.0, 0.5, &cfg, |_, _| {}).unwrap();
        let c = train_with(Exec::Parallel, &data, 1.0, 0.5, &cfg, |_, _| {}).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.loss_trace), bits(&b.loss_trace));
        assert_eq!(bits(&a.loss_trace), bits(&c.loss_trace));
        assert_eq!(a.model, c.model);
    }

    #[test]
    fn zero_decay_ema_tracks_weights() {
        let data = pairs(50, 0.3, 2);
        let cfg = TrainConfig { n_steps: 5, hidden: vec![8], emb_dim: 4, ema_decay: 0.0, ..TrainConfig::default() };
        let out = train(&data, 1.0, 0.3, &cfg).unwrap();
        assert_eq!(out.ema, out.model);
        let x = [0.2, 0.1];
        assert_eq!(out.ema.predict(&x, &x, 0.0, 0.3).unwrap(), out.model.predict(&x, &x, 0.0, 0.3).unwrap());
    }

    #[test]
    fn ema_after_one_step_is_the_weights() {
        let data = pairs(50, 0.5, 1);
        let cfg = TrainConfig { n_steps: 1, hidden: vec![8], emb_dim: 4, ..TrainConfig::default() };
        let out = train(&data, 1.0, 0.5, &cfg).unwrap();
        for (e, p) in out.ema.net().params().iter().zip(out.model.net().params()) {
            assert!((e - p).abs() <= 1e-12 * p.abs().max(1e-3), "{e} vs {p}");
        }
    }

    #[test]
    fn config_errors() {
        let data = pairs(10, 0.3, 2);
        for cfg in [
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { ema_decay: 1.0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
        ] {
            assert!(matches!(train(&data, 1.0, 0.3, &cfg), Err(Error::Config(_))));
        }
        assert!(matches!(train(&[], 1.0, 0.3, &TrainConfig::default()), Err(Error::EmptyDataset)));
        let parsed: TrainConfig = serde_json::from_str(r#"{"n_steps": 5, "time_sampler": {"kind": "uniform"}}"#).unwrap();
        assert_eq!(parsed.n_steps, 5);
        assert_eq!(parsed.batch_size, 16);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"steps": 5}"#).is_err());
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut data = pairs(10, 0.3, 2);
        data[0].x0[0] = f64::NAN;
        let data = vec![data[0].clone()];
        let cfg = TrainConfig { n_steps: 3, hidden: vec![8], emb_dim: 4, ..TrainConfig::default() };
        assert!(matches!(train(&data, 1.0, 0.3, &cfg), Err(Error::NonFiniteLoss { step: 0, .. })));
    }
}
