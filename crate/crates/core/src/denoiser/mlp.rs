use rand::Rng;
use rand_distr::StandardNormal;

use super::embedding::embed_into;
use super::Denoiser;
use crate::error::{check_dim, Error, Result};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of the Gaussian error linear unit.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Fully connected network with GELU between layers and a linear output.
///
/// Parameters live in one flat vector: for each layer the row-major weight
/// matrix (`out x in`) followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Layer inputs and hidden pre-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Hidden layers get `N(0, 1 / fan_in)` weights; the output layer starts at zero.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        let n_layers = net.n_layers();
        for l in 0..n_layers - 1 {
            let fan_in = widths[l];
            let (w_off, b_off) = net.offsets(l);
            let scale = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[w_off..b_off] {
                *p = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self { widths: widths.to_vec(), params: vec![0.0; param_count(widths)] })
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(widths)?;
        check_dim(net.params.len(), params.len())?;
        Ok(Self { params, ..net })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Start of the weight block and of the bias block of layer `l`.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let start = param_count(&self.widths[..=l]);
        (start, start + self.widths[l + 1] * self.widths[l])
    }

    /// Row-major weights and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w, b) = self.offsets(l);
        (&self.params[w..b], &self.params[b..b + self.widths[l + 1]])
    }

    fn affine(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let (w, b) = self.layer(l);
        let n_in = self.widths[l];
        b.iter()
            .enumerate()
            .map(|(o, &bias)| {
                let row = &w[o * n_in..(o + 1) * n_in];
                bias + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()
            })
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        check_dim(self.widths[0], input.len())?;
        let n = self.n_layers();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n - 1);
        let mut h = input.to_vec();
        for l in 0..n - 1 {
            let a = self.affine(l, &h);
            inputs.push(std::mem::replace(&mut h, a.iter().map(|&v| gelu(v)).collect()));
            pre.push(a);
        }
        let out = self.affine(n - 1, &h);
        inputs.push(h);
        Ok((out, ForwardCache { inputs, pre }))
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(output)`.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let mut delta = d_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (w_off, b_off) = self.offsets(l);
            let n_in = self.widths[l];
            let input = &cache.inputs[l];
            for (o, &d) in delta.iter().enumerate() {
                grad[b_off + o] += d;
                if d != 0.0 {
                    let row = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                    for (g, x) in row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[w_off..b_off];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    for (p, a) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * a;
                    }
                }
            }
            for (p, &z) in prev.iter_mut().zip(&cache.pre[l - 1]) {
                *p *= gelu_grad(z);
            }
            delta = prev;
        }
    }
}

/// One supervised example for [`MlpDenoiser::backward_batch`].
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub x1: Vec<f64>,
    pub r: f64,
    pub g: f64,
    pub target: Vec<f64>,
    /// Multiplier on the squared error, `e^w` in the adaptive loss.
    pub weight: f64,
}

/// Network input `[x / sigma_d; x1 / sigma_d; emb(r); emb(g)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDenoiser {
    net: Mlp,
    dim: usize,
    emb_dim: usize,
    sigma_d: f64,
    rho: f64,
}

impl MlpDenoiser {
    pub fn new<R: Rng + ?Sized>(
        dim: usize,
        emb_dim: usize,
        hidden: &[usize],
        sigma_d: f64,
        rho: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let widths = Self::layout(dim, emb_dim, hidden);
        Self::from_net(Mlp::new(&widths, rng)?, dim, emb_dim, sigma_d, rho)
    }

    pub fn from_net(net: Mlp, dim: usize, emb_dim: usize, sigma_d: f64, rho: f64) -> Result<Self> {
        if dim == 0 || !emb_dim.is_multiple_of(2) {
            return Err(Error::Config(format!("dim {dim} and even emb_dim {emb_dim} required")));
        }
        if !(sigma_d > 0.0) {
            return Err(Error::Config(format!("sigma_d must be positive, got {sigma_d}")));
        }
        let w = net.widths();
        if w[0] != 2 * dim + 2 * emb_dim || w[w.len() - 1] != dim {
            return Err(Error::Config(format!(
                "widths {w:?} do not fit dim {dim} with emb_dim {emb_dim}"
            )));
        }
        Ok(Self { net, dim, emb_dim, sigma_d, rho })
    }

    pub fn layout(dim: usize, emb_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut w = vec![2 * dim + 2 * emb_dim];
        w.extend_from_slice(hidden);
        w.push(dim);
        w
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn emb_dim(&self) -> usize {
        self.emb_dim
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    fn input(&self, x: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, x1.len())?;
        let s = self.sigma_d;
        let mut v = Vec::with_capacity(self.net.widths[0]);
        v.extend(x.iter().map(|a| a / s));
        v.extend(x1.iter().map(|a| a / s));
        v.resize(2 * self.dim + 2 * self.emb_dim, 0.0);
        let (er, eg) = v[2 * self.dim..].split_at_mut(self.emb_dim);
        embed_into(r, er);
        embed_into(g, eg);
        Ok(v)
    }

    /// Prediction in data units together with the activations for [`Self::backward`].
    pub fn forward_cached(
        &self,
        x: &[f64],
        x1: &[f64],
        r: f64,
        g: f64,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        let (out, cache) = self.net.forward_cached(&self.input(x, x1, r, g)?)?;
        Ok((out.into_iter().map(|v| v * self.sigma_d).collect(), cache))
    }

    /// Accumulates parameter gradients given `d(loss)/d(x0_hat)`.
    pub fn backward(&self, cache: &ForwardCache, d_x0hat: &[f64], grad: &mut [f64]) {
        let d_out: Vec<f64> = d_x0hat.iter().map(|v| v * self.sigma_d).collect();
        self.net.backward(cache, &d_out, grad);
    }

    /// Loss `mean_i weight_i |x0_hat_i - target_i|^2` and its gradient.
    pub fn backward_batch(&self, batch: &[Example]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InsufficientData { need: 1, got: 0 });
        }
        let b = batch.len() as f64;
        let mut grad = vec![0.0; self.net.n_params()];
        let mut loss = 0.0;
        for ex in batch {
            check_dim(self.dim, ex.target.len())?;
            let (pred, cache) = self.forward_cached(&ex.x, &ex.x1, ex.r, ex.g)?;
            let diff: Vec<f64> = pred.iter().zip(&ex.target).map(|(p, t)| p - t).collect();
            loss += ex.weight * diff.iter().map(|d| d * d).sum::<f64>() / b;
            let d: Vec<f64> = diff.iter().map(|d| 2.0 * ex.weight * d / b).collect();
            self.backward(&cache, &d, &mut grad);
        }
        Ok((loss, grad))
    }
}

impl Denoiser for MlpDenoiser {
    fn sigma_d(&self) -> f64 {
        self.sigma_d
    }

    fn normalized(&self, x: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>> {
        // the input layer divides by sigma_d itself
        let s = self.sigma_d;
        let raw_x: Vec<f64> = x.iter().map(|v| v * s).collect();
        let raw_x1: Vec<f64> = x1.iter().map(|v| v * s).collect();
        self.net.forward(&self.input(&raw_x, &raw_x1, r, g)?)
    }

    fn predict(&self, x: &[f64], x1: &[f64], r: f64, g: f64) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x, x1, r, g)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::rng_from_seed;

    fn random_net(seed: u64, widths: &[usize]) -> Mlp {
        let mut rng = rng_from_seed(seed);
        let mut net = Mlp::new(widths, &mut rng).unwrap();
        // give the zero-initialized output layer some mass too
        for p in net.params_mut() {
            *p += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        net
    }

    #[test]
    fn gelu_reference_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_191_990_607_477_2).abs() < 1e-12);
        assert!((gelu(-1.0) + 0.158_808_009_392_522_8).abs() < 1e-12);
        for x in [-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn fresh_denoiser_outputs_zero() {
        let mut rng = rng_from_seed(1);
        let d = MlpDenoiser::new(2, 8, &[16, 16], 1.0, 0.3, &mut rng).unwrap();
        assert_eq!(d.predict(&[1.0, -2.0], &[0.5, 0.5], 0.1, 0.9).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(d.predict(&[1.0], &[0.5], 0.1, 0.9), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn layout_and_offsets() {
        let net = Mlp::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(net.n_params(), 3 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(net.layer(1).0.len(), 8);
        assert_eq!(net.layer(1).1.len(), 2);
        assert!(Mlp::zeros(&[3]).is_err());
        assert!(Mlp::from_params(&[3, 2], vec![0.0; 7]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let widths = [5, 7, 6, 3];
        for seed in 0..10 {
            let net = random_net(seed, &widths);
            let mut rng = rng_from_seed(100 + seed);
            let input: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
            let coef: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let f = |n: &Mlp| -> f64 {
                n.forward(&input).unwrap().iter().zip(&coef).map(|(o, c)| o * c).sum()
            };
            let (_, cache) = net.forward_cached(&input).unwrap();
            let mut grad = vec![0.0; net.n_params()];
            net.backward(&cache, &coef, &mut grad);
            let h = 1e-5;
            for i in 0..net.n_params() {
                let mut p = net.clone();
                p.params_mut()[i] += h;
                let mut m = net.clone();
                m.params_mut()[i] -= h;
                let fd = (f(&p) - f(&m)) / (2.0 * h);
                let err = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
                assert!(err < 1e-4, "seed {seed} param {i}: {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn batch_gradient_scales_with_weight() {
        let mut rng = rng_from_seed(4);
        let mut d = MlpDenoiser::new(2, 4, &[8], 1.5, 0.2, &mut rng).unwrap();
        for p in d.net_mut().params_mut() {
            *p += 0.2 * rng.sample::<f64, _>(StandardNormal);
        }
        let ex = Example { x: vec![0.3, -0.1], x1: vec![1.0, 0.2], r: 0.1, g: 0.4, target: vec![0.5, 0.5], weight: 1.0 };
        let (l1, g1) = d.backward_batch(std::slice::from_ref(&ex)).unwrap();
        let (l2, g2) = d.backward_batch(&[Example { weight: 2.0, ..ex.clone() }]).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-14);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
        // zero error: zero gradient
        let pred = d.predict(&ex.x, &ex.x1, ex.r, ex.g).unwrap();
        let (l0, g0) = d.backward_batch(&[Example { target: pred, ..ex }]).unwrap();
        assert_eq!(l0, 0.0);
        assert!(g0.iter().all(|v| *v == 0.0));
        assert!(d.backward_batch(&[]).is_err());
    }

    #[test]
    fn sigma_scaling_equivariance() {
        let net = random_net(9, &MlpDenoiser::layout(2, 4, &[8, 8]));
        let d1 = MlpDenoiser::from_net(net.clone(), 2, 4, 1.0, 0.0).unwrap();
        let d2 = MlpDenoiser::from_net(net, 2, 4, 2.0, 0.0).unwrap();
        let x = [0.37, -1.2];
        let x1 = [0.8, 0.05];
        let a = d1.predict(&x, &x1, 0.2, 0.7).unwrap();
        let b = d2.predict(&[2.0 * x[0], 2.0 * x[1]], &[2.0 * x1[0], 2.0 * x1[1]], 0.2, 0.7).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((2.0 * u - v).abs() < 1e-10);
        }
        // trait default path agrees with the direct path
        let n = d2.normalized(&x, &x1, 0.2, 0.7).unwrap();
        for (u, v) in a.iter().zip(&n) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
