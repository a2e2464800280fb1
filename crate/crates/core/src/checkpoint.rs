//! Versioned JSON checkpoints for [`MlpDenoiser`].
//!
//! Keys are emitted in sorted order and floats in shortest round-trip form,
//! so write -> read -> write reproduces the same bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::denoiser::{Mlp, MlpDenoiser};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerWeights {
    pub bias: Vec<f64>,
    /// Row-major, one row per output unit.
    pub weight: Vec<Vec<f64>>,
}

// fields in alphabetical order so serialization is key-sorted
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub dims: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ema_weights: Option<Vec<LayerWeights>>,
    pub emb_dim: usize,
    pub rho: f64,
    pub sigma_d: f64,
    pub version: u32,
    pub weights: Vec<LayerWeights>,
    pub widths: Vec<usize>,
}

fn layers_of(net: &Mlp) -> Vec<LayerWeights> {
    (0..net.n_layers())
        .map(|l| {
            let (w, b) = net.layer(l);
            let n_in = net.widths()[l];
            LayerWeights { bias: b.to_vec(), weight: w.chunks(n_in).map(<[f64]>::to_vec).collect() }
        })
        .collect()
}

fn net_of(widths: &[usize], layers: &[LayerWeights]) -> Result<Mlp> {
    if layers.len() + 1 != widths.len() {
        return Err(Error::Checkpoint(format!(
            "{} layers do not match widths {widths:?}",
            layers.len()
        )));
    }
    let mut params = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        if layer.bias.len() != n_out
            || layer.weight.len() != n_out
            || layer.weight.iter().any(|row| row.len() != n_in)
        {
            return Err(Error::Checkpoint(format!("layer {l} is not {n_out}x{n_in}")));
        }
        for row in &layer.weight {
            params.extend_from_slice(row);
        }
        params.extend_from_slice(&layer.bias);
    }
    Mlp::from_params(widths, params)
}

impl Checkpoint {
    pub const VERSION: u32 = 1;

    pub fn from_model(model: &MlpDenoiser, ema: Option<&MlpDenoiser>) -> Self {
        Self {
            dims: model.dim(),
            ema_weights: ema.map(|m| layers_of(m.net())),
            emb_dim: model.emb_dim(),
            rho: model.rho(),
            sigma_d: crate::denoiser::Denoiser::sigma_d(model),
            version: Self::VERSION,
            weights: layers_of(model.net()),
            widths: model.net().widths().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string_pretty(&value)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.version != Self::VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {})",
                ck.version,
                Self::VERSION
            )));
        }
        ck.model()?;
        ck.ema_model()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn build(&self, layers: &[LayerWeights]) -> Result<MlpDenoiser> {
        let net = net_of(&self.widths, layers)?;
        MlpDenoiser::from_net(net, self.dims, self.emb_dim, self.sigma_d, self.rho)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn model(&self) -> Result<MlpDenoiser> {
        self.build(&self.weights)
    }

    pub fn ema_model(&self) -> Result<Option<MlpDenoiser>> {
        self.ema_weights.as_deref().map(|l| self.build(l)).transpose()
    }

    /// The EMA weights when present, otherwise the raw weights.
    pub fn eval_model(&self) -> Result<MlpDenoiser> {
        match self.ema_model()? {
            Some(m) => Ok(m),
            None => self.model(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::Denoiser;
    use crate::exec::rng_from_seed;
    use rand::Rng;

    fn model(seed: u64) -> MlpDenoiser {
        let mut rng = rng_from_seed(seed);
        let mut m = MlpDenoiser::new(2, 4, &[6, 5], 1.3, 0.42, &mut rng).unwrap();
        for p in m.net_mut().params_mut() {
            *p += rng.random_range(-1.0..1.0) * 1e-3 + 1.0 / 3.0;
        }
        m
    }

    #[test]
    fn byte_exact_round_trip() {
        let (m, e) = (model(1), model(2));
        let ck = Checkpoint::from_model(&m, Some(&e));
        let text = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(back.model().unwrap(), m);
        assert_eq!(back.eval_model().unwrap(), e);
        let x = [0.3, -0.7];
        assert_eq!(back.model().unwrap().predict(&x, &x, 0.1, 0.2).unwrap(), m.predict(&x, &x, 0.1, 0.2).unwrap());
    }

    #[test]
    fn keys_are_sorted() {
        let text = Checkpoint::from_model(&model(1), None).to_json().unwrap();
        let keys: Vec<usize> = ["\"dims\"", "\"emb_dim\"", "\"rho\"", "\"sigma_d\"", "\"version\"", "\"weights\"", "\"widths\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(!text.contains("ema_weights"));
        assert!(text.find("\"bias\"").unwrap() < text.find("\"weight\"").unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let mut ck = Checkpoint::from_model(&model(1), None);
        ck.version = 2;
        assert!(matches!(Checkpoint::from_json(&ck.to_json().unwrap()), Err(Error::Checkpoint(_))));
        let mut ck = Checkpoint::from_model(&model(1), None);
        ck.weights[0].bias.pop();
        assert!(matches!(Checkpoint::from_json(&ck.to_json().unwrap()), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::from_json("{\"dims\": 2}").is_err());
    }
}
