use crate::error::{Error, Result};

const BASE: f64 = 10_000.0;

/// Sinusoidal features of a scalar time: `sin(w_j t)` for
/// `j < emb_dim / 2` followed by the matching `cos(w_j t)`, with
/// `w_j = 10000^(-2j / emb_dim)`.
pub fn time_embed(t: f64, emb_dim: usize) -> Result<Vec<f64>> {
    if !emb_dim.is_multiple_of(2) {
        return Err(Error::Domain(format!("embedding width must be even, got {emb_dim}")));
    }
    let mut out = vec![0.0; emb_dim];
    embed_into(t, &mut out);
    Ok(out)
}

/// Writes the embedding of `t` into `out`, whose length must be even.
pub fn embed_into(t: f64, out: &mut [f64]) {
    let d = out.len();
    let half = d / 2;
    for j in 0..half {
        let w = BASE.powf(-2.0 * j as f64 / d as f64);
        let (s, c) = (w * t).sin_cos();
        out[j] = s;
        out[half + j] = c;
    }
}
