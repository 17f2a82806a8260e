use rand::Rng;

use crate::error::{Error, Result};

/// Dense affine map, weights stored `[out][in]` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform in `±1/sqrt(in_dim)` for weights and biases.
    pub fn random(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Linear {
            in_dim,
            out_dim,
            weight: (0..in_dim * out_dim).map(|_| rng.random_range(-bound..bound)).collect(),
            bias: (0..out_dim).map(|_| rng.random_range(-bound..bound)).collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = self.bias.clone();
        for (o, row) in out.iter_mut().zip(self.weight.chunks_exact(self.in_dim)) {
            *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }

    pub(crate) fn check(&self, name: &'static str) -> Result<()> {
        if self.weight.len() != self.in_dim * self.out_dim || self.bias.len() != self.out_dim {
            return Err(Error::shape(
                name,
                format!("{}x{} weight, {} bias", self.out_dim, self.in_dim, self.out_dim),
                format!("{} weight, {} bias", self.weight.len(), self.bias.len()),
            ));
        }
        check_finite(&self.weight, name)?;
        check_finite(&self.bias, name)
    }
}

/// Square-kernel 2D convolution (cross-correlation) with stride 1 and zero
/// "same" padding. Weights are `[out][in][ky][kx]`; feature maps are stored
/// channel-last, `[row][col][channel]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Conv2d {
            in_ch,
            out_ch,
            kernel,
            weight: vec![0.0; out_ch * in_ch * kernel * kernel],
            bias: vec![0.0; out_ch],
        }
    }

    pub fn random(in_ch: usize, out_ch: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        let fan_in = in_ch * kernel * kernel;
        let bound = 1.0 / (fan_in as f64).sqrt();
        Conv2d {
            in_ch,
            out_ch,
            kernel,
            weight: (0..out_ch * fan_in).map(|_| rng.random_range(-bound..bound)).collect(),
            bias: (0..out_ch).map(|_| rng.random_range(-bound..bound)).collect(),
        }
    }

    #[inline]
    fn w(&self, o: usize, c: usize, ky: usize, kx: usize) -> f64 {
        self.weight[((o * self.in_ch + c) * self.kernel + ky) * self.kernel + kx]
    }

    pub fn forward(&self, input: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        debug_assert_eq!(input.len(), rows * cols * self.in_ch);
        let pad = (self.kernel / 2) as isize;
        let mut out = vec![0.0; rows * cols * self.out_ch];
        for r in 0..rows {
            for c in 0..cols {
                let dst = &mut out[(r * cols + c) * self.out_ch..][..self.out_ch];
                dst.copy_from_slice(&self.bias);
                for ky in 0..self.kernel {
                    let sr = r as isize + ky as isize - pad;
                    if sr < 0 || sr >= rows as isize {
                        continue;
                    }
                    for kx in 0..self.kernel {
                        let sc = c as isize + kx as isize - pad;
                        if sc < 0 || sc >= cols as isize {
                            continue;
                        }
                        let src = &input[(sr as usize * cols + sc as usize) * self.in_ch..][..self.in_ch];
                        for (o, d) in dst.iter_mut().enumerate() {
                            for (ch, &v) in src.iter().enumerate() {
                                *d += self.w(o, ch, ky, kx) * v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub(crate) fn check(&self, name: &'static str) -> Result<()> {
        let n = self.out_ch * self.in_ch * self.kernel * self.kernel;
        if self.weight.len() != n || self.bias.len() != self.out_ch {
            return Err(Error::shape(
                name,
                format!("{n} weight, {} bias", self.out_ch),
                format!("{} weight, {} bias", self.weight.len(), self.bias.len()),
            ));
        }
        check_finite(&self.weight, name)?;
        check_finite(&self.bias, name)
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(what))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
