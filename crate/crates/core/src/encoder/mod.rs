//! Heightmap encoder forward pass.
//!
//! The heightmap goes through a two-layer CNN that keeps the 17x11 grid, each
//! cell's features are concatenated with its 3D coordinates and foot map
//! channels into a 64-wide token, and a single query projected from the
//! proprioception attends over the 187 tokens to produce the 64-dim code.

mod layers;
mod params_io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use layers::{softmax, Conv2d, Linear};
pub use params_io::{PARAMS_MAGIC, PARAMS_VERSION};

use crate::error::{Error, Result};
use crate::observation::{ObservationFrame, GRID_CELLS, GRID_H, GRID_W, LATENT_DIM, PROPRIO_DIM};
use crate::NUM_LEGS;

pub const MODEL_DIM: usize = LATENT_DIM;
pub const COORD_DIM: usize = 3;
/// CNN output channels: the token width minus coordinates and foot channels.
pub const FEATURE_DIM: usize = MODEL_DIM - COORD_DIM - NUM_LEGS;
pub const HIDDEN_CHANNELS: usize = 16;
pub const KERNEL_SIZE: usize = 5;
pub const DEFAULT_HEADS: usize = 4;

const FEATURES: std::ops::Range<usize> = COORD_DIM..COORD_DIM + FEATURE_DIM;
const FOOT_SLOTS: std::ops::Range<usize> = COORD_DIM + FEATURE_DIM..MODEL_DIM;

/// All encoder weights. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub heads: usize,
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub proprio: Linear,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl EncoderParams {
    /// Seeded uniform initialization.
    pub fn init(seed: u64, heads: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = EncoderParams {
            heads,
            conv1: Conv2d::random(1, HIDDEN_CHANNELS, KERNEL_SIZE, &mut rng),
            conv2: Conv2d::random(HIDDEN_CHANNELS, FEATURE_DIM, KERNEL_SIZE, &mut rng),
            proprio: Linear::random(PROPRIO_DIM, MODEL_DIM, &mut rng),
            query: Linear::random(MODEL_DIM, MODEL_DIM, &mut rng),
            key: Linear::random(MODEL_DIM, MODEL_DIM, &mut rng),
            value: Linear::random(MODEL_DIM, MODEL_DIM, &mut rng),
            output: Linear::random(MODEL_DIM, MODEL_DIM, &mut rng),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn zeros(heads: usize) -> Self {
        EncoderParams {
            heads,
            conv1: Conv2d::zeros(1, HIDDEN_CHANNELS, KERNEL_SIZE),
            conv2: Conv2d::zeros(HIDDEN_CHANNELS, FEATURE_DIM, KERNEL_SIZE),
            proprio: Linear::zeros(PROPRIO_DIM, MODEL_DIM),
            query: Linear::zeros(MODEL_DIM, MODEL_DIM),
            key: Linear::zeros(MODEL_DIM, MODEL_DIM),
            value: Linear::zeros(MODEL_DIM, MODEL_DIM),
            output: Linear::zeros(MODEL_DIM, MODEL_DIM),
        }
    }

    pub fn head_dim(&self) -> usize {
        MODEL_DIM / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || MODEL_DIM % self.heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "head count {} does not divide the model width {MODEL_DIM}",
                self.heads
            )));
        }
        let dims = |c: &Conv2d, i, o| c.in_ch == i && c.out_ch == o && c.kernel == KERNEL_SIZE;
        if !dims(&self.conv1, 1, HIDDEN_CHANNELS) || !dims(&self.conv2, HIDDEN_CHANNELS, FEATURE_DIM) {
            return Err(Error::shape(
                "cnn layers",
                format!("1->{HIDDEN_CHANNELS}->{FEATURE_DIM} channels, kernel {KERNEL_SIZE}"),
                format!(
                    "{}->{}->{} channels, kernels {}/{}",
                    self.conv1.in_ch, self.conv1.out_ch, self.conv2.out_ch, self.conv1.kernel, self.conv2.kernel
                ),
            ));
        }
        self.conv1.check("conv1")?;
        self.conv2.check("conv2")?;
        let lin = [
            (&self.proprio, PROPRIO_DIM, "proprio"),
            (&self.query, MODEL_DIM, "query"),
            (&self.key, MODEL_DIM, "key"),
            (&self.value, MODEL_DIM, "value"),
            (&self.output, MODEL_DIM, "output"),
        ];
        for (l, in_dim, name) in lin {
            if l.in_dim != in_dim || l.out_dim != MODEL_DIM {
                return Err(Error::shape(name, format!("{in_dim}->{MODEL_DIM}"), format!("{}->{}", l.in_dim, l.out_dim)));
            }
            l.check(name)?;
        }
        Ok(())
    }
}

/// Two convolutions with ReLU between; returns `17 x 11 x 57` channel-last.
pub fn cnn_features(heightmap: &[f64], params: &EncoderParams) -> Result<Vec<f64>> {
    if heightmap.len() != GRID_CELLS {
        return Err(Error::shape("heightmap", format!("{GRID_H}x{GRID_W}"), heightmap.len()));
    }
    layers::check_finite(heightmap, "heightmap")?;
    let mut hidden = params.conv1.forward(heightmap, GRID_H, GRID_W);
    for h in &mut hidden {
        *h = h.max(0.0);
    }
    Ok(params.conv2.forward(&hidden, GRID_H, GRID_W))
}

/// 187 tokens of width 64: `[x, y, z, cnn features (57), foot channels (4)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenGrid {
    pub data: Vec<f64>,
}

impl TokenGrid {
    pub fn len(&self) -> usize {
        self.data.len() / MODEL_DIM
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.data[i * MODEL_DIM..(i + 1) * MODEL_DIM]
    }

    pub fn tokens(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(MODEL_DIM)
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.token(i)[..COORD_DIM]
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.token(i)[FEATURES]
    }

    pub fn foot_slots(&self, i: usize) -> &[f64] {
        &self.token(i)[FOOT_SLOTS]
    }

    /// Reorders tokens: the new token `i` is the old token `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> TokenGrid {
        TokenGrid {
            data: order.iter().flat_map(|&i| self.token(i).iter().copied()).collect(),
        }
    }
}

pub fn concat_tokens(coords: &[[f64; 3]], features: &[f64], footmap: &[f64]) -> Result<TokenGrid> {
    let n = coords.len();
    if n != GRID_CELLS {
        return Err(Error::shape("coords_3d", GRID_CELLS, n));
    }
    if features.len() != n * FEATURE_DIM {
        return Err(Error::shape("cnn features", n * FEATURE_DIM, features.len()));
    }
    if footmap.len() != n * NUM_LEGS {
        return Err(Error::shape("footmap", n * NUM_LEGS, footmap.len()));
    }
    let mut data = Vec::with_capacity(n * MODEL_DIM);
    for i in 0..n {
        data.extend_from_slice(&coords[i]);
        data.extend_from_slice(&features[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]);
        data.extend_from_slice(&footmap[i * NUM_LEGS..(i + 1) * NUM_LEGS]);
    }
    Ok(TokenGrid { data })
}

pub fn proprio_embed(o_prop: &[f64], params: &EncoderParams) -> Result<Vec<f64>> {
    if o_prop.len() != PROPRIO_DIM {
        return Err(Error::shape("proprioception", PROPRIO_DIM, o_prop.len()));
    }
    layers::check_finite(o_prop, "proprioception")?;
    Ok(params.proprio.forward(o_prop))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attention {
    /// The exteroception code.
    pub z: Vec<f64>,
    /// Per-head softmax weights over the tokens.
    pub weights: Vec<Vec<f64>>,
    /// Concatenated head outputs before the output projection.
    pub heads_concat: Vec<f64>,
}

/// Single-query multi-head attention over the tokens.
pub fn mha_encode(tokens: &TokenGrid, query: &[f64], params: &EncoderParams) -> Result<Attention> {
    if query.len() != MODEL_DIM {
        return Err(Error::shape("attention query", MODEL_DIM, query.len()));
    }
    if tokens.data.len() % MODEL_DIM != 0 || tokens.is_empty() {
        return Err(Error::shape("tokens", format!("n x {MODEL_DIM}"), tokens.data.len()));
    }
    layers::check_finite(query, "attention query")?;
    layers::check_finite(&tokens.data, "tokens")?;

    let q = params.query.forward(query);
    let keys: Vec<Vec<f64>> = tokens.tokens().map(|t| params.key.forward(t)).collect();
    let values: Vec<Vec<f64>> = tokens.tokens().map(|t| params.value.forward(t)).collect();

    let hd = params.head_dim();
    let scale = 1.0 / (hd as f64).sqrt();
    let mut weights = Vec::with_capacity(params.heads);
    let mut heads_concat = vec![0.0; MODEL_DIM];
    for h in 0..params.heads {
        let slot = h * hd..(h + 1) * hd;
        let qh = &q[slot.clone()];
        let logits: Vec<f64> = keys
            .iter()
            .map(|k| qh.iter().zip(&k[slot.clone()]).map(|(a, b)| a * b).sum::<f64>() * scale)
            .collect();
        let w = softmax(&logits);
        let out = &mut heads_concat[slot.clone()];
        for (wi, v) in w.iter().zip(&values) {
            for (o, vv) in out.iter_mut().zip(&v[slot.clone()]) {
                *o += wi * vv;
            }
        }
        weights.push(w);
    }
    let z = params.output.forward(&heads_concat);
    layers::check_finite(&z, "attention output")?;
    Ok(Attention { z, weights, heads_concat })
}

/// Every intermediate of one encoder pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderOutput {
    pub features: Vec<f64>,
    pub tokens: TokenGrid,
    pub query: Vec<f64>,
    pub attention: Attention,
}

impl EncoderOutput {
    pub fn z(&self) -> &[f64] {
        &self.attention.z
    }
}

pub fn encode(frame: &ObservationFrame, params: &EncoderParams) -> Result<EncoderOutput> {
    frame.validate()?;
    let features = cnn_features(&frame.heightmap.values, params)?;
    let tokens = concat_tokens(&frame.coords_3d, &features, &frame.footmap.values)?;
    let query = proprio_embed(frame.proprio.as_slice(), params)?;
    let attention = mha_encode(&tokens, &query, params)?;
    Ok(EncoderOutput {
        features,
        tokens,
        query,
        attention,
    })
}

/// Full policy input `[o_prop, z]`.
pub fn full_observation(frame: &ObservationFrame, params: &EncoderParams) -> Result<Vec<f64>> {
    let out = encode(frame, params)?;
    let mut obs = frame.proprio.0.clone();
    obs.extend_from_slice(out.z());
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::{assemble_proprio, build_footmap, grid_cell_xy, HeightmapGrid, RobotState, OBSERVATION_DIM};

    fn frame(feet: [[f64; 2]; 4]) -> ObservationFrame {
        let cell_xy = grid_cell_xy();
        let values = cell_xy.iter().map(|p| -0.3 + 0.05 * (3.0 * p[0]).sin() * p[1]).collect();
        let heightmap = HeightmapGrid { values, cell_xy };
        let footmap = build_footmap(&feet, &heightmap.cell_xy);
        let proprio = assemble_proprio(&RobotState::default(), &[0.5, 0.0, 0.1], &[0.1; 12]);
        ObservationFrame::from_parts(heightmap, footmap, proprio)
    }

    const FEET: [[f64; 2]; 4] = [[0.2, -0.15], [0.2, 0.15], [-0.2, -0.15], [-0.2, 0.15]];

    #[test]
    fn zero_input_zero_features() {
        let params = EncoderParams::init(1, 4).unwrap();
        let mut zero_bias = params.clone();
        zero_bias.conv1.bias.fill(0.0);
        zero_bias.conv2.bias.fill(0.0);
        let f = cnn_features(&[0.0; GRID_CELLS], &zero_bias).unwrap();
        assert_eq!(f.len(), GRID_CELLS * FEATURE_DIM);
        assert!(f.iter().all(|&v| v == 0.0));
        assert!(matches!(cnn_features(&[0.0; 10], &params), Err(Error::Shape { .. })));
    }

    #[test]
    fn token_layout() {
        let f = frame(FEET);
        let features = vec![0.0; GRID_CELLS * FEATURE_DIM];
        let t = concat_tokens(&f.coords_3d, &features, &f.footmap.values).unwrap();
        assert_eq!(t.len(), GRID_CELLS);
        assert_eq!(t.data.len(), GRID_CELLS * MODEL_DIM);
        for i in 0..GRID_CELLS {
            assert_eq!(t.coords(i), &f.coords_3d[i]);
            assert!(t.features(i).iter().all(|&v| v == 0.0));
            assert_eq!(t.foot_slots(i), &f.footmap.values[i * 4..i * 4 + 4]);
        }
        assert!(concat_tokens(&f.coords_3d[..10], &features, &f.footmap.values).is_err());
    }

    #[test]
    fn proprio_embedding() {
        let params = EncoderParams::init(2, 4).unwrap();
        let mut zb = params.clone();
        zb.proprio.bias.fill(0.0);
        assert!(proprio_embed(&[0.0; 48], &zb).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(proprio_embed(&[0.3; 48], &params).unwrap().len(), MODEL_DIM);
        assert!(proprio_embed(&[0.0; 47], &params).is_err());
    }

    #[test]
    fn attention_weights_normalized() {
        let params = EncoderParams::init(3, 4).unwrap();
        let out = encode(&frame(FEET), &params).unwrap();
        assert_eq!(out.attention.weights.len(), 4);
        for w in &out.attention.weights {
            assert_eq!(w.len(), GRID_CELLS);
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert_eq!(out.z().len(), 64);
        assert_eq!(full_observation(&frame(FEET), &params).unwrap().len(), OBSERVATION_DIM);
    }

    #[test]
    fn identical_tokens_return_value_projection() {
        let params = EncoderParams::init(4, 4).unwrap();
        let tok: Vec<f64> = (0..MODEL_DIM).map(|i| (i as f64 * 0.37).cos()).collect();
        let tokens = TokenGrid { data: tok.repeat(GRID_CELLS) };
        let expected = params.output.forward(&params.value.forward(&tok));
        for q in [[0.0; 64], [3.0; 64]] {
            let z = mha_encode(&tokens, &q, &params).unwrap().z;
            for (a, b) in z.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_rejected() {
        let params = EncoderParams::init(5, 4).unwrap();
        let mut f = frame(FEET);
        f.proprio.0[0] = f64::NAN;
        assert!(matches!(encode(&f, &params), Err(Error::Numeric(_))));
        let tokens = TokenGrid { data: vec![0.0; GRID_CELLS * MODEL_DIM] };
        assert!(matches!(mha_encode(&tokens, &[f64::INFINITY; 64], &params), Err(Error::Numeric(_))));
    }

    #[test]
    fn head_count_must_divide_width() {
        assert!(EncoderParams::init(0, 3).is_err());
        assert!(EncoderParams::init(0, 8).is_ok());
    }

    #[test]
    fn deterministic() {
        let params = EncoderParams::init(6, 4).unwrap();
        let f = frame(FEET);
        assert_eq!(encode(&f, &params).unwrap(), encode(&f, &params).unwrap());
    }

    #[test]
    fn foot_on_cell_raises_its_slot() {
        let params = EncoderParams::init(7, 4).unwrap();
        let target = 3 * GRID_W + 2;
        let cell = grid_cell_xy()[target];
        let before = encode(&frame(FEET), &params).unwrap();
        let mut moved = FEET;
        moved[1] = cell;
        let after = encode(&frame(moved), &params).unwrap();
        assert!(after.tokens.foot_slots(target)[1] > before.tokens.foot_slots(target)[1]);
        assert_eq!(after.tokens.foot_slots(target)[1], 10.0);
        assert_ne!(after.z(), before.z());
    }
}
