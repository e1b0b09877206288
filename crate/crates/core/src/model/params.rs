use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Claim embedding width `d_e`.
    pub dim: usize,
    /// Maximum claims per patent `m`.
    pub max_claims: usize,
    pub n_encoders: usize,
    /// Inner width of the feed-forward block as a multiple of `dim`.
    pub ffn_mult: usize,
    pub dropout: f64,
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: crate::embed::PLM_DIM,
            max_claims: 18,
            n_encoders: 4,
            ffn_mult: 4,
            dropout: 0.1,
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.max_claims == 0 {
            return bad("max_claims must be at least 1".into());
        }
        if self.n_encoders == 0 {
            return bad("n_encoders must be at least 1".into());
        }
        if self.ffn_mult == 0 {
            return bad("ffn_mult must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }

    pub fn ffn_dim(&self) -> usize {
        self.dim * self.ffn_mult
    }
}

/// One claim encoder: single-head self-attention and a GELU feed-forward
/// block, each closed by a residual LayerNorm.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
    pub ln1_gain: Matrix,
    pub ln1_bias: Matrix,
    /// Expansion `d_e × ffn_mult·d_e`.
    pub w_r: Matrix,
    /// Contraction `ffn_mult·d_e × d_e`.
    pub w_s: Matrix,
    pub ln2_gain: Matrix,
    pub ln2_bias: Matrix,
}

pub(crate) const ENCODER_BLOCKS: [&str; 10] = [
    "w_q", "w_k", "w_v", "w_o", "ln1.gain", "ln1.bias", "w_r", "w_s", "ln2.gain", "ln2.bias",
];

impl EncoderParams {
    fn blocks(&self) -> [&Matrix; 10] {
        [
            &self.w_q,
            &self.w_k,
            &self.w_v,
            &self.w_o,
            &self.ln1_gain,
            &self.ln1_bias,
            &self.w_r,
            &self.w_s,
            &self.ln2_gain,
            &self.ln2_bias,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut Matrix; 10] {
        [
            &mut self.w_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.w_o,
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.w_r,
            &mut self.w_s,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
        ]
    }

    fn zeros(dim: usize, ffn: usize) -> Self {
        Self {
            w_q: Matrix::zeros(dim, dim),
            w_k: Matrix::zeros(dim, dim),
            w_v: Matrix::zeros(dim, dim),
            w_o: Matrix::zeros(dim, dim),
            ln1_gain: Matrix::zeros(1, dim),
            ln1_bias: Matrix::zeros(1, dim),
            w_r: Matrix::zeros(dim, ffn),
            w_s: Matrix::zeros(ffn, dim),
            ln2_gain: Matrix::zeros(1, dim),
            ln2_bias: Matrix::zeros(1, dim),
        }
    }
}

/// All trainable weights: the encoder stack, pooling `W^t` and the
/// `d_e × 2` classifier producing `[t_PBT, t_MT]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoders: Vec<EncoderParams>,
    pub w_t: Matrix,
    pub w_cls: Matrix,
}

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let limit = xavier_limit(rows, cols);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.gen_range(-limit..=limit);
    }
    m
}

pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl ModelParams {
    /// All weights zero, LayerNorm gains one.
    pub fn zeros(config: &ModelConfig) -> Self {
        let mut p = Self::zeros_like_shapes(config);
        for e in &mut p.encoders {
            e.ln1_gain.fill(1.0);
            e.ln2_gain.fill(1.0);
        }
        p
    }

    fn zeros_like_shapes(config: &ModelConfig) -> Self {
        Self {
            encoders: (0..config.n_encoders)
                .map(|_| EncoderParams::zeros(config.dim, config.ffn_dim()))
                .collect(),
            w_t: Matrix::zeros(config.dim, config.dim),
            w_cls: Matrix::zeros(config.dim, 2),
        }
    }

    /// Xavier-uniform weights, LayerNorm `γ = 1`, `β = 0`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, f) = (config.dim, config.ffn_dim());
        let encoders = (0..config.n_encoders)
            .map(|_| EncoderParams {
                w_q: xavier(d, d, &mut rng),
                w_k: xavier(d, d, &mut rng),
                w_v: xavier(d, d, &mut rng),
                w_o: xavier(d, d, &mut rng),
                ln1_gain: Matrix::filled(1, d, 1.0),
                ln1_bias: Matrix::zeros(1, d),
                w_r: xavier(d, f, &mut rng),
                w_s: xavier(f, d, &mut rng),
                ln2_gain: Matrix::filled(1, d, 1.0),
                ln2_bias: Matrix::zeros(1, d),
            })
            .collect();
        Ok(Self {
            encoders,
            w_t: xavier(d, d, &mut rng),
            w_cls: xavier(d, 2, &mut rng),
        })
    }

    /// Same shapes, every entry zero (gradient accumulator).
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.blocks_mut().into_iter().for_each(|m| m.fill(0.0));
        out
    }

    pub fn block_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.encoders.len() {
            names.extend(ENCODER_BLOCKS.iter().map(|b| format!("encoder.{i}.{b}")));
        }
        names.push("pooling.w_t".into());
        names.push("classifier.w".into());
        names
    }

    pub fn blocks(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = self.encoders.iter().flat_map(|e| e.blocks()).collect();
        out.push(&self.w_t);
        out.push(&self.w_cls);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = self
            .encoders
            .iter_mut()
            .flat_map(|e| e.blocks_mut())
            .collect();
        out.push(&mut self.w_t);
        out.push(&mut self.w_cls);
        out
    }

    /// Rebuilds from blocks in [`ModelParams::block_names`] order.
    pub fn from_blocks(config: &ModelConfig, blocks: Vec<Matrix>) -> Result<Self, ModelError> {
        let mut p = Self::zeros_like_shapes(config);
        let expected = p.blocks().len();
        if blocks.len() != expected {
            return Err(ModelError::Config(format!(
                "expected {expected} parameter blocks, got {}",
                blocks.len()
            )));
        }
        let names = p.block_names();
        for ((slot, block), name) in p.blocks_mut().into_iter().zip(blocks).zip(names) {
            if slot.shape() != block.shape() {
                return Err(ModelError::BlockShape {
                    name,
                    expected: slot.shape(),
                    found: block.shape(),
                });
            }
            *slot = block;
        }
        Ok(p)
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.add_assign(b);
        }
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for m in self.blocks_mut() {
            m.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|m| m.len()).sum()
    }

    /// Rounds every entry to the nearest `f32`, the checkpoint storage width.
    pub fn round_to_f32(&mut self) {
        for m in self.blocks_mut() {
            m.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = *v as f32 as f64);
        }
    }
}
