use std::path::Path;

use rand::Rng;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed;

/// Sizes that fix every tensor shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderShape {
    pub vocab_size: usize,
    /// Contextual embedding width.
    pub d_c: usize,
    /// Attention hidden width.
    pub d_a: usize,
    /// Output embedding width after projection.
    pub dim: usize,
    pub num_topics: usize,
    pub max_len: usize,
}

impl EncoderShape {
    pub fn validate(&self) -> Result<()> {
        if [self.vocab_size, self.d_c, self.d_a, self.dim, self.num_topics, self.max_len]
            .contains(&0)
        {
            return Err(Error::Config(format!("encoder sizes must be positive: {self:?}")));
        }
        if self.dim > u16::MAX as usize {
            return Err(Error::Config("dim must fit in 16 bits".into()));
        }
        Ok(())
    }
}

/// Every trainable tensor. Gradients use the same structure.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub shape: EncoderShape,
    pub token_emb: Matrix,
    pub pos_emb: Matrix,
    pub w_query: Matrix,
    pub w_key: Matrix,
    pub w_value: Matrix,
    pub w_out: Matrix,
    pub ffn_w: Matrix,
    pub ffn_b: Matrix,
    /// Shared attention-pooling projection `W` (d_a × d_c) and bias `b`.
    pub attn_w: Matrix,
    pub attn_b: Matrix,
    /// One pooling query vector per topic (K × d_a).
    pub topic_queries: Matrix,
    /// Final linear map, dim × d_c, no bias.
    pub projection: Matrix,
}

pub const TENSOR_NAMES: [&str; 12] = [
    "token_emb",
    "pos_emb",
    "w_query",
    "w_key",
    "w_value",
    "w_out",
    "ffn_w",
    "ffn_b",
    "attn_w",
    "attn_b",
    "topic_queries",
    "projection",
];

const MAGIC: &[u8; 4] = b"TGEN";
const VERSION: u32 = 1;

impl EncoderParams {
    pub fn zeros(shape: EncoderShape) -> Self {
        let EncoderShape {
            vocab_size,
            d_c,
            d_a,
            dim,
            num_topics,
            max_len,
        } = shape;
        EncoderParams {
            shape,
            token_emb: Matrix::zeros(vocab_size, d_c),
            pos_emb: Matrix::zeros(max_len, d_c),
            w_query: Matrix::zeros(d_c, d_c),
            w_key: Matrix::zeros(d_c, d_c),
            w_value: Matrix::zeros(d_c, d_c),
            w_out: Matrix::zeros(d_c, d_c),
            ffn_w: Matrix::zeros(d_c, d_c),
            ffn_b: Matrix::zeros(1, d_c),
            attn_w: Matrix::zeros(d_a, d_c),
            attn_b: Matrix::zeros(1, d_a),
            topic_queries: Matrix::zeros(num_topics, d_a),
            projection: Matrix::zeros(dim, d_c),
        }
    }

    /// Seeded initialization: roughly unit-norm token embeddings, small
    /// position embeddings and topic queries, Xavier-uniform weight matrices
    /// (scaled down on the two residual branches), a random semi-orthogonal
    /// projection and zero biases. Values are rounded to f32.
    pub fn init(shape: EncoderShape, seed: u64) -> Self {
        Self::init_scaled(shape, seed, 1.0)
    }

    /// Like [`EncoderParams::init`] with every range multiplied by `scale`.
    pub fn init_scaled(shape: EncoderShape, seed: u64, scale: f64) -> Self {
        let mut p = Self::zeros(shape);
        let mut rng = seed::rng(seed::derive(seed, 0x454e_434f_4445_52));
        let mut uniform = |m: &mut Matrix, bound: f64| {
            for x in m.data_mut() {
                *x = rng.gen_range(-bound..bound) * scale;
            }
        };
        let xavier = |m: &Matrix| (6.0 / (m.rows() + m.cols()) as f64).sqrt();
        uniform(&mut p.token_emb, (3.0 / shape.d_c as f64).sqrt());
        uniform(&mut p.pos_emb, 0.02);
        for m in [&mut p.w_query, &mut p.w_key, &mut p.w_value] {
            let b = xavier(m);
            uniform(m, b);
        }
        // residual branches start small so the encoder begins close to the identity
        for m in [&mut p.w_out, &mut p.ffn_w] {
            let b = 0.1 * xavier(m);
            uniform(m, b);
        }
        let b = xavier(&p.attn_w);
        uniform(&mut p.attn_w, b);
        uniform(&mut p.topic_queries, 0.05);
        // semi-orthogonal projection keeps the geometry of the pooled vectors
        uniform(&mut p.projection, 1.0);
        p.projection.orthonormalize();
        p.projection.data_mut().iter_mut().for_each(|x| *x *= scale);
        p.round_to_f32();
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape)
    }

    pub fn tensors(&self) -> [(&'static str, &Matrix); 12] {
        [
            (TENSOR_NAMES[0], &self.token_emb),
            (TENSOR_NAMES[1], &self.pos_emb),
            (TENSOR_NAMES[2], &self.w_query),
            (TENSOR_NAMES[3], &self.w_key),
            (TENSOR_NAMES[4], &self.w_value),
            (TENSOR_NAMES[5], &self.w_out),
            (TENSOR_NAMES[6], &self.ffn_w),
            (TENSOR_NAMES[7], &self.ffn_b),
            (TENSOR_NAMES[8], &self.attn_w),
            (TENSOR_NAMES[9], &self.attn_b),
            (TENSOR_NAMES[10], &self.topic_queries),
            (TENSOR_NAMES[11], &self.projection),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Matrix); 12] {
        [
            (TENSOR_NAMES[0], &mut self.token_emb),
            (TENSOR_NAMES[1], &mut self.pos_emb),
            (TENSOR_NAMES[2], &mut self.w_query),
            (TENSOR_NAMES[3], &mut self.w_key),
            (TENSOR_NAMES[4], &mut self.w_value),
            (TENSOR_NAMES[5], &mut self.w_out),
            (TENSOR_NAMES[6], &mut self.ffn_w),
            (TENSOR_NAMES[7], &mut self.ffn_b),
            (TENSOR_NAMES[8], &mut self.attn_w),
            (TENSOR_NAMES[9], &mut self.attn_b),
            (TENSOR_NAMES[10], &mut self.topic_queries),
            (TENSOR_NAMES[11], &mut self.projection),
        ]
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.data().len()).sum()
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, scale: f64, other: &EncoderParams) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::linalg::axpy(scale, src.data(), dst.data_mut());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, m) in self.tensors_mut() {
            m.data_mut().iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors()
            .into_iter()
            .find(|(_, m)| m.data().iter().any(|x| !x.is_finite()))
            .map(|(name, _)| name)
    }

    /// Snap every value to the nearest f32 so the in-memory model equals what
    /// the 32-bit parameter file reloads.
    pub fn round_to_f32(&mut self) {
        for (_, m) in self.tensors_mut() {
            m.data_mut().iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
    }

    pub(crate) fn write_block(&self, w: &mut Writer) {
        let s = &self.shape;
        w.bytes(MAGIC);
        w.u32(VERSION);
        for n in [s.d_c, s.d_a, s.dim, s.num_topics, s.vocab_size, s.max_len] {
            w.u32(n as u32);
        }
        for (_, m) in self.tensors() {
            m.data().iter().for_each(|&x| w.f32(x as f32));
        }
    }

    pub(crate) fn read_block(r: &mut Reader<'_>) -> Result<Self> {
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported TGEN version {version}")));
        }
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = r.u32()? as usize;
        }
        let [d_c, d_a, dim, num_topics, vocab_size, max_len] = dims;
        let shape = EncoderShape {
            vocab_size,
            d_c,
            d_a,
            dim,
            num_topics,
            max_len,
        };
        shape.validate().map_err(|e| Error::Format(e.to_string()))?;
        let mut p = Self::zeros(shape);
        for (_, m) in p.tensors_mut() {
            let values = r.f32_vec(m.data().len())?;
            for (dst, v) in m.data_mut().iter_mut().zip(values) {
                *dst = v as f64;
            }
        }
        if let Some(name) = p.first_non_finite() {
            return Err(Error::Numerical(name.to_string()));
        }
        Ok(p)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_block(&mut w);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let p = Self::read_block(&mut r)?;
        r.finish()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> EncoderShape {
        EncoderShape {
            vocab_size: 11,
            d_c: 4,
            d_a: 3,
            dim: 2,
            num_topics: 3,
            max_len: 7,
        }
    }

    #[test]
    fn init_is_seeded_and_finite() {
        let a = EncoderParams::init(shape(), 1);
        assert_eq!(a, EncoderParams::init(shape(), 1));
        assert_ne!(a, EncoderParams::init(shape(), 2));
        assert!(a.first_non_finite().is_none());
        assert!(a.attn_b.data().iter().all(|&x| x == 0.0));
        let bound = (3.0 / a.shape.d_c as f64).sqrt();
        assert!(a.token_emb.data().iter().all(|x| x.abs() <= bound));
        assert!(a.pos_emb.data().iter().all(|x| x.abs() <= 0.02));
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let p = EncoderParams::init(shape(), 9);
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..4], b"TGEN");
        let back = EncoderParams::from_bytes(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_bytes(), bytes);
        assert!(EncoderParams::from_bytes(&bytes[..bytes.len() - 2]).is_err());
    }
}
