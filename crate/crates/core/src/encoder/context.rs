//! Word-level contextual encoder: token + position embeddings, one
//! single-head self-attention sublayer and one tanh feed-forward sublayer,
//! each wrapped in a residual connection.

use crate::linalg::{axpy, dot, softmax_in_place, Matrix};

use super::params::EncoderParams;

/// One `d_c` vector per token position, specials included.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEmbeddings {
    pub(crate) vectors: Matrix,
}

impl ContextualEmbeddings {
    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn get(&self, position: usize) -> &[f64] {
        self.vectors.row(position)
    }

    pub fn width(&self) -> usize {
        self.vectors.cols()
    }
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ContextCache {
    tokens: Vec<u32>,
    x: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    attn: Matrix,
    h: Matrix,
    y: Matrix,
    f: Matrix,
    pub(crate) out: ContextualEmbeddings,
}

pub(crate) fn forward(params: &EncoderParams, tokens: &[u32]) -> ContextCache {
    let n = tokens.len();
    let d = params.shape.d_c;
    assert!(n <= params.shape.max_len, "sequence longer than max_len");
    let scale = 1.0 / (d as f64).sqrt();

    let mut x = Matrix::zeros(n, d);
    for (i, &t) in tokens.iter().enumerate() {
        let row = x.row_mut(i);
        row.copy_from_slice(params.token_emb.row(t as usize));
        axpy(1.0, params.pos_emb.row(i), row);
    }
    let mut q = Matrix::zeros(n, d);
    let mut k = Matrix::zeros(n, d);
    let mut v = Matrix::zeros(n, d);
    for i in 0..n {
        params.w_query.mul_vec(x.row(i), q.row_mut(i));
        params.w_key.mul_vec(x.row(i), k.row_mut(i));
        params.w_value.mul_vec(x.row(i), v.row_mut(i));
    }
    let mut attn = Matrix::zeros(n, n);
    let mut h = Matrix::zeros(n, d);
    for i in 0..n {
        let a = attn.row_mut(i);
        for (j, aij) in a.iter_mut().enumerate() {
            *aij = scale * dot(q.row(i), k.row(j));
        }
        softmax_in_place(a);
        let hi = h.row_mut(i);
        for (j, &aij) in attn.row(i).iter().enumerate() {
            axpy(aij, v.row(j), hi);
        }
    }
    let mut y = Matrix::zeros(n, d);
    let mut f = Matrix::zeros(n, d);
    let mut c = Matrix::zeros(n, d);
    for i in 0..n {
        let yi = y.row_mut(i);
        params.w_out.mul_vec(h.row(i), yi);
        axpy(1.0, x.row(i), yi);
        let fi = f.row_mut(i);
        params.ffn_w.mul_vec(y.row(i), fi);
        for (fv, b) in fi.iter_mut().zip(params.ffn_b.data()) {
            *fv = (*fv + b).tanh();
        }
        let ci = c.row_mut(i);
        ci.copy_from_slice(y.row(i));
        axpy(1.0, f.row(i), ci);
    }

    ContextCache {
        tokens: tokens.to_vec(),
        x,
        q,
        k,
        v,
        attn,
        h,
        y,
        f,
        out: ContextualEmbeddings { vectors: c },
    }
}

/// Accumulates into `grads` the gradient given `d_out` (n × d_c) with respect to the outputs.
pub(crate) fn backward(params: &EncoderParams, cache: &ContextCache, d_out: &Matrix, grads: &mut EncoderParams) {
    let n = cache.tokens.len();
    let d = params.shape.d_c;
    let scale = 1.0 / (d as f64).sqrt();

    let mut dx = Matrix::zeros(n, d);
    let mut dh = Matrix::zeros(n, d);
    let mut pre = vec![0.0; d];
    for i in 0..n {
        let dc = d_out.row(i);
        for ((p, &g), &fv) in pre.iter_mut().zip(dc).zip(cache.f.row(i)) {
            *p = g * (1.0 - fv * fv);
        }
        grads.ffn_w.add_outer(&pre, cache.y.row(i));
        axpy(1.0, &pre, grads.ffn_b.data_mut());
        // dy = dc + ffn_wᵀ pre; the residual sends dy to both x and the attention output
        let dyi = dx.row_mut(i);
        dyi.copy_from_slice(dc);
        params.ffn_w.mul_t_vec_add(&pre, dyi);
        let dy = dx.row(i).to_vec();
        grads.w_out.add_outer(&dy, cache.h.row(i));
        params.w_out.mul_t_vec_add(&dy, dh.row_mut(i));
    }

    let mut dq = Matrix::zeros(n, d);
    let mut dk = Matrix::zeros(n, d);
    let mut dv = Matrix::zeros(n, d);
    let mut ds = vec![0.0; n];
    for i in 0..n {
        let a = cache.attn.row(i);
        let dhi = dh.row(i);
        let mut weighted = 0.0;
        for (j, dsj) in ds.iter_mut().enumerate() {
            *dsj = dot(dhi, cache.v.row(j));
            weighted += a[j] * *dsj;
        }
        for j in 0..n {
            axpy(a[j], dhi, dv.row_mut(j));
            let g = a[j] * (ds[j] - weighted) * scale;
            if g != 0.0 {
                axpy(g, cache.k.row(j), dq.row_mut(i));
                axpy(g, cache.q.row(i), dk.row_mut(j));
            }
        }
    }

    for i in 0..n {
        let xi = cache.x.row(i);
        grads.w_query.add_outer(dq.row(i), xi);
        grads.w_key.add_outer(dk.row(i), xi);
        grads.w_value.add_outer(dv.row(i), xi);
        let dxi = dx.row_mut(i);
        params.w_query.mul_t_vec_add(dq.row(i), dxi);
        params.w_key.mul_t_vec_add(dk.row(i), dxi);
        params.w_value.mul_t_vec_add(dv.row(i), dxi);
        let dxi = dx.row(i);
        axpy(1.0, dxi, grads.token_emb.row_mut(cache.tokens[i] as usize));
        axpy(1.0, dxi, grads.pos_emb.row_mut(i));
    }
}

pub fn encode_contextual(params: &EncoderParams, tokens: &[u32]) -> ContextualEmbeddings {
    forward(params, tokens).out
}
