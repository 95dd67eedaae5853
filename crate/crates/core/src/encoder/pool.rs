//! Topic bucketing, per-topic attention pooling and the output projection.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, l2_norm, softmax_in_place, Matrix};
use crate::topic_model::TopicAssignmentTable;

use super::context::ContextualEmbeddings;
use super::params::EncoderParams;

/// Token positions per topic, ascending. Positions with no topics are absent.
pub(crate) fn bucket_positions(table: &TopicAssignmentTable) -> BTreeMap<u16, Vec<usize>> {
    let mut buckets: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
    for (pos, topics) in table.positions.iter().enumerate() {
        for &t in topics {
            buckets.entry(t).or_default().push(pos);
        }
    }
    buckets
}

/// Contextual vectors grouped by topic; a word with several topics lands in each bucket.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Buckets {
    pub buckets: BTreeMap<u16, Vec<Vec<f64>>>,
}

impl Buckets {
    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn sizes(&self) -> impl Iterator<Item = (u16, usize)> + '_ {
        self.buckets.iter().map(|(&t, b)| (t, b.len()))
    }
}

pub fn bucket_by_topic(c: &ContextualEmbeddings, table: &TopicAssignmentTable) -> Buckets {
    assert_eq!(c.len(), table.len(), "table and embeddings cover different positions");
    Buckets {
        buckets: bucket_positions(table)
            .into_iter()
            .map(|(t, positions)| (t, positions.into_iter().map(|p| c.get(p).to_vec()).collect()))
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PoolCache {
    pub topic: u16,
    pub positions: Vec<usize>,
    hidden: Matrix,
    weights: Vec<f64>,
    pub pooled: Vec<f64>,
}

/// `α = softmax(q_t · tanh(W u + b))`, output `Σ α u`.
pub(crate) fn pool_forward(params: &EncoderParams, c: &Matrix, topic: u16, positions: Vec<usize>) -> PoolCache {
    let d_a = params.shape.d_a;
    let q = params.topic_queries.row(topic as usize);
    let mut hidden = Matrix::zeros(positions.len(), d_a);
    let mut weights = vec![0.0; positions.len()];
    for (i, &p) in positions.iter().enumerate() {
        let g = hidden.row_mut(i);
        params.attn_w.mul_vec(c.row(p), g);
        for (gv, b) in g.iter_mut().zip(params.attn_b.data()) {
            *gv = (*gv + b).tanh();
        }
        weights[i] = dot(q, hidden.row(i));
    }
    softmax_in_place(&mut weights);
    let mut pooled = vec![0.0; c.cols()];
    for (&p, &a) in positions.iter().zip(&weights) {
        axpy(a, c.row(p), &mut pooled);
    }
    PoolCache {
        topic,
        positions,
        hidden,
        weights,
        pooled,
    }
}

pub(crate) fn pool_backward(
    params: &EncoderParams,
    c: &Matrix,
    cache: &PoolCache,
    d_pooled: &[f64],
    d_c: &mut Matrix,
    grads: &mut EncoderParams,
) {
    let q = params.topic_queries.row(cache.topic as usize);
    let d_weight: Vec<f64> = cache.positions.iter().map(|&p| dot(c.row(p), d_pooled)).collect();
    let mean: f64 = cache.weights.iter().zip(&d_weight).map(|(a, g)| a * g).sum();
    let mut dz = vec![0.0; params.shape.d_a];
    for (i, &p) in cache.positions.iter().enumerate() {
        let a = cache.weights[i];
        axpy(a, d_pooled, d_c.row_mut(p));
        let d_logit = a * (d_weight[i] - mean);
        let g = cache.hidden.row(i);
        axpy(d_logit, g, grads.topic_queries.row_mut(cache.topic as usize));
        for ((z, &qv), &gv) in dz.iter_mut().zip(q).zip(g) {
            *z = d_logit * qv * (1.0 - gv * gv);
        }
        grads.attn_w.add_outer(&dz, c.row(p));
        axpy(1.0, &dz, grads.attn_b.data_mut());
        params.attn_w.mul_t_vec_add(&dz, d_c.row_mut(p));
    }
}

/// Attention-pools one bucket of `d_c` vectors with the query of `topic`.
pub fn attention_pool(params: &EncoderParams, bucket: &[Vec<f64>], topic: u16) -> Result<Vec<f64>> {
    if bucket.is_empty() {
        return Err(Error::EmptyBucket);
    }
    if topic as usize >= params.shape.num_topics {
        return Err(Error::Shape(format!("topic {topic} ≥ K = {}", params.shape.num_topics)));
    }
    if bucket.iter().any(|u| u.len() != params.shape.d_c) {
        return Err(Error::Shape("bucket vector width differs from d_c".into()));
    }
    let c = Matrix::from_vec(bucket.len(), params.shape.d_c, bucket.concat());
    Ok(pool_forward(params, &c, topic, (0..bucket.len()).collect()).pooled)
}

/// Attention weights of a bucket, for inspection.
pub fn attention_weights(params: &EncoderParams, bucket: &[Vec<f64>], topic: u16) -> Result<Vec<f64>> {
    if bucket.is_empty() {
        return Err(Error::EmptyBucket);
    }
    let c = Matrix::from_vec(bucket.len(), params.shape.d_c, bucket.concat());
    Ok(pool_forward(params, &c, topic, (0..bucket.len()).collect()).weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub vector: Vec<f64>,
    /// The projection was the zero vector, so no direction exists.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct ProjCache {
    input: Vec<f64>,
    norm: f64,
    normalize: bool,
    pub out: Projected,
}

pub(crate) fn project_forward(params: &EncoderParams, input: Vec<f64>, normalize: bool) -> ProjCache {
    let mut p = vec![0.0; params.shape.dim];
    params.projection.mul_vec(&input, &mut p);
    let norm = l2_norm(&p);
    let degenerate = norm == 0.0;
    if normalize && !degenerate {
        p.iter_mut().for_each(|x| *x /= norm);
    }
    ProjCache {
        input,
        norm,
        normalize,
        out: Projected {
            vector: p,
            degenerate,
        },
    }
}

/// Returns the gradient with respect to the projection input.
pub(crate) fn project_backward(params: &EncoderParams, cache: &ProjCache, d_out: &[f64], grads: &mut EncoderParams) -> Vec<f64> {
    let mut d_input = vec![0.0; params.shape.d_c];
    if cache.out.degenerate {
        return d_input;
    }
    let dp: Vec<f64> = if cache.normalize {
        let o = &cache.out.vector;
        let along = dot(o, d_out);
        d_out.iter().zip(o).map(|(g, ov)| (g - ov * along) / cache.norm).collect()
    } else {
        d_out.to_vec()
    };
    grads.projection.add_outer(&dp, &cache.input);
    params.projection.mul_t_vec_add(&dp, &mut d_input);
    d_input
}

/// `P · v`, L2-normalized when `normalize` is set.
pub fn project(params: &EncoderParams, v: &[f64], normalize: bool) -> Projected {
    project_forward(params, v.to_vec(), normalize).out
}
