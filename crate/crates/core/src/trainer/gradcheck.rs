//! Central finite-difference audit of the analytic gradients on a tiny,
//! randomly generated problem.

use rand::Rng;

use crate::corpus::{TextKind, TokenSeq, CLS, D_MARK, NUM_SPECIALS, Q_MARK};
use crate::encoder::{EncoderParams, EncoderShape, Granularity, PreparedText, TENSOR_NAMES};
use crate::error::Result;
use crate::seed;
use crate::topic_model::TopicAssignmentTable;

use super::{batch_gradient, batch_loss, Example};

pub const STEP: f64 = 1e-4;
/// Denominator floor for the relative error, so coordinates whose true
/// gradient is (numerically) zero are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// Random parameters, texts and topic tables: V = 20, d_c = d_a = dim = 4, K = 3.
pub struct TinyProblem {
    pub params: EncoderParams,
    pub queries: Vec<PreparedText>,
    pub docs: Vec<PreparedText>,
    /// Per example: query index, then document indices (positive first).
    pub layout: Vec<(usize, Vec<usize>)>,
    pub granularity: Granularity,
}

impl TinyProblem {
    pub fn examples(&self) -> Vec<Example<'_>> {
        self.layout
            .iter()
            .map(|(q, ds)| Example {
                query: &self.queries[*q],
                docs: ds.iter().map(|&d| &self.docs[d]).collect(),
            })
            .collect()
    }
}

fn random_text(rng: &mut impl Rng, id: String, kind: TextKind, len: usize, topics: usize) -> PreparedText {
    let marker = if kind == TextKind::Query { Q_MARK } else { D_MARK };
    let mut tokens = vec![CLS, marker];
    tokens.extend((0..len).map(|_| rng.gen_range(NUM_SPECIALS..20)));
    let mut table = TopicAssignmentTable::empty(tokens.len());
    for pos in 2..tokens.len() {
        table.positions[pos] = (0..topics as u16).filter(|_| rng.gen_bool(0.35)).collect();
    }
    PreparedText {
        seq: TokenSeq {
            text_id: id,
            tokens,
            kind,
        },
        topics: None,
        table: Some(table),
    }
}

pub fn tiny_problem(seed: u64, granularity: Granularity) -> TinyProblem {
    let shape = EncoderShape {
        vocab_size: 20,
        d_c: 4,
        d_a: 4,
        dim: 4,
        num_topics: 3,
        max_len: 12,
    };
    let mut rng = seed::rng(seed::derive(seed, 0x4752_4144));
    let mut params = EncoderParams::zeros(shape);
    for (_, m) in params.tensors_mut() {
        for x in m.data_mut() {
            *x = rng.gen_range(-0.5..0.5);
        }
    }
    let queries: Vec<PreparedText> = (0..3)
        .map(|i| {
            let len = rng.gen_range(2..=5);
            random_text(&mut rng, format!("q{i}"), TextKind::Query, len, 3)
        })
        .collect();
    let mut docs: Vec<PreparedText> = (0..6)
        .map(|i| {
            let len = rng.gen_range(3..=10);
            random_text(&mut rng, format!("d{i}"), TextKind::Document, len, 3)
        })
        .collect();
    // one document with no topic words exercises the global fallback
    if let Some(table) = docs[5].table.as_mut() {
        table.positions.iter_mut().for_each(Vec::clear);
    }
    let layout = (0..3)
        .map(|q| (q, vec![q, 3 + q, (q + 1) % 3, 5]))
        .collect();
    TinyProblem {
        params,
        queries,
        docs,
        layout,
        granularity,
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: &'static str,
    pub worst_index: usize,
    pub coordinates: usize,
    /// Max relative error per tensor, in [`TENSOR_NAMES`] order.
    pub per_tensor: Vec<(&'static str, f64)>,
}

/// Compares analytic gradients against central differences on every coordinate.
pub fn grad_check(seed: u64, granularity: Granularity) -> Result<GradCheckReport> {
    let problem = tiny_problem(seed, granularity);
    let examples = problem.examples();
    let (_, analytic) = batch_gradient(&problem.params, &examples, granularity, true)?;

    let mut params = problem.params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: TENSOR_NAMES[0],
        worst_index: 0,
        coordinates: 0,
        per_tensor: Vec::new(),
    };
    for (t, (name, grad)) in analytic.tensors().into_iter().enumerate() {
        let mut tensor_max = 0.0f64;
        for (i, &a) in grad.data().iter().enumerate() {
            let original = params.tensors()[t].1.data()[i];
            params.tensors_mut()[t].1.data_mut()[i] = original + STEP;
            let plus = batch_loss(&params, &examples, granularity, true);
            params.tensors_mut()[t].1.data_mut()[i] = original - STEP;
            let minus = batch_loss(&params, &examples, granularity, true);
            params.tensors_mut()[t].1.data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            tensor_max = tensor_max.max(rel);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = name;
                report.worst_index = i;
            }
            report.coordinates += 1;
        }
        report.per_tensor.push((name, tensor_max));
    }
    Ok(report)
}
