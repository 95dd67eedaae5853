/// Contrastive loss `-log softmax(scores)[0]`; `scores[0]` is the positive.
///
/// Computed as `logsumexp(scores) - scores[0]` with a max shift.
pub fn loss(scores: &[f64]) -> f64 {
    assert!(scores.len() >= 2, "need a positive and at least one negative");
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    // clamp the rounding residue when the positive dominates
    (max + sum.ln() - scores[0]).max(0.0)
}

/// Gradient of [`loss`] with respect to each score.
pub fn loss_grad(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter()
        .enumerate()
        .map(|(i, e)| e / sum - if i == 0 { 1.0 } else { 0.0 })
        .collect()
}

/// MaxSim over f64 embeddings, returning per-query-entry argmax (lowest index on ties).
pub(crate) fn maxsim_with_argmax<'a>(
    query: impl Iterator<Item = &'a [f64]>,
    doc: &[&[f64]],
) -> (f64, Vec<usize>) {
    let mut total = 0.0;
    let mut argmax = Vec::new();
    for q in query {
        let mut best = f64::NEG_INFINITY;
        let mut best_j = 0;
        for (j, d) in doc.iter().enumerate() {
            let s = crate::linalg::dot(q, d);
            if s > best {
                best = s;
                best_j = j;
            }
        }
        total += best;
        argmax.push(best_j);
    }
    (total, argmax)
}
