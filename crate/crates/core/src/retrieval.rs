//! MaxSim scoring, exhaustive search, TREC runs and evaluation metrics.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::corpus::Judgments;
use crate::encoder::Representation;
use crate::error::{Error, Result};
use crate::index::RepresentationIndex;

/// Dot product of two f32 vectors accumulated in f64, left to right.
pub fn dot_f32(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        s += *x as f64 * *y as f64;
    }
    s
}

fn maxsim_rows<'a, 'b>(
    query: impl Iterator<Item = &'a [f32]>,
    doc: &'b [f32],
    dim: usize,
) -> f64 {
    let mut total = 0.0;
    for q in query {
        let mut best = f64::NEG_INFINITY;
        for d in doc.chunks_exact(dim) {
            let s = dot_f32(q, d);
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

/// Sum over query entries of the best dot product against any document entry.
pub fn maxsim(query: &Representation, doc: &Representation) -> Result<f64> {
    if query.is_empty() || doc.is_empty() {
        return Err(Error::Shape("maxsim needs non-empty representations".into()));
    }
    let dim = query.entries[0].vector.len();
    if query.vectors().chain(doc.vectors()).any(|v| v.len() != dim) {
        return Err(Error::Shape("maxsim dimension mismatch".into()));
    }
    let flat: Vec<f32> = doc.vectors().flatten().copied().collect();
    Ok(maxsim_rows(query.vectors(), &flat, dim))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub hits: Vec<(String, f64)>,
}

fn rank_order(a: &(String, f64), b: &(String, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Sorts hits by descending score, then ascending doc id, and keeps `k`.
pub fn rank(query_id: &str, mut hits: Vec<(String, f64)>, k: usize) -> Result<RankedList> {
    if k < 1 {
        return Err(Error::InvalidK(k));
    }
    hits.sort_by(rank_order);
    hits.truncate(k);
    Ok(RankedList {
        query_id: query_id.to_string(),
        hits,
    })
}

/// Exhaustive MaxSim over every indexed document.
pub fn search(index: &RepresentationIndex, query: &Representation, k: usize) -> Result<RankedList> {
    if k < 1 {
        return Err(Error::InvalidK(k));
    }
    let dim = index.dim();
    if query.is_empty() || query.vectors().any(|v| v.len() != dim) {
        return Err(Error::Shape(format!("query `{}` is not {dim}-dimensional", query.text_id)));
    }
    let hits = index
        .records
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| (r.doc_id.clone(), maxsim_rows(query.vectors(), &r.vectors, dim)))
        .collect();
    rank(&query.text_id, hits, k)
}

/// Searches queries in parallel; output order follows the input order.
pub fn search_all(index: &RepresentationIndex, queries: &[Representation], k: usize) -> Result<Vec<RankedList>> {
    queries.par_iter().map(|q| search(index, q, k)).collect()
}

/// `qid Q0 docid rank score tag` lines.
pub fn write_run(runs: &[RankedList], tag: &str) -> String {
    let mut out = String::new();
    for run in runs {
        for (i, (doc, score)) in run.hits.iter().enumerate() {
            writeln!(out, "{} Q0 {} {} {:.6} {}", run.query_id, doc, i + 1, score, tag).unwrap();
        }
    }
    out
}

/// Parses a run file; hits are re-sorted by score then doc id, rank column is ignored.
pub fn parse_run(source: &str, content: &str) -> Result<Vec<RankedList>> {
    let mut by_query: IndexMap<String, Vec<(String, f64)>> = IndexMap::new();
    for (n, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: source.to_string(),
            line: n + 1,
            message,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", f.len())));
        }
        f[3].parse::<u64>().map_err(|_| bad(format!("bad rank `{}`", f[3])))?;
        let score: f64 = f[4].parse().map_err(|_| bad(format!("bad score `{}`", f[4])))?;
        if !score.is_finite() {
            return Err(bad("non-finite score".into()));
        }
        let hits = by_query.entry(f[0].to_string()).or_default();
        if hits.iter().any(|(d, _)| d == f[2]) {
            return Err(bad(format!("document `{}` ranked twice for `{}`", f[2], f[0])));
        }
        hits.push((f[2].to_string(), score));
    }
    by_query
        .into_iter()
        .map(|(q, hits)| {
            let k = hits.len();
            rank(&q, hits, k)
        })
        .collect()
}

pub fn read_run(path: &Path) -> Result<Vec<RankedList>> {
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run(&path.display().to_string(), &content)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    pub reciprocal_rank: f64,
    pub recall: f64,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub mrr_k: usize,
    pub recall_k: usize,
    pub mrr_at_k: f64,
    pub recall_at_k: f64,
    pub map: f64,
    pub per_query: Vec<QueryMetrics>,
}

impl Metrics {
    /// `metric\tvalue` lines.
    pub fn to_tsv(&self) -> String {
        format!(
            "mrr_at_{}\t{:.6}\nrecall_at_{}\t{:.6}\nmap\t{:.6}\nqueries\t{}\n",
            self.mrr_k,
            self.mrr_at_k,
            self.recall_k,
            self.recall_at_k,
            self.map,
            self.per_query.len()
        )
    }
}

fn query_metrics(run: &RankedList, relevant: &HashSet<&str>, mrr_k: usize, recall_k: usize) -> QueryMetrics {
    let mut rr = 0.0;
    let mut found_at_k = 0usize;
    let mut found = 0usize;
    let mut precision_sum = 0.0;
    for (i, (doc, _)) in run.hits.iter().enumerate() {
        if !relevant.contains(doc.as_str()) {
            continue;
        }
        let rank = i + 1;
        if rr == 0.0 && rank <= mrr_k {
            rr = 1.0 / rank as f64;
        }
        if rank <= recall_k {
            found_at_k += 1;
        }
        found += 1;
        precision_sum += found as f64 / rank as f64;
    }
    let n_rel = relevant.len();
    QueryMetrics {
        query_id: run.query_id.clone(),
        reciprocal_rank: rr,
        recall: if n_rel == 0 { 0.0 } else { found_at_k as f64 / n_rel as f64 },
        average_precision: if n_rel == 0 { 0.0 } else { precision_sum / n_rel as f64 },
    }
}

/// MRR@`mrr_k`, Recall@`recall_k` and MAP over the judged queries of a run.
pub fn evaluate(runs: &[RankedList], judgments: &Judgments, mrr_k: usize, recall_k: usize) -> Result<Metrics> {
    if mrr_k < 1 {
        return Err(Error::InvalidK(mrr_k));
    }
    if recall_k < 1 {
        return Err(Error::InvalidK(recall_k));
    }
    if runs.is_empty() {
        return Err(Error::EmptyRun);
    }
    let mut per_query = Vec::with_capacity(runs.len());
    for run in runs {
        if !judgments.contains_query(&run.query_id) {
            log::warn!("query `{}` has no judgments; skipped", run.query_id);
            continue;
        }
        per_query.push(query_metrics(run, &judgments.relevant(&run.query_id), mrr_k, recall_k));
    }
    if per_query.is_empty() {
        return Err(Error::EmptyRun);
    }
    let n = per_query.len() as f64;
    let mean = |f: fn(&QueryMetrics) -> f64| per_query.iter().map(f).sum::<f64>() / n;
    Ok(Metrics {
        mrr_k,
        recall_k,
        mrr_at_k: mean(|q| q.reciprocal_rank),
        recall_at_k: mean(|q| q.recall),
        map: mean(|q| q.average_precision),
        per_query,
    })
}

/// MRR per GiB of index space.
pub fn tradeoff(mrr: f64, space_gib: f64) -> Result<f64> {
    if !(space_gib > 0.0) || !space_gib.is_finite() {
        return Err(Error::InvalidSpace(space_gib));
    }
    Ok(mrr / space_gib)
}

/// Kendall's tau-a between two score lists over the same items.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let x = (a[i] - a[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            let y = (b[i] - b[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            s += x * y;
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Fingerprint;
    use crate::encoder::{Embedding, Granularity};
    use crate::index::QuantScheme;
    use proptest::prelude::*;

    fn rep(id: &str, rows: &[&[f32]]) -> Representation {
        Representation {
            text_id: id.into(),
            granularity: Granularity::Word,
            dim: rows[0].len(),
            entries: rows
                .iter()
                .map(|r| Embedding {
                    topic: None,
                    vector: r.to_vec(),
                    degenerate: false,
                })
                .collect(),
        }
    }

    #[test]
    fn hand_examples() {
        assert_eq!(maxsim(&rep("q", &[&[1.0, 0.0]]), &rep("d", &[&[1.0, 0.0]])).unwrap(), 1.0);
        assert_eq!(maxsim(&rep("q", &[&[1.0, 0.0], &[0.0, 1.0]]), &rep("d", &[&[0.0, 1.0]])).unwrap(), 1.0);
        assert!(matches!(
            maxsim(&rep("q", &[&[1.0, 0.0]]), &rep("d", &[&[1.0, 0.0, 0.0]])),
            Err(Error::Shape(_))
        ));
    }

    fn arb_rows(n: std::ops::Range<usize>, dim: usize, lo: f32) -> impl Strategy<Value = Vec<Vec<f32>>> {
        prop::collection::vec(prop::collection::vec(lo..1.0f32, dim), n)
    }

    fn from_rows(id: &str, rows: &[Vec<f32>]) -> Representation {
        let refs: Vec<&[f32]> = rows.iter().map(|r| r.as_slice()).collect();
        rep(id, &refs)
    }

    proptest! {
        #[test]
        fn maxsim_is_permutation_invariant(q in arb_rows(1..6, 4, -1.0), d in arb_rows(1..6, 4, -1.0), rot in 0usize..6) {
            let base = maxsim(&from_rows("q", &q), &from_rows("d", &d)).unwrap();
            let mut d2 = d.clone();
            let r = rot % d2.len();
            d2.rotate_left(r);
            let mut q2 = q.clone();
            q2.reverse();
            let permuted = maxsim(&from_rows("q", &q2), &from_rows("d", &d2)).unwrap();
            // document order never changes a max; query order only reassociates the sum
            prop_assert!((base - permuted).abs() <= 1e-12);
            prop_assert_eq!(base, maxsim(&from_rows("q", &q), &from_rows("d", &d2)).unwrap());
        }

        #[test]
        fn maxsim_monotone_in_query_entries(q in arb_rows(1..6, 4, 0.0), extra in arb_rows(1..2, 4, 0.0), d in arb_rows(1..6, 4, 0.0)) {
            let before = maxsim(&from_rows("q", &q), &from_rows("d", &d)).unwrap();
            let mut q2 = q.clone();
            q2.extend(extra);
            prop_assert!(maxsim(&from_rows("q", &q2), &from_rows("d", &d)).unwrap() >= before);
        }
    }

    #[test]
    fn ranking_ties_break_by_doc_id() {
        let r = rank("q", vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)], 10).unwrap();
        let ids: Vec<_> = r.hits.iter().map(|h| h.0.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert!(matches!(rank("q", vec![], 0), Err(Error::InvalidK(0))));
    }

    #[test]
    fn search_matches_brute_force_and_finds_self() {
        let mut rng = crate::seed::rng(17);
        use rand::Rng;
        let mut reps: Vec<Representation> = (0..50)
            .map(|i| {
                let n = rng.gen_range(1..6);
                let rows: Vec<Vec<f32>> = (0..n)
                    .map(|_| {
                        let v: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
                        v.iter().map(|x| x / norm).collect()
                    })
                    .collect();
                from_rows(&format!("d{i:02}"), &rows)
            })
            .collect();
        for r in &mut reps {
            r.dim = 8;
        }
        let idx = RepresentationIndex::from_representations(&reps, 8, QuantScheme::F32, Granularity::Word, Fingerprint::default()).unwrap();
        let query = Representation {
            text_id: "q".into(),
            ..reps[13].clone()
        };
        let got = search(&idx, &query, 50).unwrap();
        let mut oracle: Vec<(String, f64)> = Vec::new();
        for d in &reps {
            let mut total = 0.0;
            for qv in query.vectors() {
                let mut best = f64::NEG_INFINITY;
                for dv in d.vectors() {
                    let mut s = 0.0;
                    for k in 0..8 {
                        s += qv[k] as f64 * dv[k] as f64;
                    }
                    best = best.max(s);
                }
                total += best;
            }
            oracle.push((d.text_id.clone(), total));
        }
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        assert_eq!(got.hits, oracle);
        assert_eq!(got.hits[0].0, "d13");
        assert_eq!(search(&idx, &query, 3).unwrap().hits.len(), 3);
        assert!(matches!(search(&idx, &query, 0), Err(Error::InvalidK(0))));
    }

    #[test]
    fn metric_definitions() {
        let mut j = Judgments::new();
        j.insert("q1", "a", 1).unwrap();
        j.insert("q1", "c", 1).unwrap();
        j.insert("q2", "z", 1).unwrap();
        let run = |q: &str, docs: &[&str]| RankedList {
            query_id: q.into(),
            hits: docs.iter().enumerate().map(|(i, d)| (d.to_string(), -(i as f64))).collect(),
        };
        let m = evaluate(&[run("q1", &["a", "b", "c"])], &j, 10, 1000).unwrap();
        assert!((m.map - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(m.mrr_at_k, 1.0);
        let m = evaluate(&[run("q2", &["x", "y", "z", "w"])], &j, 10, 1000).unwrap();
        assert!((m.mrr_at_k - 1.0 / 3.0).abs() < 1e-12);
        let m = evaluate(&[run("q2", &["x", "y", "z"])], &j, 2, 2).unwrap();
        assert_eq!((m.mrr_at_k, m.recall_at_k), (0.0, 0.0));
        assert!(matches!(evaluate(&[], &j, 10, 1000), Err(Error::EmptyRun)));
        assert!(matches!(evaluate(&[run("q9", &["a"])], &j, 10, 1000), Err(Error::EmptyRun)));
    }

    #[test]
    fn run_file_round_trip() {
        let runs = vec![RankedList {
            query_id: "q1".into(),
            hits: vec![("d2".into(), 0.5), ("d1".into(), 0.25)],
        }];
        let text = write_run(&runs, "tag");
        assert_eq!(text, "q1 Q0 d2 1 0.500000 tag\nq1 Q0 d1 2 0.250000 tag\n");
        assert_eq!(parse_run("r", &text).unwrap(), runs);
        assert!(matches!(parse_run("r", "q1 Q0 d1 1 x t\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn tradeoff_rejects_nonpositive_space() {
        assert_eq!(tradeoff(0.5, 2.0).unwrap(), 0.25);
        assert!(matches!(tradeoff(0.5, 0.0), Err(Error::InvalidSpace(_))));
        assert!(matches!(tradeoff(0.5, -1.0), Err(Error::InvalidSpace(_))));
    }

    #[test]
    fn kendall_tau_extremes() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
    }
}
