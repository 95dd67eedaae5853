//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Run alone with `cargo test -p topicret --test acceptance`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topicret::cli::{self, Command, Engine};
use topicret::config::{Fingerprint, RunConfig};
use topicret::corpus::{build_vocab, ingest_collection, ingest_qrels, TextKind, TokenSeq, Tokenizer, Vocab};
use topicret::encoder::{Embedding, EncoderParams, Granularity, Representation};
use topicret::index::{self, QuantScheme, RepresentationIndex};
use topicret::retrieval::{self, evaluate, kendall_tau, maxsim, rank, search, tradeoff};
use topicret::synth::{self, planted_topic, SynthConfig};
use topicret::topic_model::{extract_word_topics, fit_lda, LdaConfig, LdaModel, TopicExtractionConfig};
use topicret::trainer::{grad_check, Checkpoint};

// Tolerances and budgets.
const C1_BUDGET_S: f64 = 5.0;
const C2_MAX_REL: f64 = 1e-4;
const C2_SEEDS: [u64; 3] = [1, 2, 3];
const C2_BUDGET_S: f64 = 30.0;
const C4_MIN_MASS: f64 = 0.8;
const C4_BUDGET_S: f64 = 60.0;
const C5_MAX_RATIO: f64 = 0.1;
const C5_MAX_MEAN_ND: f64 = 10.0;
const C5_MIN_DOC_LEN: f64 = 150.0;
const C6_MIN_MRR: f64 = 0.85;
const C6_BUDGET_S: f64 = 600.0;
const C6_SEED: u64 = 7;
const C6_EXTRA_SEEDS: [u64; 2] = [8, 9];
const C7_UNITS: f64 = 1e-3;
const C8_MAX_SCORE_DELTA: f64 = 1e-2;
const C8_MIN_TAU: f64 = 0.9;
const C8_MAX_MRR_DROP: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_rep(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Representation {
    Representation {
        text_id: String::new(),
        granularity: Granularity::Word,
        dim,
        entries: (0..n)
            .map(|_| Embedding {
                topic: None,
                vector: (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
                degenerate: false,
            })
            .collect(),
    }
}

/// Nested loops: dot products summed in f64 in dimension order, first maximum kept.
fn maxsim_oracle(q: &Representation, d: &Representation) -> f64 {
    let mut total = 0.0f64;
    for qe in &q.entries {
        let mut best = f64::NEG_INFINITY;
        for de in &d.entries {
            let mut s = 0.0f64;
            for k in 0..q.dim {
                s += qe.vector[k] as f64 * de.vector[k] as f64;
            }
            if s > best {
                best = s;
            }
        }
        total += best;
    }
    total
}

fn c1_maxsim_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let dim = rng.gen_range(4..=64);
        let (nq, nd) = (rng.gen_range(1..=16), rng.gen_range(1..=16));
        let q = random_rep(&mut rng, nq, dim);
        let d = random_rep(&mut rng, nd, dim);
        if maxsim(&q, &d).unwrap() != maxsim_oracle(&q, &d) {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < C1_BUDGET_S,
        format!("1000 pairs, {mismatches} inexact, {secs:.2}s (budget {C1_BUDGET_S}s)"),
    )
}

fn c2_gradient_audit() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut coords = 0;
    for seed in C2_SEEDS {
        for g in [Granularity::Topic, Granularity::Word, Granularity::Global] {
            let r = grad_check(seed, g).unwrap();
            coords += r.coordinates;
            if r.max_rel_error > worst {
                worst = r.max_rel_error;
                worst_at = format!("seed {seed} {g} {}[{}]", r.worst_tensor, r.worst_index);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= C2_MAX_REL && secs < C2_BUDGET_S,
        format!(
            "seeds {C2_SEEDS:?} x 3 modes, {coords} coordinates, max rel error {worst:.2e} at {worst_at} (limit {C2_MAX_REL:e}), {secs:.1}s"
        ),
    )
}

struct Planted {
    vocab: Vocab,
    docs: Vec<TokenSeq>,
    model: LdaModel,
    fit_secs: f64,
}

fn planted_model() -> Planted {
    let mut cfg = SynthConfig::new(4, 400, 0, 11);
    cfg.filler_fraction = 0.0;
    cfg.train_queries = 0;
    let corpus = synth::generate(&cfg).unwrap();
    let vocab = build_vocab(corpus.collection.texts(), 1).unwrap();
    let tok = Tokenizer::new(vocab.clone(), 32, 180).unwrap();
    let docs: Vec<TokenSeq> = corpus
        .collection
        .iter()
        .map(|(id, t)| tok.tokenize(id, t, TextKind::Document).unwrap())
        .collect();
    let mut lda = LdaConfig::new(4);
    lda.seed = 11;
    let start = Instant::now();
    let model = fit_lda(&docs, vocab.len(), &lda).unwrap();
    Planted {
        vocab,
        docs,
        model,
        fit_secs: start.elapsed().as_secs_f64(),
    }
}

/// Direct per-position scan of the representative-topic / representative-word rule.
fn extraction_oracle(model: &LdaModel, vocab: &Vocab, doc: &TokenSeq, dist: &[f64], cfg: &TopicExtractionConfig) -> Vec<Vec<u16>> {
    let words: Vec<u32> = doc.tokens[2..]
        .iter()
        .copied()
        .filter(|&w| !Vocab::is_special(w) && (w as usize) < vocab.len())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let l = words.len() as f64;
    let mut out = vec![Vec::new(); doc.tokens.len()];
    for (pos, &w) in doc.tokens.iter().enumerate().skip(2) {
        if !words.contains(&w) {
            continue;
        }
        for (t, &share) in dist.iter().enumerate() {
            if share < cfg.theta_t {
                continue;
            }
            let p = model.topic_word(t, w);
            // 1-based rank: words strictly more probable, or equally probable with a smaller id, come first
            let rank = 1 + words
                .iter()
                .filter(|&&o| {
                    let po = model.topic_word(t, o);
                    po > p || (po == p && o < w)
                })
                .count();
            if p >= cfg.theta_wf || rank as f64 / l <= cfg.theta_wr {
                out[pos].push(t as u16);
            }
        }
    }
    out
}

fn c3_extraction_oracle(p: &Planted) -> Outcome {
    let settings = [
        (0.0, 0.005, 0.2),
        (1.1, 0.005, 0.2),
        (0.15, 0.005, 0.2),
        (0.25, 0.02, 0.05),
        (0.1, 1.0, 0.5),
    ];
    let mut mismatches = 0;
    let mut assignments = BTreeMap::new();
    for &(theta_t, theta_wf, theta_wr) in &settings {
        let cfg = TopicExtractionConfig {
            theta_t,
            theta_wf,
            theta_wr,
        };
        let mut total = 0;
        for doc in p.docs.iter().take(100) {
            let dist = p.model.infer_doc_topics(doc).probs;
            let got = extract_word_topics(&p.model, doc, &dist, &cfg);
            let want = extraction_oracle(&p.model, &p.vocab, doc, &dist, &cfg);
            if got.positions != want {
                mismatches += 1;
            }
            total += got.total_assignments();
        }
        assignments.insert(format!("{theta_t}/{theta_wf}/{theta_wr}"), total);
    }
    let boundary_ok = assignments["1.1/0.005/0.2"] == 0 && assignments["0/0.005/0.2"] > 0;
    outcome(
        mismatches == 0 && boundary_ok,
        format!("100 docs x 5 settings, {mismatches} mismatching docs, assignments per setting {assignments:?}"),
    )
}

fn c4_lda_recovery(p: &Planted) -> Outcome {
    let k = p.model.num_topics();
    // mass[t][j]: learned topic t's probability on planted block j
    let mut mass = vec![vec![0.0; 4]; k];
    for (t, row) in mass.iter_mut().enumerate() {
        for w in 0..p.vocab.len() as u32 {
            if let Some(j) = planted_topic(p.vocab.token(w)) {
                row[j] += p.model.topic_word(t, w);
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..k).flat_map(|t| (0..4).map(move |j| (t, j))).collect();
    pairs.sort_by(|a, b| mass[b.0][b.1].total_cmp(&mass[a.0][a.1]));
    let (mut used_t, mut used_j) = (vec![false; k], vec![false; 4]);
    let mut matched = Vec::new();
    for (t, j) in pairs {
        if !used_t[t] && !used_j[j] {
            used_t[t] = true;
            used_j[j] = true;
            matched.push((t, j, mass[t][j]));
        }
    }
    matched.sort_by_key(|m| m.0);
    let min = matched.iter().map(|m| m.2).fold(f64::INFINITY, f64::min);
    let desc: Vec<String> = matched.iter().map(|(t, j, m)| format!("{t}->{j}:{m:.3}")).collect();
    outcome(
        min >= C4_MIN_MASS && p.fit_secs < C4_BUDGET_S,
        format!(
            "400 docs, K=4, matched mass [{}] min {min:.3} (limit {C4_MIN_MASS}), fit {:.1}s",
            desc.join(" "),
            p.fit_secs
        ),
    )
}

fn c7_tradeoff() -> Outcome {
    let cases = [
        (0.361, 15.6, 23.1),
        (0.360, 154.0, 2.3),
        (0.310, 25.3, 12.3),
        (0.433, 51.4, 8.4),
        (0.376, 83.2, 4.5),
    ];
    let mut shown = Vec::new();
    let mut ok = true;
    for (mrr, gib, want) in cases {
        let got = tradeoff(mrr, gib).unwrap() / C7_UNITS;
        let rounded = (got * 10.0).round() / 10.0;
        ok &= (rounded - want).abs() < 1e-9;
        shown.push(format!("{mrr}/{gib}={rounded:.1}"));
    }
    outcome(ok, format!("x1e-3: {}", shown.join(", ")))
}

// End-to-end experiment.

struct Experiment {
    dir: PathBuf,
    topic_mrr: f64,
    global_mrr: f64,
    secs: f64,
}

fn e2e_config(dir: &Path, seed: u64, g: Granularity) -> RunConfig {
    let data = dir.join("synth");
    RunConfig {
        seed,
        topics: 8,
        d_c: 32,
        d_a: 32,
        dim: 64,
        learning_rate: 1e-4,
        epochs: 10,
        granularity: g,
        collection: Some(data.join(synth::COLLECTION_FILE)),
        queries: Some(data.join(synth::TRAIN_QUERIES_FILE)),
        triples: Some(data.join(synth::TRIPLES_FILE)),
        qrels: Some(data.join(synth::QRELS_FILE)),
        artifacts: dir.join(g.to_string()),
        ..RunConfig::default()
    }
}

fn metric(tsv: &str, key: &str) -> f64 {
    tsv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("{key} missing from\n{tsv}"))
        .parse()
        .unwrap()
}

fn run_experiment(root: &Path, seed: u64) -> Experiment {
    let dir = root.join(format!("seed{seed}"));
    let start = Instant::now();
    let topic = e2e_config(&dir, seed, Granularity::Topic);
    cli::execute(
        &topic,
        &Command::Synth {
            docs: 2000,
            queries: 200,
            train_queries: None,
            out: dir.join("synth"),
        },
    )
    .unwrap();
    cli::execute(&topic, &Command::LdaTrain).unwrap();
    let mut mrr = BTreeMap::new();
    for g in [Granularity::Topic, Granularity::Global] {
        let mut cfg = e2e_config(&dir, seed, g);
        std::fs::create_dir_all(&cfg.artifacts).unwrap();
        if g != Granularity::Topic {
            for f in [cli::LDA_FILE, cli::VOCAB_FILE] {
                std::fs::copy(topic.artifacts.join(f), cfg.artifacts.join(f)).unwrap();
            }
        }
        cli::execute(&cfg, &Command::Train).unwrap();
        cli::execute(&cfg, &Command::Index).unwrap();
        cfg.queries = Some(dir.join("synth").join(synth::QUERIES_FILE));
        cli::execute(&cfg, &Command::Search).unwrap();
        let tsv = cli::execute(
            &cfg,
            &Command::Eval {
                run: None,
                with_space: false,
                index: None,
            },
        )
        .unwrap();
        mrr.insert(g.to_string(), metric(&tsv, "mrr_at_10"));
    }
    Experiment {
        dir,
        topic_mrr: mrr["topic"],
        global_mrr: mrr["global"],
        secs: start.elapsed().as_secs_f64(),
    }
}

fn c6_ranking_quality(e: &Experiment, root: &Path) -> Outcome {
    let ok = |x: &Experiment| x.topic_mrr >= x.global_mrr && x.topic_mrr >= C6_MIN_MRR && x.secs < C6_BUDGET_S;
    let base = format!(
        "seed {C6_SEED}: topic MRR@10 {:.4}, global {:.4}, {:.0}s (limits: topic >= global, topic >= {C6_MIN_MRR}, < {C6_BUDGET_S}s)",
        e.topic_mrr, e.global_mrr, e.secs
    );
    if ok(e) {
        return outcome(true, base);
    }
    let mut runs = vec![(e.topic_mrr, e.global_mrr)];
    for seed in C6_EXTRA_SEEDS {
        let x = run_experiment(root, seed);
        runs.push((x.topic_mrr, x.global_mrr));
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[1]
    };
    let mt = median(runs.iter().map(|r| r.0).collect());
    let mg = median(runs.iter().map(|r| r.1).collect());
    outcome(
        false,
        format!("{base}; MISSED at seed {C6_SEED}, median over seeds {C6_SEED},{:?}: topic {mt:.4}, global {mg:.4}, runs {runs:?}", C6_EXTRA_SEEDS),
    )
}

struct Encoded {
    engine: Engine,
    docs: Vec<Representation>,
    queries: Vec<Representation>,
}

fn encode_experiment(e: &Experiment, g: Granularity) -> Encoded {
    let cfg = e2e_config(&e.dir, C6_SEED, g);
    let engine = Engine::open(&cfg).unwrap();
    let collection = ingest_collection(cfg.collection.as_deref().unwrap()).unwrap();
    let docs = index::encode_collection(&collection, &engine.loaded.pipeline, &engine.checkpoint.params, g, true).unwrap();
    let queries = ingest_collection(&e.dir.join("synth").join(synth::QUERIES_FILE)).unwrap();
    let queries = queries.iter().map(|(id, t)| engine.encode_query(id, t).unwrap()).collect();
    Encoded { engine, docs, queries }
}

fn c5_compression(topic: &Encoded, params: &EncoderParams) -> Outcome {
    let cfg = &topic.engine.config;
    let collection = ingest_collection(cfg.collection.as_deref().unwrap()).unwrap();
    let pipeline = &topic.engine.loaded.pipeline;
    let words = index::encode_collection(&collection, pipeline, params, Granularity::Word, true).unwrap();
    let dim = params.shape.dim;
    let mean_len = words.iter().map(|r| r.len() as f64).sum::<f64>() / words.len() as f64;
    let mut lines = Vec::new();
    let mut ok = mean_len >= C5_MIN_DOC_LEN;
    for scheme in [QuantScheme::F32, QuantScheme::F16, QuantScheme::U8] {
        let t = index::expected_space(&topic.docs, dim, scheme);
        let w = index::expected_space(&words, dim, scheme);
        let ratio = t.payload_bytes as f64 / w.payload_bytes as f64;
        ok &= ratio <= C5_MAX_RATIO && t.mean_entries <= C5_MAX_MEAN_ND;
        lines.push(format!("{scheme} {}/{}={ratio:.4}", t.payload_bytes, w.payload_bytes));
        if scheme == QuantScheme::F32 {
            lines.push(format!("mean N_d {:.2}", t.mean_entries));
        }
    }
    outcome(
        ok,
        format!("mean doc length {mean_len:.1} words; topic/word payload {} (limit {C5_MAX_RATIO})", lines.join(", ")),
    )
}

fn c8_quantization(topic: &Encoded, e: &Experiment) -> Outcome {
    let dim = topic.engine.checkpoint.params.shape.dim;
    let fp = Fingerprint::default();
    let build = |s| RepresentationIndex::from_representations(&topic.docs, dim, s, Granularity::Topic, fp).unwrap();
    let (f32i, f16i, u8i) = (build(QuantScheme::F32), build(QuantScheme::F16), build(QuantScheme::U8));
    let n = topic.docs.len();
    let qrels = ingest_qrels(&e.dir.join("synth").join(synth::QRELS_FILE)).unwrap();

    let mut max_delta = 0.0f64;
    let mut taus = Vec::new();
    let (mut runs32, mut runs8) = (Vec::new(), Vec::new());
    for q in &topic.queries {
        let a = search(&f32i, q, n).unwrap();
        let b = search(&f16i, q, n).unwrap();
        let b_scores: BTreeMap<&str, f64> = b.hits.iter().map(|(d, s)| (d.as_str(), *s)).collect();
        for (d, s) in &a.hits {
            max_delta = max_delta.max((s - b_scores[d.as_str()]).abs());
        }
        let top: Vec<&(String, f64)> = a.hits.iter().take(10).collect();
        let x: Vec<f64> = top.iter().map(|h| h.1).collect();
        let y: Vec<f64> = top.iter().map(|h| b_scores[h.0.as_str()]).collect();
        taus.push(kendall_tau(&x, &y));
        runs8.push(search(&u8i, q, 10).unwrap());
        runs32.push(rank(&a.query_id, a.hits, 10).unwrap());
    }
    let mean_tau = taus.iter().sum::<f64>() / taus.len() as f64;
    let min_tau = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let m32 = evaluate(&runs32, &qrels, 10, 1000).unwrap().mrr_at_k;
    let m8 = evaluate(&runs8, &qrels, 10, 1000).unwrap().mrr_at_k;
    outcome(
        max_delta <= C8_MAX_SCORE_DELTA && mean_tau >= C8_MIN_TAU && (m32 - m8).abs() <= C8_MAX_MRR_DROP,
        format!(
            "F16 max |score delta| {max_delta:.2e} (limit {C8_MAX_SCORE_DELTA}), top-10 Kendall tau mean {mean_tau:.4} min {min_tau:.4} (limit {C8_MIN_TAU}); MRR@10 F32 {m32:.4} U8 {m8:.4} (limit {C8_MAX_MRR_DROP})"
        ),
    )
}

fn files_in(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn cli_chain(root: &Path, threads: &str) -> BTreeMap<String, Vec<u8>> {
    let data = root.join("data");
    let art = root.join(format!("threads{threads}"));
    let run = |args: &[&str]| {
        let o = Process::new(env!("CARGO_BIN_EXE_topicret"))
            .args(["--seed", "5", "--topics", "4", "--dim", "16", "--set", "d_c=16", "--set", "d_a=16", "--set", "epochs=2"])
            .args(["--threads", threads, "--artifacts", art.to_str().unwrap()])
            .args(["--collection", data.join(synth::COLLECTION_FILE).to_str().unwrap()])
            .args(["--triples", data.join(synth::TRIPLES_FILE).to_str().unwrap()])
            .args(["--qrels", data.join(synth::QRELS_FILE).to_str().unwrap()])
            .args(args)
            .output()
            .unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    if !data.exists() {
        run(&["synth", "--docs", "200", "--queries", "20", "--train-queries", "64", "--out", data.to_str().unwrap()]);
    }
    run(&["lda-train"]);
    run(&["--query-file", data.join(synth::TRAIN_QUERIES_FILE).to_str().unwrap(), "train"]);
    for scheme in ["u8", "f32"] {
        run(&["--scheme", scheme, "index"]);
        run(&["--query-file", data.join(synth::QUERIES_FILE).to_str().unwrap(), "search"]);
        run(&["eval", "--with-space"]);
    }
    run(&["encode", "--input", data.join(synth::QUERIES_FILE).to_str().unwrap(), "--kind", "query"]);
    files_in(&art)
}

fn c9_round_trips(topic: &Encoded, e: &Experiment, root: &Path) -> Outcome {
    let art = e2e_config(&e.dir, C6_SEED, Granularity::Topic).artifacts;
    let mut notes = Vec::new();
    let mut ok = true;

    let lda = std::fs::read(art.join(cli::LDA_FILE)).unwrap();
    let same = LdaModel::from_bytes(&lda).unwrap().to_bytes() == lda;
    ok &= same;
    notes.push(format!("TGLD {}", if same { "ok" } else { "differs" }));

    let ck = std::fs::read(art.join(cli::CHECKPOINT_FILE)).unwrap();
    let checkpoint = Checkpoint::from_bytes(&ck).unwrap();
    let same = checkpoint.to_bytes() == ck;
    ok &= same;
    notes.push(format!("TGCK {}", if same { "ok" } else { "differs" }));

    let tgen = checkpoint.params.to_bytes();
    let tgen_path = root.join("params.tgen");
    checkpoint.params.save(&tgen_path).unwrap();
    let reloaded = EncoderParams::load(&tgen_path).unwrap();
    let same = reloaded == checkpoint.params && reloaded.to_bytes() == tgen;
    ok &= same;
    notes.push(format!("TGEN {}", if same { "ok" } else { "differs" }));

    let tgix = std::fs::read(art.join(cli::INDEX_FILE)).unwrap();
    let idx = RepresentationIndex::from_bytes(&tgix).unwrap();
    let reps: Vec<Representation> = (0..idx.len()).map(|i| idx.representation(i)).collect();
    let again = index::encode_index(&reps, idx.dim(), idx.header.scheme, idx.header.granularity, idx.header.fingerprint).unwrap();
    let same = again == tgix && idx.space_report().total_bytes == tgix.len() as u64;
    ok &= same;
    notes.push(format!("TGIX {}", if same { "ok" } else { "differs" }));

    // exhaustive F32 index search against a pass over the unquantized in-memory representations
    let mut differing = 0;
    for q in &topic.queries {
        let hits = topic
            .docs
            .iter()
            .map(|d| (d.text_id.clone(), maxsim(q, d).unwrap()))
            .collect();
        let memory = rank(&q.text_id, hits, 1000).unwrap();
        if retrieval::search(&idx, q, 1000).unwrap() != memory {
            differing += 1;
        }
    }
    ok &= differing == 0;
    notes.push(format!("F32 search vs in-memory: {differing}/{} queries differ", topic.queries.len()));

    let one = cli_chain(root, "1");
    let four = cli_chain(root, "4");
    let differing: Vec<&String> = one.keys().filter(|k| four.get(*k) != one.get(*k)).collect();
    let same = differing.is_empty() && one.len() == four.len();
    ok &= same;
    notes.push(format!(
        "--threads 4 vs 1: {} artifacts, differing {differing:?}",
        one.len()
    ));
    outcome(ok, notes.join("; "))
}

fn main() {
    // the test harness passes flags such as --nocapture; none apply here
    let _ = env_logger::builder().is_test(true).try_init();
    let root = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("{} C{n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    report(1, "maxsim-oracle", c1_maxsim_oracle());
    report(2, "gradient-audit", c2_gradient_audit());
    let planted = planted_model();
    report(3, "extraction-oracle", c3_extraction_oracle(&planted));
    report(4, "lda-recovery", c4_lda_recovery(&planted));
    report(7, "tradeoff-arithmetic", c7_tradeoff());

    let exp = run_experiment(root.path(), C6_SEED);
    let topic = encode_experiment(&exp, Granularity::Topic);
    report(5, "compression-ratio", c5_compression(&topic, &topic.engine.checkpoint.params.clone()));
    report(6, "ranking-quality", c6_ranking_quality(&exp, root.path()));
    report(8, "quantization-bounds", c8_quantization(&topic, &exp));
    report(9, "format-round-trips", c9_round_trips(&topic, &exp, root.path()));

    results.sort_by_key(|r| r.0);
    let failed: Vec<String> = results.iter().filter(|r| !r.2.pass).map(|r| format!("C{}", r.0)).collect();
    println!(
        "acceptance: {}/{} passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!(", failed {}", failed.join(" ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
