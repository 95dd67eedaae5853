//! The `topicret` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Fingerprint, RunConfig};
use crate::corpus::{self, build_vocab, TextKind, TokenSeq, Tokenizer, Vocab};
use crate::encoder::{EncoderParams, Granularity, Pipeline, Representation};
use crate::error::{Error, Result};
use crate::index::{self, IndexOptions, QuantScheme, RepresentationIndex};
use crate::retrieval;
use crate::seed;
use crate::synth::{self, SynthConfig};
use crate::topic_model::{fit_lda, LdaModel};
use crate::trainer::{self, Checkpoint, TrainData};

pub const LDA_FILE: &str = "lda.tgld";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const CHECKPOINT_FILE: &str = "encoder.tgck";
pub const TRAIN_LOG_FILE: &str = "train_log.tsv";
pub const INDEX_FILE: &str = "index.tgix";
pub const RUN_FILE: &str = "run.trec";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const ENCODED_FILE: &str = "encoded.tsv";

#[derive(Debug, Parser)]
#[command(name = "topicret", version, about = "Topic-grained multi-vector retrieval")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub scheme: Option<QuantScheme>,
    #[arg(long, global = true)]
    pub granularity: Option<Granularity>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long = "theta-t", global = true)]
    pub theta_t: Option<f64>,
    #[arg(long = "theta-wf", global = true)]
    pub theta_wf: Option<f64>,
    #[arg(long = "theta-wr", global = true)]
    pub theta_wr: Option<f64>,
    #[arg(long, global = true)]
    pub topics: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub normalize: Option<Switch>,
    /// Directory holding every produced artifact.
    #[arg(long, global = true)]
    pub artifacts: Option<PathBuf>,
    #[arg(long, global = true)]
    pub collection: Option<PathBuf>,
    /// Query file (`id\ttext`).
    #[arg(long = "query-file", global = true)]
    pub query_file: Option<PathBuf>,
    #[arg(long, global = true)]
    pub qrels: Option<PathBuf>,
    #[arg(long, global = true)]
    pub triples: Option<PathBuf>,
    /// Any other configuration key, e.g. `--set epochs=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the vocabulary and fit the topic model on the collection.
    LdaTrain,
    /// Train the encoder on query/positive/negatives triples.
    Train,
    /// Encode a text file (`id\ttext`) into representations.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "document")]
        kind: Kind,
    },
    /// Encode and quantize the collection into the index.
    Index,
    /// Rank the indexed documents for every query.
    Search,
    /// Score a run against relevance judgments.
    Eval {
        #[arg(long)]
        run: Option<PathBuf>,
        /// Also report index space and MRR per GiB.
        #[arg(long)]
        with_space: bool,
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Byte accounting of an index file.
    SpaceReport {
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients on a tiny model.
    GradCheck,
    /// Generate a planted-topic corpus with queries, judgments and triples.
    Synth {
        #[arg(long)]
        docs: usize,
        #[arg(long)]
        queries: usize,
        #[arg(long)]
        train_queries: Option<usize>,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Query,
    Document,
}

impl From<Kind> for TextKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Query => TextKind::Query,
            Kind::Document => TextKind::Document,
        }
    }
}

/// Loads the config file, then applies command-line overrides.
pub fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(x) = g.seed {
        cfg.seed = x;
    }
    if let Some(x) = g.dim {
        cfg.dim = x;
    }
    if let Some(x) = g.scheme {
        cfg.scheme = x;
    }
    if let Some(x) = g.granularity {
        cfg.granularity = x;
    }
    if let Some(x) = g.k {
        cfg.k = x;
    }
    if let Some(x) = g.theta_t {
        cfg.theta_t = x;
    }
    if let Some(x) = g.theta_wf {
        cfg.theta_wf = x;
    }
    if let Some(x) = g.theta_wr {
        cfg.theta_wr = x;
    }
    if let Some(x) = g.topics {
        cfg.topics = x;
    }
    if let Some(x) = g.normalize {
        cfg.normalize = matches!(x, Switch::On);
    }
    if let Some(x) = &g.artifacts {
        cfg.artifacts = x.clone();
    }
    for (slot, flag) in [
        (&mut cfg.collection, &g.collection),
        (&mut cfg.queries, &g.query_file),
        (&mut cfg.qrels, &g.qrels),
        (&mut cfg.triples, &g.triples),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    let p = p
        .as_deref()
        .ok_or_else(|| Error::Config(format!("`{name}` path is not set")))?;
    if !p.exists() {
        return Err(Error::Config(format!("{name} file {} does not exist", p.display())));
    }
    Ok(p)
}

fn write_file(path: &Path, content: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn artifacts_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.artifacts).map_err(|e| Error::io(&cfg.artifacts, e))?;
    Ok(&cfg.artifacts)
}

/// The frozen tokenizer/topic-model front end plus the expected fingerprint.
pub struct Loaded {
    pub pipeline: Pipeline,
    pub fingerprint: Fingerprint,
}

pub fn load_pipeline(cfg: &RunConfig) -> Result<Loaded> {
    let dir = &cfg.artifacts;
    let vocab_path = dir.join(VOCAB_FILE);
    let vocab = Vocab::from_tsv(&std::fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?)?;
    let lda = LdaModel::load(&dir.join(LDA_FILE))?;
    if *lda.config() != cfg.lda() {
        return Err(Error::IncompatibleArtifacts(format!(
            "{LDA_FILE} was fitted with {:?}, configuration asks for {:?}",
            lda.config(),
            cfg.lda()
        )));
    }
    let fingerprint = cfg.fingerprint(&vocab);
    let tokenizer = Tokenizer::new(vocab, cfg.max_query_len, cfg.max_doc_len)?;
    Ok(Loaded {
        pipeline: Pipeline::new(tokenizer, lda, cfg.extraction())?,
        fingerprint,
    })
}

pub fn load_checkpoint(cfg: &RunConfig, loaded: &Loaded) -> Result<Checkpoint> {
    let ck = Checkpoint::load(&cfg.artifacts.join(CHECKPOINT_FILE))?;
    if ck.fingerprint != loaded.fingerprint {
        return Err(Error::IncompatibleArtifacts(format!(
            "{CHECKPOINT_FILE} carries fingerprint {}, configuration gives {}",
            ck.fingerprint, loaded.fingerprint
        )));
    }
    loaded.pipeline.check_params(&ck.params)?;
    Ok(ck)
}

fn lda_train(cfg: &RunConfig) -> Result<String> {
    let docs = corpus::ingest_collection(required(&cfg.collection, "collection")?)?;
    let vocab = build_vocab(docs.texts(), cfg.min_count)?;
    let tokenizer = Tokenizer::new(vocab.clone(), cfg.max_query_len, cfg.max_doc_len)?;
    let seqs: Vec<TokenSeq> = docs
        .iter()
        .filter_map(|(id, raw)| match tokenizer.tokenize(id, raw, TextKind::Document) {
            Ok(s) => Some(Ok(s)),
            Err(Error::EmptyText) => {
                log::warn!("document `{id}` is empty; left out of topic fitting");
                None
            }
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_>>()?;
    let model = fit_lda(&seqs, vocab.len(), &cfg.lda())?;
    let dir = artifacts_dir(cfg)?;
    write_file(&dir.join(VOCAB_FILE), vocab.to_tsv())?;
    model.save(&dir.join(LDA_FILE))?;
    Ok(format!(
        "vocabulary\t{}\ndocuments\t{}\ntopics\t{}\nfingerprint\t{}\n",
        vocab.len(),
        seqs.len(),
        model.num_topics(),
        cfg.fingerprint(&vocab)
    ))
}

fn train(cfg: &RunConfig) -> Result<String> {
    let docs = corpus::ingest_collection(required(&cfg.collection, "collection")?)?;
    let queries = corpus::ingest_collection(required(&cfg.queries, "queries")?)?;
    let triples = corpus::ingest_triples(required(&cfg.triples, "triples")?)?;
    let loaded = load_pipeline(cfg)?;
    let shape = cfg.shape_for(loaded.pipeline.tokenizer.vocab().len());
    let init = EncoderParams::init(shape, seed::derive(cfg.seed, 0x494e_4954));
    let data = TrainData {
        triples: &triples,
        queries: &queries,
        docs: &docs,
    };
    let ck_path = cfg.artifacts.join(CHECKPOINT_FILE);
    match trainer::train(&cfg.train(), data, &loaded.pipeline, init, loaded.fingerprint) {
        Ok(report) => {
            report.checkpoint.save(&ck_path)?;
            write_file(&cfg.artifacts.join(TRAIN_LOG_FILE), report.log_tsv())?;
            Ok(report.log_tsv())
        }
        Err(Error::Diverged { epoch, last_good }) => {
            last_good.save(&ck_path)?;
            Err(Error::Diverged { epoch, last_good })
        }
        Err(e) => Err(e),
    }
}

fn encode_texts(
    cfg: &RunConfig,
    loaded: &Loaded,
    params: &EncoderParams,
    texts: &corpus::Collection,
    kind: TextKind,
) -> Result<Vec<Representation>> {
    use rayon::prelude::*;
    let items: Vec<(&str, &str)> = texts.iter().collect();
    items
        .into_par_iter()
        .map(|(id, raw)| loaded.pipeline.encode_text(params, id, raw, kind, cfg.granularity, cfg.normalize))
        .collect()
}

fn encode(cfg: &RunConfig, input: &Path, kind: TextKind) -> Result<String> {
    let texts = corpus::ingest_collection(input)?;
    let loaded = load_pipeline(cfg)?;
    let ck = load_checkpoint(cfg, &loaded)?;
    let reps = encode_texts(cfg, &loaded, &ck.params, &texts, kind)?;
    let mut out = String::new();
    for rep in &reps {
        for (i, e) in rep.entries.iter().enumerate() {
            let topic = e.topic.map_or("-".to_string(), |t| t.to_string());
            let values: Vec<String> = e.vector.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}\t{i}\t{topic}\t{}", rep.text_id, values.join(" ")).unwrap();
        }
    }
    write_file(&artifacts_dir(cfg)?.join(ENCODED_FILE), &out)?;
    Ok(format!("encoded\t{}\nembeddings\t{}\n", reps.len(), reps.iter().map(|r| r.len()).sum::<usize>()))
}

fn build(cfg: &RunConfig) -> Result<String> {
    let docs = corpus::ingest_collection(required(&cfg.collection, "collection")?)?;
    let loaded = load_pipeline(cfg)?;
    let ck = load_checkpoint(cfg, &loaded)?;
    let options = IndexOptions {
        scheme: cfg.scheme,
        granularity: cfg.granularity,
        normalize: cfg.normalize,
    };
    let idx = index::build_index(
        &docs,
        &loaded.pipeline,
        &ck,
        loaded.fingerprint,
        options,
        &artifacts_dir(cfg)?.join(INDEX_FILE),
    )?;
    Ok(idx.space_report().to_tsv())
}

/// A loaded artifact chain ready to answer queries.
pub struct Engine {
    pub config: RunConfig,
    pub loaded: Loaded,
    pub checkpoint: Checkpoint,
    pub index: RepresentationIndex,
}

impl Engine {
    /// Loads vocabulary, topic model, checkpoint and index from the artifacts
    /// directory and checks that they belong together.
    pub fn open(cfg: &RunConfig) -> Result<Self> {
        let loaded = load_pipeline(cfg)?;
        let checkpoint = load_checkpoint(cfg, &loaded)?;
        let index = RepresentationIndex::load(&cfg.artifacts.join(INDEX_FILE))?;
        if index.header.fingerprint != loaded.fingerprint || index.header.granularity != cfg.granularity {
            return Err(Error::IncompatibleArtifacts(format!(
                "{INDEX_FILE} ({} / {}) does not match configuration ({} / {})",
                index.header.granularity, index.header.fingerprint, cfg.granularity, loaded.fingerprint
            )));
        }
        Ok(Engine {
            config: cfg.clone(),
            loaded,
            checkpoint,
            index,
        })
    }

    pub fn encode_query(&self, query_id: &str, text: &str) -> Result<Representation> {
        self.loaded.pipeline.encode_text(
            &self.checkpoint.params,
            query_id,
            text,
            TextKind::Query,
            self.config.granularity,
            self.config.normalize,
        )
    }

    pub fn search(&self, query_id: &str, text: &str, k: usize) -> Result<retrieval::RankedList> {
        retrieval::search(&self.index, &self.encode_query(query_id, text)?, k)
    }
}

fn search(cfg: &RunConfig) -> Result<String> {
    let queries = corpus::ingest_collection(required(&cfg.queries, "queries")?)?;
    let engine = Engine::open(cfg)?;
    let reps = encode_texts(cfg, &engine.loaded, &engine.checkpoint.params, &queries, TextKind::Query)?;
    let runs = retrieval::search_all(&engine.index, &reps, cfg.k)?;
    let tag = format!("topicret-{}", cfg.granularity);
    write_file(&cfg.artifacts.join(RUN_FILE), retrieval::write_run(&runs, &tag))?;
    Ok(format!("queries\t{}\nrun\t{}\n", runs.len(), cfg.artifacts.join(RUN_FILE).display()))
}

fn eval(cfg: &RunConfig, run: Option<&Path>, with_space: bool, index_path: Option<&Path>) -> Result<String> {
    let run_path = run.map(Path::to_path_buf).unwrap_or_else(|| cfg.artifacts.join(RUN_FILE));
    let runs = retrieval::read_run(&run_path)?;
    let qrels = corpus::ingest_qrels(required(&cfg.qrels, "qrels")?)?;
    let metrics = retrieval::evaluate(&runs, &qrels, cfg.mrr_k, cfg.recall_k)?;
    let mut out = metrics.to_tsv();
    if with_space {
        let path = index_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.artifacts.join(INDEX_FILE));
        let stats = RepresentationIndex::load(&path)?.space_report();
        out.push_str(&stats.to_tsv());
        let t = retrieval::tradeoff(metrics.mrr_at_k, stats.total_gib())?;
        writeln!(out, "tradeoff\t{t:.6}").unwrap();
    }
    if run.is_none() {
        write_file(&cfg.artifacts.join(METRICS_FILE), &out)?;
    }
    Ok(out)
}

fn grad_check(cfg: &RunConfig) -> Result<String> {
    let mut out = String::new();
    let mut worst = 0.0f64;
    for g in [Granularity::Topic, Granularity::Word, Granularity::Global] {
        let r = trainer::grad_check(cfg.seed, g)?;
        writeln!(
            out,
            "{g}\tmax_rel_error\t{:.3e}\t{}[{}]",
            r.max_rel_error, r.worst_tensor, r.worst_index
        )
        .unwrap();
        worst = worst.max(r.max_rel_error);
    }
    writeln!(out, "max_rel_error\t{worst:.3e}").unwrap();
    if !(worst <= 1e-4) {
        print!("{out}");
        return Err(Error::Numerical(format!("gradient check failed: relative error {worst:.3e} > 1e-4")));
    }
    Ok(out)
}

fn synth(cfg: &RunConfig, docs: usize, queries: usize, train_queries: Option<usize>, out: &Path) -> Result<String> {
    let mut sc = SynthConfig::new(cfg.topics, docs, queries, cfg.seed);
    sc.negatives = cfg.negatives;
    if let Some(n) = train_queries {
        sc.train_queries = n;
    }
    let corpus = synth::generate(&sc)?;
    corpus.write(out)?;
    Ok(format!(
        "documents\t{}\nqueries\t{}\ntraining_triples\t{}\nout\t{}\n",
        corpus.collection.len(),
        corpus.queries.len(),
        corpus.triples.len(),
        out.display()
    ))
}

pub fn execute(cfg: &RunConfig, command: &Command) -> Result<String> {
    match command {
        Command::LdaTrain => lda_train(cfg),
        Command::Train => train(cfg),
        Command::Encode { input, kind } => encode(cfg, input, (*kind).into()),
        Command::Index => build(cfg),
        Command::Search => search(cfg),
        Command::Eval { run, with_space, index } => eval(cfg, run.as_deref(), *with_space, index.as_deref()),
        Command::SpaceReport { index } => {
            let path = index.clone().unwrap_or_else(|| cfg.artifacts.join(INDEX_FILE));
            Ok(RepresentationIndex::load(&path)?.space_report().to_tsv())
        }
        Command::GradCheck => grad_check(cfg),
        Command::Synth {
            docs,
            queries,
            train_queries,
            out,
        } => synth(cfg, *docs, *queries, *train_queries, out),
    }
}

fn run_cli(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| execute(&cfg, &cli.command))
}

/// Parses `args` (program name first), runs the command and returns the exit code:
/// 0 success, 1 usage or validation error, 2 runtime failure.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
