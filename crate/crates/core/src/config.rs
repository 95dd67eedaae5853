//! Flat `key = value` run configuration and the artifact fingerprint.

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::corpus::Vocab;
use crate::encoder::{EncoderShape, Granularity};
use crate::error::{Error, Result};
use crate::index::QuantScheme;
use crate::topic_model::{LdaConfig, TopicExtractionConfig};
use crate::trainer::{Optimizer, TrainConfig};

/// SHA-256 over the canonical model configuration and the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fingerprint(pub [u8; 32]);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// Conventional output dimensions; others are accepted with a warning.
pub const DIM_RANGE: [usize; 5] = [64, 128, 256, 512, 768];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub collection: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub artifacts: PathBuf,

    pub seed: u64,
    pub topics: usize,
    /// `None` means `1/K`.
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub lda_train_iters: usize,
    pub lda_infer_iters: usize,
    pub theta_t: f64,
    pub theta_wf: f64,
    pub theta_wr: f64,

    pub min_count: u64,
    pub max_query_len: usize,
    pub max_doc_len: usize,
    pub d_c: usize,
    pub d_a: usize,
    pub dim: usize,
    pub granularity: Granularity,
    pub normalize: bool,

    pub negatives: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,

    pub scheme: QuantScheme,
    pub k: usize,
    pub mrr_k: usize,
    pub recall_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ex = TopicExtractionConfig::default();
        let tr = TrainConfig::default();
        RunConfig {
            collection: None,
            queries: None,
            qrels: None,
            triples: None,
            artifacts: PathBuf::from("artifacts"),
            seed: 0,
            topics: 8,
            alpha: None,
            eta: None,
            lda_train_iters: 200,
            lda_infer_iters: 50,
            theta_t: ex.theta_t,
            theta_wf: ex.theta_wf,
            theta_wr: ex.theta_wr,
            min_count: 1,
            max_query_len: 32,
            max_doc_len: 180,
            d_c: 64,
            d_a: 64,
            dim: 256,
            granularity: tr.granularity,
            normalize: tr.normalize,
            negatives: tr.negatives,
            batch_size: tr.batch_size,
            epochs: tr.epochs,
            learning_rate: tr.learning_rate,
            optimizer: tr.optimizer,
            scheme: QuantScheme::F32,
            k: 1000,
            mrr_k: 10,
            recall_k: 1000,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_prior(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn parse_switch(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(Error::Config(format!("`{key}` must be on or off, got `{v}`"))),
    }
}

fn path_opt(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn show_prior(p: Option<f64>) -> String {
    p.map_or("auto".into(), |x| x.to_string())
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "collection" => self.collection = path_opt(v),
            "queries" => self.queries = path_opt(v),
            "qrels" => self.qrels = path_opt(v),
            "triples" => self.triples = path_opt(v),
            "artifacts" => self.artifacts = PathBuf::from(v),
            "seed" => self.seed = parse_num(key, v)?,
            "topics" => self.topics = parse_num(key, v)?,
            "alpha" => self.alpha = parse_prior(key, v)?,
            "eta" => self.eta = parse_prior(key, v)?,
            "lda_train_iters" => self.lda_train_iters = parse_num(key, v)?,
            "lda_infer_iters" => self.lda_infer_iters = parse_num(key, v)?,
            "theta_t" => self.theta_t = parse_num(key, v)?,
            "theta_wf" => self.theta_wf = parse_num(key, v)?,
            "theta_wr" => self.theta_wr = parse_num(key, v)?,
            "min_count" => self.min_count = parse_num(key, v)?,
            "max_query_len" => self.max_query_len = parse_num(key, v)?,
            "max_doc_len" => self.max_doc_len = parse_num(key, v)?,
            "d_c" => self.d_c = parse_num(key, v)?,
            "d_a" => self.d_a = parse_num(key, v)?,
            "dim" => self.dim = parse_num(key, v)?,
            "granularity" => self.granularity = v.parse()?,
            "normalize" => self.normalize = parse_switch(key, v)?,
            "negatives" => self.negatives = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "optimizer" => {
                self.optimizer = match v {
                    "adam" => Optimizer::default(),
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(Error::Config(format!("unknown optimizer `{v}`"))),
                }
            }
            "scheme" => self.scheme = v.parse()?,
            "k" => self.k = parse_num(key, v)?,
            "mrr_k" => self.mrr_k = parse_num(key, v)?,
            "recall_k" => self.recall_k = parse_num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Settings that shape the produced artifacts; these are fingerprinted.
    fn model_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("topics", self.topics.to_string()),
            ("alpha", show_prior(self.alpha)),
            ("eta", show_prior(self.eta)),
            ("lda_train_iters", self.lda_train_iters.to_string()),
            ("lda_infer_iters", self.lda_infer_iters.to_string()),
            ("theta_t", self.theta_t.to_string()),
            ("theta_wf", self.theta_wf.to_string()),
            ("theta_wr", self.theta_wr.to_string()),
            ("min_count", self.min_count.to_string()),
            ("max_query_len", self.max_query_len.to_string()),
            ("max_doc_len", self.max_doc_len.to_string()),
            ("d_c", self.d_c.to_string()),
            ("d_a", self.d_a.to_string()),
            ("dim", self.dim.to_string()),
            ("granularity", self.granularity.to_string()),
            ("normalize", if self.normalize { "on" } else { "off" }.into()),
            ("negatives", self.negatives.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("optimizer", self.optimizer.name().into()),
        ]
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut all = self.model_entries();
        all.extend([
            ("collection", show_path(&self.collection)),
            ("queries", show_path(&self.queries)),
            ("qrels", show_path(&self.qrels)),
            ("triples", show_path(&self.triples)),
            ("artifacts", self.artifacts.display().to_string()),
            ("scheme", self.scheme.to_string()),
            ("k", self.k.to_string()),
            ("mrr_k", self.mrr_k.to_string()),
            ("recall_k", self.recall_k.to_string()),
        ]);
        all
    }

    /// Canonical rendering; `parse(render(c)) == c`.
    pub fn render(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn parse(content: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (n, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: `{k}` set twice", n + 1)));
            }
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content)
    }

    pub fn validate(&self) -> Result<()> {
        self.lda().validate()?;
        self.extraction().validate()?;
        self.train().validate()?;
        self.shape().validate()?;
        if self.min_count < 1 {
            return Err(Error::Config("min_count must be ≥ 1".into()));
        }
        if self.max_query_len < 3 || self.max_doc_len < 3 {
            return Err(Error::Config("maximum lengths must leave room for the two prefix tokens".into()));
        }
        if self.k < 1 || self.mrr_k < 1 || self.recall_k < 1 {
            return Err(Error::InvalidK(0));
        }
        if !DIM_RANGE.contains(&self.dim) {
            log::warn!("dim {} is outside the conventional range {:?}", self.dim, DIM_RANGE);
        }
        Ok(())
    }

    pub fn lda(&self) -> LdaConfig {
        let mut c = LdaConfig::new(self.topics);
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.eta = self.eta.unwrap_or(c.eta);
        c.train_iters = self.lda_train_iters;
        c.infer_iters = self.lda_infer_iters;
        c.seed = self.seed;
        c
    }

    pub fn extraction(&self) -> TopicExtractionConfig {
        TopicExtractionConfig {
            theta_t: self.theta_t,
            theta_wf: self.theta_wf,
            theta_wr: self.theta_wr,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            negatives: self.negatives,
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            seed: self.seed,
            normalize: self.normalize,
            granularity: self.granularity,
        }
    }

    /// Encoder shape for a vocabulary of `vocab_size` entries.
    pub fn shape_for(&self, vocab_size: usize) -> EncoderShape {
        EncoderShape {
            vocab_size,
            d_c: self.d_c,
            d_a: self.d_a,
            dim: self.dim,
            num_topics: self.topics,
            max_len: self.max_query_len.max(self.max_doc_len),
        }
    }

    fn shape(&self) -> EncoderShape {
        self.shape_for(crate::corpus::NUM_SPECIALS as usize + 1)
    }

    pub fn fingerprint(&self, vocab: &Vocab) -> Fingerprint {
        let mut h = Sha256::new();
        for (k, v) in self.model_entries() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.update(b"--\n");
        for t in vocab.tokens() {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        Fingerprint(h.finalize().into())
    }
}
