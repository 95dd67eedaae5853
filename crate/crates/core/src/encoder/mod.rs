//! Text encoder: contextual embeddings, topic bucketing, attention pooling
//! and projection, plus the word- and global-grained baseline modes.

mod context;
mod params;
mod pool;

use std::fmt;
use std::str::FromStr;

use crate::corpus::{TextKind, TokenSeq, Tokenizer};
use crate::error::{Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::topic_model::{extract_word_topics, LdaModel, TopicAssignmentTable, TopicDistribution, TopicExtractionConfig};

pub use context::{encode_contextual, ContextualEmbeddings};
pub use params::{EncoderParams, EncoderShape, TENSOR_NAMES};
pub use pool::{attention_pool, attention_weights, bucket_by_topic, project, Buckets, Projected};

pub(crate) use params::EncoderParams as Gradients;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// One embedding per representative topic.
    Topic,
    /// One embedding per word.
    Word,
    /// A single mean-pooled embedding.
    Global,
}

impl Granularity {
    pub fn code(self) -> u8 {
        match self {
            Granularity::Topic => 0,
            Granularity::Word => 1,
            Granularity::Global => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Granularity::Topic),
            1 => Ok(Granularity::Word),
            2 => Ok(Granularity::Global),
            _ => Err(Error::Format(format!("unknown granularity code {code}"))),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Topic => "topic",
            Granularity::Word => "word",
            Granularity::Global => "global",
        })
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "topic" => Ok(Granularity::Topic),
            "word" => Ok(Granularity::Word),
            "global" => Ok(Granularity::Global),
            other => Err(Error::Config(format!("unknown granularity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `None` for word/global entries and for the empty-bucket fallback.
    pub topic: Option<u16>,
    pub vector: Vec<f32>,
    pub degenerate: bool,
}

/// A text's multi-vector representation, the unit stored in the index.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub text_id: String,
    pub granularity: Granularity,
    pub dim: usize,
    pub entries: Vec<Embedding>,
}

impl Representation {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f32]> {
        self.entries.iter().map(|e| e.vector.as_slice())
    }
}

/// Tokens plus the frozen topic information for one text.
#[derive(Debug, Clone)]
pub struct PreparedText {
    pub seq: TokenSeq,
    pub topics: Option<TopicDistribution>,
    pub table: Option<TopicAssignmentTable>,
}

enum Source {
    Pool(pool::PoolCache),
    Position(usize),
    Mean(Vec<usize>),
}

struct Unit {
    topic: Option<u16>,
    source: Source,
    proj: pool::ProjCache,
}

/// Forward pass of one text with everything the backward pass needs.
pub(crate) struct TextForward {
    ctx: context::ContextCache,
    units: Vec<Unit>,
}

impl TextForward {
    pub fn outputs(&self) -> impl Iterator<Item = &[f64]> {
        self.units.iter().map(|u| u.proj.out.vector.as_slice())
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn to_representation(&self, text_id: &str, granularity: Granularity, dim: usize) -> Representation {
        Representation {
            text_id: text_id.to_string(),
            granularity,
            dim,
            entries: self
                .units
                .iter()
                .map(|u| Embedding {
                    topic: u.topic,
                    vector: u.proj.out.vector.iter().map(|&x| x as f32).collect(),
                    degenerate: u.proj.out.degenerate,
                })
                .collect(),
        }
    }
}

fn mean_of(c: &Matrix, positions: &[usize]) -> Vec<f64> {
    let mut mean = vec![0.0; c.cols()];
    for &p in positions {
        axpy(1.0, c.row(p), &mut mean);
    }
    let n = positions.len().max(1) as f64;
    mean.iter_mut().for_each(|x| *x /= n);
    mean
}

pub(crate) fn forward(params: &EncoderParams, text: &PreparedText, granularity: Granularity, normalize: bool) -> TextForward {
    let ctx = context::forward(params, &text.seq.tokens);
    let c = &ctx.out.vectors;
    let words: Vec<usize> = text.seq.word_positions().collect();
    let global = |params: &EncoderParams| Unit {
        topic: None,
        proj: pool::project_forward(params, mean_of(c, &words), normalize),
        source: Source::Mean(words.clone()),
    };

    let units = match granularity {
        Granularity::Global => vec![global(params)],
        Granularity::Word => words
            .iter()
            .map(|&p| Unit {
                topic: None,
                proj: pool::project_forward(params, c.row(p).to_vec(), normalize),
                source: Source::Position(p),
            })
            .collect(),
        Granularity::Topic => {
            let buckets = text
                .table
                .as_ref()
                .map(pool::bucket_positions)
                .unwrap_or_default();
            if buckets.is_empty() {
                vec![global(params)]
            } else {
                buckets
                    .into_iter()
                    .map(|(topic, positions)| {
                        let cache = pool::pool_forward(params, c, topic, positions);
                        Unit {
                            topic: Some(topic),
                            proj: pool::project_forward(params, cache.pooled.clone(), normalize),
                            source: Source::Pool(cache),
                        }
                    })
                    .collect()
            }
        }
    };
    TextForward { ctx, units }
}

/// Accumulates parameter gradients given the gradient of each output embedding.
pub(crate) fn backward(params: &EncoderParams, fwd: &TextForward, d_outputs: &[Vec<f64>], grads: &mut Gradients) {
    debug_assert_eq!(d_outputs.len(), fwd.units.len());
    let c = &fwd.ctx.out.vectors;
    let mut d_c = Matrix::zeros(c.rows(), c.cols());
    let mut touched = false;
    for (unit, d_out) in fwd.units.iter().zip(d_outputs) {
        if d_out.iter().all(|&g| g == 0.0) {
            continue;
        }
        touched = true;
        let d_in = pool::project_backward(params, &unit.proj, d_out, grads);
        match &unit.source {
            Source::Pool(cache) => pool::pool_backward(params, c, cache, &d_in, &mut d_c, grads),
            Source::Position(p) => axpy(1.0, &d_in, d_c.row_mut(*p)),
            Source::Mean(positions) => {
                let share = 1.0 / positions.len().max(1) as f64;
                for &p in positions {
                    axpy(share, &d_in, d_c.row_mut(p));
                }
            }
        }
    }
    if touched {
        context::backward(params, &fwd.ctx, &d_c, grads);
    }
}

/// The frozen front half of the pipeline: tokenizer, topic model and extraction thresholds.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub tokenizer: Tokenizer,
    pub lda: LdaModel,
    pub extraction: TopicExtractionConfig,
}

impl Pipeline {
    pub fn new(tokenizer: Tokenizer, lda: LdaModel, extraction: TopicExtractionConfig) -> Result<Self> {
        extraction.validate()?;
        if lda.vocab_size() != tokenizer.vocab().len() {
            return Err(Error::IncompatibleArtifacts(format!(
                "topic model covers {} words, vocabulary has {}",
                lda.vocab_size(),
                tokenizer.vocab().len()
            )));
        }
        Ok(Pipeline {
            tokenizer,
            lda,
            extraction,
        })
    }

    pub fn prepare(&self, text_id: &str, raw: &str, kind: TextKind, granularity: Granularity) -> Result<PreparedText> {
        let seq = self.tokenizer.tokenize(text_id, raw, kind)?;
        Ok(self.prepare_tokens(seq, granularity))
    }

    pub fn prepare_tokens(&self, seq: TokenSeq, granularity: Granularity) -> PreparedText {
        if granularity != Granularity::Topic {
            return PreparedText {
                seq,
                topics: None,
                table: None,
            };
        }
        let topics = self.lda.infer_doc_topics(&seq);
        let table = extract_word_topics(&self.lda, &seq, &topics.probs, &self.extraction);
        PreparedText {
            seq,
            topics: Some(topics),
            table: Some(table),
        }
    }

    pub fn check_params(&self, params: &EncoderParams) -> Result<()> {
        let s = &params.shape;
        let max_len = self
            .tokenizer
            .max_len(TextKind::Query)
            .max(self.tokenizer.max_len(TextKind::Document));
        if s.vocab_size != self.tokenizer.vocab().len() || s.num_topics != self.lda.num_topics() || s.max_len < max_len {
            return Err(Error::IncompatibleArtifacts(format!(
                "encoder shape {s:?} does not match vocabulary/topic model/max length"
            )));
        }
        Ok(())
    }

    pub fn encode_prepared(&self, params: &EncoderParams, text: &PreparedText, granularity: Granularity, normalize: bool) -> Representation {
        forward(params, text, granularity, normalize).to_representation(&text.seq.text_id, granularity, params.shape.dim)
    }

    /// Tokenize, recognize topics, encode, pool and project one raw text.
    pub fn encode_text(
        &self,
        params: &EncoderParams,
        text_id: &str,
        raw: &str,
        kind: TextKind,
        granularity: Granularity,
        normalize: bool,
    ) -> Result<Representation> {
        let prepared = self.prepare(text_id, raw, kind, granularity)?;
        Ok(self.encode_prepared(params, &prepared, granularity, normalize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;
    use crate::topic_model::{fit_lda, LdaConfig};

    fn pipeline() -> (Pipeline, EncoderParams) {
        let corpus = [
            "apple banana cherry apple banana",
            "dog cat mouse dog cat",
            "apple banana dog cat",
            "cherry mouse apple dog",
        ];
        let vocab = build_vocab(corpus, 1).unwrap();
        let tok = Tokenizer::new(vocab.clone(), 8, 200).unwrap();
        let docs: Vec<TokenSeq> = corpus
            .iter()
            .enumerate()
            .map(|(i, t)| tok.tokenize(&i.to_string(), t, TextKind::Document).unwrap())
            .collect();
        let lda = fit_lda(&docs, vocab.len(), &LdaConfig::new(2)).unwrap();
        let shape = EncoderShape {
            vocab_size: vocab.len(),
            d_c: 6,
            d_a: 5,
            dim: 4,
            num_topics: 2,
            max_len: 200,
        };
        let pipe = Pipeline::new(tok, lda, TopicExtractionConfig::default()).unwrap();
        (pipe, EncoderParams::init(shape, 1))
    }

    #[test]
    fn global_mode_has_one_entry() {
        let (pipe, params) = pipeline();
        let r = pipe
            .encode_text(&params, "d", "apple dog mouse", TextKind::Document, Granularity::Global, true)
            .unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.entries[0].topic, None);
    }

    #[test]
    fn word_mode_drops_prefix() {
        let (pipe, params) = pipeline();
        let text = vec!["apple"; 178].join(" ");
        let r = pipe
            .encode_text(&params, "d", &text, TextKind::Document, Granularity::Word, true)
            .unwrap();
        assert_eq!(r.len(), 178);
    }

    #[test]
    fn topic_mode_matches_table_topics() {
        let (pipe, params) = pipeline();
        let prepared = pipe
            .prepare("d", "apple banana cherry dog cat", TextKind::Document, Granularity::Topic)
            .unwrap();
        let r = pipe.encode_prepared(&params, &prepared, Granularity::Topic, true);
        let topics = prepared.table.as_ref().unwrap().topics();
        if topics.is_empty() {
            assert_eq!(r.len(), 1);
        } else {
            let got: Vec<u16> = r.entries.iter().map(|e| e.topic.unwrap()).collect();
            assert_eq!(got, topics.into_iter().collect::<Vec<_>>());
        }
        assert!(r.len() <= 2);
    }

    #[test]
    fn topic_mode_falls_back_to_global() {
        let (mut pipe, params) = pipeline();
        pipe.extraction.theta_t = 1.1;
        let topic = pipe
            .encode_text(&params, "d", "apple dog", TextKind::Document, Granularity::Topic, true)
            .unwrap();
        let global = pipe
            .encode_text(&params, "d", "apple dog", TextKind::Document, Granularity::Global, true)
            .unwrap();
        assert_eq!(topic.entries, global.entries);
    }

    #[test]
    fn entries_are_unit_or_degenerate() {
        let (pipe, params) = pipeline();
        for g in [Granularity::Topic, Granularity::Word, Granularity::Global] {
            let r = pipe
                .encode_text(&params, "q", "banana mouse unseen", TextKind::Query, g, true)
                .unwrap();
            for e in &r.entries {
                let norm: f64 = e.vector.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
                assert!(e.degenerate || (norm - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn granularity_parsing() {
        for g in [Granularity::Topic, Granularity::Word, Granularity::Global] {
            assert_eq!(g.to_string().parse::<Granularity>().unwrap(), g);
            assert_eq!(Granularity::from_code(g.code()).unwrap(), g);
        }
        assert!("words".parse::<Granularity>().is_err());
    }
}
