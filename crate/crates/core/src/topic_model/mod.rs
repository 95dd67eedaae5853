//! Latent Dirichlet allocation fitted with collapsed Gibbs sampling, fold-in
//! inference for unseen texts, and the per-text word→topic table that decides
//! which words feed which topic bucket.

mod extract;
mod io;

use rand::Rng;

use crate::corpus::{TokenSeq, Vocab};
use crate::error::{Error, Result};
use crate::seed;

pub use extract::{extract_word_topics, TopicAssignmentTable, TopicExtractionConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub num_topics: usize,
    pub alpha: f64,
    pub eta: f64,
    pub train_iters: usize,
    pub infer_iters: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// `alpha = eta = 1/K`.
    pub fn new(num_topics: usize) -> Self {
        let prior = 1.0 / num_topics as f64;
        LdaConfig {
            num_topics,
            alpha: prior,
            eta: prior,
            train_iters: 200,
            infer_iters: 50,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_topics < 2 {
            return Err(Error::Config("need at least 2 topics".into()));
        }
        if self.num_topics > u16::MAX as usize - 1 {
            return Err(Error::Config("too many topics".into()));
        }
        if !(self.alpha > 0.0 && self.eta > 0.0) {
            return Err(Error::Config("alpha and eta must be positive".into()));
        }
        Ok(())
    }
}

/// Topic proportions of one text.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution {
    pub probs: Vec<f64>,
    /// Set when the text had no usable words and `probs` is the uniform fallback.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub(crate) config: LdaConfig,
    vocab_size: usize,
    /// K × V, row-major.
    topic_word: Vec<f64>,
    /// D × K, row-major.
    doc_topic: Vec<f64>,
    num_docs: usize,
}

/// Word ids of a sequence that take part in topic modelling.
fn topic_words(seq: &TokenSeq) -> impl Iterator<Item = u32> + '_ {
    seq.tokens[seq.word_positions()]
        .iter()
        .copied()
        .filter(|&t| !Vocab::is_special(t))
}

/// Draws an index from unnormalized weights given their running sum.
fn sample(rng: &mut impl Rng, cumulative: &[f64]) -> usize {
    let total = *cumulative.last().expect("at least one topic");
    let u = rng.gen::<f64>() * total;
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

pub fn fit_lda(docs: &[TokenSeq], vocab_size: usize, config: &LdaConfig) -> Result<LdaModel> {
    config.validate()?;
    let k = config.num_topics;
    let words: Vec<Vec<u32>> = docs.iter().map(|d| topic_words(d).collect()).collect();
    if words.iter().all(Vec::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    if let Some(&w) = words.iter().flatten().find(|&&w| w as usize >= vocab_size) {
        return Err(Error::Shape(format!("token {w} outside vocabulary of {vocab_size}")));
    }

    let mut rng = seed::rng(config.seed);
    let mut topic_word_counts = vec![0u32; k * vocab_size];
    let mut topic_counts = vec![0u32; k];
    let mut doc_topic_counts = vec![0u32; docs.len() * k];
    let mut assignments: Vec<Vec<u16>> = Vec::with_capacity(docs.len());

    for (d, doc) in words.iter().enumerate() {
        let z: Vec<u16> = doc.iter().map(|_| rng.gen_range(0..k) as u16).collect();
        for (&w, &t) in doc.iter().zip(&z) {
            let t = t as usize;
            topic_word_counts[t * vocab_size + w as usize] += 1;
            topic_counts[t] += 1;
            doc_topic_counts[d * k + t] += 1;
        }
        assignments.push(z);
    }

    let v_eta = vocab_size as f64 * config.eta;
    let mut cumulative = vec![0.0; k];
    for _ in 0..config.train_iters {
        for (d, doc) in words.iter().enumerate() {
            let dt = &mut doc_topic_counts[d * k..(d + 1) * k];
            for (&w, z) in doc.iter().zip(assignments[d].iter_mut()) {
                let w = w as usize;
                let old = *z as usize;
                topic_word_counts[old * vocab_size + w] -= 1;
                topic_counts[old] -= 1;
                dt[old] -= 1;

                let mut acc = 0.0;
                for t in 0..k {
                    acc += (dt[t] as f64 + config.alpha)
                        * (topic_word_counts[t * vocab_size + w] as f64 + config.eta)
                        / (topic_counts[t] as f64 + v_eta);
                    cumulative[t] = acc;
                }
                let new = sample(&mut rng, &cumulative);
                *z = new as u16;
                topic_word_counts[new * vocab_size + w] += 1;
                topic_counts[new] += 1;
                dt[new] += 1;
            }
        }
    }

    let mut topic_word = vec![0.0; k * vocab_size];
    for t in 0..k {
        let denom = topic_counts[t] as f64 + v_eta;
        for w in 0..vocab_size {
            topic_word[t * vocab_size + w] =
                (topic_word_counts[t * vocab_size + w] as f64 + config.eta) / denom;
        }
    }
    let k_alpha = k as f64 * config.alpha;
    let mut doc_topic = vec![0.0; docs.len() * k];
    for (d, doc) in words.iter().enumerate() {
        let denom = doc.len() as f64 + k_alpha;
        for t in 0..k {
            doc_topic[d * k + t] = (doc_topic_counts[d * k + t] as f64 + config.alpha) / denom;
        }
    }

    Ok(LdaModel {
        config: config.clone(),
        vocab_size,
        topic_word,
        doc_topic,
        num_docs: docs.len(),
    })
}

impl LdaModel {
    pub fn config(&self) -> &LdaConfig {
        &self.config
    }

    pub fn num_topics(&self) -> usize {
        self.config.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn topic_word_row(&self, topic: usize) -> &[f64] {
        &self.topic_word[topic * self.vocab_size..(topic + 1) * self.vocab_size]
    }

    pub fn topic_word(&self, topic: usize, word: u32) -> f64 {
        self.topic_word[topic * self.vocab_size + word as usize]
    }

    pub fn doc_topic_row(&self, doc: usize) -> &[f64] {
        let k = self.num_topics();
        &self.doc_topic[doc * k..(doc + 1) * k]
    }

    /// Fold-in Gibbs sampling with the topic-word distributions held fixed.
    ///
    /// The sampler is seeded from the model seed and a hash of the text id, so
    /// a text always gets the same distribution. Proportions are averaged over
    /// the second half of the sweeps and smoothed by `alpha`.
    pub fn infer_doc_topics(&self, text: &TokenSeq) -> TopicDistribution {
        let k = self.num_topics();
        let words: Vec<u32> = topic_words(text)
            .filter(|&w| (w as usize) < self.vocab_size)
            .collect();
        if words.is_empty() {
            return TopicDistribution {
                probs: vec![1.0 / k as f64; k],
                degenerate: true,
            };
        }

        let mut rng = seed::rng(seed::derive(self.config.seed, seed::hash_str(&text.text_id)));
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = words
            .iter()
            .map(|_| {
                let t = rng.gen_range(0..k);
                counts[t] += 1;
                t
            })
            .collect();

        let sweeps = self.config.infer_iters.max(1);
        let burn_in = sweeps / 2;
        let mut accumulated = vec![0.0; k];
        let mut cumulative = vec![0.0; k];
        for sweep in 0..sweeps {
            for (&w, zi) in words.iter().zip(z.iter_mut()) {
                counts[*zi] -= 1;
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (counts[t] as f64 + self.config.alpha) * self.topic_word(t, w);
                    cumulative[t] = acc;
                }
                *zi = sample(&mut rng, &cumulative);
                counts[*zi] += 1;
            }
            if sweep >= burn_in {
                for (a, &c) in accumulated.iter_mut().zip(&counts) {
                    *a += c as f64;
                }
            }
        }

        let samples = (sweeps - burn_in) as f64;
        let denom = words.len() as f64 + k as f64 * self.config.alpha;
        let mut probs: Vec<f64> = accumulated
            .iter()
            .map(|&a| (a / samples + self.config.alpha) / denom)
            .collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        TopicDistribution {
            probs,
            degenerate: false,
        }
    }
}
