//! Planted-topic corpus generator.
//!
//! Each topic owns a disjoint block of words (`t<topic>w<nnn>`); a shared pool
//! of filler words (`f<nnn>`) belongs to no topic. A document mixes 2–3
//! topics and, for each of them, leans on a handful of key words. A query is
//! built from key words of two of its source document's topics, and that
//! document is its only relevant answer.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_collection, write_qrels, write_triples, Collection, Judgments, TrainingSet, Triple};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub topics: usize,
    pub docs: usize,
    pub queries: usize,
    pub train_queries: usize,
    pub negatives: usize,
    pub seed: u64,
    pub topic_words: usize,
    pub filler_words: usize,
    /// Share of document tokens drawn from the filler pool.
    pub filler_fraction: f64,
    pub keys_per_topic: usize,
    /// Share of a topic's tokens drawn from the document's key words.
    pub key_fraction: f64,
    pub min_doc_len: usize,
    pub max_doc_len: usize,
}

impl SynthConfig {
    pub fn new(topics: usize, docs: usize, queries: usize, seed: u64) -> Self {
        SynthConfig {
            topics,
            docs,
            queries,
            train_queries: docs / 2,
            negatives: 3,
            seed,
            topic_words: 100,
            filler_words: 400,
            filler_fraction: 0.2,
            keys_per_topic: 5,
            key_fraction: 0.6,
            min_doc_len: 150,
            max_doc_len: 178,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::Config("synth needs at least 2 topics".into()));
        }
        if self.docs < self.negatives + 1 || self.docs < 1 {
            return Err(Error::Config("synth needs more documents than negatives".into()));
        }
        if self.keys_per_topic < 3 || self.keys_per_topic > self.topic_words {
            return Err(Error::Config("keys_per_topic must be between 3 and topic_words".into()));
        }
        if self.filler_words == 0 && self.filler_fraction > 0.0 {
            return Err(Error::Config("filler fraction without filler words".into()));
        }
        if !(0.0..1.0).contains(&self.filler_fraction) || !(0.0..=1.0).contains(&self.key_fraction) {
            return Err(Error::Config("fractions must lie in [0, 1)".into()));
        }
        if self.min_doc_len < 1 || self.min_doc_len > self.max_doc_len {
            return Err(Error::Config("bad document length range".into()));
        }
        Ok(())
    }
}

pub fn topic_word(topic: usize, i: usize) -> String {
    format!("t{topic}w{i:03}")
}

pub fn filler_word(i: usize) -> String {
    format!("f{i:03}")
}

/// Planted topic of a generated word, `None` for filler or foreign words.
pub fn planted_topic(word: &str) -> Option<usize> {
    let rest = word.strip_prefix('t')?;
    let (t, w) = rest.split_once('w')?;
    w.parse::<usize>().ok()?;
    t.parse().ok()
}

#[derive(Debug, Clone)]
pub struct PlantedDoc {
    pub topics: Vec<usize>,
    /// Key word indices per entry of `topics`.
    pub keys: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub collection: Collection,
    pub queries: Collection,
    pub qrels: Judgments,
    pub train_queries: Collection,
    pub triples: TrainingSet,
    pub planted: Vec<PlantedDoc>,
}

fn doc_id(i: usize) -> String {
    format!("d{i:05}")
}

fn make_doc(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (PlantedDoc, String) {
    let n_topics = rng.gen_range(2..=3).min(cfg.topics);
    let mut all: Vec<usize> = (0..cfg.topics).collect();
    all.shuffle(rng);
    let topics: Vec<usize> = all[..n_topics].to_vec();
    let weights: Vec<f64> = (0..n_topics).map(|_| rng.gen_range(1.0..2.0)).collect();
    let total: f64 = weights.iter().sum();
    let keys: Vec<Vec<usize>> = topics
        .iter()
        .map(|_| rand::seq::index::sample(rng, cfg.topic_words, cfg.keys_per_topic).into_vec())
        .collect();

    let len = rng.gen_range(cfg.min_doc_len..=cfg.max_doc_len);
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        if rng.gen::<f64>() < cfg.filler_fraction {
            words.push(filler_word(rng.gen_range(0..cfg.filler_words)));
            continue;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut slot = n_topics - 1;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                slot = j;
                break;
            }
            u -= w;
        }
        let w = if rng.gen::<f64>() < cfg.key_fraction {
            *keys[slot].choose(rng).unwrap()
        } else {
            rng.gen_range(0..cfg.topic_words)
        };
        words.push(topic_word(topics[slot], w));
    }
    (PlantedDoc { topics, keys }, words.join(" "))
}

fn make_query(doc: &PlantedDoc, rng: &mut ChaCha8Rng) -> String {
    let mut slots: Vec<usize> = (0..doc.topics.len()).collect();
    slots.shuffle(rng);
    let mut words = Vec::new();
    for &s in &slots[..2] {
        let n = rng.gen_range(2..=3);
        for &k in doc.keys[s].choose_multiple(rng, n) {
            words.push(topic_word(doc.topics[s], k));
        }
    }
    words.shuffle(rng);
    words.join(" ")
}

/// Negatives for `pos`: one uniform draw, the rest sharing a topic with it when possible.
fn negatives(cfg: &SynthConfig, planted: &[PlantedDoc], pos: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut chosen: Vec<usize> = Vec::with_capacity(cfg.negatives);
    let mut attempts = 0;
    while chosen.len() < cfg.negatives {
        let cand = rng.gen_range(0..planted.len());
        attempts += 1;
        if cand == pos || chosen.contains(&cand) {
            continue;
        }
        let shares = planted[cand].topics.iter().any(|t| planted[pos].topics.contains(t));
        if chosen.is_empty() || shares || attempts > 50 * cfg.negatives {
            chosen.push(cand);
        }
    }
    chosen.into_iter().map(doc_id).collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = seed::rng(seed::derive(cfg.seed, 0x5359_4e54));

    let mut collection = Collection::new();
    let mut planted = Vec::with_capacity(cfg.docs);
    for i in 0..cfg.docs {
        let (doc, text) = make_doc(cfg, &mut rng);
        collection.insert(doc_id(i), text)?;
        planted.push(doc);
    }

    let mut queries = Collection::new();
    let mut qrels = Judgments::new();
    let eval_docs = rand::seq::index::sample(&mut rng, cfg.docs, cfg.queries.min(cfg.docs)).into_vec();
    for (i, &d) in eval_docs.iter().enumerate() {
        let qid = format!("q{i:04}");
        queries.insert(qid.clone(), make_query(&planted[d], &mut rng))?;
        qrels.insert(&qid, &doc_id(d), 1)?;
    }

    let mut train_queries = Collection::new();
    let mut triples = TrainingSet::default();
    for i in 0..cfg.train_queries {
        let d = rng.gen_range(0..cfg.docs);
        let qid = format!("tq{i:05}");
        train_queries.insert(qid.clone(), make_query(&planted[d], &mut rng))?;
        triples.triples.push(Triple {
            query_id: qid,
            positive: doc_id(d),
            negatives: negatives(cfg, &planted, d, &mut rng),
        });
    }

    Ok(SynthCorpus {
        collection,
        queries,
        qrels,
        train_queries,
        triples,
        planted,
    })
}

pub const COLLECTION_FILE: &str = "collection.tsv";
pub const QUERIES_FILE: &str = "queries.tsv";
pub const QRELS_FILE: &str = "qrels.txt";
pub const TRAIN_QUERIES_FILE: &str = "train_queries.tsv";
pub const TRIPLES_FILE: &str = "triples.tsv";

impl SynthCorpus {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            (COLLECTION_FILE, write_collection(&self.collection)),
            (QUERIES_FILE, write_collection(&self.queries)),
            (QRELS_FILE, write_qrels(&self.qrels)),
            (TRAIN_QUERIES_FILE, write_collection(&self.train_queries)),
            (TRIPLES_FILE, write_triples(&self.triples)),
        ];
        for (name, content) in files {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::normalize_words;

    #[test]
    fn deterministic_and_well_formed() {
        let cfg = SynthConfig::new(4, 60, 10, 3);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.collection, b.collection);
        assert_eq!(a.triples, b.triples);
        assert_eq!(a.queries.len(), 10);
        assert_eq!(a.triples.negatives_per_query(), Some(3));
        for (_, text) in a.collection.iter() {
            let n = normalize_words(text).count();
            assert!((150..=178).contains(&n));
        }
        for t in &a.triples.triples {
            assert!(!t.negatives.contains(&t.positive));
        }
        assert_ne!(generate(&SynthConfig::new(4, 60, 10, 4)).unwrap().collection, a.collection);
    }

    #[test]
    fn query_words_come_from_the_relevant_document() {
        let c = generate(&SynthConfig::new(6, 40, 20, 1)).unwrap();
        for qid in c.queries.iter().map(|(q, _)| q) {
            let doc = c.qrels.relevant(qid).into_iter().next().unwrap();
            let index: usize = doc[1..].parse().unwrap();
            let planted = &c.planted[index];
            let mut seen = std::collections::BTreeSet::new();
            for w in normalize_words(c.queries.get(qid).unwrap()) {
                let t = planted_topic(&w).unwrap();
                let slot = planted.topics.iter().position(|&x| x == t).unwrap();
                let k: usize = w.split_once('w').unwrap().1.parse().unwrap();
                assert!(planted.keys[slot].contains(&k));
                seen.insert(t);
            }
            assert_eq!(seen.len(), 2);
        }
    }

    #[test]
    fn planted_topic_parses_names() {
        assert_eq!(planted_topic(&topic_word(3, 17)), Some(3));
        assert_eq!(planted_topic(&filler_word(3)), None);
        assert_eq!(planted_topic("two"), None);
    }
}
