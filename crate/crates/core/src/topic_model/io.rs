//! `TGLD` model files: magic, version, K, V, alpha, eta, seed, sweep counts,
//! D, then topic-word (K×V) and doc-topic (D×K) as little-endian f64.

use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

use super::{LdaConfig, LdaModel};

const MAGIC: &[u8; 4] = b"TGLD";
const VERSION: u32 = 1;

impl LdaModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u32(self.config.num_topics as u32);
        w.u32(self.vocab_size as u32);
        w.f64(self.config.alpha);
        w.f64(self.config.eta);
        w.u64(self.config.seed);
        w.u32(self.config.train_iters as u32);
        w.u32(self.config.infer_iters as u32);
        w.u64(self.num_docs as u64);
        self.topic_word.iter().for_each(|&x| w.f64(x));
        self.doc_topic.iter().for_each(|&x| w.f64(x));
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported TGLD version {version}")));
        }
        let num_topics = r.u32()? as usize;
        let vocab_size = r.u32()? as usize;
        let config = LdaConfig {
            num_topics,
            alpha: r.f64()?,
            eta: r.f64()?,
            seed: r.u64()?,
            train_iters: r.u32()? as usize,
            infer_iters: r.u32()? as usize,
        };
        config.validate().map_err(|e| Error::Format(e.to_string()))?;
        let num_docs = r.u64()? as usize;
        let topic_word = r.f64_vec(num_topics * vocab_size)?;
        let doc_topic = r.f64_vec(num_docs * num_topics)?;
        r.finish()?;
        Ok(LdaModel {
            config,
            vocab_size,
            topic_word,
            doc_topic,
            num_docs,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
