//! Offline store of quantized document representations.
//!
//! File layout (little-endian): `TGIX`, version u32, dim u16, scheme u8,
//! granularity u8, doc count u64, 32-byte fingerprint; then per document:
//! id length u16 + UTF-8 id, N u16, N topic ids u16 (`0xFFFF` = none),
//! for U8 the N (scale, offset) f32 pairs, then N × dim quantized values.

mod quant;

use std::path::Path;

use rayon::prelude::*;

use crate::binio::{Reader, Writer};
use crate::config::Fingerprint;
use crate::corpus::{Collection, TextKind};
use crate::encoder::{EncoderParams, Embedding, Granularity, Pipeline, Representation};
use crate::error::{Error, Result};

pub use quant::{dequantize, quantize, Affine, QuantScheme, Quantized};

const MAGIC: &[u8; 4] = b"TGIX";
const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 4 + 4 + 2 + 1 + 1 + 8 + 32;
pub const NO_TOPIC: u16 = 0xFFFF;
pub const GIB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexHeader {
    pub dim: usize,
    pub scheme: QuantScheme,
    pub granularity: Granularity,
    pub count: u64,
    pub fingerprint: Fingerprint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRecord {
    pub doc_id: String,
    pub topics: Vec<Option<u16>>,
    /// Dequantized vectors, `topics.len() × dim`, row-major.
    pub vectors: Vec<f32>,
}

impl IndexRecord {
    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn vector(&self, i: usize, dim: usize) -> &[f32] {
        &self.vectors[i * dim..(i + 1) * dim]
    }
}

/// Byte accounting of an index file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceStats {
    /// Quantized values plus U8 scale/offset pairs.
    pub payload_bytes: u64,
    /// File header and per-record ids, counts and topic ids.
    pub metadata_bytes: u64,
    pub total_bytes: u64,
    pub embeddings_stored: u64,
    pub docs: u64,
    pub mean_entries: f64,
}

impl SpaceStats {
    pub fn total_gib(&self) -> f64 {
        self.total_bytes as f64 / GIB
    }

    pub fn payload_gib(&self) -> f64 {
        self.payload_bytes as f64 / GIB
    }

    /// `key\tvalue` lines.
    pub fn to_tsv(&self) -> String {
        format!(
            "payload_bytes\t{}\nmetadata_bytes\t{}\ntotal_bytes\t{}\ntotal_gib\t{:.9}\nembeddings_stored\t{}\ndocs\t{}\nmean_entries\t{:.4}\n",
            self.payload_bytes,
            self.metadata_bytes,
            self.total_bytes,
            self.total_gib(),
            self.embeddings_stored,
            self.docs,
            self.mean_entries
        )
    }
}

fn record_bytes(id: &str, n: usize, dim: usize, scheme: QuantScheme) -> (u64, u64) {
    let payload = n * (dim * scheme.bytes_per_dim() + scheme.side_bytes());
    let meta = 2 + id.len() + 2 + 2 * n;
    (payload as u64, meta as u64)
}

fn stats_for<'a>(records: impl Iterator<Item = (&'a str, usize)>, dim: usize, scheme: QuantScheme) -> SpaceStats {
    let mut s = SpaceStats {
        payload_bytes: 0,
        metadata_bytes: HEADER_BYTES as u64,
        total_bytes: 0,
        embeddings_stored: 0,
        docs: 0,
        mean_entries: 0.0,
    };
    for (id, n) in records {
        let (p, m) = record_bytes(id, n, dim, scheme);
        s.payload_bytes += p;
        s.metadata_bytes += m;
        s.embeddings_stored += n as u64;
        s.docs += 1;
    }
    s.total_bytes = s.payload_bytes + s.metadata_bytes;
    s.mean_entries = if s.docs == 0 { 0.0 } else { s.embeddings_stored as f64 / s.docs as f64 };
    s
}

/// Loaded, immutable index with every vector dequantized in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationIndex {
    pub header: IndexHeader,
    pub records: Vec<IndexRecord>,
    stats: SpaceStats,
}

/// Serializes representations into TGIX bytes.
pub fn encode_index(
    reps: &[Representation],
    dim: usize,
    scheme: QuantScheme,
    granularity: Granularity,
    fingerprint: Fingerprint,
) -> Result<Vec<u8>> {
    if dim == 0 || dim > u16::MAX as usize {
        return Err(Error::Shape(format!("dim {dim} does not fit the index header")));
    }
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u16(dim as u16);
    w.u8(scheme.code());
    w.u8(granularity.code());
    w.u64(reps.len() as u64);
    w.bytes(&fingerprint.0);
    for rep in reps {
        if rep.dim != dim || rep.entries.iter().any(|e| e.vector.len() != dim) {
            return Err(Error::Shape(format!("`{}` is not {dim}-dimensional", rep.text_id)));
        }
        if rep.text_id.len() > u16::MAX as usize || rep.entries.len() > u16::MAX as usize {
            return Err(Error::Shape(format!("`{}` is too large for the record format", rep.text_id)));
        }
        w.u16(rep.text_id.len() as u16);
        w.bytes(rep.text_id.as_bytes());
        w.u16(rep.entries.len() as u16);
        for e in &rep.entries {
            w.u16(e.topic.unwrap_or(NO_TOPIC));
        }
        let quantized: Vec<Quantized> = rep
            .entries
            .iter()
            .map(|e| quantize(&e.vector, scheme))
            .collect::<Result<_>>()?;
        for q in &quantized {
            if let Some(a) = q.affine {
                w.f32(a.scale);
                w.f32(a.offset);
            }
        }
        for q in &quantized {
            w.bytes(&q.codes);
        }
    }
    Ok(w.into_inner())
}

impl RepresentationIndex {
    pub fn from_representations(
        reps: &[Representation],
        dim: usize,
        scheme: QuantScheme,
        granularity: Granularity,
        fingerprint: Fingerprint,
    ) -> Result<Self> {
        Self::from_bytes(&encode_index(reps, dim, scheme, granularity, fingerprint)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported TGIX version {version}")));
        }
        let dim = r.u16()? as usize;
        let scheme = QuantScheme::from_code(r.u8()?)?;
        let granularity = Granularity::from_code(r.u8()?)?;
        let count = r.u64()?;
        let fingerprint = Fingerprint(r.take(32)?.try_into().expect("32 bytes"));
        if dim == 0 {
            return Err(Error::Format("zero dimension".into()));
        }

        let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
        let value_bytes = dim * scheme.bytes_per_dim();
        for _ in 0..count {
            let id_len = r.u16()? as usize;
            let doc_id = std::str::from_utf8(r.take(id_len)?)
                .map_err(|_| Error::Format("document id is not UTF-8".into()))?
                .to_string();
            let n = r.u16()? as usize;
            let mut topics = Vec::with_capacity(n);
            for _ in 0..n {
                let t = r.u16()?;
                topics.push((t != NO_TOPIC).then_some(t));
            }
            let mut affines = Vec::new();
            if scheme == QuantScheme::U8 {
                for _ in 0..n {
                    affines.push(Some(Affine {
                        scale: r.f32()?,
                        offset: r.f32()?,
                    }));
                }
            } else {
                affines.resize(n, None);
            }
            let mut vectors = Vec::with_capacity(n * dim);
            for affine in affines {
                let q = Quantized {
                    codes: r.take(value_bytes)?.to_vec(),
                    affine,
                };
                vectors.extend(dequantize(&q, scheme)?);
            }
            records.push(IndexRecord {
                doc_id,
                topics,
                vectors,
            });
        }
        r.finish()?;

        let stats = stats_for(records.iter().map(|r| (r.doc_id.as_str(), r.len())), dim, scheme);
        if stats.total_bytes != bytes.len() as u64 {
            return Err(Error::Format(format!(
                "space accounting ({} bytes) disagrees with file size ({})",
                stats.total_bytes,
                bytes.len()
            )));
        }
        Ok(RepresentationIndex {
            header: IndexHeader {
                dim,
                scheme,
                granularity,
                count,
                fingerprint,
            },
            records,
            stats,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn dim(&self) -> usize {
        self.header.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn space_report(&self) -> SpaceStats {
        self.stats
    }

    /// Records as representations (dequantized vectors).
    pub fn representation(&self, i: usize) -> Representation {
        let rec = &self.records[i];
        let dim = self.dim();
        Representation {
            text_id: rec.doc_id.clone(),
            granularity: self.header.granularity,
            dim,
            entries: rec
                .topics
                .iter()
                .enumerate()
                .map(|(j, &topic)| {
                    let vector = rec.vector(j, dim).to_vec();
                    Embedding {
                        topic,
                        degenerate: vector.iter().all(|&x| x == 0.0),
                        vector,
                    }
                })
                .collect(),
        }
    }
}

/// Stats of the representations before serialization; equals the loaded index's stats.
pub fn expected_space(reps: &[Representation], dim: usize, scheme: QuantScheme) -> SpaceStats {
    stats_for(reps.iter().map(|r| (r.text_id.as_str(), r.len())), dim, scheme)
}

/// Encodes every document of a collection in collection order.
pub fn encode_collection(
    docs: &Collection,
    pipeline: &Pipeline,
    params: &EncoderParams,
    granularity: Granularity,
    normalize: bool,
) -> Result<Vec<Representation>> {
    let items: Vec<(&str, &str)> = docs.iter().collect();
    items
        .into_par_iter()
        .map(|(id, raw)| pipeline.encode_text(params, id, raw, TextKind::Document, granularity, normalize))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct IndexOptions {
    pub scheme: QuantScheme,
    pub granularity: Granularity,
    pub normalize: bool,
}

/// Encodes, quantizes and writes a collection; returns the reloaded index.
pub fn build_index(
    docs: &Collection,
    pipeline: &Pipeline,
    checkpoint: &crate::trainer::Checkpoint,
    expected: Fingerprint,
    options: IndexOptions,
    out_path: &Path,
) -> Result<RepresentationIndex> {
    if checkpoint.fingerprint != expected {
        return Err(Error::IncompatibleArtifacts(format!(
            "checkpoint fingerprint {} does not match configuration {}",
            checkpoint.fingerprint, expected
        )));
    }
    pipeline.check_params(&checkpoint.params)?;
    let reps = encode_collection(docs, pipeline, &checkpoint.params, options.granularity, options.normalize)?;
    let bytes = encode_index(&reps, checkpoint.params.shape.dim, options.scheme, options.granularity, expected)?;
    std::fs::write(out_path, &bytes).map_err(|e| Error::io(out_path, e))?;
    RepresentationIndex::from_bytes(&bytes)
}
