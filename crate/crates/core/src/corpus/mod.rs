//! Text ingestion: tokenization, vocabulary construction and the TSV/TREC
//! container formats (collections, queries, qrels, training triples, runs).

mod formats;
mod tokenize;
mod vocab;

pub use formats::{
    ingest_collection, ingest_qrels, ingest_triples, parse_collection, parse_qrels, parse_triples,
    write_collection, write_qrels, write_triples, Collection, Judgments, Triple, TrainingSet,
};
pub use tokenize::{normalize_words, TextKind, TokenSeq, Tokenizer};
pub use vocab::{build_vocab, Vocab, CLS, D_MARK, NUM_SPECIALS, PAD, Q_MARK, UNK};
