use crate::error::{Error, Result};

use super::vocab::{Vocab, CLS, D_MARK, Q_MARK, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextKind {
    Query,
    Document,
}

/// A tokenized, prefixed and truncated text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub text_id: String,
    pub tokens: Vec<u32>,
    pub kind: TextKind,
}

impl TokenSeq {
    /// Number of leading marker tokens (`[CLS]` plus `[Q]`/`[D]`).
    pub const PREFIX_LEN: usize = 2;

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Positions that carry text words (everything after the prefix, `[UNK]` included).
    pub fn word_positions(&self) -> std::ops::Range<usize> {
        Self::PREFIX_LEN.min(self.tokens.len())..self.tokens.len()
    }
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn normalize_words(raw: &str) -> impl Iterator<Item = String> + '_ {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    vocab: Vocab,
    max_query_len: usize,
    max_doc_len: usize,
}

impl Tokenizer {
    pub fn new(vocab: Vocab, max_query_len: usize, max_doc_len: usize) -> Result<Self> {
        if max_query_len <= TokenSeq::PREFIX_LEN || max_doc_len <= TokenSeq::PREFIX_LEN {
            return Err(Error::Config(format!(
                "max lengths must exceed the {}-token prefix",
                TokenSeq::PREFIX_LEN
            )));
        }
        Ok(Tokenizer {
            vocab,
            max_query_len,
            max_doc_len,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn max_len(&self, kind: TextKind) -> usize {
        match kind {
            TextKind::Query => self.max_query_len,
            TextKind::Document => self.max_doc_len,
        }
    }

    pub fn tokenize(&self, text_id: &str, raw: &str, kind: TextKind) -> Result<TokenSeq> {
        let marker = match kind {
            TextKind::Query => Q_MARK,
            TextKind::Document => D_MARK,
        };
        let max_len = self.max_len(kind);
        let mut tokens = vec![CLS, marker];
        let mut saw_word = false;
        for word in normalize_words(raw) {
            saw_word = true;
            if tokens.len() == max_len {
                break;
            }
            tokens.push(self.vocab.index_of(&word).unwrap_or(UNK));
        }
        if !saw_word {
            return Err(Error::EmptyText);
        }
        Ok(TokenSeq {
            text_id: text_id.to_string(),
            tokens,
            kind,
        })
    }

    /// Space-joined words of a sequence, without its prefix.
    pub fn detokenize(&self, seq: &TokenSeq) -> String {
        seq.tokens[seq.word_positions()]
            .iter()
            .map(|&t| self.vocab.token(t))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn tokenizer(texts: &[&str]) -> Tokenizer {
        Tokenizer::new(build_vocab(texts.iter().copied(), 1).unwrap(), 32, 180).unwrap()
    }

    #[test]
    fn prefixes_and_lowercases() {
        let tok = tokenizer(&["hello world"]);
        let seq = tok.tokenize("d", "Hello, world", TextKind::Document).unwrap();
        let v = tok.vocab();
        assert_eq!(
            seq.tokens,
            vec![CLS, D_MARK, v.index_of("hello").unwrap(), v.index_of("world").unwrap()]
        );
        let q = tok.tokenize("q", "hello", TextKind::Query).unwrap();
        assert_eq!(q.tokens[..2], [CLS, Q_MARK]);
    }

    #[test]
    fn truncates_to_max_len_including_prefix() {
        let tok = tokenizer(&["w"]);
        let text = vec!["w"; 100].join(" ");
        assert_eq!(tok.tokenize("q", &text, TextKind::Query).unwrap().len(), 32);
        assert_eq!(tok.tokenize("d", &text, TextKind::Document).unwrap().len(), 102);
    }

    #[test]
    fn empty_text_is_rejected() {
        let tok = tokenizer(&["a"]);
        assert!(matches!(tok.tokenize("x", "", TextKind::Query), Err(Error::EmptyText)));
        assert!(matches!(tok.tokenize("x", " ,;! ", TextKind::Query), Err(Error::EmptyText)));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let tok = tokenizer(&["known"]);
        let seq = tok.tokenize("q", "known unknown", TextKind::Query).unwrap();
        assert_eq!(seq.tokens[3], UNK);
    }

    #[test]
    fn detokenize_round_trips_in_vocab_text() {
        let tok = tokenizer(&["alpha beta gamma"]);
        let seq = tok.tokenize("d", "Gamma; ALPHA beta", TextKind::Document).unwrap();
        let again = tok.tokenize("d", &tok.detokenize(&seq), TextKind::Document).unwrap();
        assert_eq!(seq, again);
    }
}
