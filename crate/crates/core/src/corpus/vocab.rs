use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

use super::tokenize::normalize_words;

pub const PAD: u32 = 0;
pub const CLS: u32 = 1;
pub const Q_MARK: u32 = 2;
pub const D_MARK: u32 = 3;
pub const UNK: u32 = 4;
pub const NUM_SPECIALS: u32 = 5;

const SPECIAL_TOKENS: [&str; NUM_SPECIALS as usize] = ["[PAD]", "[CLS]", "[Q]", "[D]", "[UNK]"];

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    token: String,
    freq: u64,
    doc_freq: u64,
}

/// Word-level vocabulary. Indices `0..NUM_SPECIALS` are the reserved specials,
/// the rest are ordered by descending corpus frequency, ties lexicographic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<Entry>,
    lookup: HashMap<String, u32>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.lookup.get(token).copied()
    }

    pub fn token(&self, index: u32) -> &str {
        &self.entries[index as usize].token
    }

    pub fn doc_freq(&self, index: u32) -> u64 {
        self.entries[index as usize].doc_freq
    }

    pub fn freq(&self, index: u32) -> u64 {
        self.entries[index as usize].freq
    }

    /// True for tokens that never take part in topic modelling: the specials and `[UNK]`.
    pub fn is_special(index: u32) -> bool {
        index < NUM_SPECIALS
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.token.as_str())
    }

    /// `token\tfreq\tdoc_freq` per line, in index order, specials included.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}\t{}\t{}\n", e.token, e.freq, e.doc_freq));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Format(format!("vocab line {}: `{line}`", i + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            entries.push(Entry {
                token: fields[0].to_string(),
                freq: fields[1].parse().map_err(|_| bad())?,
                doc_freq: fields[2].parse().map_err(|_| bad())?,
            });
        }
        if entries.len() < NUM_SPECIALS as usize
            || entries.iter().zip(SPECIAL_TOKENS).any(|(e, s)| e.token != s)
        {
            return Err(Error::Format("vocab does not start with the special tokens".into()));
        }
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<Entry>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if lookup.insert(e.token.clone(), i as u32).is_some() {
                return Err(Error::DuplicateId(e.token.clone()));
            }
        }
        Ok(Vocab { entries, lookup })
    }
}

pub fn build_vocab<'a>(corpus: impl IntoIterator<Item = &'a str>, min_count: u64) -> Result<Vocab> {
    if min_count < 1 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, (u64, u64)> = HashMap::new();
    let mut any = false;
    for text in corpus {
        let mut seen = HashSet::new();
        for word in normalize_words(text) {
            any = true;
            let c = counts.entry(word.clone()).or_default();
            c.0 += 1;
            if seen.insert(word) {
                c.1 += 1;
            }
        }
    }
    if !any {
        return Err(Error::EmptyCorpus);
    }
    let mut words: Vec<(String, u64, u64)> = counts
        .into_iter()
        .filter(|(_, (f, _))| *f >= min_count)
        .map(|(w, (f, df))| (w, f, df))
        .collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let entries = SPECIAL_TOKENS
        .iter()
        .map(|s| Entry {
            token: s.to_string(),
            freq: 0,
            doc_freq: 0,
        })
        .chain(words.into_iter().map(|(token, freq, doc_freq)| Entry {
            token,
            freq,
            doc_freq,
        }))
        .collect();
    Vocab::from_entries(entries)
}
