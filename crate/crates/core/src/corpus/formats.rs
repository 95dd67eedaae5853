//! Line-oriented input formats.
//!
//! * collection / queries: `<id>\t<text>`
//! * qrels: `<qid> 0 <docid> <rel>` (whitespace separated, TREC)
//! * triples: `<qid>\t<pos>\t<neg_1>\t...\t<neg_m>`

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

/// Id → raw text, in file order. Used for both documents and queries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Collection {
    texts: IndexMap<String, String>,
}

impl Collection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, text: impl Into<String>) -> Result<()> {
        let id = id.into();
        if self.texts.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.texts.insert(id, text.into());
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.texts.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.texts.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.texts.values().map(String::as_str)
    }
}

pub fn parse_collection(source: &str, content: &str) -> Result<Collection> {
    let mut out = Collection::new();
    for (i, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(source, i + 1, "expected `<id>\\t<text>`"))?;
        if id.is_empty() {
            return Err(parse_err(source, i + 1, "empty id"));
        }
        out.insert(id, text)?;
    }
    Ok(out)
}

pub fn ingest_collection(path: &Path) -> Result<Collection> {
    parse_collection(&path.display().to_string(), &read(path)?)
}

pub fn write_collection(c: &Collection) -> String {
    let mut out = String::new();
    for (id, text) in c.iter() {
        let _ = writeln!(out, "{id}\t{text}");
    }
    out
}

/// Graded relevance judgments, query order preserved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Judgments {
    grades: IndexMap<String, IndexMap<String, i32>>,
}

impl Judgments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: &str, docid: &str, grade: i32) -> Result<()> {
        if qid.is_empty() || docid.is_empty() {
            return Err(Error::Format("judgment ids must be non-empty".into()));
        }
        let docs = self.grades.entry(qid.to_string()).or_default();
        if docs.contains_key(docid) {
            return Err(Error::DuplicateId(format!("{qid}/{docid}")));
        }
        docs.insert(docid.to_string(), grade);
        Ok(())
    }

    /// Doc ids with grade ≥ 1.
    pub fn relevant(&self, qid: &str) -> HashSet<&str> {
        self.grades
            .get(qid)
            .map(|docs| {
                docs.iter()
                    .filter(|(_, &g)| g >= 1)
                    .map(|(d, _)| d.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn contains_query(&self, qid: &str) -> bool {
        self.grades.contains_key(qid)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

pub fn parse_qrels(source: &str, content: &str) -> Result<Judgments> {
    let mut out = Judgments::new();
    for (i, line) in content.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(source, i + 1, "expected `<qid> 0 <docid> <rel>`"));
        }
        let grade: i32 = fields[3]
            .parse()
            .map_err(|_| parse_err(source, i + 1, format!("bad relevance `{}`", fields[3])))?;
        out.insert(fields[0], fields[2], grade)?;
    }
    Ok(out)
}

pub fn ingest_qrels(path: &Path) -> Result<Judgments> {
    parse_qrels(&path.display().to_string(), &read(path)?)
}

pub fn write_qrels(j: &Judgments) -> String {
    let mut out = String::new();
    for (qid, docs) in &j.grades {
        for (docid, grade) in docs {
            let _ = writeln!(out, "{qid} 0 {docid} {grade}");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub query_id: String,
    pub positive: String,
    pub negatives: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingSet {
    pub triples: Vec<Triple>,
}

impl TrainingSet {
    /// Negatives per query; constant across the set.
    pub fn negatives_per_query(&self) -> Option<usize> {
        self.triples.first().map(|t| t.negatives.len())
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

pub fn parse_triples(source: &str, content: &str) -> Result<TrainingSet> {
    let mut triples: Vec<Triple> = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(parse_err(source, i + 1, "expected `<qid>\\t<pos>\\t<neg>...`"));
        }
        let triple = Triple {
            query_id: fields[0].to_string(),
            positive: fields[1].to_string(),
            negatives: fields[2..].iter().map(|s| s.to_string()).collect(),
        };
        if triple.negatives.contains(&triple.positive) {
            return Err(parse_err(source, i + 1, "positive listed among negatives"));
        }
        if let Some(first) = triples.first() {
            if first.negatives.len() != triple.negatives.len() {
                return Err(parse_err(
                    source,
                    i + 1,
                    format!("expected {} negatives", first.negatives.len()),
                ));
            }
        }
        triples.push(triple);
    }
    Ok(TrainingSet { triples })
}

pub fn ingest_triples(path: &Path) -> Result<TrainingSet> {
    parse_triples(&path.display().to_string(), &read(path)?)
}

pub fn write_triples(t: &TrainingSet) -> String {
    let mut out = String::new();
    for triple in &t.triples {
        let _ = write!(out, "{}\t{}", triple.query_id, triple.positive);
        for n in &triple.negatives {
            let _ = write!(out, "\t{n}");
        }
        out.push('\n');
    }
    out
}
