use std::collections::BTreeSet;

use crate::corpus::{TokenSeq, Vocab};
use crate::error::{Error, Result};

use super::LdaModel;

/// Thresholds for picking representative topics and the words that carry them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopicExtractionConfig {
    /// Minimum topic proportion for a topic to be representative.
    pub theta_t: f64,
    /// A word passes if its topic-word probability reaches this.
    pub theta_wf: f64,
    /// ...or if its rank among the text's words divided by their count is at most this.
    pub theta_wr: f64,
}

impl Default for TopicExtractionConfig {
    fn default() -> Self {
        TopicExtractionConfig {
            theta_t: 0.15,
            theta_wf: 0.005,
            theta_wr: 0.2,
        }
    }
}

impl TopicExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        // theta_t may exceed 1 to switch topic selection off entirely
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(self.theta_t) && (0.0..=1.0).contains(&self.theta_wf) && (0.0..=1.0).contains(&self.theta_wr)) {
            return Err(Error::Config(format!("bad extraction thresholds {self:?}")));
        }
        Ok(())
    }
}

/// Per-position sorted topic lists for one text. Empty lists mark words that
/// are dropped after contributing context.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TopicAssignmentTable {
    pub positions: Vec<Vec<u16>>,
}

impl TopicAssignmentTable {
    pub fn empty(len: usize) -> Self {
        TopicAssignmentTable {
            positions: vec![Vec::new(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn topics(&self) -> BTreeSet<u16> {
        self.positions.iter().flatten().copied().collect()
    }

    pub fn total_assignments(&self) -> usize {
        self.positions.iter().map(Vec::len).sum()
    }
}

pub fn extract_word_topics(
    model: &LdaModel,
    text: &TokenSeq,
    topic_dist: &[f64],
    cfg: &TopicExtractionConfig,
) -> TopicAssignmentTable {
    let mut table = TopicAssignmentTable::empty(text.len());
    let mut distinct: Vec<u32> = text.tokens[text.word_positions()]
        .iter()
        .copied()
        .filter(|&w| !Vocab::is_special(w) && (w as usize) < model.vocab_size())
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.is_empty() {
        return table;
    }
    let l = distinct.len() as f64;

    // word id -> topics, built in ascending topic order so lists come out sorted
    let mut assigned: Vec<Vec<u16>> = vec![Vec::new(); distinct.len()];
    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(distinct.len());
    for (t, &share) in topic_dist.iter().enumerate() {
        if share < cfg.theta_t {
            continue;
        }
        ranked.clear();
        ranked.extend(distinct.iter().enumerate().map(|(i, &w)| (i, model.topic_word(t, w))));
        // descending probability; `distinct` is sorted so ties fall to the lower word id
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (rank0, &(i, p)) in ranked.iter().enumerate() {
            let rank_ratio = (rank0 + 1) as f64 / l;
            if p >= cfg.theta_wf || rank_ratio <= cfg.theta_wr {
                assigned[i].push(t as u16);
            }
        }
    }

    for pos in text.word_positions() {
        let w = text.tokens[pos];
        if let Ok(i) = distinct.binary_search(&w) {
            table.positions[pos] = assigned[i].clone();
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{TextKind, CLS, D_MARK, NUM_SPECIALS, UNK};
    use crate::topic_model::{fit_lda, LdaConfig};

    fn model_and_doc() -> (LdaModel, TokenSeq) {
        let s = NUM_SPECIALS;
        let docs: Vec<TokenSeq> = (0..20)
            .map(|d| {
                let base = if d % 2 == 0 { s } else { s + 4 };
                let mut tokens = vec![CLS, D_MARK];
                tokens.extend((0..12).map(|i| base + (i % 4) as u32));
                TokenSeq {
                    text_id: format!("d{d}"),
                    tokens,
                    kind: TextKind::Document,
                }
            })
            .collect();
        let model = fit_lda(&docs, (s + 8) as usize, &LdaConfig::new(2)).unwrap();
        let doc = TokenSeq {
            text_id: "mixed".into(),
            tokens: vec![CLS, D_MARK, s, s + 5, UNK, s, s + 6],
            kind: TextKind::Document,
        };
        (model, doc)
    }

    #[test]
    fn threshold_above_one_gives_empty_table() {
        let (model, doc) = model_and_doc();
        let cfg = TopicExtractionConfig {
            theta_t: 1.1,
            ..Default::default()
        };
        let table = extract_word_topics(&model, &doc, &[0.5, 0.5], &cfg);
        assert_eq!(table.len(), doc.len());
        assert_eq!(table.total_assignments(), 0);
    }

    #[test]
    fn vacuous_thresholds_assign_everything() {
        let (model, doc) = model_and_doc();
        let cfg = TopicExtractionConfig {
            theta_t: 0.0,
            theta_wf: 1.0,
            theta_wr: 1.0,
        };
        let table = extract_word_topics(&model, &doc, &[0.3, 0.7], &cfg);
        for (pos, topics) in table.positions.iter().enumerate() {
            if pos < 2 || doc.tokens[pos] == UNK {
                assert!(topics.is_empty());
            } else {
                assert_eq!(topics, &vec![0, 1]);
            }
        }
    }

    #[test]
    fn repeated_words_share_assignments() {
        let (model, doc) = model_and_doc();
        let table = extract_word_topics(&model, &doc, &[0.5, 0.5], &TopicExtractionConfig::default());
        assert_eq!(table.positions[2], table.positions[5]);
    }
}
