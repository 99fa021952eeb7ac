use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use super::io::LineRecord;
use super::TaggedSentence;
use crate::error::{Error, Result};

/// Unlabeled entity-tagged sentences indexed by entity surface forms.
///
/// Surface-form matching is exact and case-sensitive on the space-joined
/// span tokens.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    records: Vec<TaggedSentence>,
    pairs: IndexMap<(String, String), Vec<usize>>,
    heads: HashMap<String, Vec<usize>>,
    tails: HashMap<String, Vec<usize>>,
    skipped: usize,
}

impl Corpus {
    pub fn from_records(records: Vec<TaggedSentence>) -> Self {
        let mut pairs: IndexMap<(String, String), Vec<usize>> = IndexMap::new();
        let mut heads: HashMap<String, Vec<usize>> = HashMap::new();
        let mut tails: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            let (h, t) = (r.head_text(), r.tail_text());
            heads.entry(h.clone()).or_default().push(i);
            tails.entry(t.clone()).or_default().push(i);
            pairs.entry((h, t)).or_default().push(i);
        }
        Corpus {
            records,
            pairs,
            heads,
            tails,
            skipped: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TaggedSentence] {
        &self.records
    }

    pub fn get(&self, i: usize) -> &TaggedSentence {
        &self.records[i]
    }

    /// Number of input lines dropped for lacking an entity span.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Record indices containing exactly this ordered pair.
    pub fn lookup(&self, head: &str, tail: &str) -> &[usize] {
        self.pairs
            .get(&(head.to_string(), tail.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn with_head(&self, head: &str) -> &[usize] {
        self.heads.get(head).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn with_tail(&self, tail: &str) -> &[usize] {
        self.tails.get(tail).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Distinct ordered entity pairs.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Entity-pair groups in first-occurrence order.
    pub fn pair_groups(&self) -> impl Iterator<Item = (&(String, String), &[usize])> {
        self.pairs.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// SHA-256 over the canonical line serialization of the records.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            let line = serde_json::to_string(&LineRecord::from_sentence(r, None))
                .expect("record serializes");
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(&LineRecord::from_sentence(r, None))?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Loads an entity-tagged line-record file. Records without both entity
/// spans (or with invalid spans) are skipped and counted.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub(crate) fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: LineRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        match rec.sentence() {
            Some(Ok(s)) => records.push(s),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("corpus: skipped {skipped} records without valid head and tail spans");
    }
    let mut corpus = Corpus::from_records(records);
    corpus.skipped = skipped;
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::Span;

    fn rec(tokens: &str, h: (usize, usize), t: (usize, usize)) -> TaggedSentence {
        TaggedSentence::new(
            tokens.split_whitespace().map(str::to_string).collect(),
            Span::new(h.0, h.1),
            Span::new(t.0, t.1),
        )
        .unwrap()
    }

    #[test]
    fn empty_corpus_has_no_matches() {
        let c = parse_corpus("").unwrap();
        assert!(c.is_empty());
        assert!(c.lookup("Paris", "France").is_empty());
        assert_eq!(c.pair_count(), 0);
    }

    #[test]
    fn shared_pair_maps_to_both_records() {
        let c = Corpus::from_records(vec![
            rec("Paris is in France", (0, 0), (3, 3)),
            rec("Berlin , Germany", (0, 0), (2, 2)),
            rec("Paris , capital of France", (0, 0), (4, 4)),
        ]);
        assert_eq!(c.lookup("Paris", "France"), &[0, 2]);
        assert!(c.lookup("France", "Paris").is_empty());
        assert_eq!(c.pair_count(), 2);
        assert_eq!(c.with_head("Paris"), &[0, 2]);
    }

    #[test]
    fn records_missing_entities_are_skipped() {
        let text = r#"{"tokens":["a","b"],"head":{"span":[0,0]},"tail":{"span":[1,1]}}
{"tokens":["a","b"],"head":{"span":[0,0]}}
{"tokens":["a","b"],"head":{"span":[0,0]},"tail":{"span":[0,1]}}
"#;
        let c = parse_corpus(text).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.skipped(), 2);
    }

    #[test]
    fn matching_is_case_sensitive() {
        let c = Corpus::from_records(vec![rec("paris in France", (0, 0), (2, 2))]);
        assert!(c.lookup("Paris", "France").is_empty());
        assert_eq!(c.lookup("paris", "France"), &[0]);
    }
}
