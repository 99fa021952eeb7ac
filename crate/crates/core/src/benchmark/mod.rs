//! Labeled relation data, the entity-tagged corpus and CFRL task sequences.

mod corpus;
mod io;
mod sequence;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{load_corpus, Corpus};
pub use io::{
    filter_relations, load_dataset, parse_dataset, write_dataset, DatasetFormat, LineRecord,
};
pub use sequence::{
    build_task_sequence, cumulative_test_set, read_sequence, write_sequence, SequenceParams, Task,
    TaskSequence,
};

/// Inclusive token interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i <= self.end
    }
}

/// Tokens with head and tail entity spans.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub head: Span,
    pub tail: Span,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<String>, head: Span, tail: Span) -> Result<Self> {
        let s = TaggedSentence { tokens, head, tail };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        for (name, span) in [("head", &self.head), ("tail", &self.tail)] {
            if span.start > span.end {
                return Err(Error::Validation(format!(
                    "{name} span [{}, {}] is reversed",
                    span.start, span.end
                )));
            }
            if span.end >= n {
                return Err(Error::Validation(format!(
                    "{name} span [{}, {}] exceeds {n} tokens",
                    span.start, span.end
                )));
            }
        }
        if self.head.overlaps(&self.tail) {
            return Err(Error::Validation(format!(
                "head span [{}, {}] overlaps tail span [{}, {}]",
                self.head.start, self.head.end, self.tail.start, self.tail.end
            )));
        }
        Ok(())
    }

    fn span_text(&self, span: &Span) -> String {
        self.tokens[span.start..=span.end].join(" ")
    }

    /// Detokenized head entity surface form.
    pub fn head_text(&self) -> String {
        self.span_text(&self.head)
    }

    pub fn tail_text(&self) -> String {
        self.span_text(&self.tail)
    }

    pub fn head_tokens(&self) -> &[String] {
        &self.tokens[self.head.start..=self.head.end]
    }

    pub fn tail_tokens(&self) -> &[String] {
        &self.tokens[self.tail.start..=self.tail.end]
    }

    /// Returns a copy with the chosen entity's tokens replaced; both spans are
    /// re-computed for the length change.
    pub fn replace_entity(&self, entity: Entity, replacement: &[String]) -> TaggedSentence {
        debug_assert!(!replacement.is_empty());
        let (target, other) = match entity {
            Entity::Head => (self.head, self.tail),
            Entity::Tail => (self.tail, self.head),
        };
        let mut tokens = Vec::with_capacity(self.tokens.len() + replacement.len());
        tokens.extend_from_slice(&self.tokens[..target.start]);
        tokens.extend_from_slice(replacement);
        tokens.extend_from_slice(&self.tokens[target.end + 1..]);
        let new_target = Span::new(target.start, target.start + replacement.len() - 1);
        let new_other = if other.start > target.end {
            let shift = replacement.len() as isize - target.len() as isize;
            Span::new(
                (other.start as isize + shift) as usize,
                (other.end as isize + shift) as usize,
            )
        } else {
            other
        };
        let (head, tail) = match entity {
            Entity::Head => (new_target, new_other),
            Entity::Tail => (new_other, new_target),
        };
        TaggedSentence { tokens, head, tail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Entity {
    Head,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Original,
    Augmented,
}

/// A labeled sentence. `id` is the record's position in its source file
/// (or corpus index for augmented samples).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub sentence: TaggedSentence,
    pub relation: String,
    #[serde(default)]
    pub source: Source,
}

impl Sample {
    pub fn new(id: usize, sentence: TaggedSentence, relation: impl Into<String>) -> Self {
        Sample {
            id,
            sentence,
            relation: relation.into(),
            source: Source::Original,
        }
    }

    pub fn is_augmented(&self) -> bool {
        self.source == Source::Augmented
    }
}

/// Samples grouped by relation identifier, ordered by identifier.
pub type RelationGroups = BTreeMap<String, Vec<Sample>>;

/// Splits a relation identifier into name tokens on `_`, `:` and `/`.
pub fn relation_name_tokens(relation: &str) -> Vec<String> {
    relation
        .split(['_', ':', '/'])
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn validation_rejects_bad_spans() {
        assert!(TaggedSentence::new(toks("a b c"), Span::new(0, 0), Span::new(2, 3)).is_err());
        assert!(TaggedSentence::new(toks("a b c"), Span::new(0, 1), Span::new(1, 2)).is_err());
        assert!(TaggedSentence::new(toks("a b c"), Span::new(1, 0), Span::new(2, 2)).is_err());
        assert!(TaggedSentence::new(toks("a b c"), Span::new(2, 2), Span::new(0, 0)).is_ok());
    }

    #[test]
    fn replace_entity_shifts_later_span() {
        let s = TaggedSentence::new(toks("x H y T T z"), Span::new(1, 1), Span::new(3, 4)).unwrap();
        let r = s.replace_entity(Entity::Head, &toks("N1 N2 N3"));
        assert_eq!(r.tokens, toks("x N1 N2 N3 y T T z"));
        assert_eq!(r.head, Span::new(1, 3));
        assert_eq!(r.tail, Span::new(5, 6));
        assert_eq!(r.tail_text(), "T T");

        let r = s.replace_entity(Entity::Tail, &toks("Q"));
        assert_eq!(r.tokens, toks("x H y Q z"));
        assert_eq!(r.head, Span::new(1, 1));
        assert_eq!(r.tail, Span::new(3, 3));
    }

    #[test]
    fn replace_entity_when_tail_precedes_head() {
        let s = TaggedSentence::new(toks("T a H H b"), Span::new(2, 3), Span::new(0, 0)).unwrap();
        let r = s.replace_entity(Entity::Tail, &toks("U V"));
        assert_eq!(r.tokens, toks("U V a H H b"));
        assert_eq!(r.tail, Span::new(0, 1));
        assert_eq!(r.head, Span::new(3, 4));
        r.validate().unwrap();
    }

    #[test]
    fn relation_names_split_on_separators() {
        assert_eq!(
            relation_name_tokens("per:city_of_birth"),
            vec!["per", "city", "of", "birth"]
        );
        assert_eq!(relation_name_tokens("a/b"), vec!["a", "b"]);
        assert_eq!(relation_name_tokens("P931"), vec!["P931"]);
    }
}
