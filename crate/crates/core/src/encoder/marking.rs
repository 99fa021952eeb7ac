use serde::{Deserialize, Serialize};

use super::vocab::{HEAD_MARKER, TAIL_MARKER};
use crate::benchmark::{Span, TaggedSentence};
use crate::error::Result;

/// Sentence with `#` around the head entity and `@` around the tail entity.
/// `head` and `tail` cover the entity tokens inside the markers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedSentence {
    pub tokens: Vec<String>,
    pub head: Span,
    pub tail: Span,
}

pub fn mark_entities(s: &TaggedSentence) -> Result<MarkedSentence> {
    s.validate()?;
    let mut tokens = Vec::with_capacity(s.tokens.len() + 4);
    let (mut head, mut tail) = (Span::new(0, 0), Span::new(0, 0));
    for (i, tok) in s.tokens.iter().enumerate() {
        if i == s.head.start {
            tokens.push(HEAD_MARKER.to_string());
            head.start = tokens.len();
        }
        if i == s.tail.start {
            tokens.push(TAIL_MARKER.to_string());
            tail.start = tokens.len();
        }
        tokens.push(tok.clone());
        if i == s.head.end {
            head.end = tokens.len() - 1;
            tokens.push(HEAD_MARKER.to_string());
        }
        if i == s.tail.end {
            tail.end = tokens.len() - 1;
            tokens.push(TAIL_MARKER.to_string());
        }
    }
    Ok(MarkedSentence { tokens, head, tail })
}

impl MarkedSentence {
    /// Removes the four marker positions, recovering the original sentence.
    pub fn unmark(&self) -> TaggedSentence {
        let markers = [
            self.head.start - 1,
            self.head.end + 1,
            self.tail.start - 1,
            self.tail.end + 1,
        ];
        let shift = |i: usize| markers.iter().filter(|&&m| m < i).count();
        let tokens = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(i, _)| !markers.contains(i))
            .map(|(_, t)| t.clone())
            .collect();
        TaggedSentence {
            tokens,
            head: Span::new(
                self.head.start - shift(self.head.start),
                self.head.end - shift(self.head.end),
            ),
            tail: Span::new(
                self.tail.start - shift(self.tail.start),
                self.tail.end - shift(self.tail.end),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sent(tokens: &str, h: (usize, usize), t: (usize, usize)) -> TaggedSentence {
        TaggedSentence::new(
            tokens.split_whitespace().map(str::to_string).collect(),
            Span::new(h.0, h.1),
            Span::new(t.0, t.1),
        )
        .unwrap()
    }

    fn strs(m: &MarkedSentence) -> Vec<&str> {
        m.tokens.iter().map(String::as_str).collect()
    }

    #[test]
    fn single_token_entities() {
        let m = mark_entities(&sent("A B C", (0, 0), (2, 2))).unwrap();
        assert_eq!(strs(&m), ["#", "A", "#", "B", "@", "C", "@"]);
        assert_eq!(m.head, Span::new(1, 1));
        assert_eq!(m.tail, Span::new(5, 5));
    }

    #[test]
    fn head_after_tail() {
        let m = mark_entities(&sent("A B C", (2, 2), (0, 0))).unwrap();
        assert_eq!(strs(&m), ["@", "A", "@", "B", "#", "C", "#"]);
        assert_eq!(m.head, Span::new(5, 5));
        assert_eq!(m.tail, Span::new(1, 1));
    }

    #[test]
    fn wide_span_gets_one_marker_pair() {
        let m = mark_entities(&sent("x A B y C", (1, 2), (4, 4))).unwrap();
        assert_eq!(strs(&m), ["x", "#", "A", "B", "#", "y", "@", "C", "@"]);
        assert_eq!(m.head, Span::new(2, 3));
    }

    #[test]
    fn adjacent_entities() {
        let m = mark_entities(&sent("A B", (0, 0), (1, 1))).unwrap();
        assert_eq!(strs(&m), ["#", "A", "#", "@", "B", "@"]);
        assert_eq!(m.unmark(), sent("A B", (0, 0), (1, 1)));
    }

    #[test]
    fn overlapping_spans_rejected() {
        let s = TaggedSentence {
            tokens: vec!["a".into(), "b".into()],
            head: Span::new(0, 1),
            tail: Span::new(1, 1),
        };
        assert!(mark_entities(&s).is_err());
    }

    fn arb_sentence() -> impl Strategy<Value = TaggedSentence> {
        (3usize..12).prop_flat_map(|n| {
            (Just(n), 0..n, 0..n, 0..n, 0..n).prop_filter_map("overlap", |(n, a, b, c, d)| {
                let h = Span::new(a.min(b), a.max(b));
                let t = Span::new(c.min(d), c.max(d));
                if h.overlaps(&t) {
                    return None;
                }
                let tokens = (0..n).map(|i| format!("w{i}")).collect();
                Some(TaggedSentence {
                    tokens,
                    head: h,
                    tail: t,
                })
            })
        })
    }

    proptest! {
        #[test]
        fn marking_round_trips(s in arb_sentence()) {
            let m = mark_entities(&s).unwrap();
            prop_assert_eq!(m.tokens.len(), s.tokens.len() + 4);
            prop_assert_eq!(&m.tokens[m.head.start - 1], HEAD_MARKER);
            prop_assert_eq!(&m.tokens[m.head.end + 1], HEAD_MARKER);
            prop_assert_eq!(&m.tokens[m.tail.start - 1], TAIL_MARKER);
            prop_assert_eq!(&m.tokens[m.tail.end + 1], TAIL_MARKER);
            prop_assert_eq!(&m.tokens[m.head.start..=m.head.end], s.head_tokens());
            prop_assert_eq!(m.unmark(), s);
        }
    }
}
