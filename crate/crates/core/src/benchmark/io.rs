use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RelationGroups, Sample, Span, TaggedSentence};
use crate::error::{Error, Result};

/// Input layouts accepted by [`load_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// One flat JSON record per line (`tokens`, `head.span`, `tail.span`, `relation`).
    Jsonl,
    /// FewRel release dump: `{relation: [{tokens, h: [name, id, [[pos..]]], t: ..}]}`.
    FewRel,
    /// TACRED release: array of `{token, subj_start, subj_end, obj_start, obj_end, relation}`.
    Tacred,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "fewrel" => Ok(DatasetFormat::FewRel),
            "tacred" => Ok(DatasetFormat::Tacred),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct EntityRef {
    pub span: [usize; 2],
}

/// The line-record layout shared by datasets, corpora and task dumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineRecord {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub(crate) head: Option<EntityRef>,
    #[serde(default)]
    pub(crate) tail: Option<EntityRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
}

impl LineRecord {
    pub fn from_sentence(s: &TaggedSentence, relation: Option<&str>) -> Self {
        LineRecord {
            tokens: s.tokens.clone(),
            head: Some(EntityRef {
                span: [s.head.start, s.head.end],
            }),
            tail: Some(EntityRef {
                span: [s.tail.start, s.tail.end],
            }),
            relation: relation.map(str::to_string),
        }
    }

    /// `None` when either entity span is missing.
    pub fn sentence(&self) -> Option<Result<TaggedSentence>> {
        let head = self.head.as_ref()?;
        let tail = self.tail.as_ref()?;
        Some(TaggedSentence::new(
            self.tokens.clone(),
            Span::new(head.span[0], head.span[1]),
            Span::new(tail.span[0], tail.span[1]),
        ))
    }
}

/// Reads a labeled dataset and groups it by relation.
pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<RelationGroups> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, format)
}

pub fn parse_dataset(text: &str, format: DatasetFormat) -> Result<RelationGroups> {
    let samples = match format {
        DatasetFormat::Jsonl => parse_jsonl(text)?,
        DatasetFormat::FewRel => parse_fewrel(text)?,
        DatasetFormat::Tacred => parse_tacred(text)?,
    };
    let mut groups = RelationGroups::new();
    for s in samples {
        groups.entry(s.relation.clone()).or_default().push(s);
    }
    Ok(groups)
}

/// Writes `groups` as JSONL in relation order; reloading assigns the same ids
/// when ids already follow file order.
pub fn write_dataset(groups: &RelationGroups, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (rel, samples) in groups {
        for s in samples {
            out.push_str(&serde_json::to_string(&LineRecord::from_sentence(
                &s.sentence,
                Some(rel),
            ))?);
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Drops the listed relations (e.g. TACRED's `no_relation` / `n/a`).
pub fn filter_relations(mut groups: RelationGroups, drop: &[String]) -> RelationGroups {
    for r in drop {
        groups.remove(r);
    }
    groups
}

fn parse_jsonl(text: &str) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let rec: LineRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let relation = rec.relation.clone().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "missing relation".into(),
        })?;
        let sentence = rec
            .sentence()
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: "missing head or tail".into(),
            })?
            .map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
        out.push(Sample::new(out.len(), sentence, relation));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct FewRelItem {
    tokens: Vec<String>,
    h: (String, serde_json::Value, Vec<Vec<usize>>),
    t: (String, serde_json::Value, Vec<Vec<usize>>),
}

fn fewrel_span(positions: &[Vec<usize>], record: usize) -> Result<Span> {
    let first = positions
        .first()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::Parse {
            line: record,
            message: "entity without positions".into(),
        })?;
    let lo = *first.iter().min().unwrap();
    let hi = *first.iter().max().unwrap();
    Ok(Span::new(lo, hi))
}

fn parse_fewrel(text: &str) -> Result<Vec<Sample>> {
    let dump: BTreeMap<String, Vec<FewRelItem>> =
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    let mut out = Vec::new();
    for (relation, items) in dump {
        for item in items {
            let record = out.len() + 1;
            let head = fewrel_span(&item.h.2, record)?;
            let tail = fewrel_span(&item.t.2, record)?;
            let sentence = TaggedSentence::new(item.tokens, head, tail)
                .map_err(|e| Error::Validation(format!("record {record}: {e}")))?;
            out.push(Sample::new(out.len(), sentence, relation.clone()));
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct TacredItem {
    token: Vec<String>,
    subj_start: usize,
    subj_end: usize,
    obj_start: usize,
    obj_end: usize,
    relation: String,
}

fn parse_tacred(text: &str) -> Result<Vec<Sample>> {
    let items: Vec<TacredItem> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        let record = out.len() + 1;
        let sentence = TaggedSentence::new(
            item.token,
            Span::new(item.subj_start, item.subj_end),
            Span::new(item.obj_start, item.obj_end),
        )
        .map_err(|e| Error::Validation(format!("record {record}: {e}")))?;
        out.push(Sample::new(out.len(), sentence, item.relation));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"{"tokens":["A","wrote","B"],"head":{"span":[0,0]},"tail":{"span":[2,2]},"relation":"author"}
{"tokens":["C","wrote","the","D"],"head":{"span":[0,0]},"tail":{"span":[2,3]},"relation":"author"}

{"tokens":["E","penned","F"],"head":{"span":[0,0]},"tail":{"span":[2,2]},"relation":"author"}
"#;

    #[test]
    fn jsonl_groups_by_relation() {
        let g = parse_dataset(THREE, DatasetFormat::Jsonl).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g["author"].len(), 3);
        assert_eq!(g["author"][1].sentence.tail_text(), "the D");
        assert_eq!(g["author"][2].id, 2);
    }

    #[test]
    fn out_of_bounds_span_is_validation_error() {
        let bad =
            r#"{"tokens":["A","B"],"head":{"span":[0,2]},"tail":{"span":[1,1]},"relation":"r"}"#;
        assert!(matches!(
            parse_dataset(bad, DatasetFormat::Jsonl),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let bad = format!("{}\n{{not json\n", THREE.lines().next().unwrap());
        match parse_dataset(&bad, DatasetFormat::Jsonl) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fewrel_dump_with_many_relations() {
        let mut dump = serde_json::Map::new();
        for r in 0..80 {
            let items: Vec<serde_json::Value> = (0..3)
                .map(|_| {
                    serde_json::json!({
                        "tokens": ["x", "H1", "H2", "y", "T"],
                        "h": ["h name", "Q1", [[1, 2]]],
                        "t": ["t", "Q2", [[4]]],
                    })
                })
                .collect();
            dump.insert(format!("P{r}"), serde_json::Value::Array(items));
        }
        let text = serde_json::Value::Object(dump).to_string();
        let g = parse_dataset(&text, DatasetFormat::FewRel).unwrap();
        assert_eq!(g.len(), 80);
        let s = &g["P7"][0].sentence;
        assert_eq!(s.head, Span::new(1, 2));
        assert_eq!(s.tail, Span::new(4, 4));
    }

    #[test]
    fn tacred_and_filter() {
        let text = r#"[
          {"token":["Bob","lives","in","Rome"],"subj_start":0,"subj_end":0,"obj_start":3,"obj_end":3,"relation":"per:city_of_residence"},
          {"token":["Bob","met","Ann"],"subj_start":0,"subj_end":0,"obj_start":2,"obj_end":2,"relation":"n/a"}
        ]"#;
        let g = parse_dataset(text, DatasetFormat::Tacred).unwrap();
        assert_eq!(g.len(), 2);
        let g = filter_relations(g, &["n/a".to_string()]);
        assert_eq!(g.keys().collect::<Vec<_>>(), vec!["per:city_of_residence"]);
    }
}
