//! Documents, event mentions, argument spans and coreference clusters, plus
//! the JSONL corpus reader and writer.
//!
//! One document per line:
//!
//! ```text
//! {"doc_id": "d1", "tokens": [...],
//!  "events": [{"event_id": "e1", "event_type": "Attack",
//!              "trigger": {"start": 4, "end": 5},
//!              "arguments": [{"role": "Attacker", "start": 0, "end": 2, "head": 1, "entity_id": "x1"}]}],
//!  "clusters": [{"entity_id": "x1", "spans": [{"start": 0, "end": 2}]}]}
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;

/// Half-open token interval `[start, end)` with an optional head token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<usize>,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end, head: None }
    }

    pub fn with_head(start: usize, end: usize, head: usize) -> Self {
        Span {
            start,
            end,
            head: Some(head),
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Same token interval, ignoring the head annotation.
    pub fn same_extent(&self, other: &Span) -> bool {
        self.start == other.start && self.end == other.end
    }

    fn check(&self, what: &str, n_tokens: usize, out: &mut Vec<String>) {
        if self.start >= self.end {
            out.push(format!("{what}: empty span [{}, {})", self.start, self.end));
        }
        if self.end > n_tokens {
            out.push(format!(
                "{what}: span out of bounds [{}, {}) for {} tokens",
                self.start, self.end, n_tokens
            ));
        }
        if let Some(h) = self.head {
            if h < self.start || h >= self.end {
                out.push(format!("{what}: head {h} outside span [{}, {})", self.start, self.end));
            }
        }
    }
}

/// One argument of one event: a role filled by a span.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub role: String,
    #[serde(flatten)]
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
}

impl RoleAssignment {
    pub fn new(role: impl Into<String>, span: Span) -> Self {
        RoleAssignment {
            role: role.into(),
            span,
            entity_id: None,
        }
    }

    /// Identity used for set comparisons: role plus token extent.
    pub fn key(&self) -> (String, usize, usize) {
        (self.role.clone(), self.span.start, self.span.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMention {
    pub event_id: String,
    pub event_type: String,
    pub trigger: Span,
    #[serde(rename = "arguments", default)]
    pub gold_args: Vec<RoleAssignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCluster {
    pub entity_id: String,
    #[serde(rename = "spans")]
    pub member_spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub events: Vec<EventMention>,
    #[serde(default)]
    pub clusters: Vec<EntityCluster>,
}

impl Document {
    pub fn event(&self, event_id: &str) -> Result<&EventMention> {
        self.events
            .iter()
            .find(|e| e.event_id == event_id)
            .ok_or_else(|| Error::UnknownEvent(format!("{}/{}", self.doc_id, event_id)))
    }

    pub fn event_index(&self, event_id: &str) -> Result<usize> {
        self.events
            .iter()
            .position(|e| e.event_id == event_id)
            .ok_or_else(|| Error::UnknownEvent(format!("{}/{}", self.doc_id, event_id)))
    }

    pub fn span_tokens(&self, span: &Span) -> &[String] {
        &self.tokens[span.start.min(self.tokens.len())..span.end.min(self.tokens.len())]
    }

    pub fn cluster(&self, entity_id: &str) -> Option<&EntityCluster> {
        self.clusters.iter().find(|c| c.entity_id == entity_id)
    }

    /// Cluster holding a mention with the same extent as `span`.
    pub fn cluster_containing(&self, span: &Span) -> Option<&EntityCluster> {
        self.clusters
            .iter()
            .find(|c| c.member_spans.iter().any(|m| m.same_extent(span)))
    }

    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        let n = self.tokens.len();

        let mut cluster_ids = HashSet::new();
        for cluster in &self.clusters {
            if !cluster_ids.insert(cluster.entity_id.as_str()) {
                violations.push(format!("duplicate cluster id {}", cluster.entity_id));
            }
            let mut seen = HashSet::new();
            for span in &cluster.member_spans {
                span.check(&format!("cluster {}", cluster.entity_id), n, &mut violations);
                if !seen.insert((span.start, span.end)) {
                    violations.push(format!(
                        "cluster {}: repeated member span [{}, {})",
                        cluster.entity_id, span.start, span.end
                    ));
                }
            }
        }

        let mut event_ids = HashSet::new();
        for event in &self.events {
            if !event_ids.insert(event.event_id.as_str()) {
                violations.push(format!("duplicate event id {}", event.event_id));
            }
            event
                .trigger
                .check(&format!("event {} trigger", event.event_id), n, &mut violations);
            let mut seen = HashSet::new();
            for arg in &event.gold_args {
                let what = format!("event {} argument {}", event.event_id, arg.role);
                arg.span.check(&what, n, &mut violations);
                if !seen.insert((arg.role.as_str(), arg.span.start, arg.span.end)) {
                    violations.push(format!("{what}: duplicate (role, span)"));
                }
                if let Some(id) = &arg.entity_id {
                    if !cluster_ids.contains(id.as_str()) {
                        violations.push(format!("{what}: unknown entity {id}"));
                    }
                }
            }
        }

        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDocument {
                doc_id: self.doc_id.clone(),
                violations,
            })
        }
    }

    /// Checks that every event type and argument role is declared in `ontology`.
    pub fn validate_roles(&self, ontology: &Ontology) -> Result<()> {
        let mut violations = Vec::new();
        for event in &self.events {
            match ontology.get(&event.event_type) {
                None => violations.push(format!(
                    "event {}: type {} not in ontology",
                    event.event_id, event.event_type
                )),
                Some(template) => {
                    for arg in &event.gold_args {
                        if !template.has_role(&arg.role) {
                            violations.push(format!(
                                "event {}: role {} not declared for {}",
                                event.event_id, arg.role, event.event_type
                            ));
                        }
                    }
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDocument {
                doc_id: self.doc_id.clone(),
                violations,
            })
        }
    }
}

/// Distance between two events' trigger start positions.
pub fn token_distance(doc: &Document, a: &str, b: &str) -> Result<usize> {
    let ea = doc.event(a)?;
    let eb = doc.event(b)?;
    Ok(ea.trigger.start.abs_diff(eb.trigger.start))
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        doc.validate().map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file))
}

pub fn write_corpus_to<W: Write>(mut writer: W, docs: &[Document]) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut writer, doc)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_corpus_to(&mut writer, docs)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Events are addressed by `(doc_id, event_id)`; event ids are only unique
/// within their document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventKey {
    pub doc_id: String,
    pub event_id: String,
}

impl EventKey {
    pub fn new(doc_id: impl Into<String>, event_id: impl Into<String>) -> Self {
        EventKey {
            doc_id: doc_id.into(),
            event_id: event_id.into(),
        }
    }
}

/// Gold arguments of every event in `docs`.
pub fn gold_assignments(docs: &[Document]) -> HashMap<EventKey, Vec<RoleAssignment>> {
    docs.iter()
        .flat_map(|d| {
            d.events
                .iter()
                .map(move |e| (EventKey::new(&d.doc_id, &e.event_id), e.gold_args.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_with_triggers(starts: &[usize], len: usize) -> Document {
        Document {
            doc_id: "d".into(),
            tokens: (0..len).map(|i| format!("w{i}")).collect(),
            events: starts
                .iter()
                .enumerate()
                .map(|(i, &s)| EventMention {
                    event_id: format!("e{i}"),
                    event_type: "T".into(),
                    trigger: Span::new(s, s + 1),
                    gold_args: vec![],
                })
                .collect(),
            clusters: vec![],
        }
    }

    #[test]
    fn distance_examples() {
        let doc = doc_with_triggers(&[5, 30, 100, 58], 120);
        assert_eq!(token_distance(&doc, "e0", "e1").unwrap(), 25);
        assert_eq!(token_distance(&doc, "e1", "e1").unwrap(), 0);
        assert_eq!(token_distance(&doc, "e2", "e3").unwrap(), 42);
        assert!(matches!(
            token_distance(&doc, "e0", "nope"),
            Err(Error::UnknownEvent(_))
        ));
    }

    #[test]
    fn one_line_corpus() {
        let line = r#"{"doc_id":"d1","tokens":["a","b","c","d","e","f","g","h","i","j"],"events":[{"event_id":"e1","event_type":"Attack","trigger":{"start":3,"end":4},"arguments":[{"role":"Attacker","start":0,"end":2,"head":1,"entity_id":"x"}]}],"clusters":[{"entity_id":"x","spans":[{"start":0,"end":2}]}]}"#;
        let docs = read_corpus(line.as_bytes()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].tokens.len(), 10);
        assert_eq!(docs[0].events.len(), 1);
        assert_eq!(docs[0].events[0].gold_args.len(), 1);
        assert_eq!(docs[0].events[0].gold_args[0].span, Span::with_head(0, 2, 1));
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(read_corpus("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn out_of_bounds_argument_names_line() {
        let good = r#"{"doc_id":"d0","tokens":["a"],"events":[],"clusters":[]}"#;
        let bad = r#"{"doc_id":"d1","tokens":["a","b"],"events":[{"event_id":"e1","event_type":"T","trigger":{"start":0,"end":1},"arguments":[{"role":"R","start":1,"end":5}]}],"clusters":[]}"#;
        let err = read_corpus(format!("{good}\n{bad}\n").as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("span out of bounds"), "{msg}");
    }

    #[test]
    fn malformed_json_names_line() {
        let err = read_corpus("{\"doc_id\": 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn validation_lists_all_violations() {
        let mut doc = doc_with_triggers(&[0, 1], 3);
        doc.events[1].event_id = "e0".into();
        doc.events[0].gold_args.push(RoleAssignment {
            role: "R".into(),
            span: Span::with_head(1, 2, 0),
            entity_id: Some("missing".into()),
        });
        let Err(Error::InvalidDocument { violations, .. }) = doc.validate() else {
            panic!("expected invalid document");
        };
        assert_eq!(violations.len(), 3, "{violations:?}");
    }
}
