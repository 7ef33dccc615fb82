//! Iterative inference: every event is first extracted from its regular
//! context, then repeatedly re-extracted from a context tagged with its
//! neighbors' previous-iteration predictions. Updates are synchronous.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::augmentation::{augment, neighbors, Neighborhood};
use crate::corpus::{Document, EventKey, EventMention, RoleAssignment};
use crate::error::{Error, Result};
use crate::model::{predict, DecodeConfig, ExtractorModel};
use crate::ontology::{EventTemplate, Ontology};
use crate::templating::{build_input, parse_filled, InputSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    pub max_iterations: usize,
    pub window: usize,
    pub early_stop_on_fixpoint: bool,
    pub decode: DecodeConfig,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            max_iterations: 3,
            window: 40,
            early_stop_on_fixpoint: false,
            decode: DecodeConfig::default(),
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Inference("max_iterations must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Inference("window must be positive".into()));
        }
        Ok(())
    }
}

/// Everything an extractor sees for one event.
#[derive(Debug, Clone, Copy)]
pub struct ExtractionRequest<'a> {
    pub doc: &'a Document,
    pub event: &'a EventMention,
    pub template: &'a EventTemplate,
    pub input: &'a InputSequence,
    /// 1-based iteration number.
    pub iteration: usize,
}

/// Produces a filled-template token sequence for one event.
pub trait ArgumentExtractor {
    fn generate(&self, request: &ExtractionRequest<'_>) -> Vec<String>;
}

/// Extraction with a trained model.
#[derive(Debug, Clone, Copy)]
pub struct ModelExtractor<'a> {
    pub model: &'a ExtractorModel,
    pub decode: DecodeConfig,
}

impl ArgumentExtractor for ModelExtractor<'_> {
    fn generate(&self, request: &ExtractionRequest<'_>) -> Vec<String> {
        predict(self.model, request.input, &self.decode).tokens
    }
}

pub type Assignments = BTreeMap<String, Vec<RoleAssignment>>;

/// Assignments for a whole corpus, keyed by event.
pub type CorpusAssignments = BTreeMap<EventKey, Vec<RoleAssignment>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub assignments: Assignments,
    /// Context tokens each event was extracted from.
    pub contexts: BTreeMap<String, Vec<String>>,
    /// Raw generated output per event.
    pub outputs: BTreeMap<String, Vec<String>>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub diagnostics: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedEvent {
    pub event_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub doc_id: String,
    pub iterations: Vec<IterationRecord>,
    /// Iteration whose output equalled its predecessor's, if early stopping hit one.
    pub fixpoint_iteration: Option<usize>,
    pub skipped: Vec<SkippedEvent>,
}

impl IterationTrace {
    /// Assignments of the last iteration run.
    pub fn final_assignments(&self) -> &Assignments {
        &self.iterations.last().expect("at least one iteration").assignments
    }

    /// Assignments after `iteration` (1-based), or the final ones if the run
    /// stopped earlier.
    pub fn assignments_at(&self, iteration: usize) -> &Assignments {
        let idx = iteration.min(self.iterations.len()).max(1) - 1;
        &self.iterations[idx].assignments
    }
}

/// True iff both maps assign the same set of `(role, span)` pairs to every
/// event.
pub fn fixpoint_check(prev: &Assignments, curr: &Assignments) -> Result<bool> {
    if prev.len() != curr.len() || prev.keys().zip(curr.keys()).any(|(a, b)| a != b) {
        return Err(Error::Inference("assignment maps cover different events".into()));
    }
    let as_set = |v: &[RoleAssignment]| v.iter().map(RoleAssignment::key).collect::<BTreeSet<_>>();
    Ok(prev.iter().all(|(id, p)| as_set(p) == as_set(&curr[id])))
}

/// Runs up to `config.max_iterations` synchronous extraction rounds over
/// every event of `doc`. Events whose type is missing from the ontology are
/// skipped and recorded.
pub fn infer_document<E: ArgumentExtractor + ?Sized>(
    extractor: &E,
    doc: &Document,
    ontology: &Ontology,
    config: &InferenceConfig,
) -> Result<IterationTrace> {
    config.validate()?;
    let mut skipped = Vec::new();
    let mut active = Vec::new();
    for event in &doc.events {
        match ontology.get(&event.event_type) {
            Some(t) => active.push((event, t)),
            None => {
                warn!(
                    "skipping {}/{}: event type {} not in ontology",
                    doc.doc_id, event.event_id, event.event_type
                );
                skipped.push(SkippedEvent {
                    event_id: event.event_id.clone(),
                    reason: format!("event type {} not in ontology", event.event_type),
                });
            }
        }
    }
    let hoods: Vec<Neighborhood> = active
        .iter()
        .map(|(e, _)| neighbors(doc, &e.event_id, config.window))
        .collect::<Result<_>>()?;

    let mut trace = IterationTrace {
        doc_id: doc.doc_id.clone(),
        iterations: Vec::new(),
        fixpoint_iteration: None,
        skipped,
    };
    // Skipped events contribute no tags.
    let mut previous: HashMap<String, Vec<RoleAssignment>> =
        doc.events.iter().map(|e| (e.event_id.clone(), Vec::new())).collect();

    for k in 1..=config.max_iterations {
        let mut record = IterationRecord {
            iteration: k,
            assignments: BTreeMap::new(),
            contexts: BTreeMap::new(),
            outputs: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
        };
        for ((event, template), hood) in active.iter().zip(&hoods) {
            let hood = if k == 1 {
                Neighborhood::empty(&event.event_id, config.window)
            } else {
                hood.clone()
            };
            let context = augment(doc, &event.event_id, &previous, &hood)?;
            let input = build_input(template, &context.tokens)?;
            let output = extractor.generate(&ExtractionRequest {
                doc,
                event,
                template,
                input: &input,
                iteration: k,
            });
            let parsed = parse_filled(&output, template, &doc.tokens);
            if !parsed.diagnostics.is_empty() {
                record.diagnostics.insert(event.event_id.clone(), parsed.diagnostics);
            }
            record.assignments.insert(event.event_id.clone(), parsed.assignments);
            record.contexts.insert(event.event_id.clone(), context.tokens);
            record.outputs.insert(event.event_id.clone(), output);
        }
        let reached_fixpoint = k > 1 && {
            let last = &trace.iterations.last().expect("k > 1").assignments;
            fixpoint_check(last, &record.assignments)?
        };
        for (id, a) in &record.assignments {
            previous.insert(id.clone(), a.clone());
        }
        trace.iterations.push(record);
        if reached_fixpoint && config.early_stop_on_fixpoint {
            trace.fixpoint_iteration = Some(k);
            break;
        }
    }
    Ok(trace)
}

/// Final assignments for every event of every document, keyed by
/// `(doc_id, event_id)`, plus the traces.
pub fn infer_corpus<E: ArgumentExtractor + ?Sized>(
    extractor: &E,
    docs: &[Document],
    ontology: &Ontology,
    config: &InferenceConfig,
) -> Result<(CorpusAssignments, Vec<IterationTrace>)> {
    let mut preds = BTreeMap::new();
    let mut traces = Vec::with_capacity(docs.len());
    for doc in docs {
        let trace = infer_document(extractor, doc, ontology, config)?;
        for (id, a) in trace.final_assignments() {
            preds.insert(EventKey::new(&doc.doc_id, id), a.clone());
        }
        traces.push(trace);
    }
    Ok((preds, traces))
}

/// Per-iteration predictions keyed by event, from a set of traces.
pub fn assignments_by_iteration(
    traces: &[IterationTrace],
    iteration: usize,
) -> BTreeMap<EventKey, Vec<RoleAssignment>> {
    traces
        .iter()
        .flat_map(|t| {
            t.assignments_at(iteration)
                .iter()
                .map(move |(id, a)| (EventKey::new(&t.doc_id, id), a.clone()))
        })
        .collect()
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub event_id: String,
    pub event_type: String,
    pub arguments: Vec<RoleAssignment>,
}

/// Records for every event of `docs` that has an entry in `preds`, in
/// document order.
pub fn prediction_records(docs: &[Document], preds: &BTreeMap<EventKey, Vec<RoleAssignment>>) -> Vec<PredictionRecord> {
    docs.iter()
        .flat_map(|d| d.events.iter().map(move |e| (d, e)))
        .filter_map(|(d, e)| {
            let args = preds.get(&EventKey::new(&d.doc_id, &e.event_id))?;
            Some(PredictionRecord {
                doc_id: d.doc_id.clone(),
                event_id: e.event_id.clone(),
                event_type: e.event_type.clone(),
                arguments: args.clone(),
            })
        })
        .collect()
}

/// Parses a predictions JSONL stream into a map keyed by event. A repeated
/// key is an error.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<BTreeMap<EventKey, Vec<RoleAssignment>>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let line = line.map_err(|e| parse_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let key = EventKey::new(rec.doc_id, rec.event_id);
        if out.contains_key(&key) {
            return Err(parse_err(format!(
                "duplicate prediction for {}/{}",
                key.doc_id, key.event_id
            )));
        }
        out.insert(key, rec.arguments);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Span;

    fn a(role: &str, s: usize, e: usize) -> RoleAssignment {
        RoleAssignment::new(role, Span::new(s, e))
    }

    #[test]
    fn fixpoint_set_semantics() {
        let p: Assignments = [("e1".to_string(), vec![a("A", 0, 1), a("B", 2, 3)])].into();
        let q: Assignments = [("e1".to_string(), vec![a("B", 2, 3), a("A", 0, 1)])].into();
        assert!(fixpoint_check(&p, &q).unwrap());
        assert!(fixpoint_check(&p, &p).unwrap());
        let r: Assignments = [("e1".to_string(), vec![a("C", 0, 1), a("B", 2, 3)])].into();
        assert!(!fixpoint_check(&p, &r).unwrap());
        let other: Assignments = [("e2".to_string(), vec![])].into();
        assert!(fixpoint_check(&p, &other).is_err());
    }

    #[test]
    fn prediction_lines_round_trip() {
        let text = r#"{"doc_id":"d","event_id":"e1","event_type":"Attack","arguments":[{"role":"Attacker","start":0,"end":2}]}
{"doc_id":"d","event_id":"e2","event_type":"Arrest","arguments":[]}
"#;
        let preds = read_predictions(text.as_bytes()).unwrap();
        assert_eq!(preds.len(), 2);
        assert_eq!(preds[&EventKey::new("d", "e1")], vec![a("Attacker", 0, 2)]);
        let dup = format!("{}{}", text, text.lines().next().unwrap());
        assert!(matches!(
            read_predictions(dup.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
