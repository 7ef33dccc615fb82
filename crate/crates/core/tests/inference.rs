use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use eventarg::augmentation::{augment, neighbors, regular_context};
use eventarg::corpus::{Document, EventKey, EventMention, RoleAssignment, Span};
use eventarg::evaluation::{gold_map, score, MatchMode, Task};
use eventarg::inference::{
    assignments_by_iteration, infer_corpus, infer_document, ArgumentExtractor, ExtractionRequest, InferenceConfig,
    IterationTrace, ModelExtractor,
};
use eventarg::model::{predict, Architecture, DecodeConfig, ExtractorModel, Vocabulary};
use eventarg::synth::{builtin_ontology, chain_docs, generate, ScriptedReader, SynthCorpus, SynthSpec};
use eventarg::templating::build_input;

fn config(max_iterations: usize, early_stop: bool) -> InferenceConfig {
    InferenceConfig {
        max_iterations,
        early_stop_on_fixpoint: early_stop,
        ..InferenceConfig::default()
    }
}

fn small_corpus(seed: u64) -> SynthCorpus {
    generate(&SynthSpec {
        num_docs: 6,
        events_per_doc: (4, 6),
        seed,
        ..SynthSpec::default()
    })
    .unwrap()
}

fn oracle() -> ScriptedReader {
    ScriptedReader::new(SynthSpec::default().rules)
}

fn key_set(a: &[RoleAssignment]) -> BTreeSet<(String, usize, usize)> {
    a.iter().map(RoleAssignment::key).collect()
}

fn matches_gold(doc: &Document, trace: &IterationTrace, iteration: usize, event_id: &str) -> bool {
    let gold = &doc.event(event_id).unwrap().gold_args;
    key_set(&trace.assignments_at(iteration)[event_id]) == key_set(gold)
}

#[test]
fn single_iteration_equals_single_shot_extraction() {
    let corpus = small_corpus(41);
    let arch = Architecture {
        width: 8,
        max_input_len: 512,
        ..Architecture::default()
    };
    let model = ExtractorModel::new(arch, Vocabulary::build(&corpus.documents, &corpus.ontology), 7);
    let decode = DecodeConfig::default();
    let extractor = ModelExtractor { model: &model, decode };
    for doc in &corpus.documents {
        let trace = infer_document(&extractor, doc, &corpus.ontology, &config(1, false)).unwrap();
        assert_eq!(trace.iterations.len(), 1);
        for event in &doc.events {
            let template = corpus.ontology.get(&event.event_type).unwrap();
            let ctx = regular_context(doc, &event.event_id).unwrap();
            let input = build_input(template, &ctx.tokens).unwrap();
            assert!(input.tokens.len() <= arch.max_input_len, "input does not fit");
            let single = predict(&model, &input, &decode);
            assert_eq!(trace.iterations[0].outputs[&event.event_id], single.tokens);
            assert_eq!(trace.iterations[0].contexts[&event.event_id], ctx.tokens);
        }
    }
}

#[test]
fn chain_resolves_one_hop_per_iteration() {
    let spec = SynthSpec::default();
    let corpus = chain_docs(&spec, 12).unwrap();
    let reader = oracle();
    for doc in &corpus.documents {
        let trace = infer_document(&reader, doc, &corpus.ontology, &config(3, false)).unwrap();
        assert!(matches_gold(doc, &trace, 1, "e1"), "{}", doc.doc_id);
        assert!(!matches_gold(doc, &trace, 1, "e2"), "{}", doc.doc_id);
        assert!(matches_gold(doc, &trace, 2, "e2"), "{}", doc.doc_id);
        assert!(!matches_gold(doc, &trace, 2, "e3"), "{}", doc.doc_id);
        for event in &doc.events {
            assert!(
                matches_gold(doc, &trace, 3, &event.event_id),
                "{} {}",
                doc.doc_id,
                event.event_id
            );
        }
    }
}

#[test]
fn later_contexts_are_tagged_with_previous_iteration() {
    let corpus = small_corpus(43);
    let reader = oracle();
    let cfg = config(3, false);
    for doc in &corpus.documents {
        let trace = infer_document(&reader, doc, &corpus.ontology, &cfg).unwrap();
        for k in 2..=3 {
            let prev: HashMap<String, Vec<RoleAssignment>> = trace
                .assignments_at(k - 1)
                .iter()
                .map(|(id, a)| (id.clone(), a.clone()))
                .collect();
            for event in &doc.events {
                let hood = neighbors(doc, &event.event_id, cfg.window).unwrap();
                let expected = augment(doc, &event.event_id, &prev, &hood).unwrap();
                assert_eq!(trace.iterations[k - 1].contexts[&event.event_id], expected.tokens);
            }
        }
    }
}

#[test]
fn updates_do_not_depend_on_event_order() {
    let corpus = small_corpus(47);
    let reader = oracle();
    let cfg = config(3, false);
    for doc in &corpus.documents {
        let mut reversed = doc.clone();
        reversed.events.reverse();
        let a = infer_document(&reader, doc, &corpus.ontology, &cfg).unwrap();
        let b = infer_document(&reader, &reversed, &corpus.ontology, &cfg).unwrap();
        for k in 1..=3 {
            assert_eq!(a.assignments_at(k), b.assignments_at(k), "{} iteration {k}", doc.doc_id);
        }
    }
}

/// Records every event id it is asked about, per iteration.
struct Spy<'a> {
    inner: &'a ScriptedReader,
    calls: RefCell<Vec<(usize, String)>>,
}

impl ArgumentExtractor for Spy<'_> {
    fn generate(&self, request: &ExtractionRequest<'_>) -> Vec<String> {
        self.calls
            .borrow_mut()
            .push((request.iteration, request.event.event_id.clone()));
        self.inner.generate(request)
    }
}

#[test]
fn every_event_is_extracted_once_per_iteration() {
    let corpus = small_corpus(53);
    let reader = oracle();
    for doc in &corpus.documents {
        let spy = Spy {
            inner: &reader,
            calls: RefCell::new(Vec::new()),
        };
        infer_document(&spy, doc, &corpus.ontology, &config(3, false)).unwrap();
        let calls = spy.calls.into_inner();
        assert_eq!(calls.len(), 3 * doc.events.len());
        for k in 1..=3 {
            let ids: BTreeSet<&str> = calls
                .iter()
                .filter(|(i, _)| *i == k)
                .map(|(_, id)| id.as_str())
                .collect();
            assert_eq!(ids.len(), doc.events.len());
        }
    }
}

#[test]
fn inference_is_deterministic() {
    let corpus = small_corpus(59);
    let reader = oracle();
    let a = infer_corpus(&reader, &corpus.documents, &corpus.ontology, &config(3, false)).unwrap();
    let b = infer_corpus(&reader, &corpus.documents, &corpus.ontology, &config(3, false)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn early_stop_at_fixpoint_keeps_the_result() {
    let corpus = chain_docs(&SynthSpec::default(), 6).unwrap();
    let reader = oracle();
    for doc in &corpus.documents {
        let full = infer_document(&reader, doc, &corpus.ontology, &config(5, false)).unwrap();
        let stopped = infer_document(&reader, doc, &corpus.ontology, &config(5, true)).unwrap();
        assert_eq!(full.iterations.len(), 5);
        assert_eq!(full.fixpoint_iteration, None);
        assert_eq!(stopped.fixpoint_iteration, Some(4), "{}", doc.doc_id);
        assert_eq!(stopped.iterations.len(), 4);
        assert_eq!(stopped.final_assignments(), full.final_assignments());
    }
}

#[test]
fn second_iteration_does_not_lower_oracle_f1() {
    let corpus = generate(&SynthSpec {
        num_docs: 60,
        ambiguity_rate: 0.5,
        seed: 61,
        ..SynthSpec::default()
    })
    .unwrap();
    let (_, traces) = infer_corpus(&oracle(), &corpus.documents, &corpus.ontology, &config(2, false)).unwrap();
    let gold = gold_map(&corpus.documents);
    let f1 = |k| {
        score(&assignments_by_iteration(&traces, k), &gold, &corpus.documents)
            .unwrap()
            .cell(Task::Classification, MatchMode::Head)
            .f1
    };
    let (first, second) = (f1(1), f1(2));
    assert!(first < 1.0, "no event needed a neighbor");
    assert!(second >= first, "F1 fell from {first} to {second}");
    assert_eq!(second, 1.0);
}

#[test]
fn events_of_unknown_type_are_skipped() {
    let mut doc = chain_docs(&SynthSpec::default(), 1).unwrap().documents.remove(0);
    let ontology = builtin_ontology();
    let trigger = doc.events[0].trigger;
    doc.events.push(EventMention {
        event_id: "riot".into(),
        event_type: "Riot".into(),
        trigger: Span::new(trigger.start, trigger.end),
        gold_args: vec![RoleAssignment::new("Leader", Span::new(0, 1))],
    });
    let trace = infer_document(&oracle(), &doc, &ontology, &config(3, false)).unwrap();
    assert_eq!(trace.skipped.len(), 1);
    assert_eq!(trace.skipped[0].event_id, "riot");
    assert!(trace.skipped[0].reason.contains("Riot"));
    for record in &trace.iterations {
        assert!(!record.assignments.contains_key("riot"));
        assert_eq!(record.assignments.len(), doc.events.len() - 1);
    }
    let (preds, _) = infer_corpus(&oracle(), std::slice::from_ref(&doc), &ontology, &config(3, false)).unwrap();
    assert!(!preds.contains_key(&EventKey::new(&doc.doc_id, "riot")));
    let expected: BTreeMap<_, _> = infer_document(&oracle(), &without(&doc, "riot"), &ontology, &config(3, false))
        .unwrap()
        .final_assignments()
        .clone();
    assert_eq!(trace.final_assignments(), &expected);
}

fn without(doc: &Document, event_id: &str) -> Document {
    let mut d = doc.clone();
    d.events.retain(|e| e.event_id != event_id);
    d
}

#[test]
fn invalid_configs_are_rejected() {
    let doc = &small_corpus(67).documents[0];
    let ontology = builtin_ontology();
    for cfg in [
        config(0, false),
        InferenceConfig {
            window: 0,
            ..config(2, false)
        },
    ] {
        assert!(infer_document(&oracle(), doc, &ontology, &cfg).is_err());
    }
}
