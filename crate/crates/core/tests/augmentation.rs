use std::collections::HashMap;

use proptest::prelude::*;

use eventarg::augmentation::{augment, neighbors, regular_context, strip_tag_tokens, strip_tags, TAG_OPEN};
use eventarg::corpus::{Document, EventMention, RoleAssignment, Span};

const ROLES: [&str; 3] = ["Attacker", "Target", "Place"];

fn arb_span(n: usize) -> impl Strategy<Value = Span> {
    (0..n)
        .prop_flat_map(move |s| (Just(s), s + 1..=(s + 3).min(n)))
        .prop_map(|(s, e)| Span::new(s, e))
}

/// A document plus one assignment list per event.
fn arb_doc() -> impl Strategy<Value = (Document, HashMap<String, Vec<RoleAssignment>>)> {
    (1usize..60)
        .prop_flat_map(|n| {
            let event = (arb_span(n), prop::collection::vec((0..ROLES.len(), arb_span(n)), 0..4));
            (
                prop::collection::vec("[a-z]{1,3}", n),
                prop::collection::vec(event, 1..6),
            )
        })
        .prop_map(|(tokens, events)| {
            let mut assignments = HashMap::new();
            let mut mentions = Vec::new();
            for (i, (trigger, args)) in events.into_iter().enumerate() {
                let id = format!("e{i}");
                let args: Vec<RoleAssignment> = args
                    .into_iter()
                    .map(|(r, s)| RoleAssignment::new(ROLES[r], s))
                    .collect();
                assignments.insert(id.clone(), args);
                mentions.push(EventMention {
                    event_id: id,
                    event_type: "Attack".into(),
                    trigger,
                    gold_args: Vec::new(),
                });
            }
            let doc = Document {
                doc_id: "doc".into(),
                tokens,
                events: mentions,
                clusters: Vec::new(),
            };
            (doc, assignments)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn stripping_tags_restores_the_document((doc, assigned) in arb_doc(), window in 1usize..80) {
        for event in &doc.events {
            let hood = neighbors(&doc, &event.event_id, window).unwrap();
            let aug = augment(&doc, &event.event_id, &assigned, &hood).unwrap();
            prop_assert_eq!(&strip_tags(&aug).unwrap(), &doc.tokens);
            prop_assert_eq!(&strip_tag_tokens(&aug.tokens).unwrap(), &doc.tokens);

            let expected: usize = hood.neighbor_ids.iter().map(|id| assigned[id].len()).sum();
            prop_assert_eq!(aug.tag_pairs(), expected);
            prop_assert_eq!(aug.tagged_roles.len(), expected);
            prop_assert_eq!(aug.tokens.iter().filter(|t| *t == TAG_OPEN).count(), expected);
            for tagged in &aug.tagged_roles {
                prop_assert!(hood.neighbor_ids.contains(&tagged.event_id));
                prop_assert!(tagged.event_id != event.event_id);
            }
            // Each tag sits immediately before the first token of its span.
            for (i, t) in aug.tokens.iter().enumerate() {
                if t == TAG_OPEN {
                    let next = aug.offset_map[i..].iter().flatten().next().copied();
                    let role = &aug.tokens[i + 1];
                    prop_assert!(aug.tagged_roles.iter().any(|r| &r.role == role && Some(r.span.start) == next));
                }
            }
        }
    }

    #[test]
    fn regular_context_adds_only_trigger_markers((doc, _) in arb_doc()) {
        for event in &doc.events {
            let ctx = regular_context(&doc, &event.event_id).unwrap();
            prop_assert_eq!(ctx.tokens.len(), doc.tokens.len() + 2);
            prop_assert_eq!(ctx.tag_pairs(), 0);
            prop_assert_eq!(&strip_tags(&ctx).unwrap(), &doc.tokens);
        }
    }

    #[test]
    fn neighborhood_is_strict_symmetric_and_irreflexive(
        starts in prop::collection::vec(0usize..200, 1..12),
        window in prop_oneof![Just(40usize), 1usize..100],
    ) {
        let doc = layout_doc(&starts);
        let hoods: Vec<Vec<String>> = doc
            .events
            .iter()
            .map(|e| neighbors(&doc, &e.event_id, window).unwrap().neighbor_ids)
            .collect();
        for (i, a) in doc.events.iter().enumerate() {
            prop_assert!(!hoods[i].contains(&a.event_id));
            for (j, b) in doc.events.iter().enumerate() {
                if i == j {
                    continue;
                }
                let close = a.trigger.start.abs_diff(b.trigger.start) < window;
                prop_assert_eq!(hoods[i].contains(&b.event_id), close);
                prop_assert_eq!(hoods[i].contains(&b.event_id), hoods[j].contains(&a.event_id));
            }
            let dists: Vec<usize> = hoods[i]
                .iter()
                .map(|id| a.trigger.start.abs_diff(doc.event(id).unwrap().trigger.start))
                .collect();
            prop_assert!(dists.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

fn layout_doc(starts: &[usize]) -> Document {
    let n = starts.iter().max().copied().unwrap_or(0) + 2;
    Document {
        doc_id: "layout".into(),
        tokens: (0..n).map(|i| format!("t{i}")).collect(),
        events: starts
            .iter()
            .enumerate()
            .map(|(i, &s)| EventMention {
                event_id: format!("e{i}"),
                event_type: "Attack".into(),
                trigger: Span::new(s, s + 1),
                gold_args: Vec::new(),
            })
            .collect(),
        clusters: Vec::new(),
    }
}

#[test]
fn window_boundary_is_exclusive() {
    let doc = layout_doc(&[0, 39, 40, 79]);
    assert_eq!(neighbors(&doc, "e0", 40).unwrap().neighbor_ids, vec!["e1"]);
    assert_eq!(neighbors(&doc, "e1", 40).unwrap().neighbor_ids, vec!["e2", "e0"]);
    assert_eq!(neighbors(&doc, "e3", 40).unwrap().neighbor_ids, vec!["e2"]);
}

#[test]
fn every_tagged_neighbor_needs_assignments() {
    let doc = layout_doc(&[0, 5]);
    let hood = neighbors(&doc, "e0", 40).unwrap();
    assert!(augment(&doc, "e0", &HashMap::new(), &hood).is_err());
    let assigned = HashMap::from([("e1".to_string(), vec![RoleAssignment::new("Place", Span::new(3, 5))])]);
    let aug = augment(&doc, "e0", &assigned, &hood).unwrap();
    let text = aug.tokens.join(" ");
    assert_eq!(text, "<trg> t0 <trg> t1 t2 <tag> Place </tag> t3 t4 t5 t6");
}
