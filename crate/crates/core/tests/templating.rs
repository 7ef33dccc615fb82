use std::collections::BTreeSet;

use proptest::prelude::*;

use eventarg::corpus::{Document, RoleAssignment, Span};
use eventarg::ontology::{EventTemplate, ARG_PLACEHOLDER};
use eventarg::templating::{build_input, fill_template, parse_filled, JOIN_TOKEN, SEQ_END, SEQ_START};

/// A template over roles `R0..Rk` with non-empty literal runs between slots.
#[derive(Debug, Clone)]
struct Case {
    template: EventTemplate,
    doc: Document,
    assignments: Vec<RoleAssignment>,
}

fn arb_template() -> impl Strategy<Value = EventTemplate> {
    (1usize..5)
        .prop_flat_map(|k| {
            let run = |min| prop::collection::vec(0usize..6, min..3);
            (Just(k), run(0), prop::collection::vec(run(1), k - 1), run(0))
        })
        .prop_map(|(k, lead, inner, trail)| {
            let word = |i: &usize| format!("lit{i}");
            let mut parts: Vec<String> = lead.iter().map(word).collect();
            parts.push(ARG_PLACEHOLDER.into());
            for run in &inner {
                parts.extend(run.iter().map(word));
                parts.push(ARG_PLACEHOLDER.into());
            }
            parts.extend(trail.iter().map(word));
            let roles: Vec<String> = (0..k).map(|i| format!("R{i}")).collect();
            EventTemplate::parse("Ev", &parts.join(" "), &roles).unwrap()
        })
}

/// Disjoint spans over a document of unique tokens, each assigned to a role.
fn arb_case() -> impl Strategy<Value = Case> {
    (
        arb_template(),
        4usize..40,
        prop::collection::vec((0usize..8, 1usize..4), 0..6),
    )
        .prop_map(|(template, n, picks)| {
            let doc = Document {
                doc_id: "d".into(),
                tokens: (0..n).map(|i| format!("w{i}")).collect(),
                events: Vec::new(),
                clusters: Vec::new(),
            };
            let k = template.num_slots();
            let mut assignments = Vec::new();
            let mut cursor = 0;
            for (i, (gap, len)) in picks.into_iter().enumerate() {
                let start = cursor + gap;
                let end = start + len;
                if end > n {
                    break;
                }
                assignments.push(RoleAssignment::new(format!("R{}", i % k), Span::new(start, end)));
                cursor = end;
            }
            Case {
                template,
                doc,
                assignments,
            }
        })
}

fn key_set(a: &[RoleAssignment]) -> BTreeSet<(String, usize, usize)> {
    a.iter().map(RoleAssignment::key).collect()
}

#[derive(Debug, Clone)]
enum Edit {
    Delete(usize),
    Insert(usize, usize),
    Swap(usize, usize),
    Truncate(usize),
    Duplicate(usize, usize),
}

fn arb_edit() -> impl Strategy<Value = Edit> {
    prop_oneof![
        any::<usize>().prop_map(Edit::Delete),
        (any::<usize>(), 0usize..12).prop_map(|(i, t)| Edit::Insert(i, t)),
        (any::<usize>(), any::<usize>()).prop_map(|(i, j)| Edit::Swap(i, j)),
        any::<usize>().prop_map(Edit::Truncate),
        (any::<usize>(), any::<usize>()).prop_map(|(i, j)| Edit::Duplicate(i, j)),
    ]
}

fn apply(tokens: &mut Vec<String>, edit: &Edit, doc: &Document) {
    let pool = |t: usize| match t {
        0 => ARG_PLACEHOLDER.to_string(),
        1 => JOIN_TOKEN.to_string(),
        2 => SEQ_START.to_string(),
        3 => SEQ_END.to_string(),
        4 => "lit0".to_string(),
        5 => "lit3".to_string(),
        6 => "<tag>".to_string(),
        7 => "unseen".to_string(),
        t => doc.tokens[t % doc.tokens.len()].clone(),
    };
    let n = tokens.len();
    match *edit {
        Edit::Delete(i) if n > 0 => {
            tokens.remove(i % n);
        }
        Edit::Insert(i, t) => tokens.insert(i % (n + 1), pool(t)),
        Edit::Swap(i, j) if n > 0 => tokens.swap(i % n, j % n),
        Edit::Truncate(i) => tokens.truncate(i % (n + 1)),
        Edit::Duplicate(i, j) if n > 0 => {
            let (a, b) = (i % n, j % n);
            let piece: Vec<String> = tokens[a.min(b)..=a.max(b)].to_vec();
            tokens.splice(a..a, piece);
        }
        _ => {}
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_inverts_fill(case in arb_case()) {
        let filled = fill_template(&case.template, &case.assignments, &case.doc).unwrap();
        let parsed = parse_filled(&filled.tokens, &case.template, &case.doc.tokens);
        prop_assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        prop_assert_eq!(key_set(&parsed.assignments), key_set(&case.assignments));

        // Sequence markers around the output are tolerated.
        let mut framed = vec![SEQ_START.to_string()];
        framed.extend(filled.tokens.iter().cloned());
        framed.push(SEQ_END.to_string());
        let reparsed = parse_filled(&framed, &case.template, &case.doc.tokens);
        prop_assert_eq!(key_set(&reparsed.assignments), key_set(&case.assignments));
    }

    #[test]
    fn fill_positions_match_origins(case in arb_case()) {
        let filled = fill_template(&case.template, &case.assignments, &case.doc).unwrap();
        let arg_tokens: usize = case.assignments.iter().map(|a| a.span.len()).sum();
        prop_assert_eq!(filled.argument_positions().len(), arg_tokens);
        prop_assert_eq!(filled.tokens.len(), filled.origins.len());
        prop_assert_eq!(filled.slot_fills.len(), case.template.num_slots());
    }

    #[test]
    fn parse_is_total_on_corrupted_output(case in arb_case(), edits in prop::collection::vec(arb_edit(), 1..6)) {
        let mut tokens = fill_template(&case.template, &case.assignments, &case.doc).unwrap().tokens;
        for e in &edits {
            apply(&mut tokens, e, &case.doc);
        }
        let parsed = parse_filled(&tokens, &case.template, &case.doc.tokens);
        let mut seen = BTreeSet::new();
        for a in &parsed.assignments {
            prop_assert!(case.template.has_role(&a.role));
            prop_assert!(a.span.start < a.span.end && a.span.end <= case.doc.tokens.len());
            prop_assert!(seen.insert(a.key()), "duplicate {:?}", a);
        }
    }
}

#[test]
fn input_layout() {
    let template = EventTemplate::parse("Ev", "<arg> hit <arg>", &["A".into(), "B".into()]).unwrap();
    let ctx: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
    let input = build_input(&template, &ctx).unwrap();
    assert_eq!(input.tokens.join(" "), "<s> <arg> hit <arg> </s> </s> x y </s>");
    assert_eq!(input.template_region, 1..4);
    assert_eq!(input.context_region, 6..8);
    assert!(build_input(&template, &[]).is_err());
}

#[test]
fn empty_and_garbage_outputs_yield_nothing() {
    let template =
        EventTemplate::parse("Ev", "<arg> hit <arg> at <arg>", &["A".into(), "B".into(), "C".into()]).unwrap();
    let ctx: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    for out in [vec![], vec!["</s>".to_string()], vec!["hit".to_string(); 5]] {
        assert!(parse_filled(&out, &template, &ctx).assignments.is_empty());
    }
}
