//! Model input layout, gold filled templates, and parsing generated filled
//! templates back into role assignments.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, RoleAssignment, Span};
use crate::error::{Error, Result};
use crate::ontology::{EventTemplate, TemplateToken, ARG_PLACEHOLDER};

pub const SEQ_START: &str = "<s>";
pub const SEQ_END: &str = "</s>";
/// Joins several fills of one slot.
pub const JOIN_TOKEN: &str = "and";

/// `<s> template </s> </s> context </s>`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSequence {
    pub tokens: Vec<String>,
    pub template_region: Range<usize>,
    pub context_region: Range<usize>,
}

pub fn build_input(template: &EventTemplate, context: &[String]) -> Result<InputSequence> {
    if context.is_empty() {
        return Err(Error::Template("empty context".into()));
    }
    let surface = template.surface_tokens();
    let mut tokens = Vec::with_capacity(surface.len() + context.len() + 4);
    tokens.push(SEQ_START.to_string());
    tokens.extend(surface);
    let template_region = 1..tokens.len();
    tokens.push(SEQ_END.to_string());
    tokens.push(SEQ_END.to_string());
    let start = tokens.len();
    tokens.extend(context.iter().cloned());
    let context_region = start..tokens.len();
    tokens.push(SEQ_END.to_string());
    Ok(InputSequence {
        tokens,
        template_region,
        context_region,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenOrigin {
    Literal,
    Argument { slot: usize },
    Join { slot: usize },
    Placeholder { slot: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilledTemplate {
    pub tokens: Vec<String>,
    pub slot_fills: Vec<Vec<String>>,
    pub origins: Vec<TokenOrigin>,
}

impl FilledTemplate {
    /// Positions of tokens copied from argument spans.
    pub fn argument_positions(&self) -> Vec<usize> {
        self.origins
            .iter()
            .enumerate()
            .filter(|(_, o)| matches!(o, TokenOrigin::Argument { .. }))
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn fill_template(
    template: &EventTemplate,
    assignments: &[RoleAssignment],
    doc: &Document,
) -> Result<FilledTemplate> {
    for a in assignments {
        if !template.has_role(&a.role) {
            return Err(Error::Template(format!(
                "role {} not in template for {}",
                a.role, template.event_type
            )));
        }
    }
    let mut tokens = Vec::new();
    let mut origins = Vec::new();
    let mut slot_fills = Vec::with_capacity(template.num_slots());
    for tok in &template.template_tokens {
        match tok {
            TemplateToken::Literal(s) => {
                tokens.push(s.clone());
                origins.push(TokenOrigin::Literal);
            }
            TemplateToken::Slot(slot) => {
                let mut fill = Vec::new();
                let mut fill_origins = Vec::new();
                for a in assignments.iter().filter(|a| a.role == slot.role) {
                    if !fill.is_empty() {
                        fill.push(JOIN_TOKEN.to_string());
                        fill_origins.push(TokenOrigin::Join { slot: slot.slot_index });
                    }
                    for t in doc.span_tokens(&a.span) {
                        fill.push(t.clone());
                        fill_origins.push(TokenOrigin::Argument { slot: slot.slot_index });
                    }
                }
                if fill.is_empty() {
                    fill.push(ARG_PLACEHOLDER.to_string());
                    fill_origins.push(TokenOrigin::Placeholder { slot: slot.slot_index });
                }
                tokens.extend(fill.iter().cloned());
                origins.extend(fill_origins);
                slot_fills.push(fill);
            }
        }
    }
    Ok(FilledTemplate {
        tokens,
        slot_fills,
        origins,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedFill {
    pub assignments: Vec<RoleAssignment>,
    /// Problems met while parsing; parsing itself never fails.
    pub diagnostics: Vec<String>,
}

/// Literal runs around the slots: `runs[i]` precedes slot `i`, `runs[k]` trails the last slot.
pub(crate) fn literal_runs(template: &EventTemplate) -> Vec<Vec<&str>> {
    let mut runs = vec![Vec::new()];
    for tok in &template.template_tokens {
        match tok {
            TemplateToken::Literal(s) => runs.last_mut().unwrap().push(s.as_str()),
            TemplateToken::Slot(_) => runs.push(Vec::new()),
        }
    }
    runs
}

/// Literal runs of a rendered template surface, `<arg>` marking the slots.
pub(crate) fn surface_runs(surface: &[String]) -> Vec<Vec<&str>> {
    let mut runs = vec![Vec::new()];
    for tok in surface {
        if tok == ARG_PLACEHOLDER {
            runs.push(Vec::new());
        } else {
            runs.last_mut().unwrap().push(tok.as_str());
        }
    }
    runs
}

/// Output tokens up to (excluding) the first end marker, leading start marker dropped.
pub(crate) fn trim_markers(output: &[String]) -> &[String] {
    &output[trimmed_range(output)]
}

pub(crate) fn trimmed_range(output: &[String]) -> Range<usize> {
    let start = usize::from(output.first().is_some_and(|t| t == SEQ_START));
    let end = output[start..]
        .iter()
        .position(|t| t == SEQ_END)
        .map_or(output.len(), |i| start + i);
    start..end
}

fn find_from(haystack: &[String], needle: &[&str], from: usize) -> Option<usize> {
    if needle.is_empty() {
        return Some(from);
    }
    if haystack.len() < needle.len() {
        return None;
    }
    (from..=haystack.len() - needle.len())
        .find(|&i| haystack[i..i + needle.len()].iter().zip(needle).all(|(a, b)| a == b))
}

/// Slot fill ranges recovered by greedy leftmost alignment of the literal
/// runs. `None` for slots past the first literal run that could not be placed.
pub(crate) fn align_fills(output: &[String], runs: &[Vec<&str>]) -> Vec<Option<Range<usize>>> {
    let k = runs.len() - 1;
    let mut fills = vec![None; k];
    let Some(first) = find_from(output, &runs[0], 0) else {
        return fills;
    };
    let mut cursor = first + runs[0].len();
    for j in 1..=k {
        let at = if j == k && runs[j].is_empty() {
            Some(output.len())
        } else {
            find_from(output, &runs[j], cursor)
        };
        match at {
            Some(at) => {
                fills[j - 1] = Some(cursor..at);
                cursor = at + runs[j].len();
            }
            None => break,
        }
    }
    fills
}

/// Earliest exact occurrence of `needle` in `context`.
pub fn ground(needle: &[String], context: &[String]) -> Option<Span> {
    if needle.is_empty() || needle.len() > context.len() {
        return None;
    }
    (0..=context.len() - needle.len())
        .find(|&i| context[i..i + needle.len()] == *needle)
        .map(|i| Span::new(i, i + needle.len()))
}

/// Parses a generated filled template. Total: malformed output yields fewer
/// (possibly zero) assignments plus diagnostics.
pub fn parse_filled(output: &[String], template: &EventTemplate, context: &[String]) -> ParsedFill {
    let output = trim_markers(output);
    let mut parsed = ParsedFill::default();
    let fills = align_fills(output, &literal_runs(template));
    for (slot, fill) in template.slots().zip(&fills) {
        let Some(fill) = fill.clone().map(|r| &output[r]) else {
            parsed.diagnostics.push(format!(
                "slot {} ({}): literal alignment broke",
                slot.slot_index, slot.role
            ));
            continue;
        };
        for piece in fill.split(|t| t == JOIN_TOKEN) {
            if piece.is_empty() || (piece.len() == 1 && piece[0] == ARG_PLACEHOLDER) {
                continue;
            }
            match ground(piece, context) {
                Some(span) => {
                    let a = RoleAssignment::new(slot.role.clone(), span);
                    if !parsed.assignments.contains(&a) {
                        parsed.assignments.push(a);
                    }
                }
                None => parsed.diagnostics.push(format!(
                    "slot {} ({}): fill {:?} not found in context",
                    slot.slot_index,
                    slot.role,
                    piece.join(" ")
                )),
            }
        }
    }
    if !fills.is_empty() && fills.iter().all(Option::is_none) {
        parsed
            .diagnostics
            .push("output could not be aligned to the template".into());
    }
    parsed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EventMention;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn attack() -> EventTemplate {
        EventTemplate::parse(
            "Attack",
            "<arg> detonated or exploded <arg> explosive device using <arg> to attack <arg> target at <arg> place",
            &["Attacker", "ExplosiveDevice", "Instrument", "Target", "Place"].map(String::from),
        )
        .unwrap()
    }

    fn doc(text: &str) -> Document {
        Document {
            doc_id: "d".into(),
            tokens: words(text),
            events: vec![EventMention {
                event_id: "e".into(),
                event_type: "Attack".into(),
                trigger: Span::new(0, 1),
                gold_args: vec![],
            }],
            clusters: vec![],
        }
    }

    #[test]
    fn input_layout() {
        let t = EventTemplate::parse("X", "<arg> did <arg>", &["A", "B"].map(String::from)).unwrap();
        let input = build_input(&t, &words("w x y z")).unwrap();
        assert_eq!(input.tokens.len(), 3 + 4 + 4);
        assert_eq!(input.tokens.join(" "), "<s> <arg> did <arg> </s> </s> w x y z </s>");
        assert_eq!(input.template_region, 1..4);
        assert_eq!(input.context_region, 6..10);
    }

    #[test]
    fn attack_input_begins_with_template() {
        let ctx = words("The Saturday night's <trg> bombing <trg> in New York City");
        let input = build_input(&attack(), &ctx).unwrap();
        assert_eq!(input.tokens[..5].join(" "), "<s> <arg> detonated or exploded");
        assert_eq!(&input.tokens[input.context_region.clone()], ctx.as_slice());
    }

    #[test]
    fn zero_slot_template_layout() {
        let t = EventTemplate::parse("X", "nothing happened", &[]).unwrap();
        let input = build_input(&t, &words("a")).unwrap();
        assert_eq!(input.tokens.join(" "), "<s> nothing happened </s> </s> a </s>");
        assert!(build_input(&t, &[]).is_err());
    }

    #[test]
    fn fill_attacker_only() {
        let d = doc("police say Ahmad Khan Rahami planted it");
        let a = vec![RoleAssignment::new("Attacker", Span::new(2, 5))];
        let f = fill_template(&attack(), &a, &d).unwrap();
        assert_eq!(
            f.tokens.join(" "),
            "Ahmad Khan Rahami detonated or exploded <arg> explosive device using <arg> to attack <arg> target at <arg> place"
        );
        assert_eq!(f.argument_positions(), vec![0, 1, 2]);
        assert_eq!(f.slot_fills[0], words("Ahmad Khan Rahami"));
    }

    #[test]
    fn no_assignments_is_template() {
        let d = doc("x");
        let f = fill_template(&attack(), &[], &d).unwrap();
        assert_eq!(f.tokens.join(" "), attack().render());
    }

    #[test]
    fn multiple_fills_joined() {
        let d = doc("attack on the USS Cole in the Yemeni port of Aden");
        let a = vec![
            RoleAssignment::new("Target", Span::new(4, 5)),
            RoleAssignment::new("Target", Span::new(8, 9)),
        ];
        let f = fill_template(&attack(), &a, &d).unwrap();
        assert_eq!(f.slot_fills[3], words("Cole and port"));
        let parsed = parse_filled(&f.tokens, &attack(), &d.tokens);
        assert_eq!(parsed.assignments, a);
    }

    #[test]
    fn unknown_role_rejected() {
        let d = doc("x y");
        let a = vec![RoleAssignment::new("Victim", Span::new(0, 1))];
        assert!(fill_template(&attack(), &a, &d).is_err());
    }

    #[test]
    fn length_identity() {
        let d = doc("a b c d e f");
        let a = vec![
            RoleAssignment::new("Attacker", Span::new(0, 2)),
            RoleAssignment::new("Place", Span::new(3, 4)),
            RoleAssignment::new("Place", Span::new(5, 6)),
        ];
        let t = attack();
        let f = fill_template(&t, &a, &d).unwrap();
        let fill_len: usize = f.slot_fills.iter().map(Vec::len).sum();
        assert_eq!(f.tokens.len(), t.template_tokens.len() - t.num_slots() + fill_len);
    }

    #[test]
    fn truncated_output_recovers_leading_slots() {
        let ctx = words("Rahami used a bomb near the station");
        let out = words("Rahami detonated or exploded bomb explosive device using");
        let parsed = parse_filled(&out, &attack(), &ctx);
        assert_eq!(
            parsed.assignments,
            vec![
                RoleAssignment::new("Attacker", Span::new(0, 1)),
                RoleAssignment::new("ExplosiveDevice", Span::new(3, 4)),
            ]
        );
        assert!(!parsed.diagnostics.is_empty());
    }

    #[test]
    fn end_marker_and_garbage_after_it_ignored() {
        let ctx = words("x Rahami");
        let mut out = words("<s> Rahami detonated or exploded <arg> explosive device using <arg> to attack <arg> target at <arg> place </s> junk");
        let parsed = parse_filled(&out, &attack(), &ctx);
        assert_eq!(
            parsed.assignments,
            vec![RoleAssignment::new("Attacker", Span::new(1, 2))]
        );
        out.clear();
        assert!(parse_filled(&out, &attack(), &ctx).assignments.is_empty());
    }

    #[test]
    fn unmatched_fill_is_diagnosed() {
        let ctx = words("a b c");
        let out =
            words("zz detonated or exploded <arg> explosive device using <arg> to attack <arg> target at <arg> place");
        let parsed = parse_filled(&out, &attack(), &ctx);
        assert!(parsed.assignments.is_empty());
        assert!(parsed.diagnostics[0].contains("not found"));
    }
}
