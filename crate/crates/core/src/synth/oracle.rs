use std::collections::BTreeMap;

use crate::augmentation::{TAG_CLOSE, TAG_OPEN, TRIGGER_MARKER};
use crate::inference::{ArgumentExtractor, ExtractionRequest};
use crate::ontology::TemplateToken;
use crate::ontology::ARG_PLACEHOLDER;

use super::grammar::{event_type, is_name_token, match_pieces, pieces};
use super::Rule;

/// Rule-aware pattern reader for synthetic documents. It parses the target
/// clause with the generator's patterns and resolves an elided role only
/// through a `<tag> SourceRole </tag>` announcement in its context.
#[derive(Debug, Clone)]
pub struct ScriptedReader {
    pub rules: Vec<Rule>,
}

impl ScriptedReader {
    pub fn new(rules: Vec<Rule>) -> Self {
        ScriptedReader { rules }
    }

    /// Role fills read from the context; elided roles resolved via tags.
    pub fn read(&self, event_type_name: &str, context: &[String]) -> BTreeMap<String, Vec<String>> {
        let mut out = BTreeMap::new();
        let Some(def) = event_type(event_type_name) else {
            return out;
        };
        let Some(sentence) = target_sentence(context) else {
            return out;
        };
        let plain: Vec<String> = strip_markup(sentence);
        let mut candidates: Vec<(Option<&str>, &'static str)> = def.clauses.iter().map(|p| (None, *p)).collect();
        candidates.extend(def.elided.iter().map(|(r, p)| (Some(*r), *p)));
        for (elided, pattern) in candidates {
            for with_optional in [true, false] {
                let Some((fills, _)) = match_pieces(&pieces(pattern, with_optional), &plain) else {
                    continue;
                };
                for (role, toks) in fills {
                    out.insert(role.to_string(), toks.to_vec());
                }
                if let Some(role) = elided {
                    let source_role = self
                        .rules
                        .iter()
                        .find(|r| r.target_type == def.name && r.target_role == role)
                        .map(|r| r.source_role.as_str());
                    if let Some(mention) = source_role.and_then(|s| tagged_mention(context, s)) {
                        out.insert(role.to_string(), mention);
                    }
                }
                return out;
            }
        }
        out
    }
}

impl ArgumentExtractor for ScriptedReader {
    fn generate(&self, request: &ExtractionRequest<'_>) -> Vec<String> {
        let context = &request.input.tokens[request.input.context_region.clone()];
        let fills = self.read(&request.event.event_type, context);
        let mut tokens = Vec::new();
        for tok in &request.template.template_tokens {
            match tok {
                TemplateToken::Literal(s) => tokens.push(s.clone()),
                TemplateToken::Slot(slot) => match fills.get(&slot.role) {
                    Some(f) => tokens.extend(f.iter().cloned()),
                    None => tokens.push(ARG_PLACEHOLDER.to_string()),
                },
            }
        }
        tokens
    }
}

/// The `.`-delimited sentence holding the trigger markers.
fn target_sentence(context: &[String]) -> Option<&[String]> {
    let at = context.iter().position(|t| t == TRIGGER_MARKER)?;
    let start = context[..at].iter().rposition(|t| t == ".").map_or(0, |i| i + 1);
    let end = context[at..]
        .iter()
        .position(|t| t == ".")
        .map_or(context.len(), |i| at + i + 1);
    Some(&context[start..end])
}

/// Drops trigger markers and `<tag> Role </tag>` triples.
fn strip_markup(tokens: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i].as_str() {
            TAG_OPEN => i += 3,
            TRIGGER_MARKER => i += 1,
            _ => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Name tokens following the first `<tag> role </tag>` in `context`,
/// skipping any further stacked tags.
fn tagged_mention(context: &[String], role: &str) -> Option<Vec<String>> {
    let at = context
        .windows(3)
        .position(|w| w[0] == TAG_OPEN && w[1] == role && w[2] == TAG_CLOSE)?;
    let mut i = at + 3;
    while context.get(i).map(String::as_str) == Some(TAG_OPEN) {
        i += 3;
    }
    let start = i;
    while context.get(i).is_some_and(|t| is_name_token(t)) {
        i += 1;
    }
    (i > start).then(|| context[start..i].to_vec())
}
