//! Event neighborhoods and the tagging operation that turns a document into a
//! self-augmented context for one target event.
//!
//! Arguments of neighboring events are announced by a `<tag> Role </tag>`
//! triple inserted immediately before the argument span; the target trigger
//! is wrapped in `<trg>` markers. The target's own arguments are never tagged.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{token_distance, Document, RoleAssignment, Span};
use crate::error::{Error, Result};

pub const TAG_OPEN: &str = "<tag>";
pub const TAG_CLOSE: &str = "</tag>";
pub const TRIGGER_MARKER: &str = "<trg>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub target_event: String,
    /// Ordered by trigger distance, ties by document order.
    pub neighbor_ids: Vec<String>,
    pub window: usize,
}

impl Neighborhood {
    pub fn empty(target_event: impl Into<String>, window: usize) -> Self {
        Neighborhood {
            target_event: target_event.into(),
            neighbor_ids: Vec::new(),
            window,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.neighbor_ids.is_empty()
    }
}

/// Events whose trigger start lies strictly closer than `window` tokens to the target's.
pub fn neighbors(doc: &Document, target: &str, window: usize) -> Result<Neighborhood> {
    doc.event(target)?;
    let mut found = Vec::new();
    for (idx, event) in doc.events.iter().enumerate() {
        if event.event_id == target {
            continue;
        }
        let d = token_distance(doc, target, &event.event_id)?;
        if d < window {
            found.push((d, idx, event.event_id.clone()));
        }
    }
    found.sort();
    Ok(Neighborhood {
        target_event: target.to_string(),
        neighbor_ids: found.into_iter().map(|(_, _, id)| id).collect(),
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedRole {
    pub event_id: String,
    pub role: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedContext {
    pub tokens: Vec<String>,
    /// Source index in the original document, `None` for inserted tokens.
    pub offset_map: Vec<Option<usize>>,
    pub tagged_roles: Vec<TaggedRole>,
}

impl AugmentedContext {
    pub fn tag_pairs(&self) -> usize {
        self.tokens
            .iter()
            .zip(&self.offset_map)
            .filter(|(t, o)| o.is_none() && t.as_str() == TAG_OPEN)
            .count()
    }

    /// Position in `tokens` of original token `index`.
    pub fn position_of(&self, index: usize) -> Option<usize> {
        self.offset_map.iter().position(|o| *o == Some(index))
    }
}

struct Insertion<'a> {
    rank: usize,
    event_id: &'a str,
    assignment: &'a RoleAssignment,
}

/// Builds the augmented context of `target`, tagging every assignment of
/// every event in `neighborhood`.
///
/// Tags that land on the same token are stacked by neighbor rank, then role
/// name. `assignments` must hold an entry (possibly empty) for each neighbor.
pub fn augment(
    doc: &Document,
    target: &str,
    assignments: &HashMap<String, Vec<RoleAssignment>>,
    neighborhood: &Neighborhood,
) -> Result<AugmentedContext> {
    let target_event = doc.event(target)?;
    if neighborhood.target_event != target {
        return Err(Error::Augmentation(format!(
            "neighborhood belongs to {}, not {target}",
            neighborhood.target_event
        )));
    }
    let n = doc.tokens.len();

    let mut by_start: Vec<Vec<Insertion>> = (0..n).map(|_| Vec::new()).collect();
    for (rank, id) in neighborhood.neighbor_ids.iter().enumerate() {
        if id == target {
            continue;
        }
        doc.event(id)?;
        let list = assignments
            .get(id)
            .ok_or_else(|| Error::Augmentation(format!("no assignments supplied for neighbor {id}")))?;
        for a in list {
            if a.span.start >= a.span.end || a.span.end > n {
                return Err(Error::Augmentation(format!(
                    "span [{}, {}) of {id}/{} does not belong to document {} ({n} tokens)",
                    a.span.start, a.span.end, a.role, doc.doc_id
                )));
            }
            by_start[a.span.start].push(Insertion {
                rank,
                event_id: id,
                assignment: a,
            });
        }
    }

    let trigger = target_event.trigger;
    let mut tokens = Vec::with_capacity(n + 2);
    let mut offset_map = Vec::with_capacity(n + 2);
    let mut tagged_roles = Vec::new();
    let insert = |tokens: &mut Vec<String>, offset_map: &mut Vec<Option<usize>>, t: &str| {
        tokens.push(t.to_string());
        offset_map.push(None);
    };

    for p in 0..=n {
        if trigger.end == p {
            insert(&mut tokens, &mut offset_map, TRIGGER_MARKER);
        }
        if let Some(slot) = by_start.get_mut(p) {
            slot.sort_by(|a, b| (a.rank, &a.assignment.role).cmp(&(b.rank, &b.assignment.role)));
            for ins in slot.iter() {
                insert(&mut tokens, &mut offset_map, TAG_OPEN);
                insert(&mut tokens, &mut offset_map, &ins.assignment.role);
                insert(&mut tokens, &mut offset_map, TAG_CLOSE);
                tagged_roles.push(TaggedRole {
                    event_id: ins.event_id.to_string(),
                    role: ins.assignment.role.clone(),
                    span: ins.assignment.span,
                });
            }
        }
        if trigger.start == p {
            insert(&mut tokens, &mut offset_map, TRIGGER_MARKER);
        }
        if p < n {
            tokens.push(doc.tokens[p].clone());
            offset_map.push(Some(p));
        }
    }

    Ok(AugmentedContext {
        tokens,
        offset_map,
        tagged_roles,
    })
}

/// Context with trigger markers only (no neighbor tags).
pub fn regular_context(doc: &Document, target: &str) -> Result<AugmentedContext> {
    augment(doc, target, &HashMap::new(), &Neighborhood::empty(target, 0))
}

/// Removes inserted tokens using the offset map, checking tag well-formedness
/// and that the remaining tokens are the document in order.
pub fn strip_tags(aug: &AugmentedContext) -> Result<Vec<String>> {
    if aug.tokens.len() != aug.offset_map.len() {
        return Err(Error::Augmentation("offset map length differs from token count".into()));
    }
    let mut out = Vec::new();
    let mut i = 0;
    let mut markers = 0;
    while i < aug.tokens.len() {
        match aug.offset_map[i] {
            Some(src) => {
                if src != out.len() {
                    return Err(Error::Augmentation(format!(
                        "offset map out of order at position {i}: expected {}, found {src}",
                        out.len()
                    )));
                }
                out.push(aug.tokens[i].clone());
                i += 1;
            }
            None => match aug.tokens[i].as_str() {
                TRIGGER_MARKER => {
                    markers += 1;
                    i += 1;
                }
                TAG_OPEN => {
                    let closed = i + 2 < aug.tokens.len()
                        && aug.offset_map[i + 1].is_none()
                        && aug.offset_map[i + 2].is_none()
                        && aug.tokens[i + 2] == TAG_CLOSE;
                    if !closed {
                        return Err(Error::Augmentation(format!("unclosed tag at position {i}")));
                    }
                    i += 3;
                }
                other => {
                    return Err(Error::Augmentation(format!(
                        "stray inserted token {other:?} at position {i}"
                    )))
                }
            },
        }
    }
    if markers % 2 != 0 {
        return Err(Error::Augmentation("unpaired trigger marker".into()));
    }
    Ok(out)
}

/// Strips tags from a bare token sequence (no offset map), e.g. text rendered
/// by another tool.
pub fn strip_tag_tokens(tokens: &[String]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut i = 0;
    let mut markers = 0;
    while i < tokens.len() {
        match tokens[i].as_str() {
            TAG_OPEN => {
                if i + 2 >= tokens.len() || tokens[i + 2] != TAG_CLOSE {
                    return Err(Error::Augmentation(format!("unclosed tag at position {i}")));
                }
                i += 3;
            }
            TAG_CLOSE => return Err(Error::Augmentation(format!("unopened tag at position {i}"))),
            TRIGGER_MARKER => {
                markers += 1;
                i += 1;
            }
            _ => {
                out.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    if markers % 2 != 0 {
        return Err(Error::Augmentation("unpaired trigger marker".into()));
    }
    Ok(out)
}
