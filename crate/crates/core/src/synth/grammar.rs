//! Built-in event types and the clause patterns that realize them.
//!
//! Pattern syntax: space-separated tokens; `{Role}` is a slot, a trailing `*`
//! marks the trigger word, and `[ ... ]` encloses the optional Place group.

use std::collections::BTreeMap;

use crate::ontology::{EventTemplate, Ontology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleKind {
    Person,
    Location,
}

#[derive(Debug, Clone, Copy)]
pub struct EventTypeDef {
    pub name: &'static str,
    pub template: &'static str,
    pub roles: &'static [(&'static str, RoleKind)],
    /// Roles that must always be filled (all but the optional one).
    pub optional_role: Option<&'static str>,
    pub clauses: &'static [&'static str],
    /// `(role, pattern)`: the role is replaced by a cue phrase.
    pub elided: &'static [(&'static str, &'static str)],
}

use RoleKind::{Location, Person};

pub const EVENT_TYPES: &[EventTypeDef] = &[
    EventTypeDef {
        name: "Attack",
        template: "<arg> attacked <arg> at <arg> place",
        roles: &[("Attacker", Person), ("Target", Person), ("Place", Location)],
        optional_role: Some("Place"),
        clauses: &[
            "{Attacker} attacked* {Target} [ in {Place} ] .",
            "{Target} was attacked* by {Attacker} [ in {Place} ] .",
            "{Attacker} ambushed* {Target} [ near {Place} ] .",
        ],
        elided: &[
            ("Attacker", "{Target} was attacked* by the suspect [ in {Place} ] ."),
            ("Target", "{Attacker} attacked* the victim [ in {Place} ] ."),
        ],
    },
    EventTypeDef {
        name: "Arrest",
        template: "<arg> arrested <arg> at <arg> place",
        roles: &[("Jailer", Person), ("Detainee", Person), ("Place", Location)],
        optional_role: Some("Place"),
        clauses: &[
            "{Jailer} arrested* {Detainee} [ in {Place} ] .",
            "{Detainee} was arrested* by {Jailer} [ in {Place} ] .",
            "{Jailer} detained* {Detainee} [ near {Place} ] .",
        ],
        elided: &[("Detainee", "{Jailer} arrested* the suspect [ in {Place} ] .")],
    },
    EventTypeDef {
        name: "Charge",
        template: "<arg> charged <arg> at <arg> place",
        roles: &[("Prosecutor", Person), ("Defendant", Person), ("Place", Location)],
        optional_role: Some("Place"),
        clauses: &[
            "{Prosecutor} charged* {Defendant} [ in {Place} ] .",
            "{Defendant} was charged* by {Prosecutor} [ in {Place} ] .",
            "{Prosecutor} indicted* {Defendant} [ near {Place} ] .",
        ],
        elided: &[("Defendant", "{Prosecutor} charged* the suspect [ in {Place} ] .")],
    },
    EventTypeDef {
        name: "Travel",
        template: "<arg> traveled to <arg> place",
        roles: &[("Traveler", Person), ("Destination", Location)],
        optional_role: None,
        clauses: &[
            "{Traveler} traveled* to {Destination} .",
            "{Traveler} went* to {Destination} .",
        ],
        elided: &[("Traveler", "the suspect traveled* to {Destination} .")],
    },
];

pub fn event_type(name: &str) -> Option<&'static EventTypeDef> {
    EVENT_TYPES.iter().find(|t| t.name == name)
}

impl EventTypeDef {
    pub fn role_kind(&self, role: &str) -> Option<RoleKind> {
        self.roles.iter().find(|(r, _)| *r == role).map(|(_, k)| *k)
    }

    pub fn elided_pattern(&self, role: &str) -> Option<&'static str> {
        self.elided.iter().find(|(r, _)| *r == role).map(|(_, p)| *p)
    }
}

pub fn builtin_ontology() -> Ontology {
    let mut o = Ontology::new();
    for t in EVENT_TYPES {
        let roles: Vec<String> = t.roles.iter().map(|(r, _)| r.to_string()).collect();
        o.insert(EventTemplate::parse(t.name, t.template, &roles).expect("built-in template is valid"))
            .expect("built-in types are distinct");
    }
    o
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Piece {
    Word(&'static str),
    Trigger(&'static str),
    Slot(&'static str),
}

/// Pattern pieces with the optional group kept or dropped.
pub(crate) fn pieces(pattern: &'static str, with_optional: bool) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut in_group = false;
    for tok in pattern.split_whitespace() {
        match tok {
            "[" => in_group = true,
            "]" => in_group = false,
            _ if in_group && !with_optional => {}
            _ => out.push(
                if let Some(role) = tok.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
                    Piece::Slot(role)
                } else if let Some(w) = tok.strip_suffix('*') {
                    Piece::Trigger(w)
                } else {
                    Piece::Word(tok)
                },
            ),
        }
    }
    out
}

pub(crate) fn is_name_token(tok: &str) -> bool {
    tok.chars().next().is_some_and(char::is_uppercase)
}

/// Matches `tokens` exactly against `pieces`, each slot taking a maximal
/// non-empty run of name tokens. Returns slot fills and the trigger index.
pub(crate) fn match_pieces<'t>(
    pieces: &[Piece],
    tokens: &'t [String],
) -> Option<(BTreeMap<&'static str, &'t [String]>, usize)> {
    let mut fills = BTreeMap::new();
    let mut trigger = None;
    let mut i = 0;
    for piece in pieces {
        match piece {
            Piece::Word(w) | Piece::Trigger(w) => {
                if tokens.get(i).map(String::as_str) != Some(*w) {
                    return None;
                }
                if matches!(piece, Piece::Trigger(_)) {
                    trigger = Some(i);
                }
                i += 1;
            }
            Piece::Slot(role) => {
                let start = i;
                while tokens.get(i).is_some_and(|t| is_name_token(t)) {
                    i += 1;
                }
                if i == start {
                    return None;
                }
                fills.insert(*role, &tokens[start..i]);
            }
        }
    }
    (i == tokens.len()).then_some((fills, trigger?))
}
