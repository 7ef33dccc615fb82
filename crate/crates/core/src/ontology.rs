//! Event-type templates with `<arg>` slots bound positionally to role names.
//!
//! Ontology files are JSON objects keyed by event type:
//! `{"Attack": {"template": "<arg> attacked <arg> ...", "roles": ["Attacker", "Target"]}}`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Literal placeholder marking an argument slot, and the rendering of an unfilled slot.
pub const ARG_PLACEHOLDER: &str = "<arg>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgSlot {
    pub slot_index: usize,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateToken {
    Literal(String),
    Slot(ArgSlot),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTemplate {
    pub event_type: String,
    pub template_tokens: Vec<TemplateToken>,
    pub roles: Vec<String>,
}

impl EventTemplate {
    /// Parses a whitespace-tokenized template string, binding the i-th `<arg>`
    /// to `roles[i]`.
    pub fn parse(event_type: &str, template: &str, roles: &[String]) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut n_slots = 0;
        for tok in template.split_whitespace() {
            if tok == ARG_PLACEHOLDER {
                let role = roles.get(n_slots).cloned().unwrap_or_default();
                tokens.push(TemplateToken::Slot(ArgSlot {
                    slot_index: n_slots,
                    role,
                }));
                n_slots += 1;
            } else {
                tokens.push(TemplateToken::Literal(tok.to_string()));
            }
        }
        if n_slots != roles.len() {
            return Err(Error::Ontology(format!(
                "{event_type}: template has {n_slots} <arg> slots but {} roles",
                roles.len()
            )));
        }
        for (i, r) in roles.iter().enumerate() {
            if roles[..i].contains(r) {
                return Err(Error::Ontology(format!("{event_type}: duplicate role {r}")));
            }
        }
        Ok(EventTemplate {
            event_type: event_type.to_string(),
            template_tokens: tokens,
            roles: roles.to_vec(),
        })
    }

    /// Template tokens as strings, slots rendered as `<arg>`.
    pub fn surface_tokens(&self) -> Vec<String> {
        self.template_tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Literal(s) => s.clone(),
                TemplateToken::Slot(_) => ARG_PLACEHOLDER.to_string(),
            })
            .collect()
    }

    pub fn render(&self) -> String {
        self.surface_tokens().join(" ")
    }

    pub fn slots(&self) -> impl Iterator<Item = &ArgSlot> {
        self.template_tokens.iter().filter_map(|t| match t {
            TemplateToken::Slot(s) => Some(s),
            TemplateToken::Literal(_) => None,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.roles.len()
    }

    pub fn has_role(&self, role: &str) -> bool {
        self.roles.iter().any(|r| r == role)
    }

    pub fn literals(&self) -> impl Iterator<Item = &str> {
        self.template_tokens.iter().filter_map(|t| match t {
            TemplateToken::Literal(s) => Some(s.as_str()),
            TemplateToken::Slot(_) => None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ontology {
    templates: BTreeMap<String, EventTemplate>,
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, template: EventTemplate) -> Result<()> {
        if self.templates.contains_key(&template.event_type) {
            return Err(Error::Ontology(format!("duplicate event type {}", template.event_type)));
        }
        self.templates.insert(template.event_type.clone(), template);
        Ok(())
    }

    pub fn get(&self, event_type: &str) -> Option<&EventTemplate> {
        self.templates.get(event_type)
    }

    pub fn templates(&self) -> impl Iterator<Item = &EventTemplate> {
        self.templates.values()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Entries =
            serde_json::from_str(text).map_err(|e| Error::Ontology(format!("malformed ontology: {e}")))?;
        let mut ontology = Ontology::new();
        for (event_type, entry) in entries.0 {
            ontology.insert(EventTemplate::parse(&event_type, &entry.template, &entry.roles)?)?;
        }
        Ok(ontology)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ontology serializes")
    }
}

impl Serialize for Ontology {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.templates.len()))?;
        for t in self.templates.values() {
            map.serialize_entry(
                &t.event_type,
                &OntologyEntry {
                    template: t.render(),
                    roles: t.roles.clone(),
                },
            )?;
        }
        map.end()
    }
}

#[derive(Serialize, Deserialize)]
struct OntologyEntry {
    template: String,
    roles: Vec<String>,
}

/// Map entries in file order, duplicates kept so they can be reported.
struct Entries(Vec<(String, OntologyEntry)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping event types to templates")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, OntologyEntry>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        deserializer.deserialize_map(EntriesVisitor)
    }
}

pub fn load_ontology(path: impl AsRef<Path>) -> Result<Ontology> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ontology::from_json(&text)
}

pub fn write_ontology(path: impl AsRef<Path>, ontology: &Ontology) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ontology.to_json() + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roles(r: &[&str]) -> Vec<String> {
        r.iter().map(|s| s.to_string()).collect()
    }

    const ATTACK: &str =
        "<arg> detonated or exploded <arg> explosive device using <arg> to attack <arg> target at <arg> place";

    #[test]
    fn attack_template_has_five_slots() {
        let t = EventTemplate::parse(
            "Attack",
            ATTACK,
            &roles(&["Attacker", "ExplosiveDevice", "Instrument", "Target", "Place"]),
        )
        .unwrap();
        assert_eq!(t.num_slots(), 5);
        let slots: Vec<_> = t.slots().map(|s| (s.slot_index, s.role.as_str())).collect();
        assert_eq!(slots[0], (0, "Attacker"));
        assert_eq!(slots[4], (4, "Place"));
        assert_eq!(t.render(), ATTACK);
    }

    #[test]
    fn zero_slot_template() {
        let t = EventTemplate::parse("Nothing", "something happened", &[]).unwrap();
        assert_eq!(t.num_slots(), 0);
        assert_eq!(t.template_tokens.len(), 2);
    }

    #[test]
    fn slot_role_mismatch() {
        let err = EventTemplate::parse("X", "<arg> a <arg> b <arg>", &roles(&["A", "B"])).unwrap_err();
        assert!(err.to_string().contains("3 <arg> slots but 2 roles"));
    }

    #[test]
    fn duplicate_event_type_rejected() {
        let json = r#"{"A": {"template": "<arg> x", "roles": ["R"]}, "A": {"template": "y", "roles": []}}"#;
        let err = Ontology::from_json(json).unwrap_err();
        assert!(err.to_string().contains("duplicate event type A"));
    }

    #[test]
    fn duplicate_role_rejected() {
        assert!(EventTemplate::parse("X", "<arg> and <arg>", &roles(&["R", "R"])).is_err());
    }

    #[test]
    fn json_round_trip() {
        let json = format!(
            r#"{{"Attack": {{"template": "{ATTACK}", "roles": ["Attacker", "ExplosiveDevice", "Instrument", "Target", "Place"]}}, "Empty": {{"template": "nothing", "roles": []}}}}"#
        );
        let o = Ontology::from_json(&json).unwrap();
        let again = Ontology::from_json(&o.to_json()).unwrap();
        assert_eq!(o, again);
        assert_eq!(again.len(), 2);
    }
}
