use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::augmentation::{TAG_CLOSE, TAG_OPEN, TRIGGER_MARKER};
use crate::corpus::Document;
use crate::ontology::{Ontology, ARG_PLACEHOLDER};
use crate::templating::{JOIN_TOKEN, SEQ_END, SEQ_START};

pub const UNK: &str = "<unk>";

/// Special tokens, always at ids `0..SPECIALS.len()` in this order.
pub const SPECIALS: [&str; 8] = [
    UNK,
    SEQ_START,
    SEQ_END,
    ARG_PLACEHOLDER,
    TAG_OPEN,
    TAG_CLOSE,
    TRIGGER_MARKER,
    JOIN_TOKEN,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Specials, then the sorted union of role names, template literals and
    /// document tokens.
    pub fn build(docs: &[Document], ontology: &Ontology) -> Self {
        let mut rest = BTreeSet::new();
        for t in ontology.templates() {
            rest.extend(t.roles.iter().cloned());
            rest.extend(t.literals().map(String::from));
        }
        for d in docs {
            rest.extend(d.tokens.iter().cloned());
        }
        Self::from_tokens(rest)
    }

    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut all: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        for t in tokens {
            if !all.contains(&t) {
                all.push(t);
            }
        }
        Vocabulary::from(all)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> usize {
        self.get(token).unwrap_or(0)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn has_specials(&self) -> bool {
        SPECIALS
            .iter()
            .enumerate()
            .all(|(i, s)| self.tokens.get(i).map(String::as_str) == Some(*s))
    }

    pub fn id(&self, special: &str) -> usize {
        self.get(special).expect("special token present")
    }
}
