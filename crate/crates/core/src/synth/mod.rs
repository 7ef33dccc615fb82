//! Synthetic corpora with planted cross-event role rules.
//!
//! Documents are sequences of episodes separated by filler text so that
//! triggers of different episodes are at least `neighborhood_window` tokens
//! apart. A rule `A.r ⇒ B.s` is planted by a pair episode: an `A` event that
//! names its `r` argument, followed or preceded by a `B` event whose `s` role
//! is replaced by a cue phrase. The gold `s` argument of the `B` event is the
//! mention of the `A` event's `r` argument, so it is recoverable from a tag
//! on that neighbor but not from the `B` clause itself. Every such target
//! also has a distractor `A` event in another episode.

mod grammar;
mod oracle;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EntityCluster, EventMention, RoleAssignment, Span};
use crate::error::{Error, Result};
use crate::ontology::Ontology;

pub use grammar::{builtin_ontology, event_type, EventTypeDef, RoleKind, EVENT_TYPES};
pub use oracle::ScriptedReader;

use grammar::{pieces, Piece};

/// `source_type.source_role ⇒ target_type.target_role`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub source_type: String,
    pub source_role: String,
    pub target_type: String,
    pub target_role: String,
}

impl Rule {
    pub fn new(source: (&str, &str), target: (&str, &str)) -> Self {
        Rule {
            source_type: source.0.into(),
            source_role: source.1.into(),
            target_type: target.0.into(),
            target_role: target.1.into(),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{} => {}.{}",
            self.source_type, self.source_role, self.target_type, self.target_role
        )
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Synth(format!("cannot parse rule {s:?}; expected Type.Role => Type.Role"));
        let (lhs, rhs) = s.split_once("=>").ok_or_else(bad)?;
        let (st, sr) = lhs.trim().split_once('.').ok_or_else(bad)?;
        let (tt, tr) = rhs.trim().split_once('.').ok_or_else(bad)?;
        Ok(Rule::new((st, sr), (tt, tr)))
    }
}

impl Serialize for Rule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn default_rules() -> Vec<Rule> {
    vec![
        Rule::new(("Arrest", "Detainee"), ("Attack", "Attacker")),
        Rule::new(("Attack", "Attacker"), ("Charge", "Defendant")),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub num_docs: usize,
    /// Inclusive range; episodes hold two or three events each.
    pub events_per_doc: (usize, usize),
    /// Number of distinct pseudo-words used for names and filler.
    pub vocabulary_size: usize,
    pub entity_pool_size: usize,
    pub rules: Vec<Rule>,
    /// Fraction of events whose regular context leaves one role unresolved.
    pub ambiguity_rate: f64,
    /// Probability that an optional Place argument is present.
    pub place_rate: f64,
    pub neighborhood_window: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_docs: 100,
            events_per_doc: (4, 6),
            vocabulary_size: 400,
            entity_pool_size: 200,
            rules: default_rules(),
            ambiguity_rate: 0.5,
            place_rate: 0.5,
            neighborhood_window: 40,
            seed: 0,
        }
    }
}

/// Per-event answer key entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKeyEntry {
    pub doc_id: String,
    pub event_id: String,
    pub requires_neighbor: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rule: Option<Rule>,
    /// Event whose argument resolves the elided role.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source_event: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub ontology: Ontology,
    pub answer_key: Vec<AnswerKeyEntry>,
}

/// Chain episodes (three events, two flagged) are needed above this rate.
const PAIR_ONLY_MAX_RATE: f64 = 0.5;
/// Flagged-event deficit that shifts an episode probability by 1.
const DEFICIT_SCALE: f64 = 8.0;
const CHAIN_MAX_RATE: f64 = 2.0 / 3.0;

/// Two rules forming a propagation chain `A.r ⇒ B.s`, `B.s ⇒ C.t`.
fn find_chain(rules: &[Rule]) -> Option<(&Rule, &Rule)> {
    rules.iter().find_map(|r1| {
        rules
            .iter()
            .find(|r2| r2.source_type == r1.target_type && r2.source_role == r1.target_role)
            .map(|r2| (r1, r2))
    })
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Synth(m));
        if !(0.0..=1.0).contains(&self.ambiguity_rate) || !(0.0..=1.0).contains(&self.place_rate) {
            return err("rates must lie in [0, 1]".into());
        }
        if self.neighborhood_window == 0 {
            return err("neighborhood window must be positive".into());
        }
        let (lo, hi) = self.events_per_doc;
        if lo < 2 || lo > hi {
            return err(format!(
                "events_per_doc range ({lo}, {hi}) must satisfy 2 <= min <= max"
            ));
        }
        if self.vocabulary_size < 20 {
            return err("vocabulary_size must be at least 20".into());
        }
        if self.entity_pool_size < 12 {
            return err("entity_pool_size must be at least 12".into());
        }
        validate_rules(&self.rules)?;
        if self.ambiguity_rate > 0.0 {
            if self.rules.is_empty() {
                return err("a positive ambiguity rate needs at least one rule".into());
            }
            if lo < 4 {
                return err("a positive ambiguity rate needs at least 4 events per document".into());
            }
        }
        if self.ambiguity_rate > PAIR_ONLY_MAX_RATE {
            let Some(_) = find_chain(&self.rules) else {
                return err(format!(
                    "ambiguity rate {} is unattainable: rates above {PAIR_ONLY_MAX_RATE} need two chained rules",
                    self.ambiguity_rate
                ));
            };
            if self.ambiguity_rate > CHAIN_MAX_RATE {
                return err(format!(
                    "ambiguity rate {} is unattainable: at most {CHAIN_MAX_RATE:.3} of events can depend on a neighbor",
                    self.ambiguity_rate
                ));
            }
        }
        Ok(())
    }
}

/// Checks rules against the built-in event types.
pub fn validate_rules(rules: &[Rule]) -> Result<()> {
    let mut targets = BTreeSet::new();
    for rule in rules {
        let fail = |why: &str| Err(Error::Synth(format!("rule {rule}: {why}")));
        let Some(src) = event_type(&rule.source_type) else {
            return fail("unknown source event type");
        };
        let Some(tgt) = event_type(&rule.target_type) else {
            return fail("unknown target event type");
        };
        let (Some(sk), Some(tk)) = (src.role_kind(&rule.source_role), tgt.role_kind(&rule.target_role)) else {
            return fail("unknown role");
        };
        if sk != tk {
            return fail("source and target roles have different kinds");
        }
        if src.name == tgt.name {
            return fail("source and target must be different event types");
        }
        if tgt.elided_pattern(&rule.target_role).is_none() {
            return fail("target role has no elided clause and cannot be planted");
        }
        if !targets.insert((rule.target_type.as_str(), rule.target_role.as_str())) {
            return fail("another rule already targets this role");
        }
    }
    // Cycles over event types make chain construction ill-defined.
    let edges: Vec<(&str, &str)> = rules
        .iter()
        .map(|r| (r.source_type.as_str(), r.target_type.as_str()))
        .collect();
    for rule in rules {
        let start = rule.target_type.as_str();
        let mut stack = vec![start];
        let mut seen = HashSet::new();
        while let Some(t) = stack.pop() {
            if t == rule.source_type {
                return Err(Error::Synth(format!("rule {rule}: rules form a cycle")));
            }
            if seen.insert(t) {
                stack.extend(edges.iter().filter(|(s, _)| *s == t).map(|(_, d)| *d));
            }
        }
    }
    Ok(())
}

/// Pseudo-words and entity names drawn once per spec.
struct Lexicon {
    filler: Vec<String>,
    people: Vec<Vec<String>>,
    places: Vec<Vec<String>>,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "br", "tr", "kr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "n", "r", "l", "s", "k", "m"];

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Words that must never be generated as pseudo-words.
fn reserved_words() -> HashSet<String> {
    let mut set: HashSet<String> = [
        "the", "suspect", "victim", "and", "place", "was", "by", "in", "to", "near", "at",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for t in EVENT_TYPES {
        for p in t.clauses.iter().chain(t.elided.iter().map(|(_, p)| p)) {
            for piece in pieces(p, true) {
                if let Piece::Word(w) | Piece::Trigger(w) = piece {
                    set.insert(w.to_string());
                }
            }
        }
        set.extend(t.template.split_whitespace().map(str::to_string));
    }
    set
}

impl Lexicon {
    fn new(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let reserved = reserved_words();
        let mut words = BTreeSet::new();
        let mut ordered = Vec::new();
        while ordered.len() < spec.vocabulary_size {
            let syllables = rng.random_range(2..=3);
            let w: String = (0..syllables)
                .map(|_| {
                    format!(
                        "{}{}{}",
                        ONSETS.choose(rng).unwrap(),
                        VOWELS.choose(rng).unwrap(),
                        CODAS.choose(rng).unwrap()
                    )
                })
                .collect();
            if !reserved.contains(&w) && words.insert(w.clone()) {
                ordered.push(w);
            }
        }
        // First half: filler words; second half: name parts.
        let split = ordered.len() / 2;
        let filler = ordered[..split].to_vec();
        let name_parts: Vec<String> = ordered[split..].iter().map(|w| capitalize(w)).collect();
        let n_places = (spec.entity_pool_size / 4).max(4);
        let n_people = spec.entity_pool_size - n_places;
        let mut people = Vec::with_capacity(n_people);
        let mut seen = HashSet::new();
        while people.len() < n_people {
            let len = if rng.random_bool(0.5) { 1 } else { 2 };
            let name: Vec<String> = (0..len).map(|_| name_parts.choose(rng).unwrap().clone()).collect();
            if (len == 1 || name[0] != name[1]) && seen.insert(name.clone()) {
                people.push(name);
            }
        }
        let mut places = Vec::with_capacity(n_places);
        let mut attempts = 0;
        while places.len() < n_places && attempts < 100_000 {
            attempts += 1;
            let name = vec![name_parts.choose(rng).unwrap().clone()];
            if seen.insert(name.clone()) {
                places.push(name);
            }
        }
        Lexicon { filler, people, places }
    }
}

/// A planned event before rendering.
#[derive(Debug, Clone)]
struct PlannedEvent {
    event_type: &'static EventTypeDef,
    /// Role → index into the document's entity list.
    roles: BTreeMap<&'static str, usize>,
    /// Elided role, resolved by `source` (index of the planned event).
    elided: Option<(&'static str, usize, Rule)>,
}

#[derive(Debug, Clone)]
struct Episode {
    events: Vec<PlannedEvent>,
    /// Minimum trigger gap forced between consecutive events (chains).
    spaced: bool,
}

/// Draws distinct entities for a document, no two sharing a token.
struct EntityPicker<'a> {
    lexicon: &'a Lexicon,
    used_tokens: HashSet<String>,
    entities: Vec<Vec<String>>,
}

impl<'a> EntityPicker<'a> {
    fn pick(&mut self, kind: RoleKind, rng: &mut ChaCha8Rng) -> Result<usize> {
        let pool = match kind {
            RoleKind::Person => &self.lexicon.people,
            RoleKind::Location => &self.lexicon.places,
        };
        for _ in 0..1000 {
            let cand = pool.choose(rng).expect("non-empty pool");
            if cand.iter().all(|t| !self.used_tokens.contains(t)) {
                self.used_tokens.extend(cand.iter().cloned());
                self.entities.push(cand.clone());
                return Ok(self.entities.len() - 1);
            }
        }
        Err(Error::Synth("entity pool exhausted; increase entity_pool_size".into()))
    }
}

fn plan_event(
    def: &'static EventTypeDef,
    elide: Option<&'static str>,
    spec: &SynthSpec,
    picker: &mut EntityPicker<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<PlannedEvent> {
    let mut roles = BTreeMap::new();
    for &(role, kind) in def.roles {
        if Some(role) == elide {
            continue;
        }
        if Some(role) == def.optional_role && !rng.random_bool(spec.place_rate) {
            continue;
        }
        roles.insert(role, picker.pick(kind, rng)?);
    }
    Ok(PlannedEvent {
        event_type: def,
        roles,
        elided: None,
    })
}

fn static_role(def: &'static EventTypeDef, role: &str) -> &'static str {
    def.roles
        .iter()
        .find(|(r, _)| *r == role)
        .map(|(r, _)| *r)
        .expect("validated role")
}

fn pair_episode(rule: &Rule, spec: &SynthSpec, picker: &mut EntityPicker<'_>, rng: &mut ChaCha8Rng) -> Result<Episode> {
    let src_def = event_type(&rule.source_type).expect("validated");
    let tgt_def = event_type(&rule.target_type).expect("validated");
    let src_role = static_role(src_def, &rule.source_role);
    let tgt_role = static_role(tgt_def, &rule.target_role);
    let mut source = plan_event(src_def, None, spec, picker, rng)?;
    if !source.roles.contains_key(src_role) {
        let kind = src_def.role_kind(src_role).expect("validated");
        source.roles.insert(src_role, picker.pick(kind, rng)?);
    }
    let mut target = plan_event(tgt_def, Some(tgt_role), spec, picker, rng)?;
    let source_first = rng.random_bool(0.5);
    let source_idx = if source_first { 0 } else { 1 };
    target.elided = Some((tgt_role, source_idx, rule.clone()));
    let events = if source_first {
        vec![source, target]
    } else {
        vec![target, source]
    };
    Ok(Episode { events, spaced: false })
}

fn chain_episode(
    r1: &Rule,
    r2: &Rule,
    spec: &SynthSpec,
    picker: &mut EntityPicker<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Episode> {
    let a = event_type(&r1.source_type).expect("validated");
    let b = event_type(&r1.target_type).expect("validated");
    let c = event_type(&r2.target_type).expect("validated");
    let a_role = static_role(a, &r1.source_role);
    let mut first = plan_event(a, None, spec, picker, rng)?;
    if !first.roles.contains_key(a_role) {
        let kind = a.role_kind(a_role).expect("validated");
        first.roles.insert(a_role, picker.pick(kind, rng)?);
    }
    let mut second = plan_event(b, Some(static_role(b, &r1.target_role)), spec, picker, rng)?;
    second.elided = Some((static_role(b, &r1.target_role), 0, r1.clone()));
    let mut third = plan_event(c, Some(static_role(c, &r2.target_role)), spec, picker, rng)?;
    third.elided = Some((static_role(c, &r2.target_role), 1, r2.clone()));
    Ok(Episode {
        events: vec![first, second, third],
        spaced: true,
    })
}

fn plain_episode(
    first_type: Option<&'static EventTypeDef>,
    spec: &SynthSpec,
    picker: &mut EntityPicker<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Episode> {
    let mut events = Vec::new();
    for i in 0..2 {
        let def = match (i, first_type) {
            (0, Some(t)) => t,
            _ => EVENT_TYPES.choose(rng).expect("non-empty"),
        };
        events.push(plan_event(def, None, spec, picker, rng)?);
    }
    events.shuffle(rng);
    Ok(Episode { events, spaced: false })
}

struct Builder<'a> {
    tokens: Vec<String>,
    lexicon: &'a Lexicon,
}

impl Builder<'_> {
    fn filler(&mut self, rng: &mut ChaCha8Rng) {
        let w = |rng: &mut ChaCha8Rng| self.lexicon.filler.choose(rng).unwrap().clone();
        let sentence = [
            "the".to_string(),
            w(rng),
            w(rng),
            "was".to_string(),
            w(rng),
            ".".to_string(),
        ];
        self.tokens.extend(sentence);
    }
}

/// Renders an event clause at the end of `tokens`; returns trigger span and
/// the span of each named role.
fn render_clause(
    event: &PlannedEvent,
    pattern: &'static str,
    entities: &[Vec<String>],
    tokens: &mut Vec<String>,
) -> (Span, BTreeMap<&'static str, Span>) {
    let def = event.event_type;
    let with_optional = def.optional_role.is_none_or(|r| event.roles.contains_key(r));
    let mut trigger = Span::new(0, 0);
    let mut spans = BTreeMap::new();
    for piece in pieces(pattern, with_optional) {
        match piece {
            Piece::Word(w) => tokens.push(w.to_string()),
            Piece::Trigger(w) => {
                trigger = Span::new(tokens.len(), tokens.len() + 1);
                tokens.push(w.to_string());
            }
            Piece::Slot(role) => {
                let name = &entities[event.roles[role]];
                spans.insert(role, Span::new(tokens.len(), tokens.len() + name.len()));
                tokens.extend(name.iter().cloned());
            }
        }
    }
    (trigger, spans)
}

fn choose_pattern(event: &PlannedEvent, rng: &mut ChaCha8Rng) -> &'static str {
    let def = event.event_type;
    match event.elided {
        Some((role, _, _)) => def.elided_pattern(role).expect("validated elided role"),
        None => def.clauses.choose(rng).expect("non-empty"),
    }
}

struct RenderedDoc {
    doc: Document,
    key: Vec<AnswerKeyEntry>,
}

fn render_document(
    doc_id: String,
    episodes: &[Episode],
    entities: Vec<Vec<String>>,
    lexicon: &Lexicon,
    window: usize,
    rng: &mut ChaCha8Rng,
) -> RenderedDoc {
    let mut b = Builder {
        tokens: Vec::new(),
        lexicon,
    };
    // Chains space consecutive triggers by at least half a window so that
    // the first and third events are a full window apart.
    let chain_gap = window.div_ceil(2) + 1;
    let mut events = Vec::new();
    let mut key = Vec::new();
    let mut entity_mentions: Vec<Vec<Span>> = vec![Vec::new(); entities.len()];
    let mut last_trigger: Option<usize> = None;
    for (e_idx, episode) in episodes.iter().enumerate() {
        let mut ids_in_episode: Vec<String> = Vec::new();
        let mut spans_in_episode = Vec::new();
        let mut rendered: Vec<(Span, BTreeMap<&'static str, Span>)> = Vec::new();
        for (i, event) in episode.events.iter().enumerate() {
            let required_gap = if i == 0 {
                if e_idx == 0 {
                    0
                } else {
                    window
                }
            } else if episode.spaced {
                chain_gap
            } else {
                0
            };
            let pattern = choose_pattern(event, rng);
            // Render into scratch space first to learn the trigger offset.
            let mut scratch = Vec::new();
            let offset = render_clause(event, pattern, &entities, &mut scratch).0.start;
            if let Some(last) = last_trigger {
                while b.tokens.len() + offset < last + required_gap {
                    b.filler(rng);
                }
            }
            let (trigger, spans) = render_clause(event, pattern, &entities, &mut b.tokens);
            last_trigger = Some(trigger.start);
            rendered.push((trigger, spans.clone()));
            for (role, span) in &spans {
                entity_mentions[event.roles[role]].push(*span);
            }
            spans_in_episode.push(spans);
            ids_in_episode.push(format!("e{}", events.len() + ids_in_episode.len() + 1));
        }
        for (i, event) in episode.events.iter().enumerate() {
            let (trigger, spans) = &rendered[i];
            let mut gold_args: Vec<RoleAssignment> = spans
                .iter()
                .map(|(role, span)| RoleAssignment::new(*role, *span))
                .collect();
            let mut entry = AnswerKeyEntry {
                doc_id: doc_id.clone(),
                event_id: ids_in_episode[i].clone(),
                requires_neighbor: false,
                rule: None,
                source_event: None,
            };
            if let Some((role, source, rule)) = &event.elided {
                let src_span = resolved_span(episode, &spans_in_episode, *source, &rule.source_role);
                gold_args.push(RoleAssignment::new(*role, src_span));
                entry.requires_neighbor = true;
                entry.rule = Some(rule.clone());
                entry.source_event = Some(ids_in_episode[*source].clone());
            }
            gold_args.sort_by_key(|a| (a.span.start, a.role.clone()));
            for a in &mut gold_args {
                let ent = entity_of(&entities, &entity_mentions, &a.span);
                a.entity_id = ent.map(|i| format!("ent{i}"));
            }
            events.push(EventMention {
                event_id: ids_in_episode[i].clone(),
                event_type: event.event_type.name.to_string(),
                trigger: *trigger,
                gold_args,
            });
            key.push(entry);
        }
    }
    let clusters = entity_mentions
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(i, m)| EntityCluster {
            entity_id: format!("ent{i}"),
            member_spans: m.clone(),
        })
        .collect();
    RenderedDoc {
        doc: Document {
            doc_id,
            tokens: b.tokens,
            events,
            clusters,
        },
        key,
    }
}

/// Span naming the source event's role; follows elisions back along a chain.
fn resolved_span(episode: &Episode, spans: &[BTreeMap<&'static str, Span>], source: usize, role: &str) -> Span {
    if let Some(span) = spans[source].get(role) {
        return *span;
    }
    let (elided_role, next, rule) = episode.events[source].elided.as_ref().expect("elided role resolves");
    debug_assert_eq!(*elided_role, role);
    resolved_span(episode, spans, *next, &rule.source_role)
}

fn entity_of(entities: &[Vec<String>], mentions: &[Vec<Span>], span: &Span) -> Option<usize> {
    (0..entities.len()).find(|&i| mentions[i].contains(span))
}

/// Generates documents, the built-in ontology and the answer key.
pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lexicon = Lexicon::new(spec, &mut rng);
    let f = spec.ambiguity_rate;
    let (pair_prob, chain_prob) = if f <= PAIR_ONLY_MAX_RATE {
        (2.0 * f, 0.0)
    } else {
        (1.0, (2.0 * f - 1.0) / (1.0 - f))
    };
    let chain = find_chain(&spec.rules);
    let mut documents = Vec::with_capacity(spec.num_docs);
    let mut answer_key = Vec::new();
    // Expected minus realized flagged events so far; nudges episode choices so
    // distractor episodes do not pull the corpus rate below the target.
    let mut deficit = 0.0f64;
    for d in 0..spec.num_docs {
        let n_events = rng.random_range(spec.events_per_doc.0..=spec.events_per_doc.1);
        let n_episodes = (n_events / 2).max(1);
        let mut picker = EntityPicker {
            lexicon: &lexicon,
            used_tokens: HashSet::new(),
            entities: Vec::new(),
        };
        let doc_rule = spec.rules.choose(&mut rng).cloned();
        let mut episodes = Vec::new();
        let nudged = |p: f64| (p + deficit / DEFICIT_SCALE).clamp(0.0, 1.0);
        for _ in 0..n_episodes {
            let flagged = rng.random_bool(nudged(pair_prob));
            let ep = match (flagged, chain, &doc_rule) {
                (true, Some((r1, r2)), _) if chain_prob > 0.0 && rng.random_bool(nudged(chain_prob)) => {
                    chain_episode(r1, r2, spec, &mut picker, &mut rng)?
                }
                (true, _, Some(rule)) => pair_episode(rule, spec, &mut picker, &mut rng)?,
                _ => plain_episode(None, spec, &mut picker, &mut rng)?,
            };
            episodes.push(ep);
        }
        ensure_distractors(&mut episodes, spec, &mut picker, &mut rng)?;
        let entities = std::mem::take(&mut picker.entities);
        let rendered = render_document(
            format!("d{d:05}"),
            &episodes,
            entities,
            &lexicon,
            spec.neighborhood_window,
            &mut rng,
        );
        deficit += rendered
            .key
            .iter()
            .map(|k| f - f64::from(u8::from(k.requires_neighbor)))
            .sum::<f64>();
        documents.push(rendered.doc);
        answer_key.extend(rendered.key);
    }
    Ok(SynthCorpus {
        documents,
        ontology: builtin_ontology(),
        answer_key,
    })
}

/// Every flagged target gets an event of its source type in another episode,
/// appending a plain episode when none exists.
fn ensure_distractors(
    episodes: &mut Vec<Episode>,
    spec: &SynthSpec,
    picker: &mut EntityPicker<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut i = 0;
    while i < episodes.len() {
        let needs: Vec<&'static str> = episodes[i]
            .events
            .iter()
            .filter_map(|e| e.elided.as_ref())
            .map(|(_, _, rule)| event_type(&rule.source_type).expect("validated").name)
            .collect();
        for source_type in needs {
            let satisfied = episodes
                .iter()
                .enumerate()
                .any(|(j, ep)| j != i && ep.events.iter().any(|e| e.event_type.name == source_type));
            if !satisfied {
                let def = event_type(source_type).expect("validated");
                episodes.push(plain_episode(Some(def), spec, picker, rng)?);
            }
        }
        i += 1;
    }
    Ok(())
}

/// Documents made of one three-event propagation chain plus distractors:
/// the first event names the argument, the second and third elide it, the
/// first two and last two triggers are closer than `window`, the first and
/// third are not.
pub fn chain_docs(spec: &SynthSpec, count: usize) -> Result<SynthCorpus> {
    spec.validate()?;
    let (r1, r2) =
        find_chain(&spec.rules).ok_or_else(|| Error::Synth("chain documents need two chained rules".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lexicon = Lexicon::new(spec, &mut rng);
    let mut documents = Vec::new();
    let mut answer_key = Vec::new();
    for d in 0..count {
        let mut picker = EntityPicker {
            lexicon: &lexicon,
            used_tokens: HashSet::new(),
            entities: Vec::new(),
        };
        let mut episodes = vec![chain_episode(r1, r2, spec, &mut picker, &mut rng)?];
        ensure_distractors(&mut episodes, spec, &mut picker, &mut rng)?;
        let entities = std::mem::take(&mut picker.entities);
        let rendered = render_document(
            format!("chain{d:04}"),
            &episodes,
            entities,
            &lexicon,
            spec.neighborhood_window,
            &mut rng,
        );
        documents.push(rendered.doc);
        answer_key.extend(rendered.key);
    }
    Ok(SynthCorpus {
        documents,
        ontology: builtin_ontology(),
        answer_key,
    })
}
