//! Argument identification and classification scores under head and
//! coreference matching, plus a role-consistency diagnostic.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EventKey, RoleAssignment, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Identification,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Head,
    Coref,
}

/// The span's annotated head, else its last token.
pub fn head_of(span: &Span, _doc: &Document) -> usize {
    span.head.unwrap_or(span.end.saturating_sub(1))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted: usize,
    pub gold: usize,
    pub matched: usize,
}

impl CellScore {
    pub fn from_counts(predicted: usize, gold: usize, matched: usize) -> Self {
        let precision = if predicted == 0 {
            0.0
        } else {
            matched as f64 / predicted as f64
        };
        let recall = if gold == 0 { 0.0 } else { matched as f64 / gold as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        CellScore {
            precision,
            recall,
            f1,
            predicted,
            gold,
            matched,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchScores {
    pub head: CellScore,
    pub coref: CellScore,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub identification: MatchScores,
    pub classification: MatchScores,
}

impl ScoreReport {
    pub fn cell(&self, task: Task, mode: MatchMode) -> &CellScore {
        let t = match task {
            Task::Identification => &self.identification,
            Task::Classification => &self.classification,
        };
        match mode {
            MatchMode::Head => &t.head,
            MatchMode::Coref => &t.coref,
        }
    }
}

/// Whether `pred` may be credited to `gold` within one event of `doc`.
pub fn compatible(pred: &RoleAssignment, gold: &RoleAssignment, doc: &Document, task: Task, mode: MatchMode) -> bool {
    if task == Task::Classification && pred.role != gold.role {
        return false;
    }
    let h = head_of(&pred.span, doc);
    if h == head_of(&gold.span, doc) {
        return true;
    }
    if mode == MatchMode::Head {
        return false;
    }
    let cluster = gold
        .entity_id
        .as_deref()
        .and_then(|id| doc.cluster(id))
        .or_else(|| doc.cluster_containing(&gold.span));
    cluster.is_some_and(|c| c.member_spans.iter().any(|m| head_of(m, doc) == h))
}

/// Size of a maximum matching between predictions and gold arguments. Edges
/// are explored with same-role gold first, then by position.
pub fn matched_count(
    preds: &[RoleAssignment],
    gold: &[RoleAssignment],
    doc: &Document,
    task: Task,
    mode: MatchMode,
) -> usize {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by_key(|&i| (preds[i].span.start, preds[i].span.end, preds[i].role.clone()));
    let adj: Vec<Vec<usize>> = order
        .iter()
        .map(|&i| {
            let mut edges: Vec<usize> = (0..gold.len())
                .filter(|&j| compatible(&preds[i], &gold[j], doc, task, mode))
                .collect();
            edges.sort_by_key(|&j| (gold[j].role != preds[i].role, gold[j].span.start, gold[j].span.end));
            edges
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; gold.len()];
    let mut total = 0;
    for p in 0..adj.len() {
        let mut seen = vec![false; gold.len()];
        if augment_path(p, &adj, &mut owner, &mut seen) {
            total += 1;
        }
    }
    total
}

fn augment_path(p: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &g in &adj[p] {
        if seen[g] {
            continue;
        }
        seen[g] = true;
        if owner[g].is_none_or(|q| augment_path(q, adj, owner, seen)) {
            owner[g] = Some(p);
            return true;
        }
    }
    false
}

/// Drops repeated `(role, span)` pairs; spans differing only in their head
/// annotation are distinct predictions.
fn dedup(a: &[RoleAssignment]) -> Vec<RoleAssignment> {
    let mut seen = BTreeSet::new();
    a.iter()
        .filter(|x| seen.insert((x.role.as_str(), x.span)))
        .cloned()
        .collect()
}

/// One metric cell, micro-averaged over all gold events.
pub fn score_cell(
    pred: &BTreeMap<EventKey, Vec<RoleAssignment>>,
    gold: &BTreeMap<EventKey, Vec<RoleAssignment>>,
    docs: &[Document],
    task: Task,
    mode: MatchMode,
) -> Result<CellScore> {
    let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    if let Some(k) = pred.keys().find(|k| !gold.contains_key(k)) {
        return Err(Error::UnknownEvent(format!("{}/{}", k.doc_id, k.event_id)));
    }
    let (mut n_pred, mut n_gold, mut n_match) = (0, 0, 0);
    for (key, g) in gold {
        let doc = by_id
            .get(key.doc_id.as_str())
            .ok_or_else(|| Error::UnknownEvent(format!("{}/{} (document not supplied)", key.doc_id, key.event_id)))?;
        let p = pred.get(key).map(|p| dedup(p)).unwrap_or_default();
        let g = dedup(g);
        n_pred += p.len();
        n_gold += g.len();
        n_match += matched_count(&p, &g, doc, task, mode);
    }
    Ok(CellScore::from_counts(n_pred, n_gold, n_match))
}

/// All four cells.
pub fn score(
    pred: &BTreeMap<EventKey, Vec<RoleAssignment>>,
    gold: &BTreeMap<EventKey, Vec<RoleAssignment>>,
    docs: &[Document],
) -> Result<ScoreReport> {
    let cell = |t, m| score_cell(pred, gold, docs, t, m);
    Ok(ScoreReport {
        identification: MatchScores {
            head: cell(Task::Identification, MatchMode::Head)?,
            coref: cell(Task::Identification, MatchMode::Coref)?,
        },
        classification: MatchScores {
            head: cell(Task::Classification, MatchMode::Head)?,
            coref: cell(Task::Classification, MatchMode::Coref)?,
        },
    })
}

/// Gold arguments of `docs` in the ordered map form `score` takes.
pub fn gold_map(docs: &[Document]) -> BTreeMap<EventKey, Vec<RoleAssignment>> {
    crate::corpus::gold_assignments(docs).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRoleProfile {
    pub entity_id: String,
    /// Role → number of events assigning it.
    pub roles: BTreeMap<String, usize>,
    pub events: usize,
    pub majority_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentConsistency {
    pub doc_id: String,
    pub entities: Vec<EntityRoleProfile>,
    /// Fraction of profiled entities whose majority share reaches the threshold.
    pub summary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub threshold: f64,
    pub documents: Vec<DocumentConsistency>,
    pub summary: Option<f64>,
}

/// Role profiles of entities that are arguments of at least two events.
/// Descriptive only.
pub fn consistency_report(
    pred: &BTreeMap<EventKey, Vec<RoleAssignment>>,
    docs: &[Document],
    threshold: f64,
) -> ConsistencyReport {
    let mut documents = Vec::new();
    let (mut hits, mut total) = (0usize, 0usize);
    for doc in docs {
        // entity → event → roles
        let mut uses: BTreeMap<String, BTreeMap<String, BTreeSet<String>>> = BTreeMap::new();
        for event in &doc.events {
            let Some(args) = pred.get(&EventKey::new(&doc.doc_id, &event.event_id)) else {
                continue;
            };
            for a in args {
                let h = head_of(&a.span, doc);
                let cluster = doc
                    .clusters
                    .iter()
                    .find(|c| c.member_spans.iter().any(|m| head_of(m, doc) == h));
                if let Some(c) = cluster {
                    uses.entry(c.entity_id.clone())
                        .or_default()
                        .entry(event.event_id.clone())
                        .or_default()
                        .insert(a.role.clone());
                }
            }
        }
        let mut entities = Vec::new();
        for (entity_id, events) in uses {
            if events.len() < 2 {
                continue;
            }
            let mut roles = BTreeMap::new();
            for role_set in events.values() {
                for r in role_set {
                    *roles.entry(r.clone()).or_insert(0) += 1;
                }
            }
            let majority = roles.values().copied().max().unwrap_or(0);
            let majority_share = majority as f64 / events.len() as f64;
            entities.push(EntityRoleProfile {
                entity_id,
                roles,
                events: events.len(),
                majority_share,
            });
        }
        let doc_hits = entities.iter().filter(|e| e.majority_share >= threshold).count();
        hits += doc_hits;
        total += entities.len();
        documents.push(DocumentConsistency {
            doc_id: doc.doc_id.clone(),
            summary: (!entities.is_empty()).then(|| doc_hits as f64 / entities.len() as f64),
            entities,
        });
    }
    ConsistencyReport {
        threshold,
        documents,
        summary: (total > 0).then(|| hits as f64 / total as f64),
    }
}
