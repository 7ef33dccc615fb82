use std::collections::HashMap;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augmentation::{augment, neighbors};
use crate::corpus::{Document, EventKey, RoleAssignment};
use crate::error::{Error, Result};
use crate::ontology::Ontology;
use crate::templating::{build_input, fill_template};

use super::loss::{objective, total_loss, LossComponents, PreparedInstance};
use super::network::ExtractorModel;
use super::vocab::UNK;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Weight on the augmented-context extraction loss.
    pub alpha: f64,
    /// Weight on the alignment loss.
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub neighborhood_window: usize,
    pub seed: u64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    /// Per-step probability of embedding an unprotected token type as `<unk>`.
    pub unk_dropout: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            alpha: 1.0,
            beta: 0.5,
            learning_rate: 3e-5,
            epochs: 1,
            batch_size: 8,
            neighborhood_window: 40,
            seed: 0,
            clip_norm: 0.0,
            unk_dropout: 0.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha >= 0.0
            && self.beta >= 0.0
            && self.learning_rate > 0.0
            && self.batch_size > 0
            && self.neighborhood_window > 0
            && self.clip_norm >= 0.0
            && (0.0..1.0).contains(&self.unk_dropout);
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("invalid training config {self:?}")))
        }
    }
}

/// Batch-mean losses of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingStepReport {
    pub step: usize,
    #[serde(rename = "loss_E")]
    pub loss_e: f64,
    #[serde(rename = "loss_E_aug")]
    pub loss_e_aug: f64,
    #[serde(rename = "loss_T")]
    pub loss_t: f64,
    pub loss_total: f64,
}

impl TrainingStepReport {
    pub fn from_components(step: usize, c: LossComponents, alpha: f64, beta: f64) -> Self {
        TrainingStepReport {
            step,
            loss_e: c.extraction,
            loss_e_aug: c.extraction_augmented,
            loss_t: c.alignment,
            loss_total: total_loss(c.extraction, c.extraction_augmented, c.alignment, alpha, beta),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub model: ExtractorModel,
    pub reports: Vec<TrainingStepReport>,
    /// Events skipped because their type is missing from the ontology.
    pub skipped_events: usize,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(size: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; size],
            v: vec![0.0; size],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// A training instance before encoding: regular input, augmented input built
/// from gold neighbor arguments, and the gold filled template.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub key: EventKey,
    pub regular: crate::templating::InputSequence,
    pub augmented: crate::templating::InputSequence,
    pub target: crate::templating::FilledTemplate,
}

/// One example per event whose type the ontology knows, plus the number of
/// events skipped.
pub fn training_examples(
    corpus: &[Document],
    ontology: &Ontology,
    window: usize,
) -> Result<(Vec<TrainingExample>, usize)> {
    let mut examples = Vec::new();
    let mut skipped = 0;
    for doc in corpus {
        let gold: HashMap<String, Vec<RoleAssignment>> = doc
            .events
            .iter()
            .map(|e| (e.event_id.clone(), e.gold_args.clone()))
            .collect();
        for event in &doc.events {
            let Some(template) = ontology.get(&event.event_type) else {
                warn!(
                    "skipping {}/{}: event type {} not in ontology",
                    doc.doc_id, event.event_id, event.event_type
                );
                skipped += 1;
                continue;
            };
            let hood = neighbors(doc, &event.event_id, window)?;
            let regular = augment(
                doc,
                &event.event_id,
                &gold,
                &crate::augmentation::Neighborhood::empty(&event.event_id, window),
            )?;
            let augmented = augment(doc, &event.event_id, &gold, &hood)?;
            examples.push(TrainingExample {
                key: EventKey::new(&doc.doc_id, &event.event_id),
                regular: build_input(template, &regular.tokens)?,
                augmented: build_input(template, &augmented.tokens)?,
                target: fill_template(template, &event.gold_args, doc)?,
            });
        }
    }
    Ok((examples, skipped))
}

/// Mean loss components over `instances` at the model's current parameters.
pub fn evaluate_objective(
    model: &ExtractorModel,
    instances: &[PreparedInstance],
    alpha: f64,
    beta: f64,
) -> LossComponents {
    let mut sum = LossComponents::default();
    for inst in instances {
        let c = objective(model, &model.params, inst, alpha, beta, None);
        sum.extraction += c.extraction;
        sum.extraction_augmented += c.extraction_augmented;
        sum.alignment += c.alignment;
    }
    let n = instances.len().max(1) as f64;
    LossComponents {
        extraction: sum.extraction / n,
        extraction_augmented: sum.extraction_augmented / n,
        alignment: sum.alignment / n,
    }
}

/// Trains on every event of `corpus`, one optimizer step per batch of
/// shuffled instances. Deterministic given `config.seed`.
pub fn train(
    model: ExtractorModel,
    corpus: &[Document],
    ontology: &Ontology,
    config: &TrainingConfig,
) -> Result<TrainingRun> {
    config.validate()?;
    let (examples, skipped_events) = training_examples(corpus, ontology, config.neighborhood_window)?;
    let instances = examples
        .iter()
        .map(|e| PreparedInstance::new(&model, &e.regular, &e.augmented, &e.target))
        .collect::<Result<Vec<_>>>()?;
    let mut run = train_prepared(model, &instances, config);
    run.skipped_events = skipped_events;
    Ok(run)
}

/// The optimization loop over already-encoded instances.
pub fn train_prepared(
    mut model: ExtractorModel,
    instances: &[PreparedInstance],
    config: &TrainingConfig,
) -> TrainingRun {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(model.params.len(), config.learning_rate);
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut reports = Vec::new();
    let unk = model.vocab.id(UNK);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut sum = LossComponents::default();
            for &i in batch {
                let dropped;
                let inst = if config.unk_dropout > 0.0 {
                    dropped = instances[i].with_unk_dropout(unk, config.unk_dropout, &mut rng);
                    &dropped
                } else {
                    &instances[i]
                };
                let c = objective(&model, &model.params, inst, config.alpha, config.beta, Some(&mut grad));
                sum.extraction += c.extraction;
                sum.extraction_augmented += c.extraction_augmented;
                sum.alignment += c.alignment;
            }
            let n = batch.len() as f64;
            grad.iter_mut().for_each(|g| *g /= n);
            if config.clip_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > config.clip_norm {
                    let s = config.clip_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            adam.step(&mut model.params, &grad);
            let mean = LossComponents {
                extraction: sum.extraction / n,
                extraction_augmented: sum.extraction_augmented / n,
                alignment: sum.alignment / n,
            };
            reports.push(TrainingStepReport::from_components(
                reports.len(),
                mean,
                config.alpha,
                config.beta,
            ));
        }
        if let Some(last) = reports.last() {
            debug!("epoch {epoch}: last step loss {:.4}", last.loss_total);
        }
    }
    TrainingRun {
        model,
        reports,
        skipped_events: 0,
    }
}
