use std::collections::BTreeSet;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::templating::{FilledTemplate, InputSequence, TokenOrigin};

use super::encoding::{encode_input, encode_target, EncodedInput, EncodedTarget, ExtendedVocab};
use super::network::{decode, encode, ExtractorModel, ParamNodes};
use super::tape::Tape;
use super::vocab::SPECIALS;
use crate::augmentation::TAG_OPEN;

/// Per-instance loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub extraction: f64,
    pub extraction_augmented: f64,
    pub alignment: f64,
}

impl LossComponents {
    pub fn total(&self, alpha: f64, beta: f64) -> f64 {
        total_loss(self.extraction, self.extraction_augmented, self.alignment, alpha, beta)
    }
}

/// `L_E + α·L_E′ + β·L_T`
pub fn total_loss(extraction: f64, extraction_augmented: f64, alignment: f64, alpha: f64, beta: f64) -> f64 {
    extraction + alpha * extraction_augmented + beta * alignment
}

/// `−Σ_r ln dists[r, targets[r]]`
pub fn sequence_nll(dists: &Array2<f64>, targets: &[usize]) -> f64 {
    targets.iter().enumerate().map(|(r, &t)| -dists[[r, t]].ln()).sum()
}

/// `Σ_{r ∈ rows} ‖p_r − q_r‖₂`
pub fn distribution_l2_sum(p: &Array2<f64>, q: &Array2<f64>, rows: &[usize]) -> f64 {
    rows.iter()
        .map(|&r| {
            let d = &p.row(r) - &q.row(r);
            d.dot(&d).sqrt()
        })
        .sum()
}

/// One training instance encoded against a model's vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedInstance {
    pub(crate) regular: EncodedInput,
    /// `None` when the augmented input equals the regular one.
    pub(crate) augmented: Option<EncodedInput>,
    pub(crate) target: EncodedTarget,
    pub(crate) width: usize,
    pub(crate) argument_positions: Vec<usize>,
    /// Ids never replaced by `<unk>` during training: template tokens and tag roles.
    pub(crate) protected: BTreeSet<usize>,
}

impl PreparedInstance {
    pub fn new(
        model: &ExtractorModel,
        regular: &InputSequence,
        augmented: &InputSequence,
        target: &FilledTemplate,
    ) -> Result<Self> {
        if regular.tokens[regular.template_region.clone()] != augmented.tokens[augmented.template_region.clone()] {
            return Err(Error::Model(
                "regular and augmented inputs carry different templates".into(),
            ));
        }
        let mut ext = ExtendedVocab::new(&model.vocab);
        let reg = encode_input(model, &mut ext, regular)?;
        let aug = encode_input(model, &mut ext, augmented)?;
        let target_enc = encode_target(model, &ext, target)?;
        let mut protected: BTreeSet<usize> = reg.copy_ids[regular.template_region.clone()].iter().copied().collect();
        protected.extend(0..SPECIALS.len());
        for w in aug.copy_ids.windows(2) {
            if w[0] == model.vocab.id(TAG_OPEN) {
                protected.insert(w[1]);
            }
        }
        Ok(PreparedInstance {
            protected,
            augmented: (aug != reg).then_some(aug),
            regular: reg,
            target: target_enc,
            width: ext.width(),
            argument_positions: target.argument_positions(),
        })
    }

    pub fn has_distinct_augmented(&self) -> bool {
        self.augmented.is_some()
    }

    /// A copy whose embedding ids map each unprotected token type to `<unk>`
    /// with probability `rate`, consistently across both inputs and the
    /// decoder inputs. Copy targets are unchanged.
    pub fn with_unk_dropout<R: Rng>(&self, unk: usize, rate: f64, rng: &mut R) -> PreparedInstance {
        let mut types: BTreeSet<usize> = self.regular.embed_ids.iter().copied().collect();
        types.retain(|id| !self.protected.contains(id));
        let dropped: BTreeSet<usize> = types.into_iter().filter(|_| rng.random_bool(rate)).collect();
        let apply = |ids: &[usize]| {
            ids.iter()
                .map(|id| if dropped.contains(id) { unk } else { *id })
                .collect()
        };
        let mut out = self.clone();
        out.regular.embed_ids = apply(&self.regular.embed_ids);
        if let Some(aug) = &mut out.augmented {
            aug.embed_ids = apply(&aug.embed_ids);
        }
        out.target.decoder_inputs = apply(&self.target.decoder_inputs);
        out
    }
}

/// Loss terms of one instance at parameters `theta`; when `grad` is given,
/// `∂(L_E + α·L_E′ + β·L_T)/∂θ` is added into it.
pub fn objective(
    model: &ExtractorModel,
    theta: &[f64],
    inst: &PreparedInstance,
    alpha: f64,
    beta: f64,
    grad: Option<&mut [f64]>,
) -> LossComponents {
    let mut tape = Tape::new();
    let p = ParamNodes::new(&mut tape, theta, model.layout());
    let radius = model.arch.conv_radius;
    let dec_in = &inst.target.decoder_inputs;

    let enc = encode(&mut tape, &p, radius, &inst.regular.embed_ids);
    let probs = decode(&mut tape, &p, enc, &inst.regular.copy_ids, inst.width, dec_in);
    let le = tape.nll(probs, &inst.target.targets);

    let (loss, components) = match &inst.augmented {
        None => {
            let loss = tape.weighted_sum(&[(le, 1.0 + alpha)]);
            let l = tape.scalar(le);
            (
                loss,
                LossComponents {
                    extraction: l,
                    extraction_augmented: l,
                    alignment: 0.0,
                },
            )
        }
        Some(aug) => {
            let enc_a = encode(&mut tape, &p, radius, &aug.embed_ids);
            let probs_a = decode(&mut tape, &p, enc_a, &aug.copy_ids, inst.width, dec_in);
            let le_a = tape.nll(probs_a, &inst.target.targets);
            let lt = tape.row_distance(probs, probs_a, &inst.argument_positions);
            let loss = tape.weighted_sum(&[(le, 1.0), (le_a, alpha), (lt, beta)]);
            (
                loss,
                LossComponents {
                    extraction: tape.scalar(le),
                    extraction_augmented: tape.scalar(le_a),
                    alignment: tape.scalar(lt),
                },
            )
        }
    };
    if let Some(grad) = grad {
        tape.backward(loss, grad);
    }
    components
}

/// Teacher-forced output distributions for `input`, one row per target token
/// plus the end marker, over the vocabulary extended with `input`'s
/// out-of-vocabulary tokens.
pub fn output_distributions(
    model: &ExtractorModel,
    input: &InputSequence,
    target: &FilledTemplate,
) -> Result<Array2<f64>> {
    let mut ext = ExtendedVocab::new(&model.vocab);
    let enc_in = encode_input(model, &mut ext, input)?;
    let enc_t = encode_target(model, &ext, target)?;
    let mut tape = Tape::new();
    let p = ParamNodes::new(&mut tape, &model.params, model.layout());
    let enc = encode(&mut tape, &p, model.arch.conv_radius, &enc_in.embed_ids);
    let probs = decode(&mut tape, &p, enc, &enc_in.copy_ids, ext.width(), &enc_t.decoder_inputs);
    Ok(tape.value(probs).clone())
}

/// `L_E`: teacher-forced negative log-likelihood of `target` followed by the
/// end marker.
pub fn extraction_loss(model: &ExtractorModel, input: &InputSequence, target: &FilledTemplate) -> Result<f64> {
    let inst = PreparedInstance::new(model, input, input, target)?;
    Ok(objective(model, &model.params, &inst, 0.0, 0.0, None).extraction)
}

/// `L_T`: summed Euclidean distance between the regular and augmented output
/// distributions at the target's argument positions.
pub fn alignment_loss(
    model: &ExtractorModel,
    regular: &InputSequence,
    augmented: &InputSequence,
    target: &FilledTemplate,
) -> Result<f64> {
    let inst = PreparedInstance::new(model, regular, augmented, target)?;
    Ok(objective(model, &model.params, &inst, 0.0, 0.0, None).alignment)
}

/// Output distributions at the positions of one argument's tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgumentDistribution {
    pub slot: usize,
    /// Positions in the filled template.
    pub positions: Vec<usize>,
    /// One row per position.
    pub probabilities: Array2<f64>,
}

/// One [`ArgumentDistribution`] per argument filler in `target`.
pub fn argument_distributions(
    model: &ExtractorModel,
    input: &InputSequence,
    target: &FilledTemplate,
) -> Result<Vec<ArgumentDistribution>> {
    let dists = output_distributions(model, input, target)?;
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut prev_arg = false;
    for (i, origin) in target.origins.iter().enumerate() {
        match origin {
            TokenOrigin::Argument { slot } => {
                match groups.last_mut() {
                    Some((s, positions)) if prev_arg && *s == *slot => positions.push(i),
                    _ => groups.push((*slot, vec![i])),
                }
                prev_arg = true;
            }
            _ => prev_arg = false,
        }
    }
    Ok(groups
        .into_iter()
        .map(|(slot, positions)| ArgumentDistribution {
            slot,
            probabilities: dists.select(ndarray::Axis(0), &positions),
            positions,
        })
        .collect())
}
