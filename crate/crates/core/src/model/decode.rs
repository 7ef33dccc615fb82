use std::collections::BTreeSet;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::ontology::ARG_PLACEHOLDER;
use crate::templating::{
    align_fills, surface_runs, trimmed_range, FilledTemplate, InputSequence, TokenOrigin, JOIN_TOKEN, SEQ_END,
    SEQ_START,
};

use super::encoding::{encode_input, ExtendedVocab};
use super::network::{decode, encode, ExtractorModel, ParamNodes};
use super::tape::Tape;
use super::vocab::UNK;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    /// 1 selects greedy decoding.
    pub beam_size: usize,
    /// Generation stops after this many tokens beyond the template length.
    pub max_extra_tokens: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_size: 1,
            max_extra_tokens: 12,
        }
    }
}

/// Ids the decoder may emit: tokens of the input plus the placeholder, join
/// and end markers, never `<s>` or `<unk>`.
fn allowed_ids(model: &ExtractorModel, ext: &ExtendedVocab<'_>, copy_ids: &[usize]) -> Vec<usize> {
    let banned = [model.vocab.id(SEQ_START), model.vocab.id(UNK)];
    let mut set: BTreeSet<usize> = copy_ids.iter().copied().collect();
    for t in [ARG_PLACEHOLDER, JOIN_TOKEN, SEQ_END] {
        set.insert(ext.lookup(t).expect("special token in vocabulary"));
    }
    set.into_iter().filter(|id| !banned.contains(id)).collect()
}

#[derive(Debug, Clone)]
struct Hypothesis {
    ids: Vec<usize>,
    log_prob: f64,
    done: bool,
}

/// Generates a filled template. Output is masked to [`allowed_ids`] and
/// renormalized; decoding stops at the end marker or the length limit.
pub fn predict(model: &ExtractorModel, input: &InputSequence, config: &DecodeConfig) -> FilledTemplate {
    let surface = &input.tokens[input.template_region.clone()];
    let mut ext = ExtendedVocab::new(&model.vocab);
    let Ok(enc_in) = encode_input(model, &mut ext, input) else {
        return from_tokens(Vec::new(), surface);
    };
    let allowed = allowed_ids(model, &ext, &enc_in.copy_ids);
    let end = model.vocab.id(SEQ_END);
    let max_len = (surface.len() + config.max_extra_tokens).min(model.arch.max_output_len);

    let mut tape = Tape::new();
    let p = ParamNodes::new(&mut tape, &model.params, model.layout());
    let encoded = encode(&mut tape, &p, model.arch.conv_radius, &enc_in.embed_ids);
    let encoded_value = tape.value(encoded).clone();

    let next_distribution = |prefix: &[usize]| -> Array1<f64> {
        let mut tape = Tape::new();
        let p = ParamNodes::new(&mut tape, &model.params, model.layout());
        let enc = tape.constant(encoded_value.clone());
        let mut dec_in = vec![model.vocab.id(SEQ_START)];
        dec_in.extend(prefix.iter().map(|&id| ext.embed_id(id)));
        let probs = decode(&mut tape, &p, enc, &enc_in.copy_ids, ext.width(), &dec_in);
        let last = tape.value(probs).row(dec_in.len() - 1).to_owned();
        let mut masked = Array1::zeros(last.len());
        for &id in &allowed {
            masked[id] = last[id];
        }
        let z = masked.sum();
        if z > 0.0 {
            masked / z
        } else {
            let mut uniform = Array1::zeros(last.len());
            for &id in &allowed {
                uniform[id] = 1.0 / allowed.len() as f64;
            }
            uniform
        }
    };

    let beam = config.beam_size.max(1);
    let mut beams = vec![Hypothesis {
        ids: Vec::new(),
        log_prob: 0.0,
        done: false,
    }];
    for _ in 0..max_len {
        if beams.iter().all(|h| h.done) {
            break;
        }
        let mut candidates = Vec::new();
        for h in &beams {
            if h.done {
                candidates.push(h.clone());
                continue;
            }
            let dist = next_distribution(&h.ids);
            let mut options: Vec<(usize, f64)> = allowed
                .iter()
                .map(|&id| (id, dist[id]))
                .filter(|(_, p)| *p > 0.0)
                .collect();
            options.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for &(id, prob) in options.iter().take(beam) {
                let mut ids = h.ids.clone();
                let done = id == end;
                if !done {
                    ids.push(id);
                }
                candidates.push(Hypothesis {
                    ids,
                    log_prob: h.log_prob + prob.ln(),
                    done,
                });
            }
        }
        candidates.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
        candidates.truncate(beam);
        beams = candidates;
    }
    let best = beams
        .iter()
        .find(|h| h.done)
        .or_else(|| beams.first())
        .map(|h| h.ids.clone())
        .unwrap_or_default();
    let tokens = best.iter().map(|&id| ext.token(id).to_string()).collect();
    from_tokens(tokens, surface)
}

/// Wraps generated tokens, recovering slot fills by aligning the template
/// surface's literal runs. Slots whose alignment broke get empty fills.
pub fn from_tokens(tokens: Vec<String>, surface: &[String]) -> FilledTemplate {
    let runs = surface_runs(surface);
    let body = trimmed_range(&tokens);
    let fills = align_fills(&tokens[body.clone()], &runs);
    let mut slot_fills = Vec::with_capacity(fills.len());
    let mut origins = vec![TokenOrigin::Literal; tokens.len()];
    for (slot, fill) in fills.into_iter().enumerate() {
        let Some(fill) = fill else {
            slot_fills.push(Vec::new());
            continue;
        };
        let fill = body.start + fill.start..body.start + fill.end;
        for i in fill.clone() {
            origins[i] = match tokens[i].as_str() {
                JOIN_TOKEN => TokenOrigin::Join { slot },
                ARG_PLACEHOLDER => TokenOrigin::Placeholder { slot },
                _ => TokenOrigin::Argument { slot },
            };
        }
        slot_fills.push(tokens[fill].to_vec());
    }
    FilledTemplate {
        tokens,
        slot_fills,
        origins,
    }
}
