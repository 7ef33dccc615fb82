use crate::error::{Error, Result};
use crate::templating::{FilledTemplate, InputSequence, SEQ_END, SEQ_START};

use super::network::ExtractorModel;
use super::vocab::{Vocabulary, UNK};

/// The model vocabulary extended with out-of-vocabulary input tokens, which
/// get ids past the vocabulary and can only be produced by copying.
#[derive(Debug, Clone)]
pub struct ExtendedVocab<'a> {
    vocab: &'a Vocabulary,
    oov: Vec<String>,
}

impl<'a> ExtendedVocab<'a> {
    pub fn new(vocab: &'a Vocabulary) -> Self {
        ExtendedVocab { vocab, oov: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.vocab.len() + self.oov.len()
    }

    fn insert(&mut self, token: &str) -> usize {
        if let Some(id) = self.lookup(token) {
            return id;
        }
        self.oov.push(token.to_string());
        self.width() - 1
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.vocab
            .get(token)
            .or_else(|| self.oov.iter().position(|t| t == token).map(|i| self.vocab.len() + i))
    }

    pub fn token(&self, id: usize) -> &str {
        if id < self.vocab.len() {
            self.vocab.token(id)
        } else {
            &self.oov[id - self.vocab.len()]
        }
    }

    /// Id used for embedding lookups: out-of-vocabulary ids map to `<unk>`.
    pub fn embed_id(&self, id: usize) -> usize {
        if id < self.vocab.len() {
            id
        } else {
            self.vocab.id(UNK)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct EncodedInput {
    /// Extended ids, used for copying.
    pub copy_ids: Vec<usize>,
    pub embed_ids: Vec<usize>,
}

pub(crate) fn encode_input(
    model: &ExtractorModel,
    ext: &mut ExtendedVocab<'_>,
    input: &InputSequence,
) -> Result<EncodedInput> {
    if input.tokens.len() > model.arch.max_input_len {
        return Err(Error::Model(format!(
            "input of {} tokens exceeds the maximum of {}",
            input.tokens.len(),
            model.arch.max_input_len
        )));
    }
    let copy_ids: Vec<usize> = input.tokens.iter().map(|t| ext.insert(t)).collect();
    let embed_ids = copy_ids.iter().map(|&id| ext.embed_id(id)).collect();
    Ok(EncodedInput { copy_ids, embed_ids })
}

/// Teacher-forcing targets: the filled template followed by the end marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct EncodedTarget {
    pub targets: Vec<usize>,
    /// `<s>` followed by all targets but the last, as embedding ids.
    pub decoder_inputs: Vec<usize>,
}

pub(crate) fn encode_target(
    model: &ExtractorModel,
    ext: &ExtendedVocab<'_>,
    target: &FilledTemplate,
) -> Result<EncodedTarget> {
    let mut targets = Vec::with_capacity(target.tokens.len() + 1);
    for t in &target.tokens {
        let id = ext.lookup(t).ok_or_else(|| Error::OutOfVocabulary(t.clone()))?;
        targets.push(id);
    }
    targets.push(model.vocab.id(SEQ_END));
    if targets.len() > model.arch.max_output_len {
        return Err(Error::Model(format!(
            "target of {} tokens exceeds the maximum of {}",
            targets.len(),
            model.arch.max_output_len
        )));
    }
    let mut decoder_inputs = vec![model.vocab.id(SEQ_START)];
    decoder_inputs.extend(targets[..targets.len() - 1].iter().map(|&id| ext.embed_id(id)));
    Ok(EncodedTarget {
        targets,
        decoder_inputs,
    })
}
