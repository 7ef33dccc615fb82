//! A small encoder-decoder with cross-attention and a copy distribution over
//! input positions.
//!
//! Encoder: token + position embeddings, residual 1-D convolution layers
//! (tanh), then residual self-attention layers. Decoder: token + position
//! embeddings, per layer a causal self-attention and a cross-attention
//! sublayer, then a residual tanh projection. The output distribution is one
//! softmax over `[vocabulary logits | input-position logits]`, with the
//! position part folded back onto the tokens found at those positions.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tape::{NodeId, Tape};
use super::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    /// Hidden width; also the embedding size.
    pub width: usize,
    pub conv_layers: usize,
    /// Each convolution sees `2 * conv_radius + 1` positions.
    pub conv_radius: usize,
    pub encoder_attention_layers: usize,
    pub decoder_layers: usize,
    pub max_input_len: usize,
    pub max_output_len: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            width: 32,
            conv_layers: 2,
            conv_radius: 2,
            encoder_attention_layers: 1,
            decoder_layers: 1,
            max_input_len: 192,
            max_output_len: 32,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> crate::Result<()> {
        if self.width == 0 || self.max_input_len == 0 || self.max_output_len == 0 {
            return Err(crate::Error::Model(format!("invalid architecture {self:?}")));
        }
        Ok(())
    }
}

/// A `rows×cols` block of the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionBlocks {
    pub query: Block,
    pub key: Block,
    pub value: Block,
    pub output: Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvBlocks {
    /// One `width×width` tap per offset `-radius..=radius`.
    pub taps: Vec<Block>,
    pub bias: Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderLayerBlocks {
    pub self_attention: AttentionBlocks,
    pub cross_attention: AttentionBlocks,
}

/// Where each named weight lives in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub token_embedding: Block,
    pub encoder_position: Block,
    pub decoder_position: Block,
    pub conv: Vec<ConvBlocks>,
    pub encoder_attention: Vec<AttentionBlocks>,
    pub decoder: Vec<DecoderLayerBlocks>,
    pub projection: Block,
    pub projection_bias: Block,
    pub vocab_out: Block,
    pub vocab_bias: Block,
    pub pointer: Block,
    pub pointer_bias: Block,
    pub size: usize,
}

struct Allocator(usize);

impl Allocator {
    fn block(&mut self, rows: usize, cols: usize) -> Block {
        let b = Block {
            offset: self.0,
            rows,
            cols,
        };
        self.0 += rows * cols;
        b
    }

    fn attention(&mut self, d: usize) -> AttentionBlocks {
        AttentionBlocks {
            query: self.block(d, d),
            key: self.block(d, d),
            value: self.block(d, d),
            output: self.block(d, d),
        }
    }
}

impl Layout {
    pub fn new(arch: &Architecture, vocab_size: usize) -> Self {
        let d = arch.width;
        let mut a = Allocator(0);
        let token_embedding = a.block(vocab_size, d);
        let encoder_position = a.block(arch.max_input_len, d);
        let decoder_position = a.block(arch.max_output_len, d);
        let conv = (0..arch.conv_layers)
            .map(|_| ConvBlocks {
                taps: (0..2 * arch.conv_radius + 1).map(|_| a.block(d, d)).collect(),
                bias: a.block(1, d),
            })
            .collect();
        let encoder_attention = (0..arch.encoder_attention_layers).map(|_| a.attention(d)).collect();
        let decoder = (0..arch.decoder_layers)
            .map(|_| DecoderLayerBlocks {
                self_attention: a.attention(d),
                cross_attention: a.attention(d),
            })
            .collect();
        let projection = a.block(d, d);
        let projection_bias = a.block(1, d);
        let vocab_out = a.block(d, vocab_size);
        let vocab_bias = a.block(1, vocab_size);
        let pointer = a.block(d, d);
        let pointer_bias = a.block(1, 1);
        Layout {
            token_embedding,
            encoder_position,
            decoder_position,
            conv,
            encoder_attention,
            decoder,
            projection,
            projection_bias,
            vocab_out,
            vocab_bias,
            pointer,
            pointer_bias,
            size: a.0,
        }
    }

    /// Weight matrices (initialized randomly) as opposed to biases.
    fn matrices(&self) -> Vec<(Block, f64)> {
        let d = self.token_embedding.cols as f64;
        let w = 1.0 / d.sqrt();
        let mut out = vec![
            (self.token_embedding, 0.5),
            (self.encoder_position, 0.5),
            (self.decoder_position, 0.5),
            (self.projection, w),
            (self.vocab_out, w),
            (self.pointer, w),
        ];
        for c in &self.conv {
            let tap_scale = w / (c.taps.len() as f64).sqrt();
            out.extend(c.taps.iter().map(|t| (*t, tap_scale)));
        }
        let attn = |a: &AttentionBlocks, out: &mut Vec<(Block, f64)>| {
            out.extend([(a.query, w), (a.key, w), (a.value, w), (a.output, w)]);
        };
        for a in &self.encoder_attention {
            attn(a, &mut out);
        }
        for l in &self.decoder {
            attn(&l.self_attention, &mut out);
            attn(&l.cross_attention, &mut out);
        }
        out
    }
}

/// Fresh parameters: Gaussian weights, zero biases.
pub fn init_params(layout: &Layout, seed: u64) -> Vec<f64> {
    let mut theta = vec![0.0; layout.size];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (block, std) in layout.matrices() {
        let normal = Normal::new(0.0, std).expect("valid std");
        for x in &mut theta[block.offset..block.offset + block.rows * block.cols] {
            *x = normal.sample(&mut rng);
        }
    }
    theta
}

struct AttnNodes {
    query: NodeId,
    key: NodeId,
    value: NodeId,
    output: NodeId,
}

struct ConvNodes {
    taps: Vec<NodeId>,
    bias: NodeId,
}

/// Parameter leaves of one tape.
pub(crate) struct ParamNodes {
    token_embedding: NodeId,
    encoder_position: NodeId,
    decoder_position: NodeId,
    conv: Vec<ConvNodes>,
    encoder_attention: Vec<AttnNodes>,
    decoder: Vec<(AttnNodes, AttnNodes)>,
    projection: NodeId,
    projection_bias: NodeId,
    vocab_out: NodeId,
    vocab_bias: NodeId,
    pointer: NodeId,
    pointer_bias: NodeId,
}

fn leaf(tape: &mut Tape, theta: &[f64], b: Block) -> NodeId {
    tape.param(theta, b.offset, b.rows, b.cols)
}

impl ParamNodes {
    pub(crate) fn new(tape: &mut Tape, theta: &[f64], layout: &Layout) -> Self {
        let attn = |tape: &mut Tape, a: &AttentionBlocks| AttnNodes {
            query: leaf(tape, theta, a.query),
            key: leaf(tape, theta, a.key),
            value: leaf(tape, theta, a.value),
            output: leaf(tape, theta, a.output),
        };
        ParamNodes {
            token_embedding: leaf(tape, theta, layout.token_embedding),
            encoder_position: leaf(tape, theta, layout.encoder_position),
            decoder_position: leaf(tape, theta, layout.decoder_position),
            conv: layout
                .conv
                .iter()
                .map(|c| ConvNodes {
                    taps: c.taps.iter().map(|t| leaf(tape, theta, *t)).collect(),
                    bias: leaf(tape, theta, c.bias),
                })
                .collect(),
            encoder_attention: layout.encoder_attention.iter().map(|a| attn(tape, a)).collect(),
            decoder: layout
                .decoder
                .iter()
                .map(|l| (attn(tape, &l.self_attention), attn(tape, &l.cross_attention)))
                .collect(),
            projection: leaf(tape, theta, layout.projection),
            projection_bias: leaf(tape, theta, layout.projection_bias),
            vocab_out: leaf(tape, theta, layout.vocab_out),
            vocab_bias: leaf(tape, theta, layout.vocab_bias),
            pointer: leaf(tape, theta, layout.pointer),
            pointer_bias: leaf(tape, theta, layout.pointer_bias),
        }
    }
}

/// Additive mask hiding future positions.
fn causal_mask(n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, n), |(i, j)| if j > i { -1e9 } else { 0.0 })
}

fn attention(tape: &mut Tape, p: &AttnNodes, queries: NodeId, keys: NodeId, causal: bool) -> NodeId {
    let width = tape.value(queries).ncols() as f64;
    let q = tape.matmul(queries, p.query);
    let k = tape.matmul(keys, p.key);
    let v = tape.matmul(keys, p.value);
    let scores = tape.matmul_t(q, k);
    let mut scores = tape.scale(scores, 1.0 / width.sqrt());
    if causal {
        let n = tape.value(scores).nrows();
        let mask = tape.constant(causal_mask(n));
        scores = tape.add(scores, mask);
    }
    let weights = tape.softmax(scores);
    let mixed = tape.matmul(weights, v);
    tape.matmul(mixed, p.output)
}

pub(crate) fn encode(tape: &mut Tape, p: &ParamNodes, radius: usize, ids: &[usize]) -> NodeId {
    let positions: Vec<usize> = (0..ids.len()).collect();
    let tok = tape.gather(p.token_embedding, ids);
    let pos = tape.gather(p.encoder_position, &positions);
    let mut x = tape.add(tok, pos);
    for conv in &p.conv {
        let mut acc = None;
        for (i, &tap) in conv.taps.iter().enumerate() {
            let k = i as isize - radius as isize;
            let shifted = if k == 0 { x } else { tape.shift(x, k) };
            let term = tape.matmul(shifted, tap);
            acc = Some(match acc {
                None => term,
                Some(a) => tape.add(a, term),
            });
        }
        let pre = tape.add_row(acc.expect("at least one tap"), conv.bias);
        let h = tape.tanh(pre);
        x = tape.add(x, h);
    }
    for attn in &p.encoder_attention {
        let h = attention(tape, attn, x, x, false);
        x = tape.add(x, h);
    }
    x
}

/// Output distributions (rows: decoder steps, columns: the `width` ids of
/// the vocabulary extended with this input's out-of-vocabulary tokens).
/// `copy_ids` gives the extended id at each input position; `decoder_inputs`
/// must already be in-vocabulary ids.
pub(crate) fn decode(
    tape: &mut Tape,
    p: &ParamNodes,
    encoded: NodeId,
    copy_ids: &[usize],
    width: usize,
    decoder_inputs: &[usize],
) -> NodeId {
    let positions: Vec<usize> = (0..decoder_inputs.len()).collect();
    let tok = tape.gather(p.token_embedding, decoder_inputs);
    let pos = tape.gather(p.decoder_position, &positions);
    let mut y = tape.add(tok, pos);
    for (self_attn, cross_attn) in &p.decoder {
        let h = attention(tape, self_attn, y, y, true);
        y = tape.add(y, h);
        let h = attention(tape, cross_attn, y, encoded, false);
        y = tape.add(y, h);
    }
    let proj = tape.matmul(y, p.projection);
    let proj = tape.add_row(proj, p.projection_bias);
    let proj = tape.tanh(proj);
    let z = tape.add(y, proj);

    let vocab_logits = tape.matmul(z, p.vocab_out);
    let vocab_logits = tape.add_row(vocab_logits, p.vocab_bias);
    let vocab_size = tape.value(vocab_logits).ncols();
    let hidden = tape.value(z).ncols() as f64;
    let query = tape.matmul(z, p.pointer);
    let pointer_logits = tape.matmul_t(query, encoded);
    let pointer_logits = tape.scale(pointer_logits, 1.0 / hidden.sqrt());
    let joint = tape.concat_cols(vocab_logits, pointer_logits);
    let joint = tape.add_scalar_from(joint, p.pointer_bias, vocab_size);
    let joint = tape.softmax(joint);
    tape.copy_scatter(joint, vocab_size, width, copy_ids)
}

/// Architecture, vocabulary and flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorModel {
    pub arch: Architecture,
    pub vocab: Vocabulary,
    pub params: Vec<f64>,
    layout: Layout,
}

impl ExtractorModel {
    pub fn new(arch: Architecture, vocab: Vocabulary, seed: u64) -> Self {
        let layout = Layout::new(&arch, vocab.len());
        let params = init_params(&layout, seed);
        ExtractorModel {
            arch,
            vocab,
            params,
            layout,
        }
    }

    /// Rebuilds a model from stored parts; `None` if the parameter count does
    /// not match the architecture.
    pub fn from_parts(arch: Architecture, vocab: Vocabulary, params: Vec<f64>) -> Option<Self> {
        let layout = Layout::new(&arch, vocab.len());
        (layout.size == params.len() && vocab.has_specials()).then_some(ExtractorModel {
            arch,
            vocab,
            params,
            layout,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }
}
