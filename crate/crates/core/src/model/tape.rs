//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! walks it in reverse and accumulates parameter gradients into a flat
//! vector laid out like the model's parameter vector.

use ndarray::{s, Array2, Axis};

pub type NodeId = usize;

/// Probabilities are clamped here before taking logs.
const MIN_PROB: f64 = 1e-300;

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param {
        offset: usize,
    },
    Gather {
        table: NodeId,
        ids: Vec<usize>,
    },
    MatMul(NodeId, NodeId),
    /// `a · bᵀ`
    MatMulT(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// Adds a `1×n` row to every row.
    AddRow(NodeId, NodeId),
    /// Adds a `1×1` scalar to every element of the column range `[from, ..)`.
    AddScalarFrom(NodeId, NodeId, usize),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Softmax(NodeId),
    /// `out[i] = a[i + k]`, zero outside.
    Shift(NodeId, isize),
    ConcatCols(NodeId, NodeId),
    /// Folds a joint `[vocab | input positions]` distribution onto `width`
    /// output ids; ids past `vocab` are reachable only by copying.
    CopyScatter {
        joint: NodeId,
        vocab: usize,
        ids: Vec<usize>,
    },
    /// `−Σ_r ln p[r, targets[r]]`
    Nll {
        probs: NodeId,
        targets: Vec<usize>,
    },
    /// `Σ_{r ∈ rows} ‖a_r − b_r‖₂`
    RowDistance {
        a: NodeId,
        b: NodeId,
        rows: Vec<usize>,
    },
    /// `Σ w_i x_i` over `1×1` nodes.
    WeightedSum(Vec<(NodeId, f64)>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Const)
    }

    /// A `rows×cols` parameter block read from `theta[offset..]`.
    pub fn param(&mut self, theta: &[f64], offset: usize, rows: usize, cols: usize) -> NodeId {
        let value = Array2::from_shape_vec((rows, cols), theta[offset..offset + rows * cols].to_vec())
            .expect("parameter block shape");
        self.push(value, Op::Param { offset })
    }

    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> NodeId {
        let t = &self.nodes[table].value;
        let mut out = Array2::zeros((ids.len(), t.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&t.row(id));
        }
        self.push(
            out,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.dot(&self.nodes[b].value);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.nodes[a].value.dot(&self.nodes[b].value.t());
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = &self.nodes[a].value + &self.nodes[b].value;
        self.push(v, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let v = &self.nodes[a].value + &self.nodes[row].value;
        self.push(v, Op::AddRow(a, row))
    }

    pub fn add_scalar_from(&mut self, a: NodeId, scalar: NodeId, from: usize) -> NodeId {
        let s = self.nodes[scalar].value[[0, 0]];
        let mut v = self.nodes[a].value.clone();
        v.slice_mut(s![.., from..]).mapv_inplace(|x| x + s);
        self.push(v, Op::AddScalarFrom(a, scalar, from))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let v = &self.nodes[a].value * factor;
        self.push(v, Op::Scale(a, factor))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a].value.mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let mut v = self.nodes[a].value.clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(v, Op::Softmax(a))
    }

    pub fn shift(&mut self, a: NodeId, k: isize) -> NodeId {
        let src = &self.nodes[a].value;
        let n = src.nrows() as isize;
        let mut v = Array2::zeros(src.raw_dim());
        for i in 0..n {
            let j = i + k;
            if (0..n).contains(&j) {
                v.row_mut(i as usize).assign(&src.row(j as usize));
            }
        }
        self.push(v, Op::Shift(a, k))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = ndarray::concatenate(Axis(1), &[self.nodes[a].value.view(), self.nodes[b].value.view()])
            .expect("row counts agree");
        self.push(v, Op::ConcatCols(a, b))
    }

    pub fn copy_scatter(&mut self, joint: NodeId, vocab: usize, width: usize, ids: &[usize]) -> NodeId {
        let p = &self.nodes[joint].value;
        assert_eq!(p.ncols(), vocab + ids.len());
        assert!(width >= vocab && ids.iter().all(|&id| id < width));
        let mut v = Array2::zeros((p.nrows(), width));
        v.slice_mut(s![.., ..vocab]).assign(&p.slice(s![.., ..vocab]));
        for r in 0..p.nrows() {
            for (i, &id) in ids.iter().enumerate() {
                v[[r, id]] += p[[r, vocab + i]];
            }
        }
        self.push(
            v,
            Op::CopyScatter {
                joint,
                vocab,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn nll(&mut self, probs: NodeId, targets: &[usize]) -> NodeId {
        let p = &self.nodes[probs].value;
        let loss: f64 = targets
            .iter()
            .enumerate()
            .map(|(r, &t)| -p[[r, t]].max(MIN_PROB).ln())
            .sum();
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::Nll {
                probs,
                targets: targets.to_vec(),
            },
        )
    }

    pub fn row_distance(&mut self, a: NodeId, b: NodeId, rows: &[usize]) -> NodeId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        let total: f64 = rows
            .iter()
            .map(|&r| {
                let diff = &va.row(r) - &vb.row(r);
                diff.dot(&diff).sqrt()
            })
            .sum();
        self.push(
            Array2::from_elem((1, 1), total),
            Op::RowDistance {
                a,
                b,
                rows: rows.to_vec(),
            },
        )
    }

    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> NodeId {
        let total: f64 = terms.iter().map(|&(id, w)| w * self.nodes[id].value[[0, 0]]).sum();
        self.push(Array2::from_elem((1, 1), total), Op::WeightedSum(terms.to_vec()))
    }

    /// Backpropagates from the scalar node `loss`, adding `∂loss/∂θ` into `grad`.
    pub fn backward(&self, loss: NodeId, grad: &mut [f64]) {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss + 1];
        grads[loss] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], id: NodeId, g: Array2<f64>) {
            match &mut grads[id] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for id in (0..=loss).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Const => {}
                Op::Param { offset } => {
                    let dst = &mut grad[*offset..*offset + g.len()];
                    for (d, s) in dst.iter_mut().zip(g.iter()) {
                        *d += s;
                    }
                }
                Op::Gather { table, ids } => {
                    let mut gt = Array2::zeros(self.nodes[*table].value.raw_dim());
                    for (r, &row) in ids.iter().enumerate() {
                        let mut dst = gt.row_mut(row);
                        dst += &g.row(r);
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.nodes[*b].value.t());
                    let gb = self.nodes[*a].value.t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(&self.nodes[*b].value);
                    let gb = g.t().dot(&self.nodes[*a].value);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *a, g);
                    acc(&mut grads, *row, gr);
                }
                Op::AddScalarFrom(a, scalar, from) => {
                    let gs = g.slice(s![.., *from..]).sum();
                    acc(&mut grads, *a, g);
                    acc(&mut grads, *scalar, Array2::from_elem((1, 1), gs));
                }
                Op::Scale(a, f) => acc(&mut grads, *a, g * *f),
                Op::Tanh(a) => {
                    let ga = &g * &node.value.mapv(|y| 1.0 - y * y);
                    acc(&mut grads, *a, ga);
                }
                Op::Softmax(a) => {
                    let p = &node.value;
                    let mut ga = Array2::zeros(p.raw_dim());
                    for r in 0..p.nrows() {
                        let dot = p.row(r).dot(&g.row(r));
                        for c in 0..p.ncols() {
                            ga[[r, c]] = p[[r, c]] * (g[[r, c]] - dot);
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Shift(a, k) => {
                    let n = g.nrows() as isize;
                    let mut ga = Array2::zeros(g.raw_dim());
                    for i in 0..n {
                        let j = i + k;
                        if (0..n).contains(&j) {
                            ga.row_mut(j as usize).assign(&g.row(i as usize));
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatCols(a, b) => {
                    let na = self.nodes[*a].value.ncols();
                    acc(&mut grads, *a, g.slice(s![.., ..na]).to_owned());
                    acc(&mut grads, *b, g.slice(s![.., na..]).to_owned());
                }
                Op::CopyScatter { joint, vocab, ids } => {
                    let rows = g.nrows();
                    let mut gj = Array2::zeros((rows, vocab + ids.len()));
                    gj.slice_mut(s![.., ..*vocab]).assign(&g.slice(s![.., ..*vocab]));
                    for r in 0..rows {
                        for (i, &id) in ids.iter().enumerate() {
                            gj[[r, vocab + i]] = g[[r, id]];
                        }
                    }
                    acc(&mut grads, *joint, gj);
                }
                Op::Nll { probs, targets } => {
                    let p = &self.nodes[*probs].value;
                    let scale = g[[0, 0]];
                    let mut gp = Array2::zeros(p.raw_dim());
                    for (r, &t) in targets.iter().enumerate() {
                        gp[[r, t]] -= scale / p[[r, t]].max(MIN_PROB);
                    }
                    acc(&mut grads, *probs, gp);
                }
                Op::RowDistance { a, b, rows } => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let scale = g[[0, 0]];
                    let mut ga = Array2::zeros(va.raw_dim());
                    for &r in rows {
                        let diff = &va.row(r) - &vb.row(r);
                        let norm = diff.dot(&diff).sqrt();
                        // Subgradient 0 where the two rows coincide.
                        if norm > 0.0 {
                            let mut dst = ga.row_mut(r);
                            dst.scaled_add(scale / norm, &diff);
                        }
                    }
                    acc(&mut grads, *b, -&ga);
                    acc(&mut grads, *a, ga);
                }
                Op::WeightedSum(terms) => {
                    for &(t, w) in terms.iter().filter(|(_, w)| *w != 0.0) {
                        acc(&mut grads, t, Array2::from_elem((1, 1), w * g[[0, 0]]));
                    }
                }
            }
        }
    }
}
