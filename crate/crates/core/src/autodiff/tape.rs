use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::AutodiffError;
use crate::linalg::{Matrix, SparseMatrix};
use crate::math;

/// Index of a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    Spmm,
    Add,
    AddBiasRow,
    Prelu,
    Sigmoid,
    Softplus,
    LogSumExpRows,
    ConcatCols,
    SumRows,
    Scale,
    Transpose,
    RowGather,
    ElementwiseMul,
    NormalizeRows,
}

impl OpKind {
    /// Every differentiable operation.
    pub const OPS: [OpKind; 15] = [
        OpKind::MatMul,
        OpKind::Spmm,
        OpKind::Add,
        OpKind::AddBiasRow,
        OpKind::Prelu,
        OpKind::Sigmoid,
        OpKind::Softplus,
        OpKind::LogSumExpRows,
        OpKind::ConcatCols,
        OpKind::SumRows,
        OpKind::Scale,
        OpKind::Transpose,
        OpKind::RowGather,
        OpKind::ElementwiseMul,
        OpKind::NormalizeRows,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "matmul",
            OpKind::Spmm => "spmm",
            OpKind::Add => "add",
            OpKind::AddBiasRow => "add_bias_row",
            OpKind::Prelu => "prelu",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Softplus => "softplus",
            OpKind::LogSumExpRows => "log_sum_exp_rows",
            OpKind::ConcatCols => "concat_cols",
            OpKind::SumRows => "sum_rows",
            OpKind::Scale => "scale",
            OpKind::Transpose => "transpose",
            OpKind::RowGather => "row_gather",
            OpKind::ElementwiseMul => "elementwise_mul",
            OpKind::NormalizeRows => "normalize_rows",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Spmm(Arc<SparseMatrix>, NodeId),
    Add(NodeId, NodeId),
    AddBiasRow(NodeId, NodeId),
    Prelu(NodeId, NodeId),
    Sigmoid(NodeId),
    Softplus(NodeId),
    LogSumExpRows(NodeId),
    ConcatCols(Vec<NodeId>),
    SumRows(NodeId),
    Scale(NodeId, f64),
    Transpose(NodeId),
    RowGather(NodeId, Vec<usize>),
    ElementwiseMul(NodeId, NodeId),
    NormalizeRows(NodeId),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Spmm(..) => OpKind::Spmm,
            Op::Add(..) => OpKind::Add,
            Op::AddBiasRow(..) => OpKind::AddBiasRow,
            Op::Prelu(..) => OpKind::Prelu,
            Op::Sigmoid(..) => OpKind::Sigmoid,
            Op::Softplus(..) => OpKind::Softplus,
            Op::LogSumExpRows(..) => OpKind::LogSumExpRows,
            Op::ConcatCols(..) => OpKind::ConcatCols,
            Op::SumRows(..) => OpKind::SumRows,
            Op::Scale(..) => OpKind::Scale,
            Op::Transpose(..) => OpKind::Transpose,
            Op::RowGather(..) => OpKind::RowGather,
            Op::ElementwiseMul(..) => OpKind::ElementwiseMul,
            Op::NormalizeRows(..) => OpKind::NormalizeRows,
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
}

/// Floor on row norms in [`Tape::normalize_rows`].
const NORM_FLOOR: f64 = 1e-12;

/// A recorded computation graph with cached forward values.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// The adjoint of `id`, or `None` if the loss does not depend on it
    /// through any differentiable path.
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// The adjoint of `id`, with zeros for untouched nodes.
    pub fn get_or_zeros(&self, id: NodeId, shape: (usize, usize)) -> Matrix {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }

    pub fn take(&mut self, id: NodeId) -> Option<Matrix> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
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

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    pub fn kind(&self, id: NodeId) -> OpKind {
        self.nodes[id.0].op.kind()
    }

    /// Smallest absolute PReLU input recorded on the tape, or infinity.
    pub fn kink_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Prelu(x, _) => Some(self.nodes[x.0].value.as_slice().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// A differentiable leaf.
    pub fn parameter(&mut self, value: Matrix) -> NodeId {
        self.push_leaf(value, true)
    }

    /// A non-differentiable leaf.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Matrix, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Overwrites a leaf value. Dependent values are refreshed by [`Tape::forward`].
    pub fn set_value(&mut self, id: NodeId, value: Matrix) -> Result<(), AutodiffError> {
        let node = self
            .nodes
            .get_mut(id.0)
            .ok_or(AutodiffError::UnknownNode(id.0))?;
        if !matches!(node.op, Op::Leaf) {
            return Err(AutodiffError::NotLeaf(id.0));
        }
        if node.value.shape() != value.shape() {
            return Err(AutodiffError::Shape {
                op: OpKind::Leaf,
                left: node.value.shape(),
                right: value.shape(),
            });
        }
        node.value = value;
        Ok(())
    }

    fn push(&mut self, op: Op) -> Result<NodeId, AutodiffError> {
        let value = self.eval(&op)?;
        let requires_grad = self.inputs(&op).iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn inputs(&self, op: &Op) -> Vec<NodeId> {
        match op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::AddBiasRow(a, b)
            | Op::Prelu(a, b)
            | Op::ElementwiseMul(a, b) => vec![*a, *b],
            Op::Spmm(_, x)
            | Op::Sigmoid(x)
            | Op::Softplus(x)
            | Op::LogSumExpRows(x)
            | Op::SumRows(x)
            | Op::Scale(x, _)
            | Op::Transpose(x)
            | Op::RowGather(x, _)
            | Op::NormalizeRows(x) => vec![*x],
            Op::ConcatCols(xs) => xs.clone(),
        }
    }

    /// Recomputes every non-leaf value in recording order.
    pub fn forward(&mut self) -> Result<(), AutodiffError> {
        for i in 0..self.nodes.len() {
            if matches!(self.nodes[i].op, Op::Leaf) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            self.nodes[i].value = self.eval(&op)?;
        }
        Ok(())
    }

    fn check(&self, id: NodeId) -> Result<&Matrix, AutodiffError> {
        self.nodes
            .get(id.0)
            .map(|n| &n.value)
            .ok_or(AutodiffError::UnknownNode(id.0))
    }

    fn eval(&self, op: &Op) -> Result<Matrix, AutodiffError> {
        let kind = op.kind();
        let shape_err = |l: &Matrix, r: (usize, usize)| AutodiffError::Shape {
            op: kind,
            left: l.shape(),
            right: r,
        };
        Ok(match op {
            Op::Leaf => unreachable!("leaves are not evaluated"),
            Op::MatMul(a, b) => {
                let (a, b) = (self.check(*a)?, self.check(*b)?);
                if a.cols() != b.rows() {
                    return Err(shape_err(a, b.shape()));
                }
                a.matmul(b)?
            }
            Op::Spmm(s, x) => {
                let x = self.check(*x)?;
                if s.n_cols() != x.rows() {
                    return Err(AutodiffError::Shape {
                        op: kind,
                        left: s.shape(),
                        right: x.shape(),
                    });
                }
                s.spmm(x)?
            }
            Op::Add(a, b) | Op::ElementwiseMul(a, b) => {
                let (a, b) = (self.check(*a)?, self.check(*b)?);
                if a.shape() != b.shape() {
                    return Err(shape_err(a, b.shape()));
                }
                if kind == OpKind::Add {
                    a.add(b)?
                } else {
                    a.hadamard(b)?
                }
            }
            Op::AddBiasRow(x, b) => {
                let (x, b) = (self.check(*x)?, self.check(*b)?);
                if b.rows() != 1 || b.cols() != x.cols() {
                    return Err(shape_err(x, b.shape()));
                }
                let mut out = x.clone();
                for i in 0..out.rows() {
                    for (o, &bv) in out.row_mut(i).iter_mut().zip(b.as_slice()) {
                        *o += bv;
                    }
                }
                out
            }
            Op::Prelu(x, a) => {
                let (x, a) = (self.check(*x)?, self.check(*a)?);
                if a.shape() != (1, 1) {
                    return Err(shape_err(x, a.shape()));
                }
                let slope = a.as_slice()[0];
                x.map(|v| if v > 0.0 { v } else { slope * v })
            }
            Op::Sigmoid(x) => self.check(*x)?.map(math::sigmoid),
            Op::Softplus(x) => self.check(*x)?.map(math::softplus),
            Op::LogSumExpRows(x) => {
                let x = self.check(*x)?;
                Matrix::from_fn(x.rows(), 1, |i, _| math::log_sum_exp(x.row(i)))
            }
            Op::ConcatCols(xs) => {
                let first = self.check(*xs.first().ok_or(AutodiffError::EmptyConcat)?)?;
                let rows = first.rows();
                let mut width = 0;
                for id in xs {
                    let m = self.check(*id)?;
                    if m.rows() != rows {
                        return Err(shape_err(first, m.shape()));
                    }
                    width += m.cols();
                }
                let mut out = Matrix::zeros(rows, width);
                let mut offset = 0;
                for id in xs {
                    let m = self.check(*id)?;
                    for i in 0..rows {
                        out.row_mut(i)[offset..offset + m.cols()].copy_from_slice(m.row(i));
                    }
                    offset += m.cols();
                }
                out
            }
            Op::SumRows(x) => Matrix::row_vector(&self.check(*x)?.col_sums()),
            Op::Scale(x, s) => self.check(*x)?.scale(*s),
            Op::Transpose(x) => self.check(*x)?.transpose(),
            Op::RowGather(x, idx) => {
                let x = self.check(*x)?;
                if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
                    return Err(AutodiffError::Gather {
                        op: kind,
                        index: bad,
                        rows: x.rows(),
                    });
                }
                x.select_rows(idx)
            }
            Op::NormalizeRows(x) => {
                let x = self.check(*x)?;
                let mut out = x.clone();
                for i in 0..out.rows() {
                    let norm = row_norm(x.row(i));
                    for v in out.row_mut(i) {
                        *v /= norm;
                    }
                }
                out
            }
        })
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::MatMul(a, b))
    }

    /// Constant sparse matrix times a dense node.
    pub fn spmm(&mut self, s: Arc<SparseMatrix>, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::Spmm(s, x))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::Add(a, b))
    }

    /// Adds a `1 × c` row to every row of an `n × c` node.
    pub fn add_bias_row(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::AddBiasRow(x, bias))
    }

    /// `x` where positive, `slope * x` elsewhere; `slope` is `1 × 1`.
    pub fn prelu(&mut self, x: NodeId, slope: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::Prelu(x, slope))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::Sigmoid(x))
    }

    pub fn softplus(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::Softplus(x))
    }

    /// Row-wise `log Σ_j exp(x_ij)`, giving an `n × 1` column.
    pub fn log_sum_exp_rows(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::LogSumExpRows(x))
    }

    pub fn concat_cols(&mut self, xs: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self.push(Op::ConcatCols(xs.to_vec()))
    }

    /// Sums over rows, reducing `n × c` to `1 × c`.
    pub fn sum_rows(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::SumRows(x))
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> Result<NodeId, AutodiffError> {
        self.push(Op::Scale(x, s))
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::Transpose(x))
    }

    /// Output row `k` is input row `indices[k]`; indices may repeat.
    pub fn row_gather(&mut self, x: NodeId, indices: Vec<usize>) -> Result<NodeId, AutodiffError> {
        self.push(Op::RowGather(x, indices))
    }

    pub fn elementwise_mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::ElementwiseMul(a, b))
    }

    /// Divides every row by its Euclidean norm.
    pub fn normalize_rows(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        self.push(Op::NormalizeRows(x))
    }

    /// Sum of every entry, as a `1 × 1` node.
    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        let cols = self.sum_rows(x)?;
        let t = self.transpose(cols)?;
        self.sum_rows(t)
    }

    /// Reverse sweep from a `1 × 1` loss.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, AutodiffError> {
        let shape = self.check(loss)?.shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(&node.op, &node.value, &g, &mut grads)?;
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(
        &self,
        op: &Op,
        out: &Matrix,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
    ) -> Result<(), AutodiffError> {
        let mut acc = |id: NodeId, delta: Matrix| -> Result<(), AutodiffError> {
            if !self.nodes[id.0].requires_grad {
                return Ok(());
            }
            match &mut grads[id.0] {
                Some(existing) => existing.add_assign(&delta)?,
                slot @ None => *slot = Some(delta),
            }
            Ok(())
        };
        let needs = |id: NodeId| self.nodes[id.0].requires_grad;
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if needs(*a) {
                    acc(*a, g.matmul_nt(self.value(*b))?)?;
                }
                if needs(*b) {
                    acc(*b, self.value(*a).matmul_tn(g)?)?;
                }
            }
            Op::Spmm(s, x) => acc(*x, s.spmm_transpose(g)?)?,
            Op::Add(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.clone())?;
            }
            Op::AddBiasRow(x, b) => {
                acc(*x, g.clone())?;
                if needs(*b) {
                    acc(*b, Matrix::row_vector(&g.col_sums()))?;
                }
            }
            Op::Prelu(x, a) => {
                let xv = self.value(*x);
                let slope = self.value(*a).as_slice()[0];
                if needs(*x) {
                    let mut dx = g.clone();
                    for (d, &v) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        if v <= 0.0 {
                            *d *= slope;
                        }
                    }
                    acc(*x, dx)?;
                }
                if needs(*a) {
                    let da: f64 = xv
                        .as_slice()
                        .iter()
                        .zip(g.as_slice())
                        .filter(|(&v, _)| v <= 0.0)
                        .map(|(&v, &gv)| v * gv)
                        .sum();
                    acc(*a, Matrix::scalar(da))?;
                }
            }
            Op::Sigmoid(x) => {
                let mut dx = g.clone();
                for (d, &y) in dx.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    *d *= y * (1.0 - y);
                }
                acc(*x, dx)?;
            }
            Op::Softplus(x) => {
                let mut dx = g.clone();
                for (d, &v) in dx.as_mut_slice().iter_mut().zip(self.value(*x).as_slice()) {
                    *d *= softplus_grad(v);
                }
                acc(*x, dx)?;
            }
            Op::LogSumExpRows(x) => {
                let xv = self.value(*x);
                let mut dx = xv.clone();
                for i in 0..dx.rows() {
                    let (lse, gi) = (out.as_slice()[i], g.as_slice()[i]);
                    for v in dx.row_mut(i) {
                        *v = gi * math::exp(*v - lse);
                    }
                }
                acc(*x, dx)?;
            }
            Op::ConcatCols(xs) => {
                let mut offset = 0;
                for id in xs {
                    let cols = self.value(*id).cols();
                    if needs(*id) {
                        let part = Matrix::from_fn(g.rows(), cols, |i, j| g[(i, offset + j)]);
                        acc(*id, part)?;
                    }
                    offset += cols;
                }
            }
            Op::SumRows(x) => {
                let rows = self.value(*x).rows();
                acc(*x, Matrix::from_fn(rows, g.cols(), |_, j| g.as_slice()[j]))?;
            }
            Op::Scale(x, s) => acc(*x, g.scale(*s))?,
            Op::Transpose(x) => acc(*x, g.transpose())?,
            Op::RowGather(x, idx) => {
                let (rows, cols) = self.value(*x).shape();
                let mut dx = Matrix::zeros(rows, cols);
                for (k, &src) in idx.iter().enumerate() {
                    for (d, &gv) in dx.row_mut(src).iter_mut().zip(g.row(k)) {
                        *d += gv;
                    }
                }
                acc(*x, dx)?;
            }
            Op::ElementwiseMul(a, b) => {
                if needs(*a) {
                    acc(*a, g.hadamard(self.value(*b))?)?;
                }
                if needs(*b) {
                    acc(*b, g.hadamard(self.value(*a))?)?;
                }
            }
            Op::NormalizeRows(x) => {
                let xv = self.value(*x);
                let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                for i in 0..xv.rows() {
                    let norm = row_norm(xv.row(i));
                    let y = out.row(i);
                    let gi = g.row(i);
                    let dot: f64 = y.iter().zip(gi).map(|(a, b)| a * b).sum();
                    for ((d, &gv), &yv) in dx.row_mut(i).iter_mut().zip(gi).zip(y) {
                        *d = (gv - yv * dot) / norm;
                    }
                }
                acc(*x, dx)?;
            }
        }
        Ok(())
    }
}

fn row_norm(row: &[f64]) -> f64 {
    math::sqrt(row.iter().map(|v| v * v).sum::<f64>()).max(NORM_FLOOR)
}

fn softplus_grad(x: f64) -> f64 {
    if x > 30.0 {
        1.0
    } else if x < -30.0 {
        math::exp(x)
    } else {
        math::sigmoid(x)
    }
}
