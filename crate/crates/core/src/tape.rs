//! Reverse-mode automatic differentiation over a flat record of tensor
//! operations. A forward pass appends nodes eagerly (values are computed as
//! the graph is built); `backward` then replays the record in reverse from a
//! scalar seed and accumulates adjoints.
//!
//! The tape is rebuilt for every forward pass. At the model sizes involved
//! this is cheaper and far simpler than keeping a persistent graph.

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Registered differentiable input; gradients can be requested for it.
    Leaf,
    /// Value that gradients do not flow into.
    Constant,
    MatMul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    MulElem(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Softplus(NodeId),
    Square(NodeId),
    Abs(NodeId),
    LogCosh(NodeId),
    MeanAll(NodeId),
    PairwiseSqDist(NodeId, NodeId),
    RbfKernel(NodeId, NodeId),
}

struct Node {
    op: Op,
    value: Tensor2,
}

#[derive(Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Numerically stable log(cosh(d)): |d| + log1p(exp(-2|d|)) - log 2.
pub fn logcosh(d: f64) -> f64 {
    let a = d.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Numerically stable log(1 + exp(x)).
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl GradTape {
    pub fn new() -> Self {
        GradTape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor2 {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor2) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Register a differentiable input (parameter or data batch).
    pub fn leaf(&mut self, value: Tensor2) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Register a value that should be treated as fixed.
    pub fn constant(&mut self, value: Tensor2) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let v = tensor::add_row(self.value(a), self.value(row))?;
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::sub(self.value(a), self.value(b))?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul_elem(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = tensor::mul_elem(self.value(a), self.value(b))?;
        Ok(self.push(Op::MulElem(a, b), v))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        let v = tensor::scale(self.value(a), s)?;
        Ok(self.push(Op::Scale(a, s), v))
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        let v = tensor::add_scalar(self.value(a), s)?;
        Ok(self.push(Op::AddScalar(a), v))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::map(self.value(a), f64::tanh)?;
        Ok(self.push(Op::Tanh(a), v))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::map(self.value(a), |x| x.max(0.0))?;
        Ok(self.push(Op::Relu(a), v))
    }

    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::map(self.value(a), softplus)?;
        Ok(self.push(Op::Softplus(a), v))
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::map(self.value(a), |x| x * x)?;
        Ok(self.push(Op::Square(a), v))
    }

    pub fn abs(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::map(self.value(a), f64::abs)?;
        Ok(self.push(Op::Abs(a), v))
    }

    pub fn logcosh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::map(self.value(a), logcosh)?;
        Ok(self.push(Op::LogCosh(a), v))
    }

    /// Mean over all entries, yielding a 1 x 1 node.
    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId> {
        let v = tensor::mean_all(self.value(a))?;
        Ok(self.push(Op::MeanAll(a), v))
    }

    pub fn pairwise_sqdist(&mut self, x: NodeId, c: NodeId) -> Result<NodeId> {
        let v = tensor::pairwise_sqdist(self.value(x), self.value(c))?;
        Ok(self.push(Op::PairwiseSqDist(x, c), v))
    }

    pub fn rbf_kernel(&mut self, d2: NodeId, log_widths: NodeId) -> Result<NodeId> {
        let v = tensor::rbf_kernel(self.value(d2), self.value(log_widths))?;
        Ok(self.push(Op::RbfKernel(d2, log_widths), v))
    }

    fn wants_grad(&self, id: NodeId) -> bool {
        !matches!(self.nodes[id.0].op, Op::Constant)
    }

    /// Run the reverse pass from a scalar seed node. Returns the gradient of
    /// that scalar with respect to every registered leaf; leaves that do not
    /// influence the seed get exact zeros.
    pub fn backward(&self, seed: NodeId) -> Result<Gradients> {
        let seed_val = self.value(seed);
        if seed_val.shape() != (1, 1) {
            return Err(Error::invalid(format!(
                "backward needs a 1x1 seed, got {}x{}",
                seed_val.rows(),
                seed_val.cols()
            )));
        }
        let mut adj: Vec<Option<Tensor2>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[seed.0] = Some(Tensor2::scalar(1.0)?);

        for i in (0..=seed.0).rev() {
            let g = match adj[i].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[i];
            match node.op {
                Op::Leaf => {
                    adj[i] = Some(g);
                    continue;
                }
                Op::Constant => continue,
                Op::MatMul(a, b) => {
                    if self.wants_grad(a) {
                        let da = tensor::matmul_ex(&g, false, self.value(b), true)?;
                        self.accumulate(&mut adj, a, da)?;
                    }
                    if self.wants_grad(b) {
                        let db = tensor::matmul_ex(self.value(a), true, &g, false)?;
                        self.accumulate(&mut adj, b, db)?;
                    }
                }
                Op::AddRow(a, row) => {
                    if self.wants_grad(a) {
                        self.accumulate(&mut adj, a, g.clone())?;
                    }
                    if self.wants_grad(row) {
                        let cols = g.cols();
                        let mut sums = vec![0.0; cols];
                        for r in 0..g.rows() {
                            for (c, s) in sums.iter_mut().enumerate() {
                                *s += g.get(r, c);
                            }
                        }
                        self.accumulate(&mut adj, row, Tensor2::from_vec(1, cols, sums)?)?;
                    }
                }
                Op::Add(a, b) => {
                    if self.wants_grad(a) {
                        self.accumulate(&mut adj, a, g.clone())?;
                    }
                    if self.wants_grad(b) {
                        self.accumulate(&mut adj, b, g)?;
                    }
                }
                Op::Sub(a, b) => {
                    if self.wants_grad(a) {
                        self.accumulate(&mut adj, a, g.clone())?;
                    }
                    if self.wants_grad(b) {
                        self.accumulate(&mut adj, b, tensor::scale(&g, -1.0)?)?;
                    }
                }
                Op::MulElem(a, b) => {
                    if self.wants_grad(a) {
                        self.accumulate(&mut adj, a, tensor::mul_elem(&g, self.value(b))?)?;
                    }
                    if self.wants_grad(b) {
                        self.accumulate(&mut adj, b, tensor::mul_elem(&g, self.value(a))?)?;
                    }
                }
                Op::Scale(a, s) => {
                    if self.wants_grad(a) {
                        self.accumulate(&mut adj, a, tensor::scale(&g, s)?)?;
                    }
                }
                Op::AddScalar(a) => {
                    if self.wants_grad(a) {
                        self.accumulate(&mut adj, a, g)?;
                    }
                }
                Op::Tanh(a) => {
                    if self.wants_grad(a) {
                        let d = tensor::map(&node.value, |y| 1.0 - y * y)?;
                        self.accumulate(&mut adj, a, tensor::mul_elem(&g, &d)?)?;
                    }
                }
                Op::Relu(a) => {
                    if self.wants_grad(a) {
                        let d = tensor::map(self.value(a), |x| if x > 0.0 { 1.0 } else { 0.0 })?;
                        self.accumulate(&mut adj, a, tensor::mul_elem(&g, &d)?)?;
                    }
                }
                Op::Softplus(a) => {
                    if self.wants_grad(a) {
                        let d = tensor::map(self.value(a), sigmoid)?;
                        self.accumulate(&mut adj, a, tensor::mul_elem(&g, &d)?)?;
                    }
                }
                Op::Square(a) => {
                    if self.wants_grad(a) {
                        let d = tensor::scale(self.value(a), 2.0)?;
                        self.accumulate(&mut adj, a, tensor::mul_elem(&g, &d)?)?;
                    }
                }
                Op::Abs(a) => {
                    if self.wants_grad(a) {
                        let d = tensor::map(self.value(a), |x| {
                            if x > 0.0 {
                                1.0
                            } else if x < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        })?;
                        self.accumulate(&mut adj, a, tensor::mul_elem(&g, &d)?)?;
                    }
                }
                Op::LogCosh(a) => {
                    if self.wants_grad(a) {
                        let d = tensor::map(self.value(a), f64::tanh)?;
                        self.accumulate(&mut adj, a, tensor::mul_elem(&g, &d)?)?;
                    }
                }
                Op::MeanAll(a) => {
                    if self.wants_grad(a) {
                        let src = self.value(a);
                        let v = g.get(0, 0) / src.len() as f64;
                        let d = tensor::map(src, |_| v)?;
                        self.accumulate(&mut adj, a, d)?;
                    }
                }
                Op::PairwiseSqDist(x, c) => {
                    // d2_ij = |x_i - c_j|^2, so
                    //   d/dx_i = sum_j g_ij 2 (x_i - c_j)
                    //   d/dc_j = sum_i g_ij 2 (c_j - x_i)
                    let xv = self.value(x);
                    let cv = self.value(c);
                    let row_sums: Vec<f64> =
                        (0..g.rows()).map(|i| g.row(i).iter().sum()).collect();
                    let mut col_sums = vec![0.0; g.cols()];
                    for i in 0..g.rows() {
                        for (j, s) in col_sums.iter_mut().enumerate() {
                            *s += g.get(i, j);
                        }
                    }
                    if self.wants_grad(x) {
                        let gc = tensor::matmul(&g, cv)?;
                        let mut dx = Tensor2::zeros(xv.rows(), xv.cols());
                        for i in 0..xv.rows() {
                            for l in 0..xv.cols() {
                                let v = 2.0 * (row_sums[i] * xv.get(i, l) - gc.get(i, l));
                                dx.data_mut()[i * xv.cols() + l] = v;
                            }
                        }
                        dx.ensure_finite()?;
                        self.accumulate(&mut adj, x, dx)?;
                    }
                    if self.wants_grad(c) {
                        let gx = tensor::matmul_ex(&g, true, xv, false)?;
                        let mut dc = Tensor2::zeros(cv.rows(), cv.cols());
                        for j in 0..cv.rows() {
                            for l in 0..cv.cols() {
                                let v = 2.0 * (col_sums[j] * cv.get(j, l) - gx.get(j, l));
                                dc.data_mut()[j * cv.cols() + l] = v;
                            }
                        }
                        dc.ensure_finite()?;
                        self.accumulate(&mut adj, c, dc)?;
                    }
                }
                Op::RbfKernel(d2, lw) => {
                    // y_ij = exp(-d2_ij e^{-2 l_j} / 2)
                    let y = &node.value;
                    let d2v = self.value(d2);
                    let lwv = self.value(lw);
                    let inv_s2: Vec<f64> =
                        lwv.data().iter().map(|l| (-2.0 * l).exp()).collect();
                    if self.wants_grad(d2) {
                        let mut dd2 = Tensor2::zeros(y.rows(), y.cols());
                        for i in 0..y.rows() {
                            for j in 0..y.cols() {
                                dd2.data_mut()[i * y.cols() + j] =
                                    -0.5 * g.get(i, j) * y.get(i, j) * inv_s2[j];
                            }
                        }
                        dd2.ensure_finite()?;
                        self.accumulate(&mut adj, d2, dd2)?;
                    }
                    if self.wants_grad(lw) {
                        let mut dl = vec![0.0; lwv.cols()];
                        for i in 0..y.rows() {
                            for (j, s) in dl.iter_mut().enumerate() {
                                *s += g.get(i, j) * y.get(i, j) * d2v.get(i, j) * inv_s2[j];
                            }
                        }
                        self.accumulate(&mut adj, lw, Tensor2::from_vec(1, lwv.cols(), dl)?)?;
                    }
                }
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        let leaves = self
            .nodes
            .iter()
            .map(|n| matches!(n.op, Op::Leaf))
            .collect();
        Ok(Gradients {
            grads: adj,
            leaves,
            shapes,
        })
    }

    fn accumulate(
        &self,
        adj: &mut [Option<Tensor2>],
        id: NodeId,
        delta: Tensor2,
    ) -> Result<()> {
        match &mut adj[id.0] {
            Some(existing) => {
                *existing = tensor::add(existing, &delta)?;
            }
            slot @ None => *slot = Some(delta),
        }
        Ok(())
    }
}

/// Result of a reverse pass: per-leaf gradient tensors.
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
    leaves: Vec<bool>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the seed with respect to a registered leaf. Leaves on no
    /// path to the seed yield exact zeros; non-leaf nodes are an error.
    pub fn wrt(&self, id: NodeId) -> Result<Tensor2> {
        if id.0 >= self.leaves.len() || !self.leaves[id.0] {
            return Err(Error::invalid(
                "gradient requested for a node that was not registered as an input",
            ));
        }
        Ok(match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[id.0];
                Tensor2::zeros(r, c)
            }
        })
    }
}
