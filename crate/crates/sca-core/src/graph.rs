//! Tape-style reverse-mode differentiation. One graph is built and
//! consumed per training step; node order is topological by construction.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    },
    Linear {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    /// Affine map through the transpose of a shared weight matrix.
    LinearT {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    Relu {
        input: NodeId,
    },
    TopK {
        input: NodeId,
        k: usize,
        /// Kept indices, k per row, rows concatenated.
        kept: Vec<u32>,
    },
    Bilinear {
        input: NodeId,
        factor: usize,
    },
    Add {
        lhs: NodeId,
        rhs: NodeId,
    },
    ConcatC {
        lhs: NodeId,
        rhs: NodeId,
    },
    SelectC {
        input: NodeId,
        channel: usize,
    },
    Reshape {
        input: NodeId,
    },
    Mse {
        lhs: NodeId,
        rhs: NodeId,
    },
}

struct Node<E: Scalar> {
    value: Tensor<E>,
    grad: Option<Tensor<E>>,
    param: bool,
    op: Op,
}

pub struct Graph<E: Scalar> {
    nodes: Vec<Node<E>>,
}

impl<E: Scalar> Default for Graph<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Scalar> Graph<E> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<E>, param: bool, op: Op) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            param,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Tensor<E>) -> NodeId {
        self.push(value, false, Op::Leaf)
    }

    pub fn param(&mut self, value: Tensor<E>) -> NodeId {
        self.push(value, true, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<E> {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor<E>> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        if x.rank() != 4 || w.rank() != 4 {
            return Err(Error::BadArgument {
                op: "conv2d",
                detail: format!("expected rank-4 input/weight, got {}/{}", x.rank(), w.rank()),
            });
        }
        let [_, c_in, h, wdt] = kernels::dims4(x);
        let [f, wc, kh, kw] = kernels::dims4(w);
        if wc != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                axis: 1,
                expected: wc,
                got: c_in,
            });
        }
        if b.shape() != [f] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                axis: 0,
                expected: f,
                got: b.numel(),
            });
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::BadArgument {
                op: "conv2d",
                detail: format!("kernel extents must be odd, got {kh}x{kw}"),
            });
        }
        if !(stride == 1 || stride == 2) {
            return Err(Error::BadArgument {
                op: "conv2d",
                detail: format!("stride must be 1 or 2, got {stride}"),
            });
        }
        if h + 2 * padding < kh || wdt + 2 * padding < kw {
            return Err(Error::BadArgument {
                op: "conv2d",
                detail: format!("spatial extent {h}x{wdt} smaller than kernel"),
            });
        }
        let out = kernels::conv2d_forward(x, w, b, stride, padding);
        Ok(self.push(
            out,
            false,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                padding,
            },
        ))
    }

    pub fn linear(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let d_in = *x.shape().last().unwrap();
        if w.rank() != 2 || w.shape()[1] != d_in {
            return Err(Error::ShapeMismatch {
                op: "linear",
                axis: x.rank() - 1,
                expected: if w.rank() == 2 { w.shape()[1] } else { 0 },
                got: d_in,
            });
        }
        if b.numel() != w.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "linear",
                axis: 0,
                expected: w.shape()[0],
                got: b.numel(),
            });
        }
        let out = kernels::linear_forward(x, w, b);
        Ok(self.push(out, false, Op::Linear { input, weight, bias }))
    }

    pub fn linear_t(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let d_out = *x.shape().last().unwrap();
        if w.rank() != 2 || w.shape()[0] != d_out {
            return Err(Error::ShapeMismatch {
                op: "linear_t",
                axis: x.rank() - 1,
                expected: if w.rank() == 2 { w.shape()[0] } else { 0 },
                got: d_out,
            });
        }
        if b.numel() != w.shape()[1] {
            return Err(Error::ShapeMismatch {
                op: "linear_t",
                axis: 0,
                expected: w.shape()[1],
                got: b.numel(),
            });
        }
        let out = kernels::linear_t_forward(x, w, b);
        Ok(self.push(out, false, Op::LinearT { input, weight, bias }))
    }

    pub fn relu(&mut self, input: NodeId) -> NodeId {
        let out = self.value(input).map(|v| v.max(E::ZERO));
        self.push(out, false, Op::Relu { input })
    }

    /// Keeps the `k` largest-magnitude entries of each last-axis row,
    /// zeros the rest. Gradient flows only through the kept indices.
    pub fn top_k(&mut self, input: NodeId, k: usize) -> Result<NodeId> {
        let x = self.value(input);
        let m = *x.shape().last().unwrap();
        if k < 1 || k > m {
            return Err(Error::BadArgument {
                op: "top_k",
                detail: format!("k = {k} out of range [1, {m}]"),
            });
        }
        let rows = x.numel() / m;
        let mut out = Tensor::zeros(x.shape());
        let mut kept = Vec::with_capacity(rows * k);
        {
            let src = x.data();
            for r in 0..rows {
                let row = &src[r * m..(r + 1) * m];
                let idx = kernels::top_k_indices(row, k);
                for &i in &idx {
                    out.data_mut()[r * m + i as usize] = row[i as usize];
                }
                kept.extend_from_slice(&idx);
            }
        }
        Ok(self.push(out, false, Op::TopK { input, k, kept }))
    }

    pub fn bilinear_upsample(&mut self, input: NodeId, factor: usize) -> Result<NodeId> {
        if factor < 1 {
            return Err(Error::BadArgument {
                op: "bilinear_upsample",
                detail: format!("factor must be >= 1, got {factor}"),
            });
        }
        let x = self.value(input);
        if x.rank() != 4 {
            return Err(Error::BadArgument {
                op: "bilinear_upsample",
                detail: format!("expected rank-4 input, got rank {}", x.rank()),
            });
        }
        let out = kernels::bilinear_forward(x, factor);
        Ok(self.push(out, false, Op::Bilinear { input, factor }))
    }

    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let a = self.value(lhs);
        let b = self.value(rhs);
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch {
                op: "add",
                axis: 0,
                expected: a.numel(),
                got: b.numel(),
            });
        }
        let mut out = a.clone();
        out.add_assign(b)?;
        Ok(self.push(out, false, Op::Add { lhs, rhs }))
    }

    /// Concatenate two NCHW tensors along the channel axis.
    pub fn concat_channels(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let a = self.value(lhs);
        let b = self.value(rhs);
        let [na, ca, ha, wa] = kernels::dims4(a);
        let [nb, cb, hb, wb] = kernels::dims4(b);
        if na != nb || ha != hb || wa != wb {
            return Err(Error::ShapeMismatch {
                op: "concat_channels",
                axis: if na != nb { 0 } else { 2 },
                expected: na * ha * wa,
                got: nb * hb * wb,
            });
        }
        let plane = ha * wa;
        let mut data = Vec::with_capacity((ca + cb) * na * plane);
        for n in 0..na {
            data.extend_from_slice(&a.data()[n * ca * plane..(n + 1) * ca * plane]);
            data.extend_from_slice(&b.data()[n * cb * plane..(n + 1) * cb * plane]);
        }
        let out = Tensor::new(alloc::vec![na, ca + cb, ha, wa], data)?;
        Ok(self.push(out, false, Op::ConcatC { lhs, rhs }))
    }

    /// Slice one channel of an NCHW tensor as [N, 1, H, W].
    pub fn select_channel(&mut self, input: NodeId, channel: usize) -> Result<NodeId> {
        let x = self.value(input);
        let [n, c, h, w] = kernels::dims4(x);
        if channel >= c {
            return Err(Error::BadArgument {
                op: "select_channel",
                detail: format!("channel {channel} out of range 0..{c}"),
            });
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * plane);
        for ni in 0..n {
            let base = (ni * c + channel) * plane;
            data.extend_from_slice(&x.data()[base..base + plane]);
        }
        let out = Tensor::new(alloc::vec![n, 1, h, w], data)?;
        Ok(self.push(out, false, Op::SelectC { input, channel }))
    }

    pub fn reshape(&mut self, input: NodeId, shape: &[usize]) -> Result<NodeId> {
        let out = self.value(input).reshaped(shape)?;
        Ok(self.push(out, false, Op::Reshape { input }))
    }

    /// Mean squared error over all elements; scalar output.
    pub fn mse(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let a = self.value(lhs);
        let b = self.value(rhs);
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch {
                op: "mse",
                axis: 0,
                expected: a.numel(),
                got: b.numel(),
            });
        }
        let n = a.numel();
        let mut acc = 0.0f64;
        for (x, y) in a.data().iter().zip(b.data().iter()) {
            let d = x.to_f64() - y.to_f64();
            acc += d * d;
        }
        let out = Tensor::scalar(E::from_f64(acc / n as f64));
        Ok(self.push(out, false, Op::Mse { lhs, rhs }))
    }

    fn accumulate(&mut self, id: NodeId, grad: Tensor<E>) {
        match &mut self.nodes[id.0].grad {
            Some(g) => g.add_assign(&grad).expect("gradient shape drift"),
            slot @ None => *slot = Some(grad),
        }
    }

    /// Reverse accumulation from a scalar loss node. After this call every
    /// reachable parameter node holds a gradient of its own shape.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::BadArgument {
                op: "backward",
                detail: format!(
                    "loss must be scalar, got {} elements",
                    self.value(loss).numel()
                ),
            });
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(E::ONE));

        for i in (0..self.nodes.len()).rev() {
            let Some(grad) = self.nodes[i].grad.clone() else {
                continue;
            };
            match self.nodes[i].op.clone() {
                Op::Leaf => {}
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    stride,
                    padding,
                } => {
                    let (dx, dw, db) = kernels::conv2d_backward(
                        self.value(input),
                        self.value(weight),
                        &grad,
                        stride,
                        padding,
                    );
                    self.accumulate(input, dx);
                    self.accumulate(weight, dw);
                    self.accumulate(bias, db);
                }
                Op::Linear { input, weight, bias } => {
                    let (dx, dw, db) =
                        kernels::linear_backward(self.value(input), self.value(weight), &grad);
                    self.accumulate(input, dx);
                    self.accumulate(weight, dw);
                    self.accumulate(bias, db);
                }
                Op::LinearT { input, weight, bias } => {
                    let (dx, dw, db) =
                        kernels::linear_t_backward(self.value(input), self.value(weight), &grad);
                    self.accumulate(input, dx);
                    self.accumulate(weight, dw);
                    self.accumulate(bias, db);
                }
                Op::Relu { input } => {
                    let x = self.value(input);
                    let mut dx = Tensor::zeros(x.shape());
                    for ((d, &g), &v) in dx
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(x.data())
                    {
                        // subgradient 0 at exactly 0
                        if v > E::ZERO {
                            *d = g;
                        }
                    }
                    self.accumulate(input, dx);
                }
                Op::TopK { input, k, kept } => {
                    let x_shape = self.value(input).shape().to_vec();
                    let m = *x_shape.last().unwrap();
                    let rows = kept.len() / k;
                    let mut dx = Tensor::zeros(&x_shape);
                    for r in 0..rows {
                        for &i in &kept[r * k..(r + 1) * k] {
                            let pos = r * m + i as usize;
                            dx.data_mut()[pos] = grad.data()[pos];
                        }
                    }
                    self.accumulate(input, dx);
                }
                Op::Bilinear { input, factor } => {
                    let shape = self.value(input).shape().to_vec();
                    let dx = kernels::bilinear_backward(&shape, &grad, factor);
                    self.accumulate(input, dx);
                }
                Op::Add { lhs, rhs } => {
                    self.accumulate(lhs, grad.clone());
                    self.accumulate(rhs, grad);
                }
                Op::ConcatC { lhs, rhs } => {
                    let [n, ca, h, w] = kernels::dims4(self.value(lhs));
                    let cb = self.value(rhs).shape()[1];
                    let plane = h * w;
                    let mut da = Tensor::zeros(self.value(lhs).shape());
                    let mut db = Tensor::zeros(self.value(rhs).shape());
                    for ni in 0..n {
                        let base = ni * (ca + cb) * plane;
                        da.data_mut()[ni * ca * plane..(ni + 1) * ca * plane]
                            .copy_from_slice(&grad.data()[base..base + ca * plane]);
                        db.data_mut()[ni * cb * plane..(ni + 1) * cb * plane]
                            .copy_from_slice(&grad.data()[base + ca * plane..base + (ca + cb) * plane]);
                    }
                    self.accumulate(lhs, da);
                    self.accumulate(rhs, db);
                }
                Op::SelectC { input, channel } => {
                    let [n, c, h, w] = kernels::dims4(self.value(input));
                    let plane = h * w;
                    let mut dx = Tensor::zeros(self.value(input).shape());
                    for ni in 0..n {
                        let base = (ni * c + channel) * plane;
                        dx.data_mut()[base..base + plane]
                            .copy_from_slice(&grad.data()[ni * plane..(ni + 1) * plane]);
                    }
                    self.accumulate(input, dx);
                }
                Op::Reshape { input } => {
                    let shape = self.value(input).shape().to_vec();
                    let dx = grad.reshaped(&shape)?;
                    self.accumulate(input, dx);
                }
                Op::Mse { lhs, rhs } => {
                    let a = self.value(lhs);
                    let b = self.value(rhs);
                    let n = a.numel() as f64;
                    let g = grad.data()[0].to_f64();
                    let mut da = Tensor::zeros(a.shape());
                    let mut db = Tensor::zeros(b.shape());
                    for i in 0..a.numel() {
                        let d = a.data()[i].to_f64() - b.data()[i].to_f64();
                        let v = 2.0 * d * g / n;
                        da.data_mut()[i] = E::from_f64(v);
                        db.data_mut()[i] = E::from_f64(-v);
                    }
                    self.accumulate(lhs, da);
                    self.accumulate(rhs, db);
                }
            }
        }

        // every parameter that fed the loss must now carry a gradient of
        // identical shape
        for node in &self.nodes {
            if node.param {
                if let Some(g) = &node.grad {
                    debug_assert_eq!(g.shape(), node.value.shape());
                }
            }
        }
        Ok(())
    }
}
