use std::collections::HashMap;

use super::tensor::split_axis;
use super::{Gradients, ParamStore, Tensor, TensorError};

/// Offset inside the square root of [`Graph::sqrt_eps`].
pub const SQRT_EPS: f64 = 1e-12;

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(String),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Scale(usize, f64),
    Concat { parts: Vec<usize>, axis: usize },
    Slice { src: usize, axis: usize, start: usize },
    Reshape(usize),
    Tanh(usize),
    Sigmoid(usize),
    Sum(usize),
    Mean(usize),
    SqrtEps(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A tape of tensor operations recorded during one forward pass.
///
/// Every op checks shapes up front and rejects non-finite outputs. Call
/// [`Graph::backward`] on a scalar node to get gradients for every
/// parameter of a [`ParamStore`]; the graph is dropped afterwards.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
    frozen: Vec<String>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parameters whose name starts with `prefix` are recorded as constants.
    pub fn freeze_prefix(&mut self, prefix: impl Into<String>) {
        self.frozen.push(prefix.into());
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var, TensorError> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var, TensorError> {
        self.push("constant", value, Op::Constant)
    }

    /// Looks up `name` in `store`. Repeated lookups return the same node, so
    /// every use contributes to one gradient.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var, TensorError> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))?
            .clone();
        let op = if self.frozen.iter().any(|p| name.starts_with(p.as_str())) {
            Op::Constant
        } else {
            Op::Param(name.to_string())
        };
        let v = self.push("param", value, op)?;
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(TensorError::mismatch(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", out, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", out, Op::Sub(a.0, b.0))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", out, Op::Mul(a.0, b.0))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a.0, b.0))
    }

    /// Scalar times tensor.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| c * x);
        self.push("scale", out, Op::Scale(a.0, c))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = parts.first().ok_or(TensorError::Shape {
            op: "concat",
            detail: "no inputs".into(),
        })?;
        let base = self.value(*first).shape().to_vec();
        if axis >= base.len() {
            return Err(TensorError::Axis { op: "concat", axis, rank: base.len() });
        }
        let mut extent = 0;
        for p in parts {
            let s = self.value(*p).shape();
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(TensorError::mismatch("concat", &base, s));
            }
            extent += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = extent;
        let (outer, _, inner) = split_axis(&shape, axis);
        let mut data = Vec::with_capacity(outer * extent * inner);
        for o in 0..outer {
            for p in parts {
                let t = self.value(*p);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let out = Tensor::new(shape, data)?;
        let parts = parts.iter().map(|p| p.0).collect();
        self.push("concat", out, Op::Concat { parts, axis })
    }

    /// Indices `start..end` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var, TensorError> {
        let src = self.value(a);
        let shape = src.shape();
        if axis >= shape.len() {
            return Err(TensorError::Axis { op: "slice", axis, rank: shape.len() });
        }
        if start >= end || end > shape[axis] {
            return Err(TensorError::Shape {
                op: "slice",
                detail: format!("range {start}..{end} invalid for axis {axis} of shape {shape:?}"),
            });
        }
        let (outer, extent, inner) = split_axis(shape, axis);
        let mut out_shape = shape.to_vec();
        out_shape[axis] = end - start;
        let mut data = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * extent * inner;
            data.extend_from_slice(&src.data()[base + start * inner..base + end * inner]);
        }
        let out = Tensor::new(out_shape, data)?;
        self.push("slice", out, Op::Slice { src: a.0, axis, start })
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let src = self.value(a);
        let out = src.reshape(shape).map_err(|_| TensorError::mismatch("reshape", src.shape(), shape))?;
        self.push("reshape", out, Op::Reshape(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(f64::tanh);
        self.push("tanh", out, Op::Tanh(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push("sigmoid", out, Op::Sigmoid(a.0))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push("sum", out, Op::Sum(a.0))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.value(a);
        let out = Tensor::scalar(t.sum() / t.len() as f64);
        self.push("mean", out, Op::Mean(a.0))
    }

    /// `sqrt(x + 1e-12)`, differentiable at zero.
    pub fn sqrt_eps(&mut self, a: Var) -> Result<Var, TensorError> {
        let t = self.value(a);
        if let Some(bad) = t.data().iter().find(|&&x| x + SQRT_EPS < 0.0) {
            return Err(TensorError::Domain { op: "sqrt_eps", value: *bad });
        }
        let out = t.map(|x| (x + SQRT_EPS).sqrt());
        self.push("sqrt_eps", out, Op::SqrtEps(a.0))
    }

    /// Reverse-mode sweep from `loss`. Parameters of `store` that the loss
    /// does not reach get zero gradients.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if !lv.is_scalar() || lv.rank() > 1 {
            return Err(TensorError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        let mut out = store.zeros_like();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(name) => {
                    if let Some(slot) = out.get_mut(name) {
                        slot.add_assign(&g);
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|x| -x));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let ga = g.zip_map(vb, |x, y| x * y);
                    let gb = g.zip_map(va, |x, y| x * y);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let ga = g.matmul(&vb.transpose()?)?;
                    let gb = va.transpose()?.matmul(&g)?;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.map(|x| c * x)),
                Op::Concat { parts, axis } => {
                    let (outer, _, inner) = split_axis(g.shape(), *axis);
                    let mut offset = 0;
                    for &p in parts {
                        let pshape = self.nodes[p].value.shape();
                        let chunk = pshape[*axis] * inner;
                        let row = g.shape()[*axis] * inner;
                        let mut data = Vec::with_capacity(outer * chunk);
                        for o in 0..outer {
                            let base = o * row + offset;
                            data.extend_from_slice(&g.data()[base..base + chunk]);
                        }
                        offset += chunk;
                        accumulate(&mut grads, p, Tensor::new(pshape.to_vec(), data)?);
                    }
                }
                Op::Slice { src, axis, start } => {
                    let sshape = self.nodes[*src].value.shape();
                    let (outer, extent, inner) = split_axis(sshape, *axis);
                    let width = g.shape()[*axis] * inner;
                    let mut full = Tensor::zeros(sshape);
                    for o in 0..outer {
                        let base = o * extent * inner + start * inner;
                        full.data_mut()[base..base + width]
                            .copy_from_slice(&g.data()[o * width..(o + 1) * width]);
                    }
                    accumulate(&mut grads, *src, full);
                }
                Op::Reshape(a) => {
                    let shape = self.nodes[*a].value.shape();
                    accumulate(&mut grads, *a, g.reshape(shape)?);
                }
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |x, y| x * (1.0 - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |x, y| x * y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let shape = self.nodes[*a].value.shape();
                    accumulate(&mut grads, *a, Tensor::full(shape, g.item()));
                }
                Op::Mean(a) => {
                    let src = &self.nodes[*a].value;
                    accumulate(&mut grads, *a, Tensor::full(src.shape(), g.item() / src.len() as f64));
                }
                Op::SqrtEps(a) => {
                    let ga = g.zip_map(&node.value, |x, y| x / (2.0 * y));
                    accumulate(&mut grads, *a, ga);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], idx: usize, g: Tensor) {
    match &mut grads[idx] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
