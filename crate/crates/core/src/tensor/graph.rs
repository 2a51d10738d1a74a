//! Single-owner tape for reverse-mode differentiation. Nodes are appended in
//! creation order, which is a topological order by construction; backward
//! walks them in reverse so every gradient accumulation happens in the same
//! sequence on every run.

use super::ops::{self, Padding};
use super::scalar::Scalar;
use super::FieldTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug)]
enum Op<F: Scalar> {
    Leaf,
    Add(NodeId, NodeId),
    Multiply(NodeId, NodeId),
    AbsSub(NodeId, NodeId),
    Affine { input: NodeId, mul: F },
    Silu(NodeId),
    Conv2d { input: NodeId, kernel: NodeId, bias: NodeId, padding: Padding, stride: usize },
    Linear { input: NodeId, weight: NodeId, bias: NodeId },
    CondLayerNorm {
        input: NodeId,
        scale: NodeId,
        shift: NodeId,
        normalized: FieldTensor<F>,
        inv_std: Vec<F>,
    },
    SumAxes { input: NodeId, axes: Vec<usize> },
    MeanAxes { input: NodeId, axes: Vec<usize>, count: usize },
    ConcatChannels(Vec<NodeId>),
    Upsample2x(NodeId),
    AvgPool2x(NodeId),
    Crop { input: NodeId, y0: usize, x0: usize },
    Pad { input: NodeId, y0: usize, x0: usize },
}

struct Node<F: Scalar> {
    value: FieldTensor<F>,
    op: Op<F>,
    requires_grad: bool,
}

/// Gradients for every `requires_grad` node reachable from the loss.
pub struct Gradients<F: Scalar = f32> {
    grads: Vec<Option<FieldTensor<F>>>,
}

impl<F: Scalar> Gradients<F> {
    pub fn get(&self, id: NodeId) -> Option<&FieldTensor<F>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, id: NodeId) -> Option<FieldTensor<F>> {
        self.grads.get_mut(id.0).and_then(|g| g.take())
    }
}

pub struct Graph<F: Scalar = f32> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert an input tensor. Its `requires_grad` flag decides whether
    /// backward will produce a gradient for it.
    pub fn leaf(&mut self, value: FieldTensor<F>) -> NodeId {
        let requires_grad = value.requires_grad();
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Insert a parameter tensor (always differentiated).
    pub fn param(&mut self, value: FieldTensor<F>) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, id: NodeId) -> &FieldTensor<F> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: FieldTensor<F>, op: Op<F>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn needs_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn record(&mut self, value: FieldTensor<F>, op: Op<F>, parents: &[NodeId], name: &str) -> Result<NodeId> {
        value.check_finite(name)?;
        let rg = self.needs_grad(parents);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::add(self.value(a), self.value(b))?;
        self.record(v, Op::Add(a, b), &[a, b], "add")
    }

    pub fn multiply(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::multiply(self.value(a), self.value(b))?;
        self.record(v, Op::Multiply(a, b), &[a, b], "multiply")
    }

    pub fn abs_subtract(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::abs_subtract(self.value(a), self.value(b))?;
        self.record(v, Op::AbsSub(a, b), &[a, b], "abs_subtract")
    }

    pub fn affine(&mut self, input: NodeId, mul: F, add: F) -> Result<NodeId> {
        let v = ops::affine(self.value(input), mul, add);
        self.record(v, Op::Affine { input, mul }, &[input], "affine")
    }

    pub fn silu(&mut self, input: NodeId) -> Result<NodeId> {
        let v = ops::silu(self.value(input));
        self.record(v, Op::Silu(input), &[input], "silu")
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        padding: Padding,
        stride: usize,
    ) -> Result<NodeId> {
        let v = ops::conv2d(self.value(input), self.value(kernel), self.value(bias), padding, stride)?;
        self.record(
            v,
            Op::Conv2d { input, kernel, bias, padding, stride },
            &[input, kernel, bias],
            "conv2d",
        )
    }

    pub fn linear(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = ops::linear(self.value(input), self.value(weight), self.value(bias))?;
        self.record(v, Op::Linear { input, weight, bias }, &[input, weight, bias], "linear")
    }

    pub fn cond_layer_norm(
        &mut self,
        input: NodeId,
        scale: NodeId,
        shift: NodeId,
        epsilon: F,
    ) -> Result<NodeId> {
        let (v, normalized, inv_std) =
            ops::cond_layer_norm(self.value(input), self.value(scale), self.value(shift), epsilon)?;
        self.record(
            v,
            Op::CondLayerNorm { input, scale, shift, normalized, inv_std },
            &[input, scale, shift],
            "cond_layer_norm",
        )
    }

    pub fn sum_over_axes(&mut self, input: NodeId, axes: &[usize]) -> Result<NodeId> {
        let v = ops::sum_over_axes(self.value(input), axes)?;
        self.record(v, Op::SumAxes { input, axes: axes.to_vec() }, &[input], "sum_over_axes")
    }

    pub fn mean_over_axes(&mut self, input: NodeId, axes: &[usize]) -> Result<NodeId> {
        let count: usize = axes.iter().map(|&a| self.value(input).shape()[a]).product();
        let v = ops::mean_over_axes(self.value(input), axes)?;
        self.record(
            v,
            Op::MeanAxes { input, axes: axes.to_vec(), count },
            &[input],
            "mean_over_axes",
        )
    }

    pub fn concat_channels(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let tensors: Vec<&FieldTensor<F>> = parts.iter().map(|id| self.value(*id)).collect();
        let v = ops::concat_channels(&tensors)?;
        self.record(v, Op::ConcatChannels(parts.to_vec()), parts, "concat_channels")
    }

    pub fn nearest_upsample2x(&mut self, input: NodeId) -> Result<NodeId> {
        let v = ops::nearest_upsample2x(self.value(input))?;
        self.record(v, Op::Upsample2x(input), &[input], "nearest_upsample2x")
    }

    pub fn average_pool2x(&mut self, input: NodeId) -> Result<NodeId> {
        let v = ops::average_pool2x(self.value(input))?;
        self.record(v, Op::AvgPool2x(input), &[input], "average_pool2x")
    }

    pub fn crop_hw(&mut self, input: NodeId, y0: usize, x0: usize, h: usize, w: usize) -> Result<NodeId> {
        let v = ops::crop_hw(self.value(input), y0, x0, h, w)?;
        self.record(v, Op::Crop { input, y0, x0 }, &[input], "crop_hw")
    }

    pub fn pad_hw(&mut self, input: NodeId, y0: usize, x0: usize, out_h: usize, out_w: usize) -> Result<NodeId> {
        let v = ops::pad_hw(self.value(input), y0, x0, out_h, out_w)?;
        self.record(v, Op::Pad { input, y0, x0 }, &[input], "pad_hw")
    }

    /// Reverse pass from a scalar loss. Returns the gradient store; only
    /// nodes with `requires_grad` receive entries.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<F>> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<FieldTensor<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(FieldTensor::full(self.value(loss).shape().to_vec(), F::one()));
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            if matches!(self.nodes[id].op, Op::Leaf) {
                continue;
            }
            // Intermediate gradients are consumed as we go; leaves keep theirs.
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop_node(id, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<FieldTensor<F>>], id: NodeId, delta: FieldTensor<F>) -> Result<()> {
        if !self.nodes[id.0].requires_grad {
            return Ok(());
        }
        match &mut grads[id.0] {
            Some(existing) => {
                for (e, &d) in existing.data_mut().iter_mut().zip(delta.data()) {
                    *e += d;
                }
            }
            slot => *slot = Some(delta),
        }
        Ok(())
    }

    fn backprop_node(
        &self,
        id: usize,
        g: &FieldTensor<F>,
        grads: &mut [Option<FieldTensor<F>>],
    ) -> Result<()> {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone())?;
                self.accumulate(grads, *b, g.clone())?;
            }
            Op::Multiply(a, b) => {
                let ga = ops::multiply(g, self.value(*b))?;
                let gb = ops::multiply(g, self.value(*a))?;
                self.accumulate(grads, *a, ga)?;
                self.accumulate(grads, *b, gb)?;
            }
            Op::AbsSub(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                let mut ga = FieldTensor::zeros(g.shape().to_vec());
                for ((o, (&x, &y)), &gv) in
                    ga.data_mut().iter_mut().zip(av.iter().zip(bv)).zip(g.data())
                {
                    *o = gv * ops::tie_sign(x, y);
                }
                let gb = ops::affine(&ga, -F::one(), F::zero());
                self.accumulate(grads, *a, ga)?;
                self.accumulate(grads, *b, gb)?;
            }
            Op::Affine { input, mul } => {
                self.accumulate(grads, *input, ops::affine(g, *mul, F::zero()))?;
            }
            Op::Silu(input) => {
                let gi = ops::silu_backward(g, self.value(*input));
                self.accumulate(grads, *input, gi)?;
            }
            Op::Conv2d { input, kernel, bias, padding, stride } => {
                let (gi, gk, gb) =
                    ops::conv2d_backward(g, self.value(*input), self.value(*kernel), *padding, *stride)?;
                self.accumulate(grads, *input, gi)?;
                self.accumulate(grads, *kernel, gk)?;
                self.accumulate(grads, *bias, gb)?;
            }
            Op::Linear { input, weight, bias } => {
                let (gi, gw, gb) = ops::linear_backward(g, self.value(*input), self.value(*weight))?;
                self.accumulate(grads, *input, gi)?;
                self.accumulate(grads, *weight, gw)?;
                self.accumulate(grads, *bias, gb)?;
            }
            Op::CondLayerNorm { input, scale, shift, normalized, inv_std } => {
                let (gi, gs, gt) =
                    ops::cond_layer_norm_backward(g, self.value(*scale), normalized, inv_std)?;
                self.accumulate(grads, *input, gi)?;
                self.accumulate(grads, *scale, gs)?;
                self.accumulate(grads, *shift, gt)?;
            }
            Op::SumAxes { input, axes } => {
                let gi = ops::reduction_backward(g, self.value(*input).shape(), axes, F::one())?;
                self.accumulate(grads, *input, gi)?;
            }
            Op::MeanAxes { input, axes, count } => {
                let factor = F::one() / F::from_usize(*count);
                let gi = ops::reduction_backward(g, self.value(*input).shape(), axes, factor)?;
                self.accumulate(grads, *input, gi)?;
            }
            Op::ConcatChannels(parts) => {
                let (_, h, w) = g.dims3()?;
                let mut offset = 0;
                for part in parts {
                    let (pc, _, _) = self.value(*part).dims3()?;
                    let slab = FieldTensor::new(
                        vec![pc, h, w],
                        g.data()[offset..offset + pc * h * w].to_vec(),
                    )?;
                    offset += pc * h * w;
                    self.accumulate(grads, *part, slab)?;
                }
            }
            Op::Upsample2x(input) => {
                let gi = ops::nearest_upsample2x_backward(g)?;
                self.accumulate(grads, *input, gi)?;
            }
            Op::AvgPool2x(input) => {
                let gi = ops::average_pool2x_backward(g)?;
                self.accumulate(grads, *input, gi)?;
            }
            Op::Crop { input, y0, x0 } => {
                let (_, ih, iw) = self.value(*input).dims3()?;
                let gi = ops::pad_hw(g, *y0, *x0, ih, iw)?;
                self.accumulate(grads, *input, gi)?;
            }
            Op::Pad { input, y0, x0 } => {
                let (_, h, w) = self.value(*input).dims3()?;
                let gi = ops::crop_hw(g, *y0, *x0, h, w)?;
                self.accumulate(grads, *input, gi)?;
            }
        }
        Ok(())
    }
}
