//! Dense N-dimensional tensors with reverse-mode automatic differentiation.
//!
//! Every operation records itself on an implicit tape (the graph of
//! [`Tensor`] nodes). Calling [`Tensor::backward`] on a scalar loss walks
//! that graph once in reverse topological order and accumulates gradients
//! into every reachable tensor that requires them. Parameters are leaf
//! tensors created with [`Tensor::param`]; their gradients accumulate
//! across calls until [`Tensor::zero_grad`] resets them.

mod conv;
mod ops;

pub use conv::same_padding;
pub use ops::concat;

use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use ops::Op;

/// Element type of all tensors: f64 by default, f32 behind the `f32` feature.
#[cfg(not(feature = "f32"))]
pub type Scalar = f64;
#[cfg(feature = "f32")]
pub type Scalar = f32;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Four-lane dot product; the unrolled accumulators let the compiler keep
/// the loop out of a single serial dependency chain.
pub(crate) fn dot(a: &[Scalar], b: &[Scalar]) -> Scalar {
    debug_assert_eq!(a.len(), b.len());
    let split = a.len() - a.len() % 4;
    let mut acc = [0.0; 4];
    for (ca, cb) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a[split..].iter().zip(&b[split..]) {
        total += x * y;
    }
    total
}

pub(crate) struct Node {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<Scalar>>,
    grad: RefCell<Option<Vec<Scalar>>>,
    requires_grad: bool,
    op: Op,
}

/// Shared handle to a node of the computation graph.
#[derive(Clone)]
pub struct Tensor {
    node: Rc<Node>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.node.id)
            .field("shape", &self.node.shape)
            .field("requires_grad", &self.node.requires_grad)
            .finish()
    }
}

fn check_shape(data_len: usize, shape: &[usize]) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::InvalidShape {
            op: "tensor",
            shape: shape.to_vec(),
            reason: "extents must be positive".into(),
        });
    }
    let numel: usize = shape.iter().product();
    if numel != data_len {
        return Err(Error::InvalidShape {
            op: "tensor",
            shape: shape.to_vec(),
            reason: format!("shape product {numel} != data length {data_len}"),
        });
    }
    Ok(())
}

impl Tensor {
    pub(crate) fn make(data: Vec<Scalar>, shape: Vec<usize>, requires_grad: bool, op: Op) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                op,
            }),
        }
    }

    /// Constant leaf (no gradient tracking).
    pub fn from_vec(data: Vec<Scalar>, shape: &[usize]) -> Result<Self> {
        check_shape(data.len(), shape)?;
        Ok(Self::make(data, shape.to_vec(), false, Op::Leaf))
    }

    /// Learnable leaf: participates in gradient accumulation.
    pub fn param(data: Vec<Scalar>, shape: &[usize]) -> Result<Self> {
        check_shape(data.len(), shape)?;
        Ok(Self::make(data, shape.to_vec(), true, Op::Leaf))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self::make(vec![0.0; numel], shape.to_vec(), false, Op::Leaf)
    }

    pub fn ones(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self::make(vec![1.0; numel], shape.to_vec(), false, Op::Leaf)
    }

    pub fn scalar(value: Scalar) -> Self {
        Self::make(vec![value], vec![1], false, Op::Leaf)
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn numel(&self) -> usize {
        self.node.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub(crate) fn id(&self) -> u64 {
        self.node.id
    }

    pub fn data(&self) -> Ref<'_, [Scalar]> {
        Ref::map(self.node.data.borrow(), |v| v.as_slice())
    }

    pub fn to_vec(&self) -> Vec<Scalar> {
        self.node.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<Scalar> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss {
                shape: self.shape().to_vec(),
            });
        }
        Ok(self.node.data.borrow()[0])
    }

    /// Current gradient, if backward has populated one.
    pub fn grad(&self) -> Option<Vec<Scalar>> {
        self.node.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    /// Overwrite the stored values (used by optimizers and checkpoint load).
    pub fn set_data(&self, values: &[Scalar]) -> Result<()> {
        if values.len() != self.numel() {
            return Err(Error::InvalidShape {
                op: "set_data",
                shape: self.shape().to_vec(),
                reason: format!("got {} values", values.len()),
            });
        }
        self.node.data.borrow_mut().copy_from_slice(values);
        Ok(())
    }

    /// In-place update `data[i] += delta[i]` (optimizer step).
    pub fn apply_delta(&self, delta: &[Scalar]) -> Result<()> {
        if delta.len() != self.numel() {
            return Err(Error::InvalidShape {
                op: "apply_delta",
                shape: self.shape().to_vec(),
                reason: format!("got {} values", delta.len()),
            });
        }
        let mut data = self.node.data.borrow_mut();
        for (d, &g) in data.iter_mut().zip(delta) {
            *d += g;
        }
        Ok(())
    }

    /// Copy of this tensor cut off from the graph (no gradient history).
    pub fn detach(&self) -> Tensor {
        Self::make(self.to_vec(), self.shape().to_vec(), false, Op::Leaf)
    }

    pub(crate) fn accumulate_grad(&self, contribution: &[Scalar]) {
        let mut slot = self.node.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (a, &b) in g.iter_mut().zip(contribution) {
                    *a += b;
                }
            }
            None => *slot = Some(contribution.to_vec()),
        }
    }

    /// Reverse-mode differentiation from a scalar loss. After this returns,
    /// every tensor that requires a gradient and contributed to the loss
    /// holds its partial derivative.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss {
                shape: self.shape().to_vec(),
            });
        }
        if !self.node.requires_grad {
            return Err(Error::DetachedBackward);
        }
        let tape = ComputationTape::trace(self);
        self.accumulate_grad(&[1.0]);
        tape.replay_backward();
        Ok(())
    }
}

/// Topologically ordered record of the operations reaching a root tensor.
///
/// Replaying it in reverse visits each node exactly once, which is what
/// [`Tensor::backward`] relies on.
pub struct ComputationTape {
    nodes: Vec<Tensor>,
}

impl ComputationTape {
    /// Depth-first trace of every gradient-requiring ancestor of `root`,
    /// recorded in topological order (inputs before outputs).
    pub fn trace(root: &Tensor) -> Self {
        let mut nodes = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
        while let Some((t, children_done)) = stack.pop() {
            if children_done {
                nodes.push(t);
                continue;
            }
            if !t.node.requires_grad || !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            t.node.op.for_each_input(&mut |input| {
                if input.node.requires_grad && !visited.contains(&input.id()) {
                    stack.push((input.clone(), false));
                }
            });
        }
        ComputationTape { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node ids in topological order (diagnostics and tests).
    pub fn node_ids(&self) -> Vec<u64> {
        self.nodes.iter().map(|t| t.id()).collect()
    }

    fn replay_backward(&self) {
        for t in self.nodes.iter().rev() {
            let grad_out = match t.node.grad.borrow().as_ref() {
                Some(g) => g.clone(),
                None => continue,
            };
            t.node.op.backward(&grad_out, t);
        }
    }
}
