//! Reverse-mode automatic differentiation on a tape.
//!
//! A [`Tape`] records every primitive operation as it happens: each node
//! stores its value, the ids of its parents, and whatever the backward rule
//! needs. Node order is construction order, which is a topological order by
//! construction (an operation's inputs always exist before its output).
//! [`Tape::backward`] walks the record in reverse, seeds the scalar loss
//! with gradient 1, and accumulates each node's gradient additively over
//! every path that reaches it — the chain rule, mechanized.
//!
//! Tensors and tapes are confined to one thread while a graph is being
//! built; a finished [`Tensor`] is immutable data and can be shared freely.
//!
//! ```
//! use desklearn::autograd::Tape;
//! use desklearn::tensor::Tensor;
//!
//! // z = (x + y) * w  at x=1, y=2, w=3
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::scalar(1.0));
//! let y = tape.leaf(Tensor::scalar(2.0));
//! let w = tape.leaf(Tensor::scalar(3.0));
//! let z = x.add(&y).unwrap().mul(&w).unwrap();
//! tape.backward(&z).unwrap();
//! assert_eq!(x.grad().unwrap().item().unwrap(), 3.0); // dz/dx = w
//! assert_eq!(w.grad().unwrap().item().unwrap(), 3.0); // dz/dw = x + y
//! ```

mod check;
mod ops;

pub use check::{grad_check, grad_check_params, GradCheckReport, DEFAULT_STEP};
pub use ops::Op;

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
}

pub(crate) struct TapeInner {
    pub nodes: Vec<Node>,
    pub grads: Vec<Option<Tensor>>,
    /// Leaf nodes bound to trainable parameters; gradients are written back
    /// into the parameter after `backward`.
    pub bindings: Vec<(usize, Param)>,
}

/// Reverse-mode computation record.
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                grads: Vec::new(),
                bindings: Vec::new(),
            })),
        }
    }

    pub(crate) fn push(&self, value: Tensor, op: Op) -> Var {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node { value, op });
        Var {
            tape: self.clone(),
            id: inner.nodes.len() - 1,
        }
    }

    /// Record an input tensor as a differentiable leaf.
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Record a tensor that only carries data; its gradient is computed but
    /// never consumed. Alias of [`Tape::leaf`], kept for readable call sites.
    pub fn constant(&self, value: Tensor) -> Var {
        self.leaf(value)
    }

    /// Register a parameter on the tape. If the parameter is trainable, the
    /// gradient accumulated here is written back into it by `backward`.
    pub fn param(&self, param: &Param) -> Var {
        let var = self.leaf(param.value());
        if param.is_trainable() {
            self.inner.borrow_mut().bindings.push((var.id, param.clone()));
        }
        var
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn value_of(&self, id: usize) -> Tensor {
        self.inner.borrow().nodes[id].value.clone()
    }

    pub(crate) fn shape_of(&self, id: usize) -> Vec<usize> {
        self.inner.borrow().nodes[id].value.shape().to_vec()
    }

    fn same_tape(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub(crate) fn check_same(&self, other: &Var) -> Result<()> {
        if self.same_tape(&other.tape) {
            Ok(())
        } else {
            Err(Error::invalid_argument(
                "operands were recorded on different tapes",
            ))
        }
    }

    /// Propagate gradients from a scalar loss to every reachable node,
    /// accumulating additively over multiple paths. The seed gradient at the
    /// loss is 1. Trainable parameters registered via [`Tape::param`]
    /// receive their gradients as a side effect.
    pub fn backward(&self, loss: &Var) -> Result<()> {
        self.check_same(loss)?;
        let loss_shape = self.shape_of(loss.id);
        if crate::tensor::numel_of(&loss_shape) != 1 {
            return Err(Error::NonScalarLoss(loss_shape));
        }
        let mut inner = self.inner.borrow_mut();
        let n = inner.nodes.len();
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[loss.id] = Some(Tensor::ones(&loss_shape));

        for id in (0..=loss.id).rev() {
            let Some(grad) = grads[id].take() else { continue };
            ops::backprop(&inner.nodes, id, &grad, &mut grads)?;
            grads[id] = Some(grad);
        }

        for (node_id, param) in &inner.bindings {
            if let Some(g) = &grads[*node_id] {
                param.accumulate_grad(g);
            }
        }
        inner.grads = grads;
        Ok(())
    }
}

/// Handle to one node on a [`Tape`].
#[derive(Clone)]
pub struct Var {
    pub(crate) tape: Tape,
    pub(crate) id: usize,
}

impl Var {
    pub fn value(&self) -> Tensor {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.shape_of(self.id)
    }

    /// Scalar value of a one-element var.
    pub fn item(&self) -> Result<f64> {
        self.value().item()
    }

    /// Gradient accumulated by the most recent `backward` on this tape.
    pub fn grad(&self) -> Option<Tensor> {
        self.tape.inner.borrow().grads.get(self.id).cloned().flatten()
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Re-enter the value as a fresh leaf: blocks gradient flow.
    pub fn detach(&self) -> Var {
        self.tape.leaf(self.value())
    }
}

/// A named, trainable tensor that outlives any single tape.
///
/// Layers own `Param`s; each forward pass registers them on the current tape
/// with [`Tape::param`], and `backward` writes the accumulated gradient back
/// here, where an optimizer picks it up.
#[derive(Clone)]
pub struct Param {
    inner: Rc<RefCell<ParamInner>>,
}

struct ParamInner {
    name: String,
    value: Tensor,
    grad: Option<Tensor>,
    trainable: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Self {
            inner: Rc::new(RefCell::new(ParamInner {
                name: name.into(),
                value,
                grad: None,
                trainable: true,
            })),
        }
    }

    /// A parameter excluded from gradient write-back and optimizer updates.
    pub fn frozen(name: impl Into<String>, value: Tensor) -> Self {
        let p = Self::new(name, value);
        p.set_trainable(false);
        p
    }

    pub fn name(&self) -> String {
        self.inner.borrow().name.clone()
    }

    pub fn value(&self) -> Tensor {
        self.inner.borrow().value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().value.shape().to_vec()
    }

    pub fn set_value(&self, value: Tensor) {
        self.inner.borrow_mut().value = value;
    }

    pub fn update_value(&self, f: impl FnOnce(&mut Tensor)) {
        f(&mut self.inner.borrow_mut().value);
    }

    pub fn is_trainable(&self) -> bool {
        self.inner.borrow().trainable
    }

    pub fn set_trainable(&self, trainable: bool) {
        self.inner.borrow_mut().trainable = trainable;
    }

    pub fn grad(&self) -> Option<Tensor> {
        self.inner.borrow().grad.clone()
    }

    /// Remove and return the accumulated gradient.
    pub fn take_grad(&self) -> Option<Tensor> {
        self.inner.borrow_mut().grad.take()
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &Tensor) {
        let mut inner = self.inner.borrow_mut();
        match &mut inner.grad {
            Some(existing) => {
                for (e, add) in existing.data_mut().iter_mut().zip(g.data()) {
                    *e += add;
                }
            }
            None => inner.grad = Some(g.clone()),
        }
    }
}
