//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! Every operation allocates a fresh [`Node`] holding its result value plus
//! one backward edge per differentiable operand. A node's backward edge is a
//! closure that maps the upstream gradient into an accumulation buffer on the
//! parent, so gradients for shared parameters (used by many pairs in a batch)
//! sum naturally. Calling [`Node::backward`] on a scalar root runs one reverse
//! sweep in topological order and then drops the edges, so each graph lives
//! for exactly one forward/backward cycle.
//!
//! Misuse (shape mismatches, log of a non-positive value, backward from a
//! non-scalar) is a programming error and panics with a message naming the
//! offending shapes or values. Runtime numeric failures (a loss turning NaN)
//! are the caller's concern and are checked where losses are consumed.

use std::cell::RefCell;
use std::collections::HashSet;
use std::rc::Rc;

use super::tensor::Tensor;

/// Accumulates the contribution of an upstream gradient into a parent's
/// gradient buffer.
type GradFn = Box<dyn Fn(&Tensor, &mut Tensor)>;

struct Inner {
    value: Tensor,
    grad: Option<Tensor>,
    parents: Vec<(Node, GradFn)>,
    requires_grad: bool,
}

/// A value in an autodiff graph. Cloning is cheap and aliases the same node.
#[derive(Clone)]
pub struct Node(Rc<RefCell<Inner>>);

impl std::fmt::Debug for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.0.borrow();
        f.debug_struct("Node")
            .field("value", &inner.value)
            .field("requires_grad", &inner.requires_grad)
            .finish_non_exhaustive()
    }
}

impl Node {
    /// A differentiable leaf (a parameter). Gradient is available after
    /// `backward`.
    pub fn leaf(value: Tensor) -> Node {
        Node(Rc::new(RefCell::new(Inner {
            value,
            grad: None,
            parents: Vec::new(),
            requires_grad: true,
        })))
    }

    /// A non-differentiable input. No gradient is ever computed for it.
    pub fn constant(value: Tensor) -> Node {
        Node(Rc::new(RefCell::new(Inner {
            value,
            grad: None,
            parents: Vec::new(),
            requires_grad: false,
        })))
    }

    fn from_op(value: Tensor, edges: Vec<(Node, GradFn)>) -> Node {
        let requires_grad = edges.iter().any(|(p, _)| p.requires_grad());
        let parents = if requires_grad {
            edges
                .into_iter()
                .filter(|(p, _)| p.requires_grad())
                .collect()
        } else {
            Vec::new()
        };
        Node(Rc::new(RefCell::new(Inner {
            value,
            grad: None,
            parents,
            requires_grad,
        })))
    }

    /// A copy of this node's value.
    pub fn value(&self) -> Tensor {
        self.0.borrow().value.clone()
    }

    /// The shape of this node's value.
    pub fn shape(&self) -> Vec<usize> {
        self.0.borrow().value.shape().to_vec()
    }

    /// The value of a single-element node.
    pub fn item(&self) -> f64 {
        self.0.borrow().value.item()
    }

    /// The accumulated gradient, if `backward` has reached this node.
    pub fn grad(&self) -> Option<Tensor> {
        self.0.borrow().grad.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.borrow().requires_grad
    }

    // ----- element-wise binary ops (equal shapes, no broadcasting) -----

    pub fn add(&self, other: &Node) -> Node {
        let value = self.value().zip(&other.value(), |a, b| a + b);
        Node::from_op(
            value,
            vec![
                (self.clone(), Box::new(|g, acc| acc.add_assign(g))),
                (other.clone(), Box::new(|g, acc| acc.add_assign(g))),
            ],
        )
    }

    pub fn sub(&self, other: &Node) -> Node {
        let value = self.value().zip(&other.value(), |a, b| a - b);
        Node::from_op(
            value,
            vec![
                (self.clone(), Box::new(|g, acc| acc.add_assign(g))),
                (
                    other.clone(),
                    Box::new(|g: &Tensor, acc: &mut Tensor| {
                        for (d, gv) in acc.data_mut().iter_mut().zip(g.data()) {
                            *d -= gv;
                        }
                    }),
                ),
            ],
        )
    }

    pub fn mul(&self, other: &Node) -> Node {
        let a_val = self.value();
        let b_val = other.value();
        let value = a_val.zip(&b_val, |a, b| a * b);
        Node::from_op(
            value,
            vec![
                (
                    self.clone(),
                    Box::new(move |g: &Tensor, acc: &mut Tensor| {
                        for ((d, gv), bv) in
                            acc.data_mut().iter_mut().zip(g.data()).zip(b_val.data())
                        {
                            *d += gv * bv;
                        }
                    }),
                ),
                (
                    other.clone(),
                    Box::new(move |g: &Tensor, acc: &mut Tensor| {
                        for ((d, gv), av) in
                            acc.data_mut().iter_mut().zip(g.data()).zip(a_val.data())
                        {
                            *d += gv * av;
                        }
                    }),
                ),
            ],
        )
    }

    // ----- element-wise unary ops -----

    pub fn neg(&self) -> Node {
        let value = self.value().map(|v| -v);
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(|g: &Tensor, acc: &mut Tensor| {
                    for (d, gv) in acc.data_mut().iter_mut().zip(g.data()) {
                        *d -= gv;
                    }
                }),
            )],
        )
    }

    pub fn relu(&self) -> Node {
        let x = self.value();
        let value = x.map(|v| v.max(0.0));
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    for ((d, gv), xv) in acc.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        if *xv > 0.0 {
                            *d += gv;
                        }
                    }
                }),
            )],
        )
    }

    /// Natural logarithm. Panics if any element is not strictly positive;
    /// callers that cannot rule that out must clamp first.
    pub fn log(&self) -> Node {
        let x = self.value();
        if let Some((i, v)) = x
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| **v <= 0.0 || v.is_nan())
        {
            panic!("log domain error: element {i} is {v}");
        }
        let value = x.map(f64::ln);
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    for ((d, gv), xv) in acc.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        *d += gv / xv;
                    }
                }),
            )],
        )
    }

    pub fn exp(&self) -> Node {
        let value = self.value().map(f64::exp);
        let y = value.clone();
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    for ((d, gv), yv) in acc.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *d += gv * yv;
                    }
                }),
            )],
        )
    }

    /// Absolute value; the subgradient at zero is zero.
    pub fn abs(&self) -> Node {
        let x = self.value();
        let value = x.map(f64::abs);
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    for ((d, gv), xv) in acc.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        let sign = if *xv > 0.0 {
                            1.0
                        } else if *xv < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        *d += gv * sign;
                    }
                }),
            )],
        )
    }

    /// Clamp into `[lo, hi]`. The gradient passes through only where the
    /// input lies strictly inside the interval.
    pub fn clamp(&self, lo: f64, hi: f64) -> Node {
        assert!(lo <= hi, "clamp bounds inverted: lo {lo} > hi {hi}");
        let x = self.value();
        let value = x.map(|v| v.clamp(lo, hi));
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    for ((d, gv), xv) in acc.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
                        if *xv > lo && *xv < hi {
                            *d += gv;
                        }
                    }
                }),
            )],
        )
    }

    // ----- scalar broadcast ops (the only broadcasting in the crate) -----

    pub fn add_scalar(&self, c: f64) -> Node {
        let value = self.value().map(|v| v + c);
        Node::from_op(
            value,
            vec![(self.clone(), Box::new(|g, acc| acc.add_assign(g)))],
        )
    }

    pub fn mul_scalar(&self, c: f64) -> Node {
        let value = self.value().map(|v| v * c);
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    for (d, gv) in acc.data_mut().iter_mut().zip(g.data()) {
                        *d += gv * c;
                    }
                }),
            )],
        )
    }

    // ----- structural ops -----

    /// 2-D matrix product.
    pub fn matmul(&self, other: &Node) -> Node {
        let a = self.value();
        let b = other.value();
        let value = a.matmul(&b);
        let b_t = b.transpose();
        let a_t = a.transpose();
        Node::from_op(
            value,
            vec![
                (
                    self.clone(),
                    Box::new(move |g: &Tensor, acc: &mut Tensor| {
                        acc.add_assign(&g.matmul(&b_t));
                    }),
                ),
                (
                    other.clone(),
                    Box::new(move |g: &Tensor, acc: &mut Tensor| {
                        acc.add_assign(&a_t.matmul(g));
                    }),
                ),
            ],
        )
    }

    /// Numerically stable softmax over a non-empty 1-D input.
    pub fn softmax(&self) -> Node {
        let x = self.value();
        assert!(
            x.shape().len() == 1 && x.numel() > 0,
            "softmax requires a non-empty 1-D input, got shape {:?}",
            x.shape()
        );
        let max = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = x.data().iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let value = Tensor::from_vec(exps.iter().map(|e| e / total).collect());
        let y = value.clone();
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    let dot: f64 = g.data().iter().zip(y.data()).map(|(gv, yv)| gv * yv).sum();
                    for ((d, gv), yv) in acc.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *d += yv * (gv - dot);
                    }
                }),
            )],
        )
    }

    /// Sum of all elements, as a `[1]` scalar.
    pub fn sum(&self) -> Node {
        let total: f64 = self.value().data().iter().sum();
        Node::from_op(
            Tensor::scalar(total),
            vec![(
                self.clone(),
                Box::new(|g: &Tensor, acc: &mut Tensor| {
                    let gv = g.data()[0];
                    for d in acc.data_mut() {
                        *d += gv;
                    }
                }),
            )],
        )
    }

    /// Mean of all elements, as a `[1]` scalar.
    pub fn mean(&self) -> Node {
        let n = self.0.borrow().value.numel();
        assert!(n > 0, "mean of an empty tensor");
        self.sum().mul_scalar(1.0 / n as f64)
    }

    /// View the same data under a new shape with equal element count.
    pub fn reshape(&self, shape: &[usize]) -> Node {
        let x = self.value();
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            x.numel(),
            "cannot reshape {:?} into {:?}",
            x.shape(),
            shape
        );
        let value = Tensor::new(shape.to_vec(), x.data().to_vec());
        Node::from_op(
            value,
            vec![(
                self.clone(),
                Box::new(|g: &Tensor, acc: &mut Tensor| {
                    for (d, gv) in acc.data_mut().iter_mut().zip(g.data()) {
                        *d += gv;
                    }
                }),
            )],
        )
    }

    /// Concatenate 1-D nodes into one 1-D node.
    pub fn concat(parts: &[Node]) -> Node {
        assert!(!parts.is_empty(), "concat of an empty node list");
        let mut data = Vec::new();
        let mut edges: Vec<(Node, GradFn)> = Vec::new();
        for part in parts {
            let v = part.value();
            assert_eq!(
                v.shape().len(),
                1,
                "concat requires 1-D parts, got shape {:?}",
                v.shape()
            );
            let offset = data.len();
            let len = v.numel();
            data.extend_from_slice(v.data());
            edges.push((
                part.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    for (d, gv) in acc.data_mut().iter_mut().zip(&g.data()[offset..offset + len]) {
                        *d += gv;
                    }
                }),
            ));
        }
        Node::from_op(Tensor::from_vec(data), edges)
    }

    /// Stack single-element nodes into one 1-D node.
    pub fn stack(parts: &[Node]) -> Node {
        assert!(!parts.is_empty(), "stack of an empty node list");
        let mut data = Vec::with_capacity(parts.len());
        let mut edges: Vec<(Node, GradFn)> = Vec::new();
        for (i, part) in parts.iter().enumerate() {
            let v = part.value();
            assert_eq!(
                v.numel(),
                1,
                "stack requires single-element parts, part {i} has shape {:?}",
                v.shape()
            );
            data.push(v.data()[0]);
            edges.push((
                part.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    acc.data_mut()[0] += g.data()[i];
                }),
            ));
        }
        Node::from_op(Tensor::from_vec(data), edges)
    }

    /// Gather elements of a 1-D node at `indices` (duplicates allowed). The
    /// backward pass scatter-adds.
    pub fn select(&self, indices: &[usize]) -> Node {
        let x = self.value();
        assert_eq!(
            x.shape().len(),
            1,
            "select requires a 1-D input, got shape {:?}",
            x.shape()
        );
        let n = x.numel();
        for &idx in indices {
            assert!(idx < n, "select index {idx} out of range for length {n}");
        }
        let data: Vec<f64> = indices.iter().map(|&i| x.data()[i]).collect();
        let indices = indices.to_vec();
        Node::from_op(
            Tensor::from_vec(data),
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    for (j, &idx) in indices.iter().enumerate() {
                        acc.data_mut()[idx] += g.data()[j];
                    }
                }),
            )],
        )
    }

    /// Mean of the rows of a 2-D `[v, d]` node selected by `ids`, as a `[d]`
    /// vector. An empty `ids` yields a zero vector that carries no gradient.
    pub fn rows_mean(&self, ids: &[usize]) -> Node {
        let x = self.value();
        assert_eq!(
            x.shape().len(),
            2,
            "rows_mean requires a 2-D input, got shape {:?}",
            x.shape()
        );
        let (v, d) = (x.shape()[0], x.shape()[1]);
        for &id in ids {
            assert!(id < v, "rows_mean row {id} out of range for {v} rows");
        }
        if ids.is_empty() {
            return Node::constant(Tensor::zeros(&[d]));
        }
        let inv = 1.0 / ids.len() as f64;
        let mut out = vec![0.0; d];
        for &id in ids {
            for (o, xv) in out.iter_mut().zip(&x.data()[id * d..(id + 1) * d]) {
                *o += xv * inv;
            }
        }
        let ids = ids.to_vec();
        Node::from_op(
            Tensor::from_vec(out),
            vec![(
                self.clone(),
                Box::new(move |g: &Tensor, acc: &mut Tensor| {
                    let d = g.numel();
                    for &id in &ids {
                        for (a, gv) in acc.data_mut()[id * d..(id + 1) * d]
                            .iter_mut()
                            .zip(g.data())
                        {
                            *a += gv * inv;
                        }
                    }
                }),
            )],
        )
    }

    // ----- backward -----

    /// Reverse sweep from a scalar root. Fills `grad` on every node that
    /// requires a gradient and then drops the backward edges, consuming the
    /// graph: a node can only be backpropagated through once.
    pub fn backward(&self) {
        {
            let inner = self.0.borrow();
            assert_eq!(
                inner.value.numel(),
                1,
                "backward root must be a scalar, got shape {:?}",
                inner.value.shape()
            );
            assert!(
                inner.requires_grad,
                "backward on a graph with no differentiable leaves"
            );
        }
        {
            let mut inner = self.0.borrow_mut();
            let shape = inner.value.shape().to_vec();
            inner.grad = Some(Tensor::new(shape, vec![1.0]));
        }
        let topo = topo_order(self);
        for node in topo.iter().rev() {
            let (g, edges) = {
                let mut inner = node.0.borrow_mut();
                let g = inner
                    .grad
                    .clone()
                    .expect("node in topological order has no gradient");
                (g, std::mem::take(&mut inner.parents))
            };
            for (parent, grad_fn) in &edges {
                let mut pin = parent.0.borrow_mut();
                if pin.grad.is_none() {
                    pin.grad = Some(Tensor::zeros(pin.value.shape()));
                }
                grad_fn(&g, pin.grad.as_mut().unwrap());
            }
        }
    }
}

/// Depth-first post-order over parent edges; each node appears after all of
/// its parents, so the reversed order visits consumers before producers.
fn topo_order(root: &Node) -> Vec<Node> {
    let mut topo = Vec::new();
    let mut visited: HashSet<usize> = HashSet::new();
    let mut stack: Vec<(Node, bool)> = vec![(root.clone(), false)];
    while let Some((node, expanded)) = stack.pop() {
        let key = Rc::as_ptr(&node.0) as usize;
        if expanded {
            topo.push(node);
            continue;
        }
        if !visited.insert(key) {
            continue;
        }
        stack.push((node.clone(), true));
        for (parent, _) in node.0.borrow().parents.iter() {
            if !visited.contains(&(Rc::as_ptr(&parent.0) as usize)) {
                stack.push((parent.clone(), false));
            }
        }
    }
    topo
}
