//! Reverse-mode tape over coarse-grained operations.
//!
//! Nodes hold scalars or whole images; ops record snapshots of whatever they
//! need and implement `backward` by hand. Recording is append-only, so the
//! reverse sweep visits ops in exact reverse order — with the deterministic
//! flag set, gradient accumulation order is fixed and results are
//! bit-reproducible.

use super::{DiffError, GroupKind, ParamGroup};
use crate::scene::{ImageGray, ImageRgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// Forward value of a node.
#[derive(Debug, Clone)]
pub enum Value {
    Scalar(f64),
    Rgb(ImageRgb),
    Gray(ImageGray),
}

impl Value {
    pub fn as_scalar(&self) -> f64 {
        match self {
            Value::Scalar(v) => *v,
            _ => panic!("node is not a scalar"),
        }
    }

    pub fn as_rgb(&self) -> &ImageRgb {
        match self {
            Value::Rgb(img) => img,
            _ => panic!("node is not an RGB image"),
        }
    }

    pub fn as_gray(&self) -> &ImageGray {
        match self {
            Value::Gray(img) => img,
            _ => panic!("node is not a gray image"),
        }
    }

    fn grad_len(&self) -> usize {
        match self {
            Value::Scalar(_) => 1,
            Value::Rgb(img) => img.data.len(),
            Value::Gray(img) => img.data.len(),
        }
    }
}

/// A recorded operation with a hand-derived adjoint.
pub trait GraphOp {
    fn backward(&self, values: &[Value], store: &mut GradStore);
}

/// Gradient buffers for nodes and parameter groups during a reverse sweep.
pub struct GradStore {
    node_grads: Vec<Option<Vec<f64>>>,
    node_lens: Vec<usize>,
    group_grads: [Option<Vec<f64>>; 4],
    pub deterministic: bool,
}

impl GradStore {
    pub fn scalar_grad(&self, node: NodeId) -> f64 {
        match &self.node_grads[node.0] {
            Some(g) => g[0],
            None => 0.0,
        }
    }

    pub fn add_scalar_grad(&mut self, node: NodeId, g: f64) {
        self.buffer_grad_mut(node)[0] += g;
    }

    /// Gradient buffer of a node, allocated lazily as zeros.
    pub fn buffer_grad_mut(&mut self, node: NodeId) -> &mut [f64] {
        let len = self.node_lens[node.0];
        self.node_grads[node.0].get_or_insert_with(|| vec![0.0; len])
    }

    /// Gradient of a node if anything has been accumulated into it.
    pub fn buffer_grad(&self, node: NodeId) -> Option<&[f64]> {
        self.node_grads[node.0].as_deref()
    }

    pub fn group_grad_mut(&mut self, kind: GroupKind, len: usize) -> &mut [f64] {
        self.group_grads[kind.index()].get_or_insert_with(|| vec![0.0; len])
    }

    pub fn group_grad(&self, kind: GroupKind) -> Option<&[f64]> {
        self.group_grads[kind.index()].as_deref()
    }
}

pub struct Graph {
    values: Vec<Value>,
    ops: Vec<Box<dyn GraphOp>>,
    registered: [Option<usize>; 4], // group lengths by kind
    deterministic: bool,
}

impl Graph {
    pub fn new(deterministic: bool) -> Self {
        Graph {
            values: Vec::new(),
            ops: Vec::new(),
            registered: [None; 4],
            deterministic,
        }
    }

    pub fn deterministic(&self) -> bool {
        self.deterministic
    }

    /// Declare a parameter group as live in this graph. Ops that differentiate
    /// with respect to a group require prior registration.
    pub fn register_group(&mut self, group: &ParamGroup) {
        self.registered[group.kind.index()] = Some(group.values.len());
    }

    pub fn is_registered(&self, kind: GroupKind) -> bool {
        self.registered[kind.index()].is_some()
    }

    /// Index the next pushed value will receive (ops store their output ids).
    pub fn next_node_index(&self) -> usize {
        self.values.len()
    }

    /// Append an op together with its output values; returns the new node ids.
    pub fn push_op(&mut self, op: Box<dyn GraphOp>, outputs: Vec<Value>) -> Vec<NodeId> {
        let ids: Vec<NodeId> = outputs
            .iter()
            .enumerate()
            .map(|(k, _)| NodeId(self.values.len() + k))
            .collect();
        self.values.extend(outputs);
        self.ops.push(op);
        ids
    }

    pub fn value(&self, node: NodeId) -> &Value {
        &self.values[node.0]
    }

    pub fn scalar(&self, node: NodeId) -> f64 {
        self.values[node.0].as_scalar()
    }

    /// Weighted sum of scalar nodes plus a constant bias.
    pub fn affine(&mut self, terms: &[(f64, NodeId)], bias: f64) -> NodeId {
        let value = terms
            .iter()
            .map(|&(c, n)| c * self.scalar(n))
            .sum::<f64>()
            + bias;
        let op = AffineOp {
            terms: terms.to_vec(),
            output: NodeId(self.values.len()),
        };
        self.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.affine(&[(1.0, a), (1.0, b)], 0.0)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.affine(&[(c, a)], 0.0)
    }

    /// Mean of scalar nodes.
    pub fn mean(&mut self, nodes: &[NodeId]) -> NodeId {
        assert!(!nodes.is_empty());
        let c = 1.0 / nodes.len() as f64;
        let terms: Vec<(f64, NodeId)> = nodes.iter().map(|&n| (c, n)).collect();
        self.affine(&terms, 0.0)
    }

    /// Constant RGB image node (a leaf: no gradient flows past it, but its
    /// own gradient buffer is inspectable after `backward`).
    pub fn leaf_rgb(&mut self, img: ImageRgb) -> NodeId {
        self.push_op(Box::new(LeafOp), vec![Value::Rgb(img)])[0]
    }

    /// Constant gray image node.
    pub fn leaf_gray(&mut self, img: ImageGray) -> NodeId {
        self.push_op(Box::new(LeafOp), vec![Value::Gray(img)])[0]
    }

    /// Sum of squares of a group's parameters (a probe op used by tests and
    /// the finite-difference harness).
    pub fn record_squared_norm(&mut self, group: &ParamGroup) -> NodeId {
        self.register_group(group);
        let value = group.values.iter().map(|v| v * v).sum();
        let op = SquaredNormOp {
            kind: group.kind,
            snapshot: group.values.clone(),
            output: NodeId(self.values.len()),
        };
        self.push_op(Box::new(op), vec![Value::Scalar(value)])[0]
    }

    /// Reverse sweep from `loss`; returns gradient buffers for every
    /// registered group (zeros where untouched).
    pub fn backward(&self, loss: NodeId) -> GradStore {
        let mut store = GradStore {
            node_grads: vec![None; self.values.len()],
            node_lens: self.values.iter().map(|v| v.grad_len()).collect(),
            group_grads: [None, None, None, None],
            deterministic: self.deterministic,
        };
        for kind in GroupKind::ALL {
            if let Some(len) = self.registered[kind.index()] {
                store.group_grads[kind.index()] = Some(vec![0.0; len]);
            }
        }
        store.add_scalar_grad(loss, 1.0);
        for op in self.ops.iter().rev() {
            op.backward(&self.values, &mut store);
        }
        store
    }

    /// Gradient of `loss` with respect to each requested group.
    ///
    /// Errors if a group was never recorded against this graph; parameters
    /// that do not influence the loss receive exact zeros.
    pub fn gradients(
        &self,
        loss: NodeId,
        groups: &[&ParamGroup],
    ) -> Result<Vec<Vec<f64>>, DiffError> {
        for g in groups {
            match self.registered[g.kind.index()] {
                None => return Err(DiffError::GroupNotRecorded(g.kind)),
                Some(len) => assert_eq!(
                    len,
                    g.values.len(),
                    "group {:?} length changed since registration",
                    g.kind
                ),
            }
        }
        let store = self.backward(loss);
        Ok(groups
            .iter()
            .map(|g| {
                store
                    .group_grad(g.kind)
                    .map(|s| s.to_vec())
                    .unwrap_or_else(|| vec![0.0; g.values.len()])
            })
            .collect())
    }
}

struct LeafOp;

impl GraphOp for LeafOp {
    fn backward(&self, _values: &[Value], _store: &mut GradStore) {}
}

struct AffineOp {
    terms: Vec<(f64, NodeId)>,
    output: NodeId,
}

impl GraphOp for AffineOp {
    fn backward(&self, _values: &[Value], store: &mut GradStore) {
        let up = store.scalar_grad(self.output);
        if up == 0.0 {
            return;
        }
        for &(c, n) in &self.terms {
            store.add_scalar_grad(n, c * up);
        }
    }
}

struct SquaredNormOp {
    kind: GroupKind,
    snapshot: Vec<f64>,
    output: NodeId,
}

impl GraphOp for SquaredNormOp {
    fn backward(&self, _values: &[Value], store: &mut GradStore) {
        let up = store.scalar_grad(self.output);
        if up == 0.0 {
            return;
        }
        let grad = store.group_grad_mut(self.kind, self.snapshot.len());
        for (g, p) in grad.iter_mut().zip(&self.snapshot) {
            *g += up * 2.0 * p;
        }
    }
}
