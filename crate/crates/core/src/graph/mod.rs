//! Directed acyclic network graphs whose arcs carry basis elements.

mod builder;
pub mod file;
pub mod modules;
pub mod ops;
pub mod random;

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use builder::{DagBuilder, DimensionFault, ValidationReport};

use crate::basis::{uniform_bound, Activation, BasisElement};
use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArcId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ArcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How a node combines the values on its incoming arcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Input,
    /// Single incoming arc, value passed on.
    Relay,
    /// Single incoming arc, value fanned out to several arcs.
    Duplicate,
    /// Stacks incoming values in concat order.
    Concat,
    /// Sums incoming values of equal dimension.
    Add,
    Output,
}

impl NodeRole {
    pub fn name(self) -> &'static str {
        match self {
            NodeRole::Input => "input",
            NodeRole::Relay => "relay",
            NodeRole::Duplicate => "duplicate",
            NodeRole::Concat => "concat",
            NodeRole::Add => "add",
            NodeRole::Output => "output",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub role: NodeRole,
    /// Order of incoming arcs for a concatenation; arc-id order when absent.
    pub concat_order: Option<Vec<ArcId>>,
}

impl Node {
    pub fn new(role: NodeRole) -> Self {
        Node {
            role,
            concat_order: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arc<T> {
    pub src: NodeId,
    pub dst: NodeId,
    pub elem: BasisElement<T>,
    pub in_dim: usize,
    pub out_dim: usize,
}

/// A validated network graph. Node 0 is the input; there is one output node.
#[derive(Clone, Debug, PartialEq)]
pub struct Dag<T> {
    input_dim: usize,
    nodes: Vec<Node>,
    arcs: Vec<Arc<T>>,
    output: NodeId,
    dims: Vec<usize>,
    incoming: Vec<Vec<ArcId>>,
    outgoing: Vec<Vec<ArcId>>,
    topo: Vec<NodeId>,
    topo_pos: Vec<usize>,
    levels: Vec<usize>,
    arc_order: Vec<ArcId>,
}

/// Value at every node for one input.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace<T> {
    pub values: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn value(&self, node: NodeId) -> &[T] {
        &self.values[node.0]
    }
}

#[derive(Debug, Default)]
pub(crate) struct Workspace<T> {
    pre: Vec<T>,
    out: Vec<T>,
}

impl<T: Scalar> Dag<T> {
    pub(crate) fn assemble(input_dim: usize, nodes: Vec<Node>, arcs: Vec<Arc<T>>, output: NodeId) -> Self {
        let n = nodes.len();
        let mut incoming: Vec<Vec<ArcId>> = vec![Vec::new(); n];
        let mut outgoing: Vec<Vec<ArcId>> = vec![Vec::new(); n];
        for (i, a) in arcs.iter().enumerate() {
            incoming[a.dst.0].push(ArcId(i));
            outgoing[a.src.0].push(ArcId(i));
        }
        for (v, node) in nodes.iter().enumerate() {
            if let (NodeRole::Concat, Some(order)) = (node.role, &node.concat_order) {
                incoming[v] = order.clone();
            }
        }
        let topo = builder::topological_order(n, &arcs).expect("validated graph is acyclic");
        let mut topo_pos = vec![0; n];
        for (p, v) in topo.iter().enumerate() {
            topo_pos[v.0] = p;
        }
        let mut levels = vec![0usize; n];
        let mut dims = vec![0usize; n];
        for &v in &topo {
            let ins = &incoming[v.0];
            levels[v.0] = ins
                .iter()
                .map(|a| levels[arcs[a.0].src.0] + 1)
                .max()
                .unwrap_or(0);
            dims[v.0] = match nodes[v.0].role {
                NodeRole::Input => input_dim,
                NodeRole::Concat => ins.iter().map(|a| arcs[a.0].out_dim).sum(),
                _ => arcs[ins[0].0].out_dim,
            };
        }
        let mut arc_order: Vec<ArcId> = (0..arcs.len()).map(ArcId).collect();
        arc_order.sort_by_key(|a| (topo_pos[arcs[a.0].dst.0], a.0));
        Dag {
            input_dim,
            nodes,
            arcs,
            output,
            dims,
            incoming,
            outgoing,
            topo,
            topo_pos,
            levels,
            arc_order,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn input(&self) -> NodeId {
        NodeId(0)
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.output.0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc<T>] {
        &self.arcs
    }

    pub fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes.get(id.0).ok_or(Error::UnknownNode(id))
    }

    pub fn arc(&self, id: ArcId) -> Result<&Arc<T>> {
        self.arcs.get(id.0).ok_or(Error::UnknownArc(id))
    }

    pub fn dim(&self, id: NodeId) -> usize {
        self.dims[id.0]
    }

    /// Incoming arcs in evaluation order (concat order for concatenations).
    pub fn incoming(&self, id: NodeId) -> &[ArcId] {
        &self.incoming[id.0]
    }

    pub fn outgoing(&self, id: NodeId) -> &[ArcId] {
        &self.outgoing[id.0]
    }

    /// Lexicographically smallest topological order.
    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo
    }

    pub fn topo_position(&self, id: NodeId) -> usize {
        self.topo_pos[id.0]
    }

    /// Arcs sorted by the topological position of their head, then by id.
    /// Region codes concatenate arc symbols in this order.
    pub fn arc_order(&self) -> &[ArcId] {
        &self.arc_order
    }

    /// Longest-path distance from the input, per node.
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn level(&self, id: NodeId) -> usize {
        self.levels[id.0]
    }

    pub fn max_level(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    pub fn nodes_at_level(&self, level: usize) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&v| self.levels[v] == level)
            .map(NodeId)
            .collect()
    }

    /// Membership mask of the nodes with a path to `target` (inclusive).
    pub fn ancestor_mask(&self, target: NodeId) -> Result<Vec<bool>> {
        self.node(target)?;
        let mut mask = vec![false; self.nodes.len()];
        mask[target.0] = true;
        let mut queue = VecDeque::from([target.0]);
        while let Some(v) = queue.pop_front() {
            for a in &self.incoming[v] {
                let s = self.arcs[a.0].src.0;
                if !mask[s] {
                    mask[s] = true;
                    queue.push_back(s);
                }
            }
        }
        Ok(mask)
    }

    pub fn ancestors(&self, target: NodeId) -> Result<Vec<NodeId>> {
        Ok(self
            .ancestor_mask(target)?
            .into_iter()
            .enumerate()
            .filter_map(|(i, m)| m.then_some(NodeId(i)))
            .collect())
    }

    /// The sub-network computing `target`: its ancestors and the arcs among
    /// them, with `target` as output. Node ids are renumbered in ascending
    /// order of the original ids; the returned map sends old ids to new ones.
    pub fn computable_subgraph_with_map(&self, target: NodeId) -> Result<(Dag<T>, Vec<Option<NodeId>>)> {
        let mask = self.ancestor_mask(target)?;
        let mut map = vec![None; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if mask[i] {
                map[i] = Some(NodeId(nodes.len()));
                nodes.push(node.clone());
            }
        }
        let mut arc_map = vec![None; self.arcs.len()];
        let mut arcs = Vec::new();
        for (i, a) in self.arcs.iter().enumerate() {
            if mask[a.src.0] && mask[a.dst.0] {
                arc_map[i] = Some(ArcId(arcs.len()));
                arcs.push(Arc {
                    src: map[a.src.0].expect("mapped"),
                    dst: map[a.dst.0].expect("mapped"),
                    elem: a.elem.clone(),
                    in_dim: a.in_dim,
                    out_dim: a.out_dim,
                });
            }
        }
        for node in &mut nodes {
            if let Some(order) = &mut node.concat_order {
                *order = order.iter().filter_map(|a| arc_map[a.0]).collect();
            }
        }
        let builder = DagBuilder {
            input_dim: self.input_dim,
            nodes,
            arcs,
            output: map[target.0],
        };
        Ok((builder.build()?, map))
    }

    pub fn computable_subgraph(&self, target: NodeId) -> Result<Dag<T>> {
        Ok(self.computable_subgraph_with_map(target)?.0)
    }

    /// `d` over every activation and transform in the graph.
    pub fn uniform_bound(&self) -> T {
        uniform_bound(self.arcs.iter().map(|a| &a.elem))
    }

    pub fn to_builder(&self) -> DagBuilder<T> {
        DagBuilder {
            input_dim: self.input_dim,
            nodes: self.nodes.clone(),
            arcs: self.arcs.clone(),
            output: Some(self.output),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        self.to_builder().validate()
    }

    /// Same topology with every arc element replaced by `f(arc id, element)`.
    pub fn map_elements(&self, mut f: impl FnMut(ArcId, &BasisElement<T>) -> BasisElement<T>) -> Result<Dag<T>> {
        let mut b = self.to_builder();
        for (i, a) in b.arcs.iter_mut().enumerate() {
            a.elem = f(ArcId(i), &a.elem);
        }
        b.build()
    }

    pub fn cast<U: Scalar>(&self) -> Dag<U> {
        Dag {
            input_dim: self.input_dim,
            nodes: self.nodes.clone(),
            arcs: self
                .arcs
                .iter()
                .map(|a| Arc {
                    src: a.src,
                    dst: a.dst,
                    elem: a.elem.cast(),
                    in_dim: a.in_dim,
                    out_dim: a.out_dim,
                })
                .collect(),
            output: self.output,
            dims: self.dims.clone(),
            incoming: self.incoming.clone(),
            outgoing: self.outgoing.clone(),
            topo: self.topo.clone(),
            topo_pos: self.topo_pos.clone(),
            levels: self.levels.clone(),
            arc_order: self.arc_order.clone(),
        }
    }

    pub(crate) fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::dims("network input", self.input_dim, x.len()));
        }
        if !all_finite(x) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    pub(crate) fn new_trace(&self) -> Trace<T> {
        Trace {
            values: self.dims.iter().map(|&d| Vec::with_capacity(d)).collect(),
        }
    }

    /// Evaluates every node, reusing `trace` and `ws`. `hook` sees each
    /// activation arc with its pre-activation input. The input must already
    /// be checked.
    pub(crate) fn forward_into(
        &self,
        x: &[T],
        trace: &mut Trace<T>,
        ws: &mut Workspace<T>,
        mut hook: impl FnMut(ArcId, &Activation<T>, &[T]),
    ) {
        for &v in &self.topo {
            let mut buf = std::mem::take(&mut trace.values[v.0]);
            buf.clear();
            if v.0 == 0 {
                buf.extend_from_slice(x);
            } else {
                let add = self.nodes[v.0].role == NodeRole::Add;
                for (k, &a) in self.incoming[v.0].iter().enumerate() {
                    let arc = &self.arcs[a.0];
                    let src = &trace.values[arc.src.0];
                    let h = &mut hook;
                    arc.elem
                        .eval_into(src, &mut ws.pre, &mut ws.out, |act, pre| h(a, act, pre));
                    if add && k > 0 {
                        for (b, &o) in buf.iter_mut().zip(&ws.out) {
                            *b = *b + o;
                        }
                    } else {
                        buf.extend_from_slice(&ws.out);
                    }
                }
            }
            trace.values[v.0] = buf;
        }
    }

    /// Output value and the full trace of node values.
    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, Trace<T>)> {
        self.check_input(x)?;
        let mut trace = self.new_trace();
        let mut ws = Workspace::default();
        self.forward_into(x, &mut trace, &mut ws, |_, _, _| {});
        Ok((trace.values[self.output.0].clone(), trace))
    }

    pub fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(x)?.0)
    }

    pub fn forward_batch(&self, xs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        xs.par_iter()
            .map_init(
                || (self.new_trace(), Workspace::default()),
                |(trace, ws), x| {
                    self.check_input(x)?;
                    self.forward_into(x, trace, ws, |_, _, _| {});
                    Ok(trace.values[self.output.0].clone())
                },
            )
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{Affine, Matrix};

    fn lin(rows: &[Vec<f64>]) -> BasisElement<f64> {
        BasisElement::Linear(Matrix::from_f64_rows(rows).unwrap())
    }

    #[test]
    fn diamond_levels_and_eval() {
        let mut b = DagBuilder::<f64>::new(2);
        let p = b.add_node(NodeRole::Relay);
        let q = b.add_node(NodeRole::Relay);
        let s = b.add_node(NodeRole::Add);
        b.add_arc(NodeId(0), p, lin(&[vec![1.0, 0.0]])).unwrap();
        b.add_arc(NodeId(0), q, BasisElement::Activation(Activation::relu())).unwrap();
        b.add_arc(q, s, lin(&[vec![1.0, 1.0]])).unwrap();
        b.add_arc(p, s, BasisElement::Identity).unwrap();
        let dag = b.build().unwrap();
        assert_eq!(dag.levels(), &[0, 1, 1, 2]);
        assert_eq!(dag.output(), s);
        assert_eq!(dag.eval(&[2.0, -1.0]).unwrap(), vec![4.0]);
        assert_eq!(dag.arc_order(), &[ArcId(0), ArcId(1), ArcId(2), ArcId(3)]);
        assert!(dag.eval(&[1.0]).is_err());
        assert!(dag.eval(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn concat_order_controls_layout() {
        let mut b = DagBuilder::<f64>::new(1);
        let c = b.add_node(NodeRole::Concat);
        let a0 = b.add_arc(NodeId(0), c, lin(&[vec![1.0]])).unwrap();
        let a1 = b.add_arc(NodeId(0), c, lin(&[vec![2.0], vec![3.0]])).unwrap();
        b.set_concat_order(c, vec![a1, a0]);
        let dag = b.build().unwrap();
        assert_eq!(dag.eval(&[1.0]).unwrap(), vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn validation_finds_faults() {
        let mut b = DagBuilder::<f64>::new(2);
        let p = b.add_node(NodeRole::Relay);
        let q = b.add_node(NodeRole::Relay);
        b.add_arc_with_dims(NodeId(0), p, BasisElement::Identity, 2, 2);
        b.add_arc_with_dims(p, q, BasisElement::Identity, 2, 2);
        b.add_arc_with_dims(q, p, BasisElement::Identity, 2, 2);
        let r = b.validate();
        assert_eq!(r.cycle, Some(vec![p, q]));
        assert!(b.build().is_err());

        let mut b = DagBuilder::<f64>::new(2);
        let p = b.add_node(NodeRole::Add);
        b.add_arc_with_dims(NodeId(0), p, lin(&[vec![1.0, 1.0]]), 2, 1);
        b.add_arc_with_dims(NodeId(0), p, BasisElement::Identity, 2, 2);
        let r = b.validate();
        assert!(!r.dimension_faults.is_empty(), "{r}");

        let mut b = DagBuilder::<f64>::new(2);
        let p = b.add_node(NodeRole::Relay);
        b.add_node(NodeRole::Relay);
        b.add_arc(NodeId(0), p, BasisElement::Identity).unwrap();
        let r = b.validate();
        assert!(!r.is_valid());
    }

    #[test]
    fn subgraph_keeps_ancestors_only() {
        let mut b = DagBuilder::<f64>::new(1);
        let p = b.add_node(NodeRole::Duplicate);
        let q = b.add_node(NodeRole::Relay);
        let r = b.add_node(NodeRole::Concat);
        b.add_arc(NodeId(0), p, BasisElement::Affine(Affine::new(Matrix::identity(1), vec![1.0]).unwrap()))
            .unwrap();
        b.add_arc(p, q, BasisElement::Activation(Activation::relu())).unwrap();
        b.add_arc(p, r, BasisElement::Identity).unwrap();
        b.add_arc(q, r, BasisElement::Identity).unwrap();
        let dag = b.build().unwrap();
        let sub = dag.computable_subgraph(q).unwrap();
        assert_eq!(sub.node_count(), 3);
        assert_eq!(sub.eval(&[-3.0]).unwrap(), vec![0.0]);
        assert_eq!(dag.eval(&[1.0]).unwrap(), vec![2.0, 2.0]);
    }
}
