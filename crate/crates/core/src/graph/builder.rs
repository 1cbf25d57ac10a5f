use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::cmp::Reverse;
use std::fmt;

use crate::basis::BasisElement;
use crate::error::{Error, Result};
use crate::graph::{Arc, ArcId, Dag, Node, NodeId, NodeRole};
use crate::scalar::Scalar;

/// Mutable, unchecked graph under construction. [`DagBuilder::build`] runs the
/// full validation and freezes it into a [`Dag`].
#[derive(Clone, Debug)]
pub struct DagBuilder<T> {
    pub(crate) input_dim: usize,
    pub(crate) nodes: Vec<Node>,
    pub(crate) arcs: Vec<Arc<T>>,
    pub(crate) output: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionFault {
    pub location: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub node_count: usize,
    pub arc_count: usize,
    pub output: Option<NodeId>,
    /// Nodes of one directed cycle, if the graph has any.
    pub cycle: Option<Vec<NodeId>>,
    pub structure_faults: Vec<String>,
    pub dimension_faults: Vec<DimensionFault>,
    /// Nodes the input node does not reach.
    pub unreachable: Vec<NodeId>,
    /// Nodes that do not reach the output node.
    pub dead_ends: Vec<NodeId>,
    /// Nodes on some input-to-output path.
    pub reachable: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.cycle.is_none()
            && self.structure_faults.is_empty()
            && self.dimension_faults.is_empty()
            && self.unreachable.is_empty()
            && self.dead_ends.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if let Some(c) = &self.cycle {
            let ids: Vec<String> = c.iter().map(|n| n.to_string()).collect();
            parts.push(format!("cycle through nodes [{}]", ids.join(" -> ")));
        }
        parts.extend(self.structure_faults.iter().cloned());
        parts.extend(
            self.dimension_faults
                .iter()
                .map(|f| format!("dimension fault at {}: {}", f.location, f.message)),
        );
        if !self.unreachable.is_empty() {
            parts.push(format!("unreachable from input: {:?}", ids(&self.unreachable)));
        }
        if !self.dead_ends.is_empty() {
            parts.push(format!("do not reach the output: {:?}", ids(&self.dead_ends)));
        }
        parts.join("; ")
    }
}

fn ids(nodes: &[NodeId]) -> Vec<usize> {
    nodes.iter().map(|n| n.0).collect()
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes: {}", self.node_count)?;
        writeln!(f, "arcs: {}", self.arc_count)?;
        match self.output {
            Some(o) => writeln!(f, "output node: {o}")?,
            None => writeln!(f, "output node: none")?,
        }
        writeln!(f, "reachable nodes: {}", self.reachable)?;
        if self.is_valid() {
            write!(f, "valid")
        } else {
            write!(f, "invalid: {}", self.summary())
        }
    }
}

impl<T: Scalar> DagBuilder<T> {
    /// Starts a graph whose node 0 is the input node.
    pub fn new(input_dim: usize) -> Self {
        DagBuilder {
            input_dim,
            nodes: vec![Node::new(NodeRole::Input)],
            arcs: Vec::new(),
            output: None,
        }
    }

    pub fn input(&self) -> NodeId {
        NodeId(0)
    }

    pub fn add_node(&mut self, role: NodeRole) -> NodeId {
        self.nodes.push(Node::new(role));
        NodeId(self.nodes.len() - 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn set_role(&mut self, node: NodeId, role: NodeRole) {
        self.nodes[node.0].role = role;
    }

    pub fn set_output(&mut self, node: NodeId) {
        self.output = Some(node);
    }

    pub fn set_concat_order(&mut self, node: NodeId, order: Vec<ArcId>) {
        self.nodes[node.0].concat_order = Some(order);
    }

    /// Dimension of a node's value from the arcs added so far.
    pub fn node_dim(&self, node: NodeId) -> Option<usize> {
        if node.0 == 0 {
            return Some(self.input_dim);
        }
        let role = self.nodes.get(node.0)?.role;
        let mut incoming = self.arcs.iter().filter(|a| a.dst == node).peekable();
        incoming.peek()?;
        Some(match role {
            NodeRole::Concat => incoming.map(|a| a.out_dim).sum(),
            _ => incoming.next()?.out_dim,
        })
    }

    /// Adds an arc whose input dimension is the current dimension of `src`.
    pub fn add_arc(&mut self, src: NodeId, dst: NodeId, elem: BasisElement<T>) -> Result<ArcId> {
        for n in [src, dst] {
            if n.0 >= self.nodes.len() {
                return Err(Error::UnknownNode(n));
            }
        }
        if src == dst {
            return Err(Error::Construction(format!("self-loop at node {src}")));
        }
        let in_dim = self.node_dim(src).ok_or_else(|| {
            Error::Construction(format!("node {src} has no incoming arcs yet"))
        })?;
        let out_dim = elem.output_dim(in_dim)?;
        elem.validate()?;
        Ok(self.add_arc_with_dims(src, dst, elem, in_dim, out_dim))
    }

    /// Adds an arc with declared dimensions and no checks; faults surface in
    /// [`DagBuilder::validate`].
    pub fn add_arc_with_dims(
        &mut self,
        src: NodeId,
        dst: NodeId,
        elem: BasisElement<T>,
        in_dim: usize,
        out_dim: usize,
    ) -> ArcId {
        self.arcs.push(Arc {
            src,
            dst,
            elem,
            in_dim,
            out_dim,
        });
        ArcId(self.arcs.len() - 1)
    }

    fn resolve_output(&self, out_deg: &[usize], faults: &mut Vec<String>) -> Option<NodeId> {
        if let Some(o) = self.output {
            if o.0 >= self.nodes.len() {
                faults.push(format!("declared output node {o} does not exist"));
                return None;
            }
            return Some(o);
        }
        let marked: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].role == NodeRole::Output)
            .map(NodeId)
            .collect();
        match marked.len() {
            1 => return Some(marked[0]),
            0 => {}
            _ => {
                faults.push(format!("more than one output node: {:?}", ids(&marked)));
                return None;
            }
        }
        let sinks: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&i| out_deg[i] == 0)
            .map(NodeId)
            .collect();
        if sinks.len() == 1 {
            Some(sinks[0])
        } else {
            faults.push(format!(
                "cannot determine a single output node; sinks: {:?}",
                ids(&sinks)
            ));
            None
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let n = self.nodes.len();
        let mut report = ValidationReport {
            node_count: n,
            arc_count: self.arcs.len(),
            ..Default::default()
        };
        if n == 0 {
            report.structure_faults.push("graph has no nodes".into());
            return report;
        }
        if self.input_dim == 0 {
            report.structure_faults.push("input dimension must be positive".into());
        }
        for (i, a) in self.arcs.iter().enumerate() {
            if a.src.0 >= n || a.dst.0 >= n {
                report
                    .structure_faults
                    .push(format!("arc {i} references a missing node ({} -> {})", a.src, a.dst));
            }
        }
        if !report.structure_faults.is_empty() {
            return report;
        }

        let mut in_arcs: Vec<Vec<ArcId>> = vec![Vec::new(); n];
        let mut out_arcs: Vec<Vec<ArcId>> = vec![Vec::new(); n];
        for (i, a) in self.arcs.iter().enumerate() {
            in_arcs[a.dst.0].push(ArcId(i));
            out_arcs[a.src.0].push(ArcId(i));
        }

        if self.nodes[0].role != NodeRole::Input {
            report.structure_faults.push("node 0 must have the input role".into());
        }
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            if node.role == NodeRole::Input {
                report
                    .structure_faults
                    .push(format!("node {i} has the input role; only node 0 may"));
            } else if in_arcs[i].is_empty() {
                report
                    .structure_faults
                    .push(format!("node {i} has no incoming arcs (a second source)"));
            }
        }
        if !in_arcs[0].is_empty() {
            report.structure_faults.push("input node 0 has incoming arcs".into());
        }

        let out_deg: Vec<usize> = out_arcs.iter().map(Vec::len).collect();
        let output = self.resolve_output(&out_deg, &mut report.structure_faults);
        report.output = output;
        if let Some(o) = output {
            if out_deg[o.0] != 0 {
                report
                    .structure_faults
                    .push(format!("output node {o} has outgoing arcs"));
            }
        }

        let topo = match topological_order(n, &self.arcs) {
            Ok(t) => t,
            Err(cycle) => {
                report.cycle = Some(cycle);
                return report;
            }
        };

        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for a in &out_arcs[v] {
                let d = self.arcs[a.0].dst.0;
                if !seen[d] {
                    seen[d] = true;
                    queue.push_back(d);
                }
            }
        }
        report.unreachable = (0..n).filter(|&i| !seen[i]).map(NodeId).collect();
        if let Some(o) = output {
            let mut back = vec![false; n];
            back[o.0] = true;
            queue.push_back(o.0);
            while let Some(v) = queue.pop_front() {
                for a in &in_arcs[v] {
                    let s = self.arcs[a.0].src.0;
                    if !back[s] {
                        back[s] = true;
                        queue.push_back(s);
                    }
                }
            }
            report.dead_ends = (0..n).filter(|&i| !back[i]).map(NodeId).collect();
            report.reachable = (0..n).filter(|&i| seen[i] && back[i]).count();
        }

        self.check_dims(&topo, &in_arcs, &mut report);
        report
    }

    fn check_dims(&self, topo: &[NodeId], in_arcs: &[Vec<ArcId>], report: &mut ValidationReport) {
        let mut dims: Vec<Option<usize>> = vec![None; self.nodes.len()];
        let mut fault = |location: String, message: String| {
            report.dimension_faults.push(DimensionFault { location, message });
        };
        for &v in topo {
            let node = &self.nodes[v.0];
            let incoming = &in_arcs[v.0];
            for &a in incoming {
                let arc = &self.arcs[a.0];
                if let Some(sd) = dims[arc.src.0] {
                    if arc.in_dim != sd {
                        fault(
                            format!("node {}", arc.src),
                            format!(
                                "arc {a} declares in_dim {} but the node has dimension {sd}",
                                arc.in_dim
                            ),
                        );
                    }
                }
                match arc.elem.output_dim(arc.in_dim) {
                    Ok(od) if od != arc.out_dim => fault(
                        format!("arc {a}"),
                        format!(
                            "{} maps dimension {} to {od} but out_dim {} is declared",
                            arc.elem.kind_name(),
                            arc.in_dim,
                            arc.out_dim
                        ),
                    ),
                    Ok(_) => {}
                    Err(e) => fault(format!("arc {a}"), e.to_string()),
                }
                if let Err(e) = arc.elem.validate() {
                    fault(format!("arc {a}"), e.to_string());
                }
                if arc.in_dim == 0 || arc.out_dim == 0 {
                    fault(format!("arc {a}"), "dimensions must be positive".into());
                }
            }
            let outs: Vec<usize> = incoming.iter().map(|a| self.arcs[a.0].out_dim).collect();
            dims[v.0] = match node.role {
                NodeRole::Input => Some(self.input_dim),
                NodeRole::Relay | NodeRole::Duplicate | NodeRole::Output => {
                    if outs.len() != 1 {
                        fault(
                            format!("node {v}"),
                            format!("{:?} node needs exactly one incoming arc, has {}", node.role, outs.len()),
                        );
                    }
                    outs.first().copied()
                }
                NodeRole::Add => {
                    if outs.iter().any(|&d| d != outs[0]) {
                        fault(
                            format!("node {v}"),
                            format!("addition of unequal dimensions {outs:?}"),
                        );
                    }
                    outs.first().copied()
                }
                NodeRole::Concat => {
                    if let Some(order) = &node.concat_order {
                        let given: BTreeSet<usize> = order.iter().map(|a| a.0).collect();
                        let actual: BTreeSet<usize> = incoming.iter().map(|a| a.0).collect();
                        if given != actual || order.len() != incoming.len() {
                            fault(
                                format!("node {v}"),
                                "concat_order is not a permutation of the incoming arcs".into(),
                            );
                        }
                    }
                    Some(outs.iter().sum())
                }
            };
        }
    }

    pub fn build(self) -> Result<Dag<T>> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report.summary()));
        }
        let output = report.output.expect("valid graph has an output");
        Ok(Dag::assemble(self.input_dim, self.nodes, self.arcs, output))
    }
}

/// Lexicographically smallest topological order, or one cycle.
pub(crate) fn topological_order<T>(n: usize, arcs: &[Arc<T>]) -> std::result::Result<Vec<NodeId>, Vec<NodeId>> {
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in arcs {
        indeg[a.dst.0] += 1;
        succ[a.src.0].push(a.dst.0);
    }
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = heap.pop() {
        order.push(NodeId(v));
        for &d in &succ[v] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                heap.push(Reverse(d));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every leftover node has a leftover predecessor; walk backwards until a repeat.
    let leftover: Vec<bool> = indeg.iter().map(|&d| d > 0).collect();
    let mut pred: Vec<Option<usize>> = vec![None; n];
    for a in arcs {
        if leftover[a.src.0] && leftover[a.dst.0] && pred[a.dst.0].is_none() {
            pred[a.dst.0] = Some(a.src.0);
        }
    }
    let start = (0..n).find(|&i| leftover[i]).expect("leftover node");
    let mut pos = vec![usize::MAX; n];
    let mut walk = Vec::new();
    let mut v = start;
    while pos[v] == usize::MAX {
        pos[v] = walk.len();
        walk.push(v);
        v = pred[v].expect("leftover node has leftover predecessor");
    }
    let mut cycle: Vec<NodeId> = walk[pos[v]..].iter().rev().map(|&i| NodeId(i)).collect();
    let first = cycle.iter().enumerate().min_by_key(|(_, n)| n.0).map(|(i, _)| i).unwrap_or(0);
    cycle.rotate_left(first);
    Err(cycle)
}
