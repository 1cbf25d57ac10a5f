//! Input-space partitions named by activation patterns.
//!
//! The region code of an input at a probe is the sequence of discrete states
//! of every activation unit that the probe's value depends on, taken arc by
//! arc in the graph's arc order. Identity, linear, affine and transform arcs
//! add nothing. Inputs with equal codes at a probe share one affine piece of
//! the function computed there.

mod affine;
mod grid;
mod stats;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

pub use affine::affine_piece;
pub use grid::{count_regions_2d, count_regions_2d_multi, fusion_partition_bound};
pub use stats::{
    check_refinement, check_refinements, partition_stats, partition_stats_many, refinement_from_keys, stats_from_keys,
    PartitionStats, RefinementReport, StatsOptions, DEFAULT_PAIR_CAP,
};

use crate::error::{Error, Result};
use crate::graph::{ArcId, Dag, NodeId, Trace, Workspace};
use crate::scalar::Scalar;

/// Where a partition is read off: the value at a node, or the value carried
/// by one arc (an individual channel entering a fusion node).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Probe {
    Node(NodeId),
    Arc(ArcId),
}

impl From<NodeId> for Probe {
    fn from(n: NodeId) -> Self {
        Probe::Node(n)
    }
}

impl From<ArcId> for Probe {
    fn from(a: ArcId) -> Self {
        Probe::Arc(a)
    }
}

impl std::fmt::Display for Probe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Probe::Node(n) => write!(f, "node {n}"),
            Probe::Arc(a) => write!(f, "arc {a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionCode(pub Vec<u32>);

impl RegionCode {
    pub fn symbols(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Nodes whose values feed the probe, and the probe's own arc if any.
pub(crate) fn probe_scope<T: Scalar>(dag: &Dag<T>, probe: Probe) -> Result<(Vec<bool>, Option<ArcId>)> {
    match probe {
        Probe::Node(n) => Ok((dag.ancestor_mask(n)?, None)),
        Probe::Arc(a) => {
            let arc = dag.arc(a)?;
            Ok((dag.ancestor_mask(arc.src)?, Some(a)))
        }
    }
}

/// Node at which `probe`'s partition is compared with others.
pub(crate) fn probe_head<T: Scalar>(dag: &Dag<T>, probe: Probe) -> Result<NodeId> {
    match probe {
        Probe::Node(n) => dag.node(n).map(|_| n),
        Probe::Arc(a) => dag.arc(a).map(|arc| arc.dst),
    }
}

/// Activation arcs contributing to a probe's code, in arc order.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct CodePlan {
    arcs: Vec<ArcId>,
}

impl CodePlan {
    pub(crate) fn new<T: Scalar>(dag: &Dag<T>, probe: Probe) -> Result<Self> {
        let (mask, own) = probe_scope(dag, probe)?;
        let arcs = dag
            .arc_order()
            .iter()
            .copied()
            .filter(|&a| {
                let arc = &dag.arcs()[a.0];
                arc.elem.activation().is_some() && (Some(a) == own || (mask[arc.src.0] && mask[arc.dst.0]))
            })
            .collect();
        Ok(CodePlan { arcs })
    }

    fn code(&self, symbols: &[Vec<u32>]) -> RegionCode {
        RegionCode(self.arcs.iter().flat_map(|a| symbols[a.0].iter().copied()).collect())
    }

    /// 128-bit fingerprint of the code from per-arc digests; equal codes
    /// give equal keys.
    fn key(&self, digests: &[u128]) -> u128 {
        let mut h1 = DefaultHasher::new();
        let mut h2 = DefaultHasher::new();
        0x9e37_79b9_u32.hash(&mut h2);
        for a in &self.arcs {
            digests[a.0].hash(&mut h1);
            digests[a.0].hash(&mut h2);
        }
        ((h1.finish() as u128) << 64) | h2.finish() as u128
    }
}

fn digest(symbols: &[u32]) -> u128 {
    let mut h1 = DefaultHasher::new();
    let mut h2 = DefaultHasher::new();
    0x85eb_ca6b_u32.hash(&mut h2);
    symbols.hash(&mut h1);
    symbols.hash(&mut h2);
    ((h1.finish() as u128) << 64) | h2.finish() as u128
}

/// Reusable per-thread state for encoding samples.
pub(crate) struct Encoder<T> {
    trace: Trace<T>,
    ws: Workspace<T>,
    symbols: Vec<Vec<u32>>,
    digests: Vec<u128>,
}

impl<T: Scalar> Encoder<T> {
    pub(crate) fn new(dag: &Dag<T>) -> Self {
        Encoder {
            trace: dag.new_trace(),
            ws: Workspace::default(),
            symbols: vec![Vec::new(); dag.arc_count()],
            digests: vec![0; dag.arc_count()],
        }
    }

    /// Runs the network on `x` and records every activation arc's states.
    pub(crate) fn encode(&mut self, dag: &Dag<T>, x: &[T]) -> Result<()> {
        dag.check_input(x)?;
        let symbols = &mut self.symbols;
        dag.forward_into(x, &mut self.trace, &mut self.ws, |a, act, pre| {
            let s = &mut symbols[a.0];
            s.clear();
            act.encode_into(pre, s);
        });
        Ok(())
    }

    pub(crate) fn symbols(&self) -> &[Vec<u32>] {
        &self.symbols
    }

    /// Digest of each arc's symbols from the last `encode`, so that probes
    /// sharing arcs hash them once.
    fn digests(&mut self) -> &[u128] {
        for (d, s) in self.digests.iter_mut().zip(&self.symbols) {
            *d = if s.is_empty() { 0 } else { digest(s) };
        }
        &self.digests
    }
}

pub fn region_code<T: Scalar>(dag: &Dag<T>, probe: impl Into<Probe>, x: &[T]) -> Result<RegionCode> {
    let plan = CodePlan::new(dag, probe.into())?;
    let mut enc = Encoder::new(dag);
    enc.encode(dag, x)?;
    Ok(plan.code(enc.symbols()))
}

/// Region-code fingerprints, indexed `[probe][sample]`. Equal codes give equal
/// keys; distinct codes collide with probability about `2⁻¹²⁸` per pair.
pub fn region_keys<T: Scalar>(dag: &Dag<T>, probes: &[Probe], samples: &[Vec<T>]) -> Result<Vec<Vec<u128>>> {
    let plans: Vec<CodePlan> = probes
        .iter()
        .map(|&p| CodePlan::new(dag, p))
        .collect::<Result<_>>()?;
    let per_sample: Vec<Vec<u128>> = samples
        .par_iter()
        .map_init(
            || Encoder::new(dag),
            |enc, x| {
                enc.encode(dag, x)?;
                let digests = enc.digests();
                Ok(plans.iter().map(|p| p.key(digests)).collect())
            },
        )
        .collect::<Result<_>>()?;
    Ok((0..probes.len())
        .map(|p| per_sample.iter().map(|keys| keys[p]).collect())
        .collect())
}

/// Checks that `inner` lies in the computable sub-graph of `outer`.
pub(crate) fn check_nested<T: Scalar>(dag: &Dag<T>, outer: Probe, inner: Probe) -> Result<()> {
    if outer == inner {
        return Ok(());
    }
    let (mask, own) = probe_scope(dag, outer)?;
    let inside = match inner {
        Probe::Node(n) => {
            dag.node(n)?;
            mask[n.0]
        }
        Probe::Arc(a) => Some(a) == own || mask[dag.arc(a)?.dst.0],
    };
    if inside {
        Ok(())
    } else {
        Err(Error::NotInSubgraph {
            outer: probe_head(dag, outer)?,
            inner: probe_head(dag, inner)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Activation, BasisElement};
    use crate::graph::{ops, DagBuilder, NodeRole};

    #[test]
    fn single_relu_code() {
        let dag = ops::series(&ops::identity::<f64>(2).unwrap(), BasisElement::Activation(Activation::relu())).unwrap();
        let out = dag.output();
        assert_eq!(region_code(&dag, out, &[-1.0, 2.0]).unwrap().0, vec![0, 1]);
        assert_eq!(
            region_code(&dag, out, &[1.0, 2.0]).unwrap(),
            region_code(&dag, out, &[3.0, 0.5]).unwrap()
        );
        assert!(region_code(&dag, NodeId(0), &[1.0, 2.0]).unwrap().is_empty());
    }

    #[test]
    fn nested_scopes() {
        let mut b = DagBuilder::<f64>::new(1);
        let p = b.add_node(NodeRole::Relay);
        let q = b.add_node(NodeRole::Relay);
        let a0 = b.add_arc(NodeId(0), p, BasisElement::Activation(Activation::relu())).unwrap();
        b.add_arc(p, q, BasisElement::Activation(Activation::relu())).unwrap();
        let dag = b.build().unwrap();
        assert!(check_nested(&dag, Probe::Node(q), Probe::Node(p)).is_ok());
        assert!(check_nested(&dag, Probe::Node(q), Probe::Arc(a0)).is_ok());
        assert!(matches!(
            check_nested(&dag, Probe::Node(p), Probe::Node(q)),
            Err(Error::NotInSubgraph { .. })
        ));
    }
}
