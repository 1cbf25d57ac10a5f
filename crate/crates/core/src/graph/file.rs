//! JSON network descriptions.
//!
//! ```json
//! {
//!   "input_dim": 2,
//!   "nodes": [{"id": 0, "role": "input"}, {"id": 1, "role": "relay"}],
//!   "arcs": [{"src": 0, "dst": 1, "in_dim": 2, "out_dim": 2,
//!             "elem": {"kind": "activation_affine", "W": [[1, 0], [0, 1]], "b": [0, 0],
//!                      "cpwl": {"right": [[1, 0]], "left": []}}}]
//! }
//! ```
//!
//! Matrices are row-major arrays of rows. The output node is the one with
//! role `output`, else the `output` field, else the unique sink.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::{Activation, BasisElement, CpwlSpec, PoolBlocks, TransformSpec};
use crate::error::{Error, Result};
use crate::graph::{ArcId, Dag, DagBuilder, Node, NodeId, NodeRole};
use crate::matrix::{Affine, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub input_dim: usize,
    pub nodes: Vec<NodeEntry>,
    pub arcs: Vec<ArcEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub role: NodeRole,
    /// Indices into `arcs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concat_order: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcEntry {
    pub src: usize,
    pub dst: usize,
    pub elem: ElemEntry,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElemEntry {
    pub kind: String,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpwl: Option<CpwlEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformEntry>,
}

/// A named activation (`relu`, `abs`, `hard_tanh`) or explicit pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CpwlEntry {
    Named(String),
    Spec(CpwlSpec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntry {
    /// `max` or `maxlu`.
    pub kind: String,
    pub blocks: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformEntry {
    /// `softmax`, `sigmoid` or `tanh`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

fn fmt_err(context: &str, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{context}: {msg}"))
}

fn matrix(ctx: &str, rows: &Option<Vec<Vec<f64>>>) -> Result<Matrix<f64>> {
    let rows = rows.as_ref().ok_or_else(|| fmt_err(ctx, "missing field `W`"))?;
    Matrix::from_f64_rows(rows).map_err(|e| fmt_err(&format!("{ctx}.W"), e))
}

fn affine(ctx: &str, e: &ElemEntry) -> Result<Affine<f64>> {
    let w = matrix(ctx, &e.w)?;
    let b = e.b.clone().unwrap_or_else(|| vec![0.0; w.rows()]);
    Affine::new(w, b).map_err(|err| fmt_err(&format!("{ctx}.b"), err))
}

fn activation(ctx: &str, e: &ElemEntry) -> Result<Activation<f64>> {
    match (&e.cpwl, &e.pool) {
        (Some(_), Some(_)) => Err(fmt_err(ctx, "give either `cpwl` or `pool`, not both")),
        (None, None) => Err(fmt_err(ctx, "activation needs a `cpwl` or `pool` field")),
        (Some(CpwlEntry::Named(name)), None) => match name.as_str() {
            "relu" => Ok(Activation::Pointwise(CpwlSpec::relu())),
            "abs" => Ok(Activation::Pointwise(CpwlSpec::abs())),
            "hard_tanh" => Ok(Activation::Pointwise(CpwlSpec::hard_tanh())),
            other => Err(fmt_err(
                &format!("{ctx}.cpwl"),
                format!("unknown activation `{other}` (expected relu, abs, hard_tanh or a piece list)"),
            )),
        },
        (Some(CpwlEntry::Spec(spec)), None) => {
            spec.validate().map_err(|err| fmt_err(&format!("{ctx}.cpwl"), err))?;
            Ok(Activation::Pointwise(spec.clone()))
        }
        (None, Some(p)) => {
            let blocks = PoolBlocks::new(p.blocks.clone()).map_err(|err| fmt_err(&format!("{ctx}.pool"), err))?;
            match p.kind.as_str() {
                "max" => Ok(Activation::MaxPool(blocks)),
                "maxlu" => Ok(Activation::MaxLu(blocks)),
                other => Err(fmt_err(
                    &format!("{ctx}.pool.kind"),
                    format!("unknown pooling `{other}` (expected max or maxlu)"),
                )),
            }
        }
    }
}

fn transform(ctx: &str, e: &ElemEntry) -> Result<TransformSpec<f64>> {
    let t = e
        .transform
        .as_ref()
        .ok_or_else(|| fmt_err(ctx, "transform needs a `transform` field"))?;
    let ctx = format!("{ctx}.transform");
    match t.kind.as_str() {
        "softmax" => TransformSpec::softmax(t.lambda.unwrap_or(1.0)).map_err(|err| fmt_err(&ctx, err)),
        "sigmoid" => Ok(TransformSpec::Sigmoid),
        "tanh" => Ok(TransformSpec::Tanh),
        other => Err(fmt_err(
            &format!("{ctx}.kind"),
            format!("unknown transform `{other}` (expected softmax, sigmoid or tanh)"),
        )),
    }
}

impl ElemEntry {
    pub fn to_element(&self, ctx: &str) -> Result<BasisElement<f64>> {
        Ok(match self.kind.as_str() {
            "identity" => BasisElement::Identity,
            "linear" => BasisElement::Linear(matrix(ctx, &self.w)?),
            "affine" => BasisElement::Affine(affine(ctx, self)?),
            "activation" => BasisElement::Activation(activation(ctx, self)?),
            "activation_affine" => BasisElement::ActivationAffine(activation(ctx, self)?, affine(ctx, self)?),
            "transform" => BasisElement::Transform(transform(ctx, self)?),
            "transform_affine" => BasisElement::TransformAffine(transform(ctx, self)?, affine(ctx, self)?),
            other => {
                return Err(fmt_err(
                    &format!("{ctx}.kind"),
                    format!(
                        "unknown element kind `{other}` (expected identity, linear, affine, activation, \
                         activation_affine, transform or transform_affine)"
                    ),
                ))
            }
        })
    }

    pub fn from_element(elem: &BasisElement<f64>) -> Self {
        let mut e = ElemEntry {
            kind: elem.kind_name().to_string(),
            ..Default::default()
        };
        if let Some(w) = elem.linear_part() {
            e.w = Some(w.to_rows());
        }
        if let Some(m) = elem.affine_part() {
            e.b = Some(m.bias.clone());
        }
        match elem.activation() {
            Some(Activation::Pointwise(spec)) => e.cpwl = Some(CpwlEntry::Spec(spec.clone())),
            Some(Activation::MaxPool(p)) => {
                e.pool = Some(PoolEntry {
                    kind: "max".into(),
                    blocks: p.blocks.clone(),
                })
            }
            Some(Activation::MaxLu(p)) => {
                e.pool = Some(PoolEntry {
                    kind: "maxlu".into(),
                    blocks: p.blocks.clone(),
                })
            }
            None => {}
        }
        if let BasisElement::Transform(t) | BasisElement::TransformAffine(t, _) = elem {
            e.transform = Some(TransformEntry {
                kind: t.name().into(),
                lambda: match t {
                    TransformSpec::Softmax { lambda } => Some(*lambda),
                    _ => None,
                },
            });
        }
        e
    }
}

impl NetworkFile {
    /// Converts to an unchecked builder; graph-level faults are left to
    /// [`DagBuilder::validate`].
    pub fn to_builder(&self) -> Result<DagBuilder<f64>> {
        let n = self.nodes.len();
        let mut slots: Vec<Option<Node>> = vec![None; n];
        for (i, entry) in self.nodes.iter().enumerate() {
            let ctx = format!("nodes[{i}]");
            if entry.id >= n {
                return Err(fmt_err(
                    &format!("{ctx}.id"),
                    format!("id {} out of range; ids must be 0..{n}", entry.id),
                ));
            }
            if slots[entry.id].is_some() {
                return Err(fmt_err(&format!("{ctx}.id"), format!("duplicate node id {}", entry.id)));
            }
            let concat_order = match &entry.concat_order {
                Some(order) => {
                    if let Some(&bad) = order.iter().find(|&&a| a >= self.arcs.len()) {
                        return Err(fmt_err(
                            &format!("{ctx}.concat_order"),
                            format!("arc index {bad} out of range"),
                        ));
                    }
                    Some(order.iter().map(|&a| ArcId(a)).collect())
                }
                None => None,
            };
            slots[entry.id] = Some(Node {
                role: entry.role,
                concat_order,
            });
        }
        let nodes: Vec<Node> = slots.into_iter().map(|s| s.expect("dense ids")).collect();
        let mut b = DagBuilder::new(self.input_dim);
        b.nodes = nodes;
        for (i, a) in self.arcs.iter().enumerate() {
            let ctx = format!("arcs[{i}]");
            for (field, v) in [("src", a.src), ("dst", a.dst)] {
                if v >= n {
                    return Err(fmt_err(&format!("{ctx}.{field}"), format!("node {v} does not exist")));
                }
            }
            let elem = a.elem.to_element(&format!("{ctx}.elem"))?;
            b.add_arc_with_dims(NodeId(a.src), NodeId(a.dst), elem, a.in_dim, a.out_dim);
        }
        if let Some(o) = self.output {
            b.set_output(NodeId(o));
        }
        Ok(b)
    }

    pub fn from_dag(dag: &Dag<f64>) -> Self {
        let nodes = dag
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, node)| NodeEntry {
                id: i,
                role: node.role,
                concat_order: node
                    .concat_order
                    .as_ref()
                    .map(|o| o.iter().map(|a| a.0).collect()),
            })
            .collect();
        let arcs = dag
            .arcs()
            .iter()
            .map(|a| ArcEntry {
                src: a.src.0,
                dst: a.dst.0,
                elem: ElemEntry::from_element(&a.elem),
                in_dim: a.in_dim,
                out_dim: a.out_dim,
            })
            .collect();
        NetworkFile {
            input_dim: dag.input_dim(),
            nodes,
            arcs,
            output: Some(dag.output().0),
        }
    }
}

/// Parses a description without checking graph structure.
pub fn parse_network_builder(text: &str) -> Result<DagBuilder<f64>> {
    let file: NetworkFile = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    file.to_builder()
}

pub fn parse_network(text: &str) -> Result<Dag<f64>> {
    parse_network_builder(text)?.build()
}

pub fn read_network_builder(path: &Path) -> Result<DagBuilder<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    parse_network_builder(&text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_network(path: &Path) -> Result<Dag<f64>> {
    read_network_builder(path)?.build()
}

pub fn network_to_json(dag: &Dag<f64>) -> String {
    serde_json::to_string_pretty(&NetworkFile::from_dag(dag)).expect("network description serializes")
}

pub fn write_network(path: &Path, dag: &Dag<f64>) -> Result<()> {
    std::fs::write(path, network_to_json(dag) + "\n")
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
