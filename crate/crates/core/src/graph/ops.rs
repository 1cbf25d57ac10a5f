//! Atomic operations that grow networks from smaller ones: series
//! composition, concatenation of channels sharing an input, duplication, and
//! fusion of channels by a linear map.

use crate::basis::BasisElement;
use crate::error::{Error, Result};
use crate::graph::{ArcId, Dag, DagBuilder, NodeId, NodeRole};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// How a fusion node combines its channels.
#[derive(Clone, Debug, PartialEq)]
pub enum FusionMap<T> {
    /// `L = [I … I]`, stored as an addition node.
    Sum,
    /// Arbitrary `L` applied to the stacked channel outputs.
    Linear(Matrix<T>),
}

/// The single-node network `x ↦ x`.
pub fn identity<T: Scalar>(input_dim: usize) -> Result<Dag<T>> {
    DagBuilder::new(input_dim).build()
}

/// Copies `g` into `b`, feeding `g`'s input from `at`. Returns the node map.
pub(crate) fn embed<T: Scalar>(b: &mut DagBuilder<T>, g: &Dag<T>, at: NodeId) -> Result<Vec<NodeId>> {
    let at_dim = b
        .node_dim(at)
        .ok_or_else(|| Error::Construction(format!("node {at} has no dimension yet")))?;
    if at_dim != g.input_dim() {
        return Err(Error::Construction(format!(
            "cannot feed a network with input dimension {} from a value of dimension {at_dim}",
            g.input_dim()
        )));
    }
    let mut map = vec![at; g.node_count()];
    for (i, node) in g.nodes().iter().enumerate().skip(1) {
        let role = match node.role {
            NodeRole::Output => NodeRole::Relay,
            r => r,
        };
        map[i] = b.add_node(role);
    }
    let first_arc = b.arcs.len();
    for a in g.arcs() {
        b.add_arc_with_dims(map[a.src.0], map[a.dst.0], a.elem.clone(), a.in_dim, a.out_dim);
    }
    for (i, node) in g.nodes().iter().enumerate().skip(1) {
        if let Some(order) = &node.concat_order {
            let shifted = order.iter().map(|a| ArcId(a.0 + first_arc)).collect();
            b.set_concat_order(map[i], shifted);
        }
    }
    Ok(map)
}

/// `k ∘ g`
pub fn series<T: Scalar>(g: &Dag<T>, k: BasisElement<T>) -> Result<Dag<T>> {
    let in_dim = g.output_dim();
    k.output_dim(in_dim).map_err(|_| {
        let expected = k.linear_part().map_or(in_dim, Matrix::cols);
        Error::Construction(format!(
            "series: element expects input dimension {expected} but the network outputs {in_dim}"
        ))
    })?;
    let mut b = DagBuilder::new(g.input_dim());
    let map = embed(&mut b, g, NodeId(0))?;
    let out = b.add_node(NodeRole::Relay);
    b.add_arc(map[g.output().0], out, k)?;
    b.set_output(out);
    b.build()
}

fn check_shared_input<T: Scalar>(gs: &[Dag<T>], what: &str) -> Result<usize> {
    let first = gs
        .first()
        .ok_or_else(|| Error::Construction(format!("{what} needs at least one channel")))?;
    let n = first.input_dim();
    if let Some(g) = gs.iter().find(|g| g.input_dim() != n) {
        return Err(Error::Construction(format!(
            "{what}: channels must share the input space, found dimensions {n} and {}",
            g.input_dim()
        )));
    }
    Ok(n)
}

// Embeds every channel on a shared input and returns their output nodes.
fn channels<T: Scalar>(b: &mut DagBuilder<T>, gs: &[Dag<T>]) -> Result<Vec<NodeId>> {
    gs.iter()
        .map(|g| embed(b, g, NodeId(0)).map(|m| m[g.output().0]))
        .collect()
}

/// `[g₁(x); …; g_m(x)]`, stacked in list order.
pub fn concatenate<T: Scalar>(gs: &[Dag<T>]) -> Result<Dag<T>> {
    let n = check_shared_input(gs, "concatenate")?;
    let mut b = DagBuilder::new(n);
    let outs = channels(&mut b, gs)?;
    let cat = b.add_node(NodeRole::Concat);
    for o in outs {
        b.add_arc(o, cat, BasisElement::Identity)?;
    }
    b.set_output(cat);
    b.build()
}

/// `[g(x); …; g(x)]` with `m` copies.
pub fn duplicate<T: Scalar>(g: &Dag<T>, m: usize) -> Result<Dag<T>> {
    if m == 0 {
        return Err(Error::Construction("duplicate needs at least one copy".into()));
    }
    let mut b = DagBuilder::new(g.input_dim());
    let map = embed(&mut b, g, NodeId(0))?;
    let mut src = map[g.output().0];
    // Only a single-input relay can become the duplication node itself.
    if src.0 != 0 {
        if g.incoming(g.output()).len() == 1 && matches!(g.nodes()[g.output().0].role, NodeRole::Relay | NodeRole::Output) {
            b.set_role(src, NodeRole::Duplicate);
        } else {
            let dup = b.add_node(NodeRole::Duplicate);
            b.add_arc(src, dup, BasisElement::Identity)?;
            src = dup;
        }
    }
    let cat = b.add_node(NodeRole::Concat);
    for _ in 0..m {
        b.add_arc(src, cat, BasisElement::Identity)?;
    }
    b.set_output(cat);
    b.build()
}

/// `[k₁x; …; k_m x]`
pub fn parallel<T: Scalar>(input_dim: usize, ks: Vec<BasisElement<T>>) -> Result<Dag<T>> {
    if ks.is_empty() {
        return Err(Error::Construction("parallel needs at least one element".into()));
    }
    let mut b = DagBuilder::new(input_dim);
    let cat = b.add_node(NodeRole::Concat);
    for k in ks {
        let n = b.add_node(NodeRole::Relay);
        b.add_arc(NodeId(0), n, k)?;
        b.add_arc(n, cat, BasisElement::Identity)?;
    }
    b.set_output(cat);
    b.build()
}

/// `L [g₁(x); …; g_m(x)]`
pub fn fusion<T: Scalar>(gs: &[Dag<T>], map: FusionMap<T>) -> Result<Dag<T>> {
    let n = check_shared_input(gs, "fusion")?;
    match map {
        FusionMap::Sum => {
            let d = gs[0].output_dim();
            if let Some(g) = gs.iter().find(|g| g.output_dim() != d) {
                return Err(Error::Construction(format!(
                    "fusion by summation needs equal channel dimensions, found {d} and {}",
                    g.output_dim()
                )));
            }
            let mut b = DagBuilder::new(n);
            let outs = channels(&mut b, gs)?;
            let sum = b.add_node(NodeRole::Add);
            for o in outs {
                b.add_arc(o, sum, BasisElement::Identity)?;
            }
            b.set_output(sum);
            b.build()
        }
        FusionMap::Linear(l) => series(&concatenate(gs)?, BasisElement::Linear(l)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Activation;
    use crate::matrix::Affine;

    fn relu_m(rows: &[Vec<f64>], bias: Vec<f64>) -> BasisElement<f64> {
        BasisElement::relu_affine(Affine::new(Matrix::from_f64_rows(rows).unwrap(), bias).unwrap())
    }

    #[test]
    fn series_composes() {
        let id = identity::<f64>(2).unwrap();
        let same = series(&id, BasisElement::Identity).unwrap();
        assert_eq!(same.eval(&[1.0, -2.0]).unwrap(), vec![1.0, -2.0]);
        let m = series(&id, BasisElement::Linear(Matrix::from_f64_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()))
            .unwrap();
        let r = series(&m, BasisElement::Activation(Activation::relu())).unwrap();
        assert_eq!(r.eval(&[1.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(r.eval(&[1.0, 2.0]).unwrap(), vec![3.0, 2.0]);
        let bad = BasisElement::Linear(Matrix::<f64>::zeros(2, 4));
        let three = series(&id, BasisElement::Linear(Matrix::zeros(3, 2))).unwrap();
        let err = series(&three, bad).unwrap_err().to_string();
        assert!(err.contains('3') && err.contains('4'), "{err}");
    }

    #[test]
    fn concatenate_and_duplicate_shapes() {
        let id = identity::<f64>(2).unwrap();
        let cat = concatenate(&[id.clone(), id.clone()]).unwrap();
        assert_eq!(cat.eval(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0, 1.0, 2.0]);
        let dup = duplicate(&id, 3).unwrap();
        assert_eq!(dup.output_dim(), 6);
        assert!(duplicate(&id, 0).is_err());
        assert!(concatenate::<f64>(&[]).is_err());
    }

    #[test]
    fn fusion_sum_matches_linear() {
        let id = identity::<f64>(2).unwrap();
        let c1 = series(&id, relu_m(&[vec![1.0, 0.5], vec![-1.0, 2.0]], vec![0.1, -0.3])).unwrap();
        let c2 = series(&id, relu_m(&[vec![0.2, -1.0], vec![1.0, 1.0]], vec![0.0, 0.4])).unwrap();
        let sum = fusion(&[c1.clone(), c2.clone()], FusionMap::Sum).unwrap();
        let l = Matrix::hstack(&[&Matrix::identity(2), &Matrix::identity(2)]).unwrap();
        let lin = fusion(&[c1, c2], FusionMap::Linear(l)).unwrap();
        for x in [[0.3, -1.2], [2.0, 0.7], [-0.5, -0.5]] {
            let a = sum.eval(&x).unwrap();
            let b = lin.eval(&x).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }

    #[test]
    fn parallel_stacks_filters() {
        let p = parallel::<f64>(
            2,
            vec![
                BasisElement::Linear(Matrix::from_f64_rows(&[vec![1.0, 0.0]]).unwrap()),
                BasisElement::Linear(Matrix::from_f64_rows(&[vec![0.0, 2.0]]).unwrap()),
            ],
        )
        .unwrap();
        assert_eq!(p.eval(&[3.0, 4.0]).unwrap(), vec![3.0, 8.0]);
    }
}
