use crate::basis::BasisElement;
use crate::error::{Error, Result};
use crate::graph::{Arc, Dag, NodeRole};
use crate::matrix::{Affine, Matrix};
use crate::partition::{probe_scope, Probe};
use crate::scalar::Scalar;

// Affine map of the arc's output in terms of the network input, given the
// map `src` and value `x` at its tail.
fn arc_piece<T: Scalar>(arc: &Arc<T>, src: &Affine<T>, x: &[T]) -> Result<Affine<T>> {
    Ok(match &arc.elem {
        BasisElement::Identity => src.clone(),
        BasisElement::Linear(w) => Affine::linear(w.clone()).compose(src)?,
        BasisElement::Affine(m) => m.compose(src)?,
        BasisElement::Activation(act) => act.unrectify(x).compose(src),
        BasisElement::ActivationAffine(act, m) => act.unrectify(&m.apply(x)).compose(&m.compose(src)?),
        BasisElement::Transform(_) | BasisElement::TransformAffine(..) => {
            unreachable!("transforms rejected before composition")
        }
    })
}

/// The affine map `x′ ↦ W x′ + b` that the probe computes on the region of
/// `x`, obtained by replacing every activation with its un-rectified form at
/// `x` and composing along the computable sub-graph.
pub fn affine_piece<T: Scalar>(dag: &Dag<T>, probe: impl Into<Probe>, x: &[T]) -> Result<Affine<T>> {
    let probe = probe.into();
    let (mask, own) = probe_scope(dag, probe)?;
    for (i, arc) in dag.arcs().iter().enumerate() {
        let in_scope = (mask[arc.src.0] && mask[arc.dst.0]) || own.map(|a| a.0) == Some(i);
        if in_scope && arc.elem.is_transform() {
            return Err(Error::NotPiecewiseAffine(crate::graph::ArcId(i)));
        }
    }
    let (_, trace) = dag.forward(x)?;
    let mut pieces: Vec<Option<Affine<T>>> = vec![None; dag.node_count()];
    for &v in dag.topo_order() {
        if !mask[v.0] {
            continue;
        }
        if v.0 == 0 {
            pieces[0] = Some(Affine::identity(dag.input_dim()));
            continue;
        }
        let parts: Vec<Affine<T>> = dag
            .incoming(v)
            .iter()
            .map(|&a| {
                let arc = &dag.arcs()[a.0];
                let src = pieces[arc.src.0].as_ref().expect("ancestors precede in topological order");
                arc_piece(arc, src, trace.value(arc.src))
            })
            .collect::<Result<_>>()?;
        let combined = match dag.nodes()[v.0].role {
            NodeRole::Add => {
                let mut it = parts.into_iter();
                let first = it.next().expect("node has incoming arcs");
                it.try_fold(first, |acc, p| {
                    let bias = acc.bias.iter().zip(&p.bias).map(|(&a, &b)| a + b).collect();
                    Affine::new(acc.weight.add(&p.weight)?, bias)
                })?
            }
            NodeRole::Concat => {
                let weights: Vec<&Matrix<T>> = parts.iter().map(|p| &p.weight).collect();
                let bias = parts.iter().flat_map(|p| p.bias.iter().copied()).collect();
                Affine::new(Matrix::vstack(&weights)?, bias)?
            }
            _ => parts.into_iter().next().expect("node has incoming arcs"),
        };
        pieces[v.0] = Some(combined);
    }
    match probe {
        Probe::Node(n) => Ok(pieces[n.0].take().expect("probe node in scope")),
        Probe::Arc(a) => {
            let arc = dag.arc(a)?;
            let src = pieces[arc.src.0].as_ref().expect("arc tail in scope");
            arc_piece(arc, src, trace.value(arc.src))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Activation, TransformSpec};
    use crate::graph::{ops, NodeId};

    #[test]
    fn identity_and_active_relu() {
        let id = ops::identity::<f64>(2).unwrap();
        let p = affine_piece(&id, NodeId(0), &[1.0, 2.0]).unwrap();
        assert_eq!(p, Affine::identity(2));

        let m = Affine::new(Matrix::from_f64_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap(), vec![1.0, 3.0]).unwrap();
        let net = ops::series(&id, BasisElement::relu_affine(m.clone())).unwrap();
        let p = affine_piece(&net, net.output(), &[1.0, 0.5]).unwrap();
        assert_eq!(p, m);
    }

    #[test]
    fn transforms_are_rejected() {
        let id = ops::identity::<f64>(2).unwrap();
        let net = ops::series(&id, BasisElement::Transform(TransformSpec::Tanh)).unwrap();
        assert!(matches!(
            affine_piece(&net, net.output(), &[0.0, 1.0]),
            Err(Error::NotPiecewiseAffine(_))
        ));
        let relu = ops::series(&id, BasisElement::Activation(Activation::relu())).unwrap();
        assert!(affine_piece(&relu, relu.output(), &[0.0, 1.0]).is_ok());
    }
}
