//! Elements of the basis set `{I, L, M, ρ, ρM, σ, σM}` that label the arcs of
//! a network graph.

mod cpwl;
mod pool;
mod transform;

pub use cpwl::{activation_bound, cpwl_eval, unrectify, CpwlSpec, UnRectifyingPattern, MAX_PIECES};
pub use pool::{maxlu2, maxpool_as_relu_network, MaxLu2Pattern, PoolBlocks};
pub use transform::{transform_eval, TransformSpec};

use crate::error::{Error, Result};
use crate::matrix::{Affine, Matrix};
use crate::scalar::Scalar;

/// Activations that can be written as ReLU networks.
#[derive(Clone, Debug, PartialEq)]
pub enum Activation<T> {
    /// The same point-wise CPWL function on every coordinate.
    Pointwise(CpwlSpec<T>),
    /// Block maximum; ties go to the first position in the block.
    MaxPool(PoolBlocks),
    /// `ReLU ∘ max` per block.
    MaxLu(PoolBlocks),
}

/// Un-rectified form of an activation at one input.
#[derive(Clone, Debug, PartialEq)]
pub enum UnRectified<T> {
    Pointwise(UnRectifyingPattern<T>),
    /// Input coordinate selected by each block, `None` for a dead MaxLU unit.
    Pool(Vec<Option<usize>>),
}

impl<T: Scalar> UnRectified<T> {
    /// The local affine map `x ↦ D x + c` as an [`Affine`] over `in_dim` inputs.
    pub fn local_map(&self, in_dim: usize) -> Affine<T> {
        match self {
            UnRectified::Pointwise(p) => Affine {
                weight: Matrix::diag(&p.entries),
                bias: p.offsets.clone(),
            },
            UnRectified::Pool(sel) => Affine::linear(Matrix::from_fn(sel.len(), in_dim, |r, c| {
                if sel[r] == Some(c) {
                    T::one()
                } else {
                    T::zero()
                }
            })),
        }
    }

    /// Applies the local map to an affine function of the network input.
    pub fn compose(&self, inner: &Affine<T>) -> Affine<T> {
        let cols = inner.weight.cols();
        match self {
            UnRectified::Pointwise(p) => {
                let weight = Matrix::from_fn(inner.weight.rows(), cols, |r, c| {
                    p.entries[r] * inner.weight.get(r, c)
                });
                let bias = inner
                    .bias
                    .iter()
                    .zip(p.entries.iter().zip(&p.offsets))
                    .map(|(&b, (&s, &o))| s * b + o)
                    .collect();
                Affine { weight, bias }
            }
            UnRectified::Pool(sel) => {
                let weight = Matrix::from_fn(sel.len(), cols, |r, c| match sel[r] {
                    Some(i) => inner.weight.get(i, c),
                    None => T::zero(),
                });
                let bias = sel
                    .iter()
                    .map(|s| s.map_or(T::zero(), |i| inner.bias[i]))
                    .collect();
                Affine { weight, bias }
            }
        }
    }
}

impl<T: Scalar> Activation<T> {
    pub fn relu() -> Self {
        Activation::Pointwise(CpwlSpec::relu())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Activation::Pointwise(spec) => spec.validate(),
            Activation::MaxPool(p) | Activation::MaxLu(p) => PoolBlocks::new(p.blocks.clone()).map(|_| ()),
        }
    }

    pub fn output_dim(&self, in_dim: usize) -> Result<usize> {
        match self {
            Activation::Pointwise(_) => Ok(in_dim),
            Activation::MaxPool(p) | Activation::MaxLu(p) => {
                if p.max_index() >= in_dim {
                    return Err(Error::dims(
                        "pooling block index bound (input dimension)",
                        p.max_index() + 1,
                        in_dim,
                    ));
                }
                Ok(p.len())
            }
        }
    }

    /// Number of code symbols contributed for an input of `in_dim`.
    pub fn code_len(&self, in_dim: usize) -> usize {
        match self {
            Activation::Pointwise(_) => in_dim,
            Activation::MaxPool(p) | Activation::MaxLu(p) => p.len(),
        }
    }

    #[inline]
    pub(crate) fn apply_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        match self {
            Activation::Pointwise(spec) => out.extend(x.iter().map(|&v| spec.value(v))),
            Activation::MaxPool(p) => out.extend(p.blocks.iter().map(|b| x[b[pool::argmax(x, b)]])),
            Activation::MaxLu(p) => out.extend(
                p.blocks
                    .iter()
                    .map(|b| pool::maxlu_select(x, b).map_or(T::zero(), |k| x[b[k]])),
            ),
        }
    }

    /// Appends the discrete state of every output unit: the active-piece mask
    /// for point-wise units, `1 + position` of the selected entry for pooling
    /// units (0 for a dead MaxLU unit).
    #[inline]
    pub(crate) fn encode_into(&self, x: &[T], symbols: &mut Vec<u32>) {
        match self {
            Activation::Pointwise(spec) => symbols.extend(x.iter().map(|&v| spec.state(v))),
            Activation::MaxPool(p) => {
                symbols.extend(p.blocks.iter().map(|b| 1 + pool::argmax(x, b) as u32))
            }
            Activation::MaxLu(p) => symbols.extend(
                p.blocks
                    .iter()
                    .map(|b| pool::maxlu_select(x, b).map_or(0, |k| 1 + k as u32)),
            ),
        }
    }

    pub fn unrectify(&self, x: &[T]) -> UnRectified<T> {
        match self {
            Activation::Pointwise(spec) => UnRectified::Pointwise(spec.unrectify(x)),
            Activation::MaxPool(p) => {
                UnRectified::Pool(p.blocks.iter().map(|b| Some(b[pool::argmax(x, b)])).collect())
            }
            Activation::MaxLu(p) => UnRectified::Pool(
                p.blocks
                    .iter()
                    .map(|b| pool::maxlu_select(x, b).map(|k| b[k]))
                    .collect(),
            ),
        }
    }

    /// Bound on the spectral norm of the un-rectifying matrix over all inputs.
    pub fn bound(&self) -> T {
        match self {
            Activation::Pointwise(spec) => spec.activation_bound(),
            // Rows of the selection matrix are unit vectors; a column shared by
            // k blocks contributes a √k singular value.
            Activation::MaxPool(p) | Activation::MaxLu(p) => T::lit(p.multiplicity() as f64).sqrt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Pointwise(_) => "cpwl",
            Activation::MaxPool(_) => "maxpool",
            Activation::MaxLu(_) => "maxlu",
        }
    }

    pub fn cast<U: Scalar>(&self) -> Activation<U> {
        match self {
            Activation::Pointwise(s) => Activation::Pointwise(s.cast()),
            Activation::MaxPool(p) => Activation::MaxPool(p.clone()),
            Activation::MaxLu(p) => Activation::MaxLu(p.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BasisElement<T> {
    Identity,
    Linear(Matrix<T>),
    Affine(Affine<T>),
    Activation(Activation<T>),
    /// `ρ ∘ M`
    ActivationAffine(Activation<T>, Affine<T>),
    Transform(TransformSpec<T>),
    /// `σ ∘ M`
    TransformAffine(TransformSpec<T>, Affine<T>),
}

impl<T: Scalar> BasisElement<T> {
    pub fn relu_affine(affine: Affine<T>) -> Self {
        BasisElement::ActivationAffine(Activation::relu(), affine)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BasisElement::Identity => "identity",
            BasisElement::Linear(_) => "linear",
            BasisElement::Affine(_) => "affine",
            BasisElement::Activation(_) => "activation",
            BasisElement::ActivationAffine(..) => "activation_affine",
            BasisElement::Transform(_) => "transform",
            BasisElement::TransformAffine(..) => "transform_affine",
        }
    }

    pub fn activation(&self) -> Option<&Activation<T>> {
        match self {
            BasisElement::Activation(a) | BasisElement::ActivationAffine(a, _) => Some(a),
            _ => None,
        }
    }

    pub fn is_transform(&self) -> bool {
        matches!(self, BasisElement::Transform(_) | BasisElement::TransformAffine(..))
    }

    pub fn affine_part(&self) -> Option<&Affine<T>> {
        match self {
            BasisElement::Affine(m)
            | BasisElement::ActivationAffine(_, m)
            | BasisElement::TransformAffine(_, m) => Some(m),
            _ => None,
        }
    }

    /// The weight matrix `W` of the element, if it has one.
    pub fn linear_part(&self) -> Option<&Matrix<T>> {
        match self {
            BasisElement::Linear(w) => Some(w),
            _ => self.affine_part().map(|m| &m.weight),
        }
    }

    /// Scales the weight matrix, leaving biases untouched. No-op for elements
    /// without a weight matrix.
    pub fn scale_linear(&mut self, factor: T) {
        match self {
            BasisElement::Linear(w) => *w = w.scaled(factor),
            BasisElement::Affine(m)
            | BasisElement::ActivationAffine(_, m)
            | BasisElement::TransformAffine(_, m) => m.weight = m.weight.scaled(factor),
            _ => {}
        }
    }

    /// `d_ρ` or `d_σ` of the non-linear part.
    pub fn nonlinearity_bound(&self) -> Option<T> {
        match self {
            BasisElement::Activation(a) | BasisElement::ActivationAffine(a, _) => Some(a.bound()),
            BasisElement::Transform(t) | BasisElement::TransformAffine(t, _) => Some(t.lipschitz_bound()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.activation() {
            a.validate()?;
        }
        if let Some(m) = self.affine_part() {
            if !m.is_finite() {
                return Err(Error::NonFinite(format!("{} weights", self.kind_name())));
            }
        }
        if let BasisElement::Linear(w) = self {
            if !w.is_finite() {
                return Err(Error::NonFinite("linear weights".into()));
            }
        }
        Ok(())
    }

    /// Output dimension for an input of `in_dim`, or a mismatch error.
    pub fn output_dim(&self, in_dim: usize) -> Result<usize> {
        let check = |w: &Matrix<T>| {
            if w.cols() != in_dim {
                Err(Error::dims(
                    format!("{} input dimension", self.kind_name()),
                    w.cols(),
                    in_dim,
                ))
            } else {
                Ok(w.rows())
            }
        };
        match self {
            BasisElement::Identity | BasisElement::Transform(_) => Ok(in_dim),
            BasisElement::Linear(w) => check(w),
            BasisElement::Affine(m) | BasisElement::TransformAffine(_, m) => check(&m.weight),
            BasisElement::Activation(a) => a.output_dim(in_dim),
            BasisElement::ActivationAffine(a, m) => a.output_dim(check(&m.weight)?),
        }
    }

    /// Evaluates the element. `on_activation` sees the activation and its
    /// pre-activation input whenever the element has one.
    #[inline]
    pub(crate) fn eval_into(
        &self,
        x: &[T],
        pre: &mut Vec<T>,
        out: &mut Vec<T>,
        mut on_activation: impl FnMut(&Activation<T>, &[T]),
    ) {
        match self {
            BasisElement::Identity => {
                out.clear();
                out.extend_from_slice(x);
            }
            BasisElement::Linear(w) => w.mul_vec_into(x, out),
            BasisElement::Affine(m) => m.apply_into(x, out),
            BasisElement::Activation(a) => {
                on_activation(a, x);
                a.apply_into(x, out);
            }
            BasisElement::ActivationAffine(a, m) => {
                m.apply_into(x, pre);
                on_activation(a, pre);
                a.apply_into(pre, out);
            }
            BasisElement::Transform(t) => t.apply_into(x, out),
            BasisElement::TransformAffine(t, m) => {
                m.apply_into(x, pre);
                t.apply_into(pre, out);
            }
        }
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        let (mut pre, mut out) = (Vec::new(), Vec::new());
        self.eval_into(x, &mut pre, &mut out, |_, _| {});
        out
    }

    pub fn cast<U: Scalar>(&self) -> BasisElement<U> {
        match self {
            BasisElement::Identity => BasisElement::Identity,
            BasisElement::Linear(w) => BasisElement::Linear(w.cast()),
            BasisElement::Affine(m) => BasisElement::Affine(m.cast()),
            BasisElement::Activation(a) => BasisElement::Activation(a.cast()),
            BasisElement::ActivationAffine(a, m) => BasisElement::ActivationAffine(a.cast(), m.cast()),
            BasisElement::Transform(t) => BasisElement::Transform(t.cast()),
            BasisElement::TransformAffine(t, m) => BasisElement::TransformAffine(t.cast(), m.cast()),
        }
    }
}

/// Uniform bound `d ≥ max{d_ρ, d_σ}` over the non-linear elements given.
///
/// Without any non-linearity the bound is 1.
pub fn uniform_bound<'a, T: Scalar>(elems: impl IntoIterator<Item = &'a BasisElement<T>>) -> T {
    let bound = elems
        .into_iter()
        .filter_map(BasisElement::nonlinearity_bound)
        .fold(None, |acc: Option<T>, b| Some(acc.map_or(b, |a| a.max(b))));
    match bound {
        Some(d) => d,
        None => {
            log::warn!("no activation or transform present; using uniform bound d = 1");
            T::one()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_bound_takes_max() {
        let relu = BasisElement::<f64>::Activation(Activation::relu());
        let soft = BasisElement::Transform(TransformSpec::softmax(2.0).unwrap());
        let maxlu = BasisElement::Activation(Activation::<f64>::MaxLu(PoolBlocks::single(2)));
        assert_eq!(uniform_bound([&relu]), 1.0);
        assert_eq!(uniform_bound([&relu, &soft]), 2.0);
        assert_eq!(uniform_bound([&maxlu]), 1.0);
        assert_eq!(uniform_bound::<f64>([]), 1.0);
    }

    #[test]
    fn output_dims() {
        let w = Matrix::<f64>::zeros(3, 4);
        assert_eq!(BasisElement::Linear(w.clone()).output_dim(4).unwrap(), 3);
        assert!(matches!(
            BasisElement::Linear(w).output_dim(3),
            Err(Error::DimensionMismatch { expected: 4, found: 3, .. })
        ));
        let pool = BasisElement::<f64>::Activation(Activation::MaxPool(PoolBlocks::grid(1, 4, 4, 2).unwrap()));
        assert_eq!(pool.output_dim(16).unwrap(), 4);
        assert!(pool.output_dim(8).is_err());
    }

    #[test]
    fn pool_unrectified_matches_value() {
        let act = Activation::<f64>::MaxLu(PoolBlocks::new(vec![vec![0, 1], vec![2, 3]]).unwrap());
        let x = [0.5, 2.0, -1.0, -3.0];
        let mut out = Vec::new();
        act.apply_into(&x, &mut out);
        assert_eq!(out, vec![2.0, 0.0]);
        let d = act.unrectify(&x).local_map(4);
        assert_eq!(d.apply(&x), out);
        let mut sym = Vec::new();
        act.encode_into(&x, &mut sym);
        assert_eq!(sym, vec![2, 0]);
    }
}
