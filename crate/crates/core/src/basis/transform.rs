//! Lipschitz non-linear transforms. These do not partition the input space;
//! they enter the analysis only through their Lipschitz bound.

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub enum TransformSpec<T> {
    /// `xᵢ ↦ exp(λxᵢ) / Σⱼ exp(λxⱼ)`
    Softmax { lambda: T },
    Sigmoid,
    Tanh,
}

impl<T: Scalar> TransformSpec<T> {
    pub fn softmax(lambda: T) -> Result<Self> {
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(Error::InvalidActivation(format!(
                "softmax inverse temperature must be positive and finite, got {lambda}"
            )));
        }
        Ok(TransformSpec::Softmax { lambda })
    }

    /// ℓ₂ Lipschitz constant used by the stability analysis.
    pub fn lipschitz_bound(&self) -> T {
        match self {
            TransformSpec::Softmax { lambda } => *lambda,
            TransformSpec::Sigmoid | TransformSpec::Tanh => T::one(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransformSpec::Softmax { .. } => "softmax",
            TransformSpec::Sigmoid => "sigmoid",
            TransformSpec::Tanh => "tanh",
        }
    }

    pub(crate) fn apply_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        match self {
            TransformSpec::Softmax { lambda } => {
                let m = x.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                out.extend(x.iter().map(|&v| (*lambda * (v - m)).exp()));
                let total: T = out.iter().copied().sum();
                for v in out.iter_mut() {
                    *v = *v / total;
                }
            }
            TransformSpec::Sigmoid => {
                out.extend(x.iter().map(|&v| T::one() / (T::one() + (-v).exp())));
            }
            TransformSpec::Tanh => out.extend(x.iter().map(|v| v.tanh())),
        }
    }

    pub fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        if !all_finite(x) {
            return Err(Error::NonFinite("transform input".into()));
        }
        let mut out = Vec::with_capacity(x.len());
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub fn cast<U: Scalar>(&self) -> TransformSpec<U> {
        match self {
            TransformSpec::Softmax { lambda } => TransformSpec::Softmax {
                lambda: U::lit(lambda.as_f64()),
            },
            TransformSpec::Sigmoid => TransformSpec::Sigmoid,
            TransformSpec::Tanh => TransformSpec::Tanh,
        }
    }
}

pub fn transform_eval<T: Scalar>(t: &TransformSpec<T>, x: &[T]) -> Result<Vec<T>> {
    t.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_symmetry_and_overflow() {
        let s = TransformSpec::<f64>::softmax(1.0).unwrap();
        assert_eq!(s.eval(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let big = s.eval(&[1000.0, 999.0, -1000.0]).unwrap();
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(big.iter().all(|v| v.is_finite()));
        assert!(TransformSpec::<f64>::softmax(0.0).is_err());
    }

    #[test]
    fn tanh_fixes_zero() {
        assert_eq!(TransformSpec::<f64>::Tanh.eval(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(TransformSpec::<f64>::Sigmoid.eval(&[f64::NAN]).is_err());
    }
}
