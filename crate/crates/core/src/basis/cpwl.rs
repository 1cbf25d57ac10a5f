//! Point-wise continuous piecewise-linear activations written as sums of
//! shifted ReLUs:
//!
//! ```text
//! ρ(x) = Σᵢ rᵢ·ReLU(x − aᵢ) + Σⱼ lⱼ·ReLU(tⱼ − x)
//! ```
//!
//! A right piece `(rᵢ, aᵢ)` is active when `x > aᵢ`, a left piece `(lⱼ, tⱼ)`
//! when `x < tⱼ`. Both tests are strict, so points on a breakpoint belong to
//! the side where the piece is inactive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Upper limit on pieces so that a coordinate's active set fits in a `u32`.
pub const MAX_PIECES: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct CpwlSpec<T> {
    /// `(slope, breakpoint)` pairs of the `ReLU(x − a)` terms.
    #[serde(default)]
    pub right: Vec<(T, T)>,
    /// `(slope, breakpoint)` pairs of the `ReLU(t − x)` terms.
    #[serde(default)]
    pub left: Vec<(T, T)>,
}

/// Local linearization of a point-wise activation at one input vector.
///
/// `ρ(x) = slopes ∘ x + offsets` holds entrywise. The offsets vanish when every
/// breakpoint sits at zero, which is the case for ReLU, |x| and leaky ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct UnRectifyingPattern<T> {
    /// Diagonal of the un-rectifying matrix.
    pub entries: Vec<T>,
    pub offsets: Vec<T>,
    /// Active-piece bitmask per coordinate (right pieces first, then left).
    pub states: Vec<u32>,
}

impl<T: Scalar> CpwlSpec<T> {
    pub fn new(right: Vec<(T, T)>, left: Vec<(T, T)>) -> Result<Self> {
        let spec = CpwlSpec { right, left };
        spec.validate()?;
        Ok(spec)
    }

    pub fn relu() -> Self {
        CpwlSpec {
            right: vec![(T::one(), T::zero())],
            left: vec![],
        }
    }

    /// `|x| = ReLU(x) + ReLU(−x)`
    pub fn abs() -> Self {
        CpwlSpec {
            right: vec![(T::one(), T::zero())],
            left: vec![(T::one(), T::zero())],
        }
    }

    pub fn leaky_relu(negative_slope: T) -> Self {
        CpwlSpec {
            right: vec![(T::one(), T::zero())],
            left: vec![(-negative_slope, T::zero())],
        }
    }

    /// `clamp(x, −1, 1)`
    pub fn hard_tanh() -> Self {
        let one = T::one();
        CpwlSpec {
            right: vec![(one, T::zero()), (-one, one)],
            left: vec![(one, -one), (-one, T::zero())],
        }
    }

    /// `x = ReLU(x) − ReLU(−x)`; lets a channel pass through unchanged.
    pub fn linear() -> Self {
        CpwlSpec {
            right: vec![(T::one(), T::zero())],
            left: vec![(-T::one(), T::zero())],
        }
    }

    pub fn piece_count(&self) -> usize {
        self.right.len() + self.left.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.piece_count();
        if m == 0 {
            return Err(Error::InvalidActivation(
                "piecewise-linear activation needs at least one piece".into(),
            ));
        }
        if m > MAX_PIECES {
            return Err(Error::InvalidActivation(format!(
                "{m} pieces exceeds the supported maximum of {MAX_PIECES}"
            )));
        }
        let finite = self
            .right
            .iter()
            .chain(&self.left)
            .all(|(s, b)| s.is_finite() && b.is_finite());
        if !finite {
            return Err(Error::InvalidActivation(
                "slopes and breakpoints must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the ReLU sum directly.
    #[inline]
    pub fn value(&self, x: T) -> T {
        let zero = T::zero();
        let r = self
            .right
            .iter()
            .fold(zero, |acc, &(s, a)| acc + s * (x - a).max(zero));
        self.left
            .iter()
            .fold(r, |acc, &(s, t)| acc + s * (t - x).max(zero))
    }

    pub fn eval(&self, x: T) -> Result<T> {
        if !x.is_finite() {
            return Err(Error::NonFinite("activation input".into()));
        }
        Ok(self.value(x))
    }

    #[inline]
    pub fn state(&self, x: T) -> u32 {
        let mut bits = 0u32;
        for (i, &(_, a)) in self.right.iter().enumerate() {
            if x > a {
                bits |= 1 << i;
            }
        }
        let shift = self.right.len();
        for (j, &(_, t)) in self.left.iter().enumerate() {
            if x < t {
                bits |= 1 << (shift + j);
            }
        }
        bits
    }

    /// Slope and intercept of the affine piece selected by `state`.
    pub fn piece(&self, state: u32) -> (T, T) {
        let mut slope = T::zero();
        let mut offset = T::zero();
        for (i, &(r, a)) in self.right.iter().enumerate() {
            if state & (1 << i) != 0 {
                slope = slope + r;
                offset = offset - r * a;
            }
        }
        let shift = self.right.len();
        for (j, &(l, t)) in self.left.iter().enumerate() {
            if state & (1 << (shift + j)) != 0 {
                slope = slope - l;
                offset = offset + l * t;
            }
        }
        (slope, offset)
    }

    pub fn unrectify(&self, x: &[T]) -> UnRectifyingPattern<T> {
        let mut entries = Vec::with_capacity(x.len());
        let mut offsets = Vec::with_capacity(x.len());
        let mut states = Vec::with_capacity(x.len());
        for &v in x {
            let s = self.state(v);
            let (slope, offset) = self.piece(s);
            entries.push(slope);
            offsets.push(offset);
            states.push(s);
        }
        UnRectifyingPattern {
            entries,
            offsets,
            states,
        }
    }

    /// Bound on `|D_x|` over all inputs, i.e. the largest absolute pattern entry.
    ///
    /// Entries are constant between breakpoints, so one probe per interval plus
    /// the breakpoints themselves covers every attainable value.
    pub fn activation_bound(&self) -> T {
        let mut points: Vec<T> = self
            .right
            .iter()
            .chain(&self.left)
            .map(|&(_, b)| b)
            .collect();
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        points.dedup();
        let one = T::one();
        let two = one + one;
        let mut probes = Vec::with_capacity(2 * points.len() + 1);
        probes.push(points[0] - one);
        for w in points.windows(2) {
            probes.push((w[0] + w[1]) / two);
        }
        probes.push(points[points.len() - 1] + one);
        probes.extend_from_slice(&points);
        probes
            .into_iter()
            .map(|p| self.piece(self.state(p)).0.abs())
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Scalar>(&self) -> CpwlSpec<U> {
        let conv = |v: &[(T, T)]| {
            v.iter()
                .map(|&(s, b)| (U::lit(s.as_f64()), U::lit(b.as_f64())))
                .collect()
        };
        CpwlSpec {
            right: conv(&self.right),
            left: conv(&self.left),
        }
    }
}

pub fn cpwl_eval<T: Scalar>(spec: &CpwlSpec<T>, x: T) -> Result<T> {
    spec.eval(x)
}

pub fn unrectify<T: Scalar>(spec: &CpwlSpec<T>, x: &[T]) -> UnRectifyingPattern<T> {
    spec.unrectify(x)
}

pub fn activation_bound<T: Scalar>(spec: &CpwlSpec<T>) -> T {
    spec.activation_bound()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values_and_pattern() {
        let relu = CpwlSpec::<f64>::relu();
        assert_eq!(relu.eval(-2.0).unwrap(), 0.0);
        assert_eq!(relu.eval(3.0).unwrap(), 3.0);
        let p = relu.unrectify(&[-1.0, 2.0]);
        assert_eq!(p.entries, vec![0.0, 1.0]);
        assert_eq!(p.states, vec![0, 1]);
        // boundary belongs to the inactive side
        assert_eq!(relu.unrectify(&[0.0]).entries, vec![0.0]);
    }

    #[test]
    fn abs_pattern_reproduces_value() {
        let abs = CpwlSpec::<f64>::abs();
        assert_eq!(abs.eval(-2.0).unwrap(), 2.0);
        let p = abs.unrectify(&[-2.0, 3.0]);
        assert_eq!(p.entries, vec![-1.0, 1.0]);
        assert_eq!(p.offsets, vec![0.0, 0.0]);
    }

    #[test]
    fn hard_tanh_matches_clamp() {
        let h = CpwlSpec::<f64>::hard_tanh();
        for i in -400..=400 {
            let x = i as f64 / 100.0;
            assert!((h.value(x) - x.clamp(-1.0, 1.0)).abs() <= 1e-12, "x = {x}");
        }
    }

    #[test]
    fn named_bounds() {
        assert_eq!(CpwlSpec::<f64>::relu().activation_bound(), 1.0);
        assert_eq!(CpwlSpec::<f64>::leaky_relu(0.1).activation_bound(), 1.0);
        assert_eq!(CpwlSpec::<f64>::abs().activation_bound(), 1.0);
        assert_eq!(CpwlSpec::<f64>::hard_tanh().activation_bound(), 1.0);
        let steep = CpwlSpec::<f64>::new(vec![(3.0, 1.0)], vec![(-0.5, -1.0)]).unwrap();
        assert_eq!(steep.activation_bound(), 3.0);
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(CpwlSpec::<f64>::new(vec![], vec![]).is_err());
        assert!(CpwlSpec::<f64>::new(vec![(f64::NAN, 0.0)], vec![]).is_err());
        assert!(CpwlSpec::<f64>::new(vec![(1.0, 0.0); 33], vec![]).is_err());
        assert!(CpwlSpec::<f64>::relu().eval(f64::INFINITY).is_err());
    }
}
