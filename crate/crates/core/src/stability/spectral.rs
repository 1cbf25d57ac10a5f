use crate::error::{Error, Result};
use crate::graph::random::{gaussian_vec, rng};
use crate::matrix::Matrix;
use crate::scalar::{l2_norm, Scalar};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 1000;

// Power iteration on WᵀW from `v`. Stops when the eigen-residual
// ‖WᵀWv − λv‖ falls below tol·λ or the estimate stops moving.
fn power_iterate<T: Scalar>(w: &Matrix<T>, mut v: Vec<T>) -> T {
    let norm = l2_norm(&v);
    if norm.is_zero() {
        return T::zero();
    }
    v.iter_mut().for_each(|x| *x = *x / norm);
    let tol = T::lit(POWER_TOLERANCE);
    let mut sigma = T::zero();
    let mut wv = Vec::with_capacity(w.rows());
    for _ in 0..POWER_MAX_ITERATIONS {
        w.mul_vec_into(&v, &mut wv);
        let s = l2_norm(&wv);
        if s.is_zero() {
            return sigma;
        }
        let u = w.tr_mul_vec(&wv);
        let lambda = s * s;
        let residual = u
            .iter()
            .zip(&v)
            .map(|(&a, &b)| (a - lambda * b) * (a - lambda * b))
            .sum::<T>()
            .sqrt();
        let moved = (s - sigma).abs();
        sigma = sigma.max(s);
        if residual <= tol * lambda || moved <= T::epsilon() * s {
            break;
        }
        let un = l2_norm(&u);
        v.iter_mut().zip(&u).for_each(|(x, &y)| *x = y / un);
    }
    sigma
}

/// Largest singular value by power iteration on `WᵀW`.
///
/// Runs from the all-ones vector and again from a fixed pseudo-random
/// vector, returning the larger estimate; the second start covers matrices
/// whose top singular vector is orthogonal to the all-ones vector.
///
/// The estimate never exceeds the true norm. When the top two singular
/// values are closer than about `1e-3` relative, the iteration budget may end
/// before full accuracy; the error is then below the gap between them.
pub fn spectral_norm<T: Scalar>(w: &Matrix<T>) -> Result<T> {
    if !w.is_finite() {
        return Err(Error::NonFinite("matrix passed to spectral_norm".into()));
    }
    if w.is_zero() {
        return Ok(T::zero());
    }
    let ones = vec![T::one(); w.cols()];
    let fixed: Vec<T> = gaussian_vec(&mut rng(0x5e_ed0f_5eed), w.cols(), 1.0);
    Ok(power_iterate(w, ones).max(power_iterate(w, fixed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_norms() {
        assert_eq!(spectral_norm(&Matrix::<f64>::identity(4)).unwrap(), 1.0);
        let d = Matrix::<f64>::diag(&[3.0, -4.0]);
        assert!((spectral_norm(&d).unwrap() - 4.0).abs() < 1e-12);
        // all-ones start lies in the kernel
        let k = Matrix::from_f64_rows(&[vec![1.0, -1.0]]).unwrap();
        assert!((spectral_norm::<f64>(&k).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(spectral_norm(&Matrix::<f64>::zeros(2, 3)).unwrap(), 0.0);
        let bad = Matrix::new(1, 1, vec![f64::NAN]).unwrap();
        assert!(spectral_norm(&bad).is_err());
    }
}
