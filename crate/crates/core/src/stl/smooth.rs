//! Log-sum-exp relaxations of `max` and `min`.

use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;

use super::StlError;

/// Sharpness of the log-sum-exp relaxation; larger is closer to exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    k: f64,
}

impl SmoothingConfig {
    pub fn new(k: f64) -> Result<Self, StlError> {
        if k > 0.0 && k.is_finite() {
            Ok(SmoothingConfig { k })
        } else {
            Err(StlError::InvalidSmoothing(k))
        }
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// `(1/k)·log Σ exp(k·xᵢ)`, shifted by the largest element before exponentiating.
pub fn smooth_max<T: Scalar>(xs: &[T], k: f64) -> Result<T, StlError> {
    if xs.is_empty() {
        return Err(StlError::EmptyOperands);
    }
    let cfg = SmoothingConfig::new(k)?;
    Ok(lse(xs, cfg.k))
}

/// `-smooth_max(-xs)`.
pub fn smooth_min<T: Scalar>(xs: &[T], k: f64) -> Result<T, StlError> {
    if xs.is_empty() {
        return Err(StlError::EmptyOperands);
    }
    let cfg = SmoothingConfig::new(k)?;
    let neg: Vec<T> = xs.iter().map(|&x| -x).collect();
    Ok(-lse(&neg, cfg.k))
}

fn lse<T: Scalar>(xs: &[T], k: f64) -> T {
    if xs.len() == 1 {
        return xs[0];
    }
    let shift = xs
        .iter()
        .map(Scalar::value)
        .fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<T> = xs
        .iter()
        .map(|&x| T::linear_combination(&[(x, k)], -k * shift).exp())
        .collect();
    T::linear_combination(&[(T::sum(&terms).ln(), 1.0 / k)], shift)
}

/// Two-operand log-sum-exp, `hi + log(1 + exp(k·(lo - hi)))/k`.
pub(crate) fn lse2<T: Scalar>(a: T, b: T, k: f64) -> T {
    let (hi, lo) = if a.value() >= b.value() {
        (a, b)
    } else {
        (b, a)
    };
    let gap = T::linear_combination(&[(lo, k), (hi, -k)], 0.0);
    let soft = (gap.exp() + 1.0).ln();
    T::linear_combination(&[(hi, 1.0), (soft, 1.0 / k)], 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad;

    #[test]
    fn single_element_is_identity() {
        for &(a, k) in &[(3.5, 1.0), (-2.0, 100.0), (0.0, 0.01)] {
            assert_eq!(smooth_max(&[a], k).unwrap(), a);
            assert_eq!(smooth_min(&[a], k).unwrap(), a);
        }
    }

    #[test]
    fn two_zeros_give_ln2() {
        let v = smooth_max(&[0.0, 0.0], 1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn large_k_does_not_overflow() {
        let v = smooth_max(&[1000.0, 999.0], 1e4).unwrap();
        assert!((v - 1000.0).abs() < 1e-12);
        let w = smooth_min(&[-1000.0, 5.0], 1e4).unwrap();
        assert!((w + 1000.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            smooth_max::<f64>(&[], 1.0),
            Err(StlError::EmptyOperands)
        ));
        assert!(matches!(
            smooth_min(&[1.0], 0.0),
            Err(StlError::InvalidSmoothing(_))
        ));
        assert!(SmoothingConfig::new(-1.0).is_err());
    }

    #[test]
    fn pairwise_matches_nary() {
        for &(a, b, k) in &[(0.3, -0.2, 5.0), (2.0, 2.0, 100.0), (-1.0, 4.0, 0.5)] {
            let n = smooth_max(&[a, b], k).unwrap();
            assert!((lse2(a, b, k) - n).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_softmax() {
        let xs = [0.3, -1.2, 0.9, 0.1];
        let (_, g) = grad(|x| smooth_max(x, 5.0).unwrap(), &xs).unwrap();
        let z: f64 = xs.iter().map(|x| (5.0 * x).exp()).sum();
        for (gi, x) in g.iter().zip(xs) {
            assert!((gi - (5.0 * x).exp() / z).abs() < 1e-12);
        }
    }
}
