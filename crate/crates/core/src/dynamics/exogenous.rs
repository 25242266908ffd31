use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Axis-aligned box `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRaw")]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct BoxRaw {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxRaw> for BoxBounds {
    type Error = DynamicsError;
    fn try_from(r: BoxRaw) -> Result<Self, DynamicsError> {
        BoxBounds::new(r.lower, r.upper)
    }
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DynamicsError> {
        if lower.len() != upper.len() {
            return Err(DynamicsError::Dimension {
                what: "upper bounds",
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if let Some(i) = (0..lower.len())
            .find(|&i| !(lower[i].is_finite() && upper[i].is_finite() && lower[i] <= upper[i]))
        {
            return Err(DynamicsError::InvalidParameter(format!(
                "box coordinate {i}: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        Ok(BoxBounds { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    /// One point drawn uniformly from the box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if l == u { l } else { rng.gen_range(l..=u) })
            .collect()
    }
}

/// Adversary-chosen parameters, always stored inside their box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exogenous {
    value: Vec<f64>,
    bounds: BoxBounds,
}

impl Exogenous {
    /// Projects `value` onto `bounds`.
    pub fn new(value: &[f64], bounds: BoxBounds) -> Result<Self, DynamicsError> {
        if value.len() != bounds.dim() {
            return Err(DynamicsError::Dimension {
                what: "exogenous coordinates",
                expected: bounds.dim(),
                found: value.len(),
            });
        }
        Ok(Exogenous {
            value: bounds.project(value),
            bounds,
        })
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn construction_clamps() {
        let b = BoxBounds::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let x = Exogenous::new(&[2.0, -3.0], b.clone()).unwrap();
        assert_eq!(x.value(), &[1.0, -1.0]);
        assert!(b.contains(x.value()));
        assert!(Exogenous::new(&[0.0], b).is_err());
    }

    #[test]
    fn invalid_boxes() {
        assert!(BoxBounds::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxBounds::new(vec![1.0], vec![]).is_err());
        assert!(serde_json::from_str::<BoxBounds>(r#"{"lower":[2],"upper":[1]}"#).is_err());
    }

    #[test]
    fn degenerate_box_samples_corner() {
        let b = BoxBounds::new(vec![3.0, -2.0], vec![3.0, -2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            assert_eq!(b.sample(&mut rng), vec![3.0, -2.0]);
        }
    }
}
