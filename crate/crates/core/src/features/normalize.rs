use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FeatureVector;

/// Per-dimension min-max scaling fit on training vectors.
///
/// Training data maps into `[0, 1]`; other data may fall outside. Dimensions
/// that are constant in training map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a FeatureVector>) -> Result<Self> {
        let mut iter = train.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::invalid("cannot fit a normalizer on zero vectors"))?;
        let mut min = first.values().to_vec();
        let mut max = min.clone();
        for fv in iter {
            if fv.dim() != min.len() {
                return Err(Error::DimensionMismatch {
                    expected: min.len(),
                    got: fv.dim(),
                });
            }
            for ((lo, hi), v) in min.iter_mut().zip(max.iter_mut()).zip(fv.values()) {
                *lo = lo.min(*v);
                *hi = hi.max(*v);
            }
        }
        Ok(Normalizer { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn apply_values(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: values.len(),
            });
        }
        Ok(values
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(v, (lo, hi))| {
                let span = hi - lo;
                if span > 0.0 {
                    (v - lo) / span
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn apply(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        fv.with_values(self.apply_values(fv.values())?, fv.extractor())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Split, Wear};
    use crate::features::Extractor;

    fn fv(v: Vec<f64>, split: Split) -> FeatureVector {
        FeatureVector::new("x", v, Extractor::Latent, 70.0, split, Wear::Low).unwrap()
    }

    #[test]
    fn train_maps_into_unit_box() {
        let train = [
            fv(vec![1.0, 5.0, 2.0], Split::Train),
            fv(vec![3.0, 5.0, -2.0], Split::Train),
        ];
        let norm = Normalizer::fit(&train).unwrap();
        assert_eq!(norm.apply(&train[0]).unwrap().values(), &[0.0, 0.0, 1.0]);
        assert_eq!(norm.apply(&train[1]).unwrap().values(), &[1.0, 0.0, 0.0]);
        // Out-of-range test data is not clipped.
        let test = fv(vec![5.0, 9.0, 0.0], Split::Test);
        assert_eq!(norm.apply(&test).unwrap().values(), &[2.0, 0.0, 0.5]);
    }

    #[test]
    fn applying_never_changes_the_fit() {
        let train = [fv(vec![0.0, 1.0], Split::Train), fv(vec![2.0, 3.0], Split::Train)];
        let norm = Normalizer::fit(&train).unwrap();
        let snapshot = norm.clone();
        let test = fv(vec![100.0, -100.0], Split::Test);
        let first = norm.apply(&test).unwrap();
        let second = norm.apply(&test).unwrap();
        assert_eq!(norm, snapshot);
        assert_eq!(first, second);
    }

    #[test]
    fn errors() {
        assert!(Normalizer::fit(std::iter::empty()).is_err());
        let train = [fv(vec![0.0, 1.0], Split::Train), fv(vec![2.0], Split::Train)];
        assert!(Normalizer::fit(&train).is_err());
    }
}
