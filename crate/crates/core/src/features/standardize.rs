use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Per-feature z-score fitted on a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Sample standard deviation; zero marks a constant feature.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(fm: &FeatureMatrix) -> Result<Self> {
        Self::fit_matrix(&fm.features)
    }

    pub fn fit_matrix(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n == 0 {
            return Err(Error::EmptyInput("standardizer fit"));
        }
        let d = x.cols();
        let mut mean = alloc::vec![0.0; d];
        for r in x.row_iter() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut std = alloc::vec![0.0; d];
        if n > 1 {
            for r in x.row_iter() {
                for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            for (s, m) in std.iter_mut().zip(&mean) {
                *s = libm::sqrt(*s / (n as f64 - 1.0));
                if *s <= 1e-12 * libm::fabs(*m).max(1.0) {
                    *s = 0.0;
                }
            }
        }
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "standardizer",
                expected: self.dim(),
                found: x.cols(),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = if self.std[j] == 0.0 {
                    0.0
                } else {
                    (*v - self.mean[j]) / self.std[j]
                };
            }
        }
        Ok(out)
    }

    pub fn apply(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
        Ok(FeatureMatrix {
            features: self.apply_matrix(&fm.features)?,
            labels: fm.labels.clone(),
            repetitions: fm.repetitions.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        let n = rows.len();
        FeatureMatrix::new(Matrix::from_rows(rows).unwrap(), alloc::vec![1; n], alloc::vec![1; n]).unwrap()
    }

    #[test]
    fn two_point_column() {
        let data = fm(&[&[-1.0], &[1.0]]);
        let z = Standardizer::fit(&data).unwrap().apply(&data).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((z.features[(0, 0)] + h).abs() < 1e-15);
        assert!((z.features[(1, 0)] - h).abs() < 1e-15);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let data = fm(&[&[0.1, 1.0], &[0.1, 2.0], &[0.1, 4.0]]);
        let z = Standardizer::fit(&data).unwrap().apply(&data).unwrap();
        assert_eq!(z.features.column(0), alloc::vec![0.0; 3]);
    }

    #[test]
    fn own_fit_data_is_centred_and_scaled() {
        let data = fm(&[&[1.0, 10.0], &[2.0, -3.0], &[7.0, 0.5], &[-4.0, 8.0]]);
        let st = Standardizer::fit(&data).unwrap();
        let z = st.apply(&data).unwrap();
        let again = Standardizer::fit(&z).unwrap();
        for j in 0..2 {
            assert!(again.mean[j].abs() <= 1e-10);
            assert!((again.std[j] - 1.0).abs() <= 1e-10);
        }
        let zz = again.apply(&z).unwrap();
        assert!(zz.features.max_abs_diff(&z.features) <= 1e-10);
    }

    #[test]
    fn dimension_mismatch_and_empty_fit() {
        let st = Standardizer::fit(&fm(&[&[1.0, 2.0]])).unwrap();
        assert!(matches!(st.apply(&fm(&[&[1.0]])), Err(Error::DimensionMismatch { .. })));
        assert!(Standardizer::fit(&FeatureMatrix::empty(2)).is_err());
    }
}
