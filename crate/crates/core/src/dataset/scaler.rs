use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Per-feature min–max scaler. Fitted once on training rows; the fitted bounds
/// cannot be changed afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Scaler {
    /// Fits bounds over every row yielded by `rows`.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = rows.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Empty("cannot fit a scaler on zero training rows".into()))?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in iter {
            if row.len() != min.len() {
                return Err(Error::shape(format!("row width {} != {}", row.len(), min.len())));
            }
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Fits over the rows of every matrix.
    pub fn fit_matrices<'a, I>(matrices: I) -> Result<Self>
    where
        I: IntoIterator<Item = ArrayView2<'a, f64>>,
    {
        let mut rows: Vec<&'a [f64]> = Vec::new();
        for m in matrices {
            let width = m.ncols();
            let slice = m
                .to_slice()
                .ok_or_else(|| Error::shape("feature matrices must be in standard layout"))?;
            rows.extend(slice.chunks(width));
        }
        Self::fit(rows)
    }

    /// Restores a scaler from stored bounds.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn from_bounds(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::shape("scaler bounds differ in length"));
        }
        if min.iter().zip(&max).any(|(a, b)| !(a <= b)) {
            return Err(Error::domain("scaler min must not exceed max"));
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// `(x - min) / (max - min)`, unclamped; constant features map to 0.
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range == 0.0 {
            0.0
        } else {
            (x - self.min[j]) / range
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.width() {
            return Err(Error::shape(format!("row width {} != scaler width {}", row.len(), self.width())));
        }
        Ok(row.iter().enumerate().map(|(j, &x)| self.transform_value(j, x)).collect())
    }

    pub fn transform(&self, matrix: ArrayView2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.width() {
            return Err(Error::shape(format!(
                "matrix width {} != scaler width {}",
                matrix.ncols(),
                self.width()
            )));
        }
        let mut out = matrix.to_owned();
        for mut row in out.rows_mut() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = self.transform_value(j, *x);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn affine_map_without_clamping() {
        let s = Scaler::fit([[2.0, 7.0].as_slice(), [4.0, 7.0].as_slice()]).unwrap();
        assert_eq!(s.transform_value(0, 3.0), 0.5);
        assert_eq!(s.transform_value(0, 6.0), 2.0);
        assert_eq!(s.transform_value(0, 0.0), -1.0);
        assert_eq!(s.transform_value(1, 123.0), 0.0);
    }

    #[test]
    fn empty_fit_fails() {
        assert!(matches!(Scaler::fit(std::iter::empty::<&[f64]>()), Err(Error::Empty(_))));
    }

    #[test]
    fn matrix_transform() {
        let train = array![[0.0, 10.0], [2.0, 20.0]];
        let s = Scaler::fit_matrices([train.view()]).unwrap();
        let t = s.transform(array![[1.0, 15.0], [4.0, 30.0]].view()).unwrap();
        assert_eq!(t, array![[0.5, 0.5], [2.0, 2.0]]);
        assert!(s.transform(array![[1.0]].view()).is_err());
    }
}
