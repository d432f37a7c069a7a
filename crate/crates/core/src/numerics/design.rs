use crate::error::{invalid, Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// Row-major regression design. The first column is always the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    /// Builds a design from an intercept plus the given named columns.
    pub fn with_intercept(rows: usize, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if rows == 0 {
            return Err(invalid("design matrix needs at least one row"));
        }
        let cols = columns.len() + 1;
        let mut labels = Vec::with_capacity(cols);
        labels.push(INTERCEPT.to_string());
        for (name, col) in &columns {
            if col.len() != rows {
                return Err(invalid(format!(
                    "column {name} has {} values, expected {rows}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("column {name} contains non-finite values")));
            }
            if col.iter().all(|&v| v == 0.0) {
                return Err(Error::SingularDesign {
                    columns: vec![name.clone()],
                });
            }
            labels.push(name.clone());
        }
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            values.push(1.0);
            for (_, col) in &columns {
                values.push(col[i]);
            }
        }
        Ok(Self {
            rows,
            cols,
            values,
            labels,
        })
    }

    /// Wraps raw row-major values. The first column must be all ones.
    pub fn from_row_major(rows: usize, labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let cols = labels.len();
        if cols == 0 || rows == 0 || values.len() != rows * cols {
            return Err(invalid("design dimensions do not match the value buffer"));
        }
        if (0..rows).any(|i| values[i * cols] != 1.0) {
            return Err(invalid("first design column must be the intercept"));
        }
        for j in 1..cols {
            if (0..rows).all(|i| values[i * cols + j] == 0.0) {
                return Err(Error::SingularDesign {
                    columns: vec![labels[j].clone()],
                });
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("design contains non-finite values"));
        }
        Ok(Self {
            rows,
            cols,
            values,
            labels,
        })
    }

    /// Unchecked construction for prediction designs, where columns may be
    /// constant (e.g. the exposure forced to zero).
    pub(crate) fn raw(rows: usize, labels: Vec<String>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * labels.len());
        Self {
            rows,
            cols: labels.len(),
            values,
            labels,
        }
    }

    /// An intercept-only design.
    pub fn intercept_only(rows: usize) -> Result<Self> {
        Self::with_intercept(rows, Vec::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// `X β` for every row.
    pub fn predict(&self, coefficients: &[f64]) -> Vec<f64> {
        assert_eq!(coefficients.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), coefficients)).collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_first_and_zero_columns_rejected() {
        let d = DesignMatrix::with_intercept(3, vec![("x".into(), vec![1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(d.labels(), &["(Intercept)".to_string(), "x".to_string()]);
        assert_eq!(d.row(1), &[1.0, 2.0]);
        let err = DesignMatrix::with_intercept(2, vec![("z".into(), vec![0.0, 0.0])]).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { columns } if columns == ["z"]));
    }
}
