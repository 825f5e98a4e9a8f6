use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `n × p` observations, rows are samples.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
    centered: bool,
}

impl DataMatrix {
    /// Wraps raw (uncentered) observations.
    pub fn raw(values: Matrix) -> Result<Self> {
        check_rows(&values)?;
        Ok(DataMatrix {
            values,
            centered: false,
        })
    }

    /// Wraps observations whose columns are already known to have mean
    /// zero; the claim is checked to `1e-10` relative to the column scale.
    pub fn from_centered(values: Matrix) -> Result<Self> {
        check_rows(&values)?;
        let n = values.rows() as f64;
        for (j, col) in values.columns().iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n;
            let scale = col.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            if mean.abs() > 1e-10 * scale {
                return Err(Error::InvalidParameter(format!(
                    "column {} has mean {mean:e}",
                    j + 1
                )));
            }
        }
        Ok(DataMatrix {
            values,
            centered: true,
        })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn p(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn column_means(&self) -> Vec<f64> {
        column_means(&self.values)
    }

    /// Column-centered copy.
    pub fn centered(&self) -> DataMatrix {
        if self.centered {
            return self.clone();
        }
        let means = self.column_means();
        let mut values = self.values.clone();
        for i in 0..values.rows() {
            for (v, m) in values.row_mut(i).iter_mut().zip(&means) {
                *v -= m;
            }
        }
        DataMatrix {
            values,
            centered: true,
        }
    }

    /// Rows at `idx` as raw (uncentered) data.
    pub fn select_rows(&self, idx: &[usize]) -> Result<DataMatrix> {
        let p = self.p();
        let mut data = Vec::with_capacity(idx.len() * p);
        for &i in idx {
            data.extend_from_slice(self.values.row(i));
        }
        DataMatrix::raw(Matrix::from_row_major(idx.len(), p, data)?)
    }

    pub(crate) fn require_centered(&self) -> Result<()> {
        if self.centered {
            Ok(())
        } else {
            Err(Error::NotCentered)
        }
    }
}

/// Subtracts column means.
pub fn center(raw: &Matrix) -> Result<DataMatrix> {
    Ok(DataMatrix::raw(raw.clone())?.centered())
}

pub(crate) fn column_means(m: &Matrix) -> Vec<f64> {
    let n = m.rows() as f64;
    let mut means = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (s, v) in means.iter_mut().zip(m.row(i)) {
            *s += v;
        }
    }
    means.iter_mut().for_each(|s| *s /= n);
    means
}

fn check_rows(values: &Matrix) -> Result<()> {
    if values.rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observations, got {}",
            values.rows()
        )));
    }
    if values.cols() == 0 {
        return Err(Error::InsufficientData("no variables".into()));
    }
    if values.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("data contain non-finite values".into()));
    }
    Ok(())
}
