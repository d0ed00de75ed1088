use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// A paired input/output sample with column-centering bookkeeping.
///
/// The regression model has no intercept, so both `x` and `y` are centered
/// column-wise before fitting and the removed means are retained for
/// prediction on new data.
#[derive(Debug, Clone)]
pub struct DataSet {
    x: Array2<f64>,
    y: Array2<f64>,
    x_means: Array1<f64>,
    y_means: Array1<f64>,
    centered: bool,
}

impl DataSet {
    /// Wraps raw (uncentered) matrices. `x` is N x J, `y` is N x K.
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Dimension(format!(
                "x has {} rows but y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() < 2 {
            return Err(Error::Dimension(format!(
                "need at least 2 samples, got {}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::Dimension("x and y must have at least one column".into()));
        }
        let j = x.ncols();
        let k = y.ncols();
        Ok(DataSet {
            x,
            y,
            x_means: Array1::zeros(j),
            y_means: Array1::zeros(k),
            centered: false,
        })
    }

    /// Convenience constructor: wrap and center in one step.
    pub fn centered(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        center_columns(Self::new(x, y)?)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn x_means(&self) -> &Array1<f64> {
        &self.x_means
    }

    pub fn y_means(&self) -> &Array1<f64> {
        &self.y_means
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn num_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_inputs(&self) -> usize {
        self.x.ncols()
    }

    pub fn num_outputs(&self) -> usize {
        self.y.ncols()
    }

    /// Checks all entries of x and y for NaN/inf.
    pub fn check_finite(&self) -> Result<()> {
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("x contains non-finite values".into()));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("y contains non-finite values".into()));
        }
        Ok(())
    }

    /// Row subset (for cross-validation folds). Keeps the uncentered scale of
    /// whatever this set currently holds.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = self.x.select(ndarray::Axis(0), rows);
        let y = self.y.select(ndarray::Axis(0), rows);
        Self::new(x, y)
    }
}

/// Removes the column means of x and y, storing them on the returned set.
pub fn center_columns(data: DataSet) -> Result<DataSet> {
    if data.centered {
        return Err(Error::Config("data is already centered".into()));
    }
    let DataSet { mut x, mut y, .. } = data;
    let n = x.nrows() as f64;
    let x_means = x.sum_axis(ndarray::Axis(0)) / n;
    let y_means = y.sum_axis(ndarray::Axis(0)) / n;
    for (mut col, &m) in x.columns_mut().into_iter().zip(x_means.iter()) {
        col.mapv_inplace(|v| v - m);
    }
    for (mut col, &m) in y.columns_mut().into_iter().zip(y_means.iter()) {
        col.mapv_inplace(|v| v - m);
    }
    Ok(DataSet {
        x,
        y,
        x_means,
        y_means,
        centered: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    #[test]
    fn centers_simple_column() {
        let x = arr2(&[[1.0], [2.0], [3.0]]);
        let y = arr2(&[[0.0], [0.0], [0.0]]);
        let d = center_columns(DataSet::new(x, y).unwrap()).unwrap();
        assert_eq!(d.x().column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(d.x_means(), &arr1(&[2.0]));
        assert!(d.is_centered());
    }

    #[test]
    fn zero_mean_column_unchanged() {
        let x = arr2(&[[-1.0], [1.0]]);
        let y = arr2(&[[2.0], [4.0]]);
        let d = center_columns(DataSet::new(x, y).unwrap()).unwrap();
        assert_eq!(d.x().column(0).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(d.x_means()[0], 0.0);
        assert_eq!(d.y_means()[0], 3.0);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let e = DataSet::new(Array2::zeros((0, 2)), Array2::zeros((0, 1)));
        assert!(matches!(e, Err(Error::Dimension(_))));
        let e = DataSet::new(Array2::zeros((3, 2)), Array2::zeros((4, 1)));
        assert!(matches!(e, Err(Error::Dimension(_))));
    }

    #[test]
    fn double_centering_is_an_error() {
        let x = arr2(&[[1.0], [2.0]]);
        let y = arr2(&[[1.0], [2.0]]);
        let d = center_columns(DataSet::new(x, y).unwrap()).unwrap();
        assert!(matches!(center_columns(d), Err(Error::Config(_))));
    }

    #[test]
    fn simulated_genotypes_center_to_zero() {
        let spec = crate::simgen::SimulationSpec::default();
        let x = crate::simgen::generate_genotypes(150, 200, spec.seed);
        let y = Array2::zeros((150, 1));
        let d = center_columns(DataSet::new(x, y).unwrap()).unwrap();
        for col in d.x().columns() {
            assert!(col.sum().abs() < 1e-9 * 150.0);
        }
    }
}
