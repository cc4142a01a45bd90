//! Small dense solves for the normal equations of logistic and linear fits.

use crate::error::{Error, Result};

/// Row-major `rows x cols` design with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Design {
    names: Vec<String>,
    data: Vec<f64>,
    rows: usize,
}

impl Design {
    pub fn new(names: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let cols = names.len();
        if cols == 0 || !data.len().is_multiple_of(cols) {
            return Err(Error::Size(format!(
                "{} values do not fill rows of {cols} columns",
                data.len()
            )));
        }
        Ok(Self {
            rows: data.len() / cols,
            names,
            data,
        })
    }

    /// Builds a design from per-row closures, one per column.
    pub fn from_columns(names: &[&str], rows: usize, row: impl Fn(usize, &mut Vec<f64>)) -> Self {
        let mut data = Vec::with_capacity(rows * names.len());
        for i in 0..rows {
            row(i, &mut data);
        }
        debug_assert_eq!(data.len(), rows * names.len());
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            data,
            rows,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn dot(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum()
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub(crate) struct Cholesky {
    l: Vec<f64>,
    p: usize,
}

impl Cholesky {
    /// Factorizes the row-major `p x p` matrix `a`. A pivot that collapses
    /// relative to its original diagonal marks column `j` as linearly
    /// dependent on the columns before it; its index is returned as `Err`.
    pub(crate) fn new(a: &[f64], p: usize) -> std::result::Result<Self, usize> {
        let mut l = vec![0.0; p * p];
        for j in 0..p {
            let mut d = a[j * p + j];
            for k in 0..j {
                d -= l[j * p + k] * l[j * p + k];
            }
            if d.is_nan() || d <= 1e-10 * a[j * p + j].abs().max(f64::MIN_POSITIVE) {
                return Err(j);
            }
            let d = d.sqrt();
            l[j * p + j] = d;
            for i in j + 1..p {
                let mut s = a[i * p + j];
                for k in 0..j {
                    s -= l[i * p + k] * l[j * p + k];
                }
                l[i * p + j] = s / d;
            }
        }
        Ok(Self { l, p })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut y = b.to_vec();
        for i in 0..p {
            for k in 0..i {
                y[i] -= self.l[i * p + k] * y[k];
            }
            y[i] /= self.l[i * p + i];
        }
        for i in (0..p).rev() {
            for k in i + 1..p {
                y[i] -= self.l[k * p + i] * y[k];
            }
            y[i] /= self.l[i * p + i];
        }
        y
    }
}

/// `X' diag(w) X` in row-major order.
pub(crate) fn weighted_gram(design: &Design, w: impl Fn(usize) -> f64) -> Vec<f64> {
    let p = design.cols();
    let mut g = vec![0.0; p * p];
    for i in 0..design.rows() {
        let wi = w(i);
        if wi == 0.0 {
            continue;
        }
        let row = design.row(i);
        for j in 0..p {
            let s = wi * row[j];
            for k in j..p {
                g[j * p + k] += s * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            g[j * p + k] = g[k * p + j];
        }
    }
    g
}

/// Result of an ordinary least squares fit.
#[derive(Clone, Debug, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
}

/// Minimizes `|y - X b|^2`.
pub fn least_squares(design: &Design, y: &[f64]) -> Result<LeastSquares> {
    if y.len() != design.rows() {
        return Err(Error::Size("outcome and design differ in length".into()));
    }
    if design.rows() <= design.cols() {
        return Err(Error::Size(format!(
            "need more rows ({}) than columns ({})",
            design.rows(),
            design.cols()
        )));
    }
    let p = design.cols();
    let gram = weighted_gram(design, |_| 1.0);
    let chol = Cholesky::new(&gram, p).map_err(|j| Error::RankDeficient {
        column: j,
        name: design.names()[j].clone(),
    })?;
    let mut xty = vec![0.0; p];
    for (i, yi) in y.iter().enumerate() {
        for (acc, x) in xty.iter_mut().zip(design.row(i)) {
            *acc += x * yi;
        }
    }
    let coefficients = chol.solve(&xty);
    let rss = y
        .iter()
        .enumerate()
        .map(|(i, yi)| (yi - design.dot(i, &coefficients)).powi(2))
        .sum();
    Ok(LeastSquares { coefficients, rss })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let d = Design::from_columns(&["1", "t"], 5, |i, out| out.extend([1.0, i as f64]));
        let y: Vec<f64> = (0..5).map(|i| 2.0 - 0.5 * i as f64).collect();
        let fit = least_squares(&d, &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn duplicate_column_is_named() {
        let d = Design::from_columns(&["1", "t", "t_again"], 6, |i, out| {
            out.extend([1.0, i as f64, i as f64])
        });
        let err = least_squares(&d, &[0.0; 6]).unwrap_err();
        match err {
            Error::RankDeficient { column, name } => {
                assert_eq!(column, 2);
                assert_eq!(name, "t_again");
            }
            other => panic!("unexpected {other}"),
        }
    }
}
