use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Non-negative square matrix indexed by pairs of states.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    matrix: DMatrix<f64>,
}

impl Kernel {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        for x in 0..matrix.nrows() {
            for y in 0..matrix.ncols() {
                let v = matrix[(x, y)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: x,
                        col: y,
                        value: v,
                    });
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |x, y| rows[x][y]))
    }

    /// Builds an `n x n` kernel from `(x, y, value)` triplets; repeated
    /// pairs accumulate.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = DMatrix::zeros(n, n);
        for &(x, y, v) in triplets {
            if x >= n || y >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.max(y) + 1,
                });
            }
            m[(x, y)] += v;
        }
        Self::from_matrix(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn row(&self, x: usize) -> Vec<f64> {
        self.matrix.row(x).iter().copied().collect()
    }

    pub fn row_sum(&self, x: usize) -> f64 {
        self.matrix.row(x).sum()
    }

    /// Every row sums to one within `tol`.
    pub fn check_stochastic(&self, what: &'static str, tol: f64) -> Result<()> {
        for x in 0..self.dim() {
            let s = self.row_sum(x);
            if (s - 1.0).abs() > tol {
                return Err(Error::RowSumViolation {
                    what,
                    row: x,
                    sum: s,
                    expected: "1",
                });
            }
        }
        Ok(())
    }

    /// Every row sums to at most one within `tol`.
    pub fn check_substochastic(&self, what: &'static str, tol: f64) -> Result<()> {
        for x in 0..self.dim() {
            let s = self.row_sum(x);
            if s > 1.0 + tol {
                return Err(Error::RowSumViolation {
                    what,
                    row: x,
                    sum: s,
                    expected: "<= 1",
                });
            }
        }
        Ok(())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|x| (0..x).all(|y| (self.get(x, y) - self.get(y, x)).abs() <= tol))
    }

    /// Row vector times kernel.
    pub fn left_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (x, &vx) in v.iter().enumerate() {
            if vx == 0.0 {
                continue;
            }
            for (y, o) in out.iter_mut().enumerate() {
                *o += vx * self.matrix[(x, y)];
            }
        }
        out
    }

    /// Kernel times column vector.
    pub fn right_apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|x| (0..self.dim()).map(|y| self.matrix[(x, y)] * v[y]).sum())
            .collect()
    }
}

/// Non-negative finite vector over states.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure(Vec<f64>);

impl Measure {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((x, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidMeasure(format!("value {v} at state {x}")));
        }
        Ok(Self(values))
    }

    /// Clamps entries in `[-tol, 0)` to zero; anything more negative is an error.
    pub(crate) fn from_clamped(
        mut values: Vec<f64>,
        tol: f64,
    ) -> std::result::Result<Self, (usize, f64)> {
        for (x, v) in values.iter_mut().enumerate() {
            if !v.is_finite() || *v < -tol {
                return Err((x, *v));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn delta(n: usize, x: usize) -> Self {
        let mut v = vec![0.0; n];
        v[x] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, x: usize) -> f64 {
        self.0[x]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn add(&self, other: &Measure) -> Measure {
        Measure(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: f64) -> Measure {
        assert!(c >= 0.0);
        Measure(self.0.iter().map(|v| v * c).collect())
    }

    /// The measure restricted to `set`, zero elsewhere.
    pub fn restrict(&self, set: &StateSet) -> Measure {
        Measure(
            self.0
                .iter()
                .enumerate()
                .map(|(x, &v)| if set.contains(x) { v } else { 0.0 })
                .collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Subset of a finite state space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateSet {
    mask: Vec<bool>,
}

impl StateSet {
    pub fn new(n: usize, states: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; n];
        for x in states {
            if x >= n {
                return Err(Error::UnknownState(x.to_string()));
            }
            mask[x] = true;
        }
        Ok(Self { mask })
    }

    pub fn all(n: usize) -> Self {
        Self {
            mask: vec![true; n],
        }
    }

    pub fn universe_size(&self) -> usize {
        self.mask.len()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.mask.get(x).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(x, _)| x)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn complement(&self) -> StateSet {
        StateSet {
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &StateSet) -> bool {
        self.iter().all(|x| other.contains(x))
    }
}
