//! Small dense matrices over exact rationals, doubles and symbolic scalars, with
//! determinant, Pfaffian, rank and solve.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("Pfaffian of odd-sized matrix ({0})")]
    OddSize(usize),
    #[error("matrix is not skew-symmetric at ({0},{1})")]
    NotSkew(usize, usize),
    #[error("matrix is singular")]
    Singular,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Shape("ragged rows".into()));
        }
        Ok(Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn try_map<U: Clone, E>(&self, f: impl Fn(&T) -> Result<U, E>) -> Result<Matrix<U>, E> {
        Ok(Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect::<Result<_, _>>()? })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl<T: Clone + Zero + One> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::from_fn(rows, cols, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diagonal(d: &[T]) -> Self {
        Matrix::from_fn(d.len(), d.len(), |i, j| if i == j { d[i].clone() } else { T::zero() })
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T> Matrix<T>
where
    T: Clone + Zero + One,
    for<'a> &'a T: Add<&'a T, Output = T> + Mul<&'a T, Output = T> + Sub<&'a T, Output = T> + Neg<Output = T>,
{
    pub fn matmul(&self, other: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Shape(format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        Ok(Matrix::from_fn(self.rows, other.cols, |i, j| {
            let mut acc = T::zero();
            for k in 0..self.cols {
                acc = &acc + &(&self[(i, k)] * &other[(k, j)]);
            }
            acc
        }))
    }

    pub fn sub_matrix(&self, other: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(self.rows, self.cols, |i, j| &self[(i, j)] - &other[(i, j)])
    }

    pub fn add_matrix(&self, other: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(self.rows, self.cols, |i, j| &self[(i, j)] + &other[(i, j)])
    }

    /// Pfaffian by recursive expansion along the first row; works over any
    /// commutative ring. Requires an even-sized skew-symmetric matrix.
    pub fn pfaffian(&self) -> Result<T, LinalgError>
    where
        T: PartialEq,
    {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        if self.rows % 2 == 1 {
            return Err(LinalgError::OddSize(self.rows));
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if self[(i, j)] != -&self[(j, i)] {
                    return Err(LinalgError::NotSkew(i, j));
                }
            }
        }
        let idx: Vec<usize> = (0..self.rows).collect();
        Ok(self.pfaffian_rec(&idx))
    }

    fn pfaffian_rec(&self, idx: &[usize]) -> T {
        if idx.is_empty() {
            return T::one();
        }
        let first = idx[0];
        let mut acc = T::zero();
        for (pos, &j) in idx.iter().enumerate().skip(1) {
            let a = &self[(first, j)];
            if a.is_zero() {
                continue;
            }
            let rest: Vec<usize> = idx.iter().copied().filter(|&k| k != first && k != j).collect();
            let term = a * &self.pfaffian_rec(&rest);
            // sign (-1)^(pos+1) with pos counted from 1 for the partner of `first`
            acc = if pos % 2 == 1 { &acc + &term } else { &acc - &term };
        }
        acc
    }

    /// Determinant by Laplace expansion; meant for small symbolic matrices.
    pub fn det_expansion(&self) -> Result<T, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        let idx: Vec<usize> = (0..self.cols).collect();
        Ok(self.det_rec(0, &idx))
    }

    fn det_rec(&self, row: usize, cols: &[usize]) -> T {
        if cols.is_empty() {
            return T::one();
        }
        let mut acc = T::zero();
        for (pos, &c) in cols.iter().enumerate() {
            let a = &self[(row, c)];
            if a.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&k| k != c).collect();
            let term = a * &self.det_rec(row + 1, &rest);
            acc = if pos % 2 == 0 { &acc + &term } else { &acc - &term };
        }
        acc
    }
}

pub type QMatrix = Matrix<BigRational>;
pub type FMatrix = Matrix<f64>;

impl QMatrix {
    /// Exact determinant by fraction-field Gaussian elimination.
    pub fn det(&self) -> Result<BigRational, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = BigRational::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| !a[(r, col)].is_zero()) else {
                return Ok(BigRational::zero());
            };
            if p != col {
                for j in 0..n {
                    a.data.swap(p * n + j, col * n + j);
                }
                det = -det;
            }
            let pivot = a[(col, col)].clone();
            det *= &pivot;
            for r in col + 1..n {
                if a[(r, col)].is_zero() {
                    continue;
                }
                let f = &a[(r, col)] / &pivot;
                for j in col..n {
                    let v = &a[(col, j)] * &f;
                    a[(r, j)] -= v;
                }
            }
        }
        Ok(det)
    }

    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let (rows, cols) = (self.rows, self.cols);
        let mut rank = 0;
        for col in 0..cols {
            let Some(p) = (rank..rows).find(|&r| !a[(r, col)].is_zero()) else { continue };
            for j in 0..cols {
                a.data.swap(p * cols + j, rank * cols + j);
            }
            let pivot = a[(rank, col)].clone();
            for r in rank + 1..rows {
                if a[(r, col)].is_zero() {
                    continue;
                }
                let f = &a[(r, col)] / &pivot;
                for j in col..cols {
                    let v = &a[(rank, j)] * &f;
                    a[(r, j)] -= v;
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn inverse(&self) -> Result<QMatrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = QMatrix::identity(n);
        for col in 0..n {
            let p = (col..n).find(|&r| !a[(r, col)].is_zero()).ok_or(LinalgError::Singular)?;
            for j in 0..n {
                a.data.swap(p * n + j, col * n + j);
                inv.data.swap(p * n + j, col * n + j);
            }
            let pivot = a[(col, col)].recip();
            for j in 0..n {
                a[(col, j)] *= &pivot;
                inv[(col, j)] *= &pivot;
            }
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in 0..n {
                    let v = &a[(col, j)] * &f;
                    a[(r, j)] -= v;
                    let w = &inv[(col, j)] * &f;
                    inv[(r, j)] -= w;
                }
            }
        }
        Ok(inv)
    }

    pub fn to_f64(&self) -> FMatrix {
        use num_traits::ToPrimitive;
        self.map(|q| q.to_f64().unwrap_or(f64::NAN))
    }
}

impl FMatrix {
    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> Result<f64, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let p = (col..n).max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs())).unwrap();
            if a[(p, col)] == 0.0 {
                return Ok(0.0);
            }
            if p != col {
                for j in 0..n {
                    a.data.swap(p * n + j, col * n + j);
                }
                det = -det;
            }
            let pivot = a[(col, col)];
            det *= pivot;
            for r in col + 1..n {
                let f = a[(r, col)] / pivot;
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[(r, j)] -= f * a[(col, j)];
                }
            }
        }
        Ok(det)
    }

    /// Numerical rank with relative pivot tolerance.
    pub fn rank(&self, tol: f64) -> usize {
        let mut a = self.clone();
        let (rows, cols) = (self.rows, self.cols);
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut rank = 0;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let p = (rank..rows).max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs())).unwrap();
            if a[(p, col)].abs() <= tol * scale {
                continue;
            }
            for j in 0..cols {
                a.data.swap(p * cols + j, rank * cols + j);
            }
            let pivot = a[(rank, col)];
            for r in rank + 1..rows {
                let f = a[(r, col)] / pivot;
                for j in col..cols {
                    a[(r, j)] -= f * a[(rank, j)];
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if !self.is_square() || b.len() != self.rows {
            return Err(LinalgError::Shape("solve needs a square system".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let p = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs())).unwrap();
            if a[(p, col)].abs() < 1e-300 {
                return Err(LinalgError::Singular);
            }
            for j in 0..n {
                a.data.swap(p * n + j, col * n + j);
            }
            x.swap(p, col);
            for r in col + 1..n {
                let f = a[(r, col)] / a[(col, col)];
                for j in col..n {
                    a[(r, j)] -= f * a[(col, j)];
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for j in col + 1..n {
                s -= a[(col, j)] * x[j];
            }
            x[col] = s / a[(col, col)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<FMatrix, LinalgError> {
        let n = self.rows;
        let mut inv = FMatrix::zeros(n, n);
        for c in 0..n {
            let e: Vec<f64> = (0..n).map(|r| (r == c) as u8 as f64).collect();
            for (r, v) in self.solve(&e)?.into_iter().enumerate() {
                inv[(r, c)] = v;
            }
        }
        Ok(inv)
    }

    /// Cholesky factorization succeeds iff the symmetric matrix is positive definite.
    pub fn is_positive_definite(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        true
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
