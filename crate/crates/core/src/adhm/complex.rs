use std::ops::{Add, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::Result;
use crate::linalg::Matrix;
use crate::scalar::{Binding, ScalarExpr};

/// Complex scalar as a pair of real expressions. Complex structure lives here so the
/// Grassmann kernel stays real.
#[derive(Clone, Debug, PartialEq)]
pub struct CExpr {
    pub re: ScalarExpr,
    pub im: ScalarExpr,
}

impl CExpr {
    pub fn new(re: ScalarExpr, im: ScalarExpr) -> Self {
        CExpr { re, im }
    }

    pub fn real(re: ScalarExpr) -> Self {
        CExpr { re, im: ScalarExpr::zero() }
    }

    pub fn imag(im: ScalarExpr) -> Self {
        CExpr { re: ScalarExpr::zero(), im }
    }

    pub fn rational(re: BigRational, im: BigRational) -> Self {
        CExpr { re: ScalarExpr::constant(re), im: ScalarExpr::constant(im) }
    }

    pub fn conj(&self) -> Self {
        CExpr { re: self.re.clone(), im: -&self.im }
    }

    /// Multiplication by i.
    pub fn times_i(&self) -> Self {
        CExpr { re: -&self.im, im: self.re.clone() }
    }

    /// |z|².
    pub fn norm_sq(&self) -> ScalarExpr {
        &(&self.re * &self.re) + &(&self.im * &self.im)
    }

    pub fn map(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> Self {
        CExpr { re: f(&self.re), im: f(&self.im) }
    }

    pub fn evaluate_f64(&self, b: &Binding) -> Result<(f64, f64)> {
        Ok((self.re.evaluate_f64(b)?, self.im.evaluate_f64(b)?))
    }
}

impl<'a> Add<&'a CExpr> for &'a CExpr {
    type Output = CExpr;
    fn add(self, o: &CExpr) -> CExpr {
        CExpr { re: &self.re + &o.re, im: &self.im + &o.im }
    }
}

impl<'a> Sub<&'a CExpr> for &'a CExpr {
    type Output = CExpr;
    fn sub(self, o: &CExpr) -> CExpr {
        CExpr { re: &self.re - &o.re, im: &self.im - &o.im }
    }
}

impl<'a> Mul<&'a CExpr> for &'a CExpr {
    type Output = CExpr;
    fn mul(self, o: &CExpr) -> CExpr {
        CExpr { re: &(&self.re * &o.re) - &(&self.im * &o.im), im: &(&self.re * &o.im) + &(&self.im * &o.re) }
    }
}

impl Neg for &CExpr {
    type Output = CExpr;
    fn neg(self) -> CExpr {
        CExpr { re: -&self.re, im: -&self.im }
    }
}

impl Add for CExpr {
    type Output = CExpr;
    fn add(self, o: CExpr) -> CExpr {
        &self + &o
    }
}

impl Mul for CExpr {
    type Output = CExpr;
    fn mul(self, o: CExpr) -> CExpr {
        &self * &o
    }
}

impl Zero for CExpr {
    fn zero() -> Self {
        CExpr::real(ScalarExpr::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
}

impl One for CExpr {
    fn one() -> Self {
        CExpr::real(ScalarExpr::one())
    }
}

pub type CMatrix = Matrix<CExpr>;

pub fn dagger(a: &CMatrix) -> CMatrix {
    Matrix::from_fn(a.cols(), a.rows(), |i, j| a[(j, i)].conj())
}

pub fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.matmul(b).expect("ADHM matrix shapes are fixed by construction")
}

/// [a, b] = ab − ba.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    mul(a, b).sub_matrix(&mul(b, a))
}

pub fn scale(a: &CMatrix, c: &CExpr) -> CMatrix {
    a.map(|z| c * z)
}

/// Σ |a_ij|², the squared Frobenius norm.
pub fn frobenius_sq(a: &CMatrix) -> ScalarExpr {
    let mut acc = ScalarExpr::zero();
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            acc += &a[(i, j)].norm_sq();
        }
    }
    acc
}

pub fn is_hermitian(a: &CMatrix) -> bool {
    a.is_square() && (0..a.rows()).all(|i| (0..a.cols()).all(|j| a[(i, j)] == a[(j, i)].conj()))
}

pub fn is_anti_hermitian(a: &CMatrix) -> bool {
    a.is_square() && (0..a.rows()).all(|i| (0..a.cols()).all(|j| a[(i, j)] == -&a[(j, i)].conj()))
}

pub fn czeros(r: usize, c: usize) -> CMatrix {
    Matrix::from_fn(r, c, |_, _| CExpr::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> ScalarExpr {
        ScalarExpr::parse(s).unwrap()
    }

    #[test]
    fn arithmetic() {
        let z = CExpr::new(e("x"), e("y"));
        assert_eq!((&z * &z.conj()), CExpr::real(e("x^2 + y^2")));
        assert_eq!(z.times_i().times_i(), -&z);
    }

    #[test]
    fn commutator_and_dagger() {
        let a = Matrix::from_fn(2, 2, |i, j| CExpr::new(ScalarExpr::int((i + 2 * j) as i64), ScalarExpr::int(i as i64)));
        assert!(commutator(&a, &a).rows() == 2 && commutator(&a, &a).to_rows().iter().flatten().all(|z| z.is_zero()));
        assert_eq!(dagger(&dagger(&a)), a);
        assert!(is_hermitian(&mul(&a, &dagger(&a))));
    }
}
