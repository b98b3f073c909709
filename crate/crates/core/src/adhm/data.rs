use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use super::complex::{commutator, czeros, dagger, is_anti_hermitian, mul, scale, CExpr, CMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

type CQ = Complex<BigRational>;

/// ADHM data (B₁, B₂, I, J) with B_ℓ: k×k, I: k×N, J: N×k.
#[derive(Clone, Debug, PartialEq)]
pub struct ADHMData {
    pub k: usize,
    pub n: usize,
    pub b1: CMatrix,
    pub b2: CMatrix,
    pub i: CMatrix,
    pub j: CMatrix,
}

impl ADHMData {
    pub fn new(b1: CMatrix, b2: CMatrix, i: CMatrix, j: CMatrix) -> Result<Self> {
        let k = b1.rows();
        let n = i.cols();
        let ok = b1.cols() == k
            && (b2.rows(), b2.cols()) == (k, k)
            && i.rows() == k
            && (j.rows(), j.cols()) == (n, k)
            && k >= 1
            && n >= 1;
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "ADHM shapes: B1 {}x{}, B2 {}x{}, I {}x{}, J {}x{}",
                b1.rows(),
                b1.cols(),
                b2.rows(),
                b2.cols(),
                i.rows(),
                i.cols(),
                j.rows(),
                j.cols()
            )));
        }
        Ok(ADHMData { k, n, b1, b2, i, j })
    }

    pub fn zero(k: usize, n: usize) -> Self {
        ADHMData { k, n, b1: czeros(k, k), b2: czeros(k, k), i: czeros(k, n), j: czeros(n, k) }
    }

    /// Random data with small Gaussian-integer-over-denominator entries.
    pub fn random<R: Rng>(k: usize, n: usize, rng: &mut R) -> Self {
        let mut m = |r, c| Matrix::from_fn(r, c, |_, _| CExpr::rational(small_rational(rng), small_rational(rng)));
        let (b1, b2, i, j) = (m(k, k), m(k, k), m(k, n), m(n, k));
        ADHMData { k, n, b1, b2, i, j }
    }

    /// Real dimension of the moduli space: 4kN.
    pub fn moduli_dimension(&self) -> usize {
        4 * self.k * self.n
    }
}

fn small_rational<R: Rng>(rng: &mut R) -> BigRational {
    BigRational::new(BigInt::from(rng.gen_range(-6i64..=6)), BigInt::from(rng.gen_range(1i64..=4)))
}

/// [B₁,B₁†] + [B₂,B₂†] + II† − J†J.
pub fn constraint_real(d: &ADHMData) -> CMatrix {
    let b1 = commutator(&d.b1, &dagger(&d.b1));
    let b2 = commutator(&d.b2, &dagger(&d.b2));
    let ii = mul(&d.i, &dagger(&d.i));
    let jj = mul(&dagger(&d.j), &d.j);
    let out = b1.add_matrix(&b2).add_matrix(&ii).sub_matrix(&jj);
    debug_assert!(super::complex::is_hermitian(&out));
    out
}

/// [B₁,B₂] + IJ.
pub fn constraint_complex(d: &ADHMData) -> CMatrix {
    commutator(&d.b1, &d.b2).add_matrix(&mul(&d.i, &d.j))
}

/// Element of U(k) × SU(N) × T², with exact complex-rational entries.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub u: CMatrix,
    pub v: CMatrix,
    pub t1: CExpr,
    pub t2: CExpr,
}

impl GroupElement {
    pub fn identity(k: usize, n: usize) -> Self {
        GroupElement { u: Matrix::identity(k), v: Matrix::identity(n), t1: CExpr::one(), t2: CExpr::one() }
    }

    /// Pure torus element (e^{iε₁}, e^{iε₂}) given as unit complex numbers.
    pub fn torus(k: usize, n: usize, t1: CExpr, t2: CExpr) -> Self {
        GroupElement { t1, t2, ..Self::identity(k, n) }
    }

    /// Random element: Cayley transform of a rational anti-hermitian matrix for U(k),
    /// a product of embedded rational SU(2) blocks for SU(N), rational points on the
    /// circle for T².
    pub fn random<R: Rng>(k: usize, n: usize, rng: &mut R) -> Self {
        let a = random_anti_hermitian(k, rng);
        let u = to_cmatrix(&cayley(&a));
        let mut v = identity_q(n);
        for _ in 0..2 {
            for r in 0..n.saturating_sub(1) {
                v = matmul_q(&v, &embedded_su2(n, r, rng));
            }
        }
        GroupElement { u, v: to_cmatrix(&v), t1: to_cexpr(&circle_point(rng)), t2: to_cexpr(&circle_point(rng)) }
    }

    /// Checks UU† = 1, VV† = 1, det V = 1 and |t_ℓ| = 1 exactly.
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("U(k) block", &self.u), ("SU(N) block", &self.v)] {
            let prod = mul(m, &dagger(m));
            if prod != Matrix::identity(m.rows()) {
                return Err(Error::NotUnitary(format!("{name}: UU† ≠ 1")));
            }
        }
        let det = self.v.det_expansion()?;
        if det != CExpr::one() {
            return Err(Error::NotUnitary("SU(N) block has det ≠ 1".into()));
        }
        for (name, t) in [("t1", &self.t1), ("t2", &self.t2)] {
            if !t.norm_sq().is_one() {
                return Err(Error::NotUnitary(format!("{name} is not a unit complex number")));
            }
        }
        Ok(())
    }
}

/// (B_ℓ, I, J) ↦ (t_ℓ U B_ℓ U†, U I V†, t₁t₂ V J U†).
pub fn group_act(g: &GroupElement, d: &ADHMData) -> Result<ADHMData> {
    if g.u.rows() != d.k || g.v.rows() != d.n {
        return Err(Error::ShapeMismatch(format!("group element for k={}, N={} on data k={}, N={}", g.u.rows(), g.v.rows(), d.k, d.n)));
    }
    g.validate()?;
    let (ud, vd) = (dagger(&g.u), dagger(&g.v));
    let conj = |b: &CMatrix, t: &CExpr| scale(&mul(&mul(&g.u, b), &ud), t);
    let t12 = &g.t1 * &g.t2;
    Ok(ADHMData {
        k: d.k,
        n: d.n,
        b1: conj(&d.b1, &g.t1),
        b2: conj(&d.b2, &g.t2),
        i: mul(&mul(&g.u, &d.i), &vd),
        j: scale(&mul(&mul(&g.v, &d.j), &ud), &t12),
    })
}

/// Rejects data whose U(k) stabilizer is visibly non-trivial. For k = 1 the test is
/// exact: U(1) acts freely iff (I, J) ≠ 0. For k > 1 this is a necessary condition only.
pub fn check_stabilizer(d: &ADHMData) -> Result<()> {
    let all_zero = |m: &CMatrix| m.to_rows().iter().flatten().all(|z| z.is_zero());
    if all_zero(&d.i) && all_zero(&d.j) {
        return Err(Error::StabilizerNotTrivial);
    }
    Ok(())
}

/// Rank of the odd bundle: 2kN, 4kN or 8kN for N = 1, 2, 4 supersymmetry.
pub fn rank_bookkeeping(k: u64, n: u64, susy: u32) -> Result<u64> {
    if k == 0 || n == 0 {
        return Err(Error::ShapeMismatch("k and N must be positive".into()));
    }
    match susy {
        1 => Ok(2 * k * n),
        2 => Ok(4 * k * n),
        4 => Ok(8 * k * n),
        other => Err(Error::BadSusy(other)),
    }
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn cq(re: BigRational, im: BigRational) -> CQ {
    Complex::new(re, im)
}

fn identity_q(n: usize) -> Vec<Vec<CQ>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { CQ::one() } else { CQ::zero() }).collect()).collect()
}

fn matmul_q(a: &[Vec<CQ>], b: &[Vec<CQ>]) -> Vec<Vec<CQ>> {
    let (r, m, c) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    (0..r).map(|i| (0..c).map(|j| (0..m).fold(CQ::zero(), |acc, t| acc + &a[i][t] * &b[t][j])).collect()).collect()
}

fn to_cexpr(z: &CQ) -> CExpr {
    CExpr::rational(z.re.clone(), z.im.clone())
}

fn to_cmatrix(a: &[Vec<CQ>]) -> CMatrix {
    Matrix::from_rows(a.iter().map(|r| r.iter().map(to_cexpr).collect()).collect()).expect("rectangular")
}

fn random_anti_hermitian<R: Rng>(k: usize, rng: &mut R) -> Vec<Vec<CQ>> {
    let mut a = vec![vec![CQ::zero(); k]; k];
    for i in 0..k {
        a[i][i] = cq(BigRational::zero(), small_rational(rng));
        for j in i + 1..k {
            let z = cq(small_rational(rng), small_rational(rng));
            a[j][i] = -z.conj();
            a[i][j] = z;
        }
    }
    a
}

/// (1 − A)(1 + A)⁻¹, unitary for anti-hermitian A (1 + A is always invertible).
fn cayley(a: &[Vec<CQ>]) -> Vec<Vec<CQ>> {
    let k = a.len();
    let id = identity_q(k);
    let minus: Vec<Vec<CQ>> = (0..k).map(|i| (0..k).map(|j| &id[i][j] - &a[i][j]).collect()).collect();
    let plus: Vec<Vec<CQ>> = (0..k).map(|i| (0..k).map(|j| &id[i][j] + &a[i][j]).collect()).collect();
    matmul_q(&minus, &inverse_q(plus))
}

/// Gauss–Jordan over Q(i).
fn inverse_q(mut a: Vec<Vec<CQ>>) -> Vec<Vec<CQ>> {
    let k = a.len();
    let mut inv = identity_q(k);
    for col in 0..k {
        let piv = (col..k).find(|&r| !a[r][col].is_zero()).expect("1 + A is invertible for anti-hermitian A");
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].clone();
        for j in 0..k {
            a[col][j] = &a[col][j] / &p;
            inv[col][j] = &inv[col][j] / &p;
        }
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in 0..k {
                    let (x, y) = (&f * &a[col][j], &f * &inv[col][j]);
                    a[r][j] = &a[r][j] - x;
                    inv[r][j] = &inv[r][j] - y;
                }
            }
        }
    }
    inv
}

/// Rational point on the unit circle: ((1 − s²) + 2is)/(1 + s²).
fn circle_point<R: Rng>(rng: &mut R) -> CQ {
    let s = small_rational(rng);
    let d = BigRational::one() + &s * &s;
    cq((BigRational::one() - &s * &s) / &d, (q(2, 1) * &s) / &d)
}

/// [[a, −b̄], [b, ā]] in rows/columns (r, r+1), with (a, b) a rational point on S³
/// from inverse stereographic projection.
fn embedded_su2<R: Rng>(n: usize, r: usize, rng: &mut R) -> Vec<Vec<CQ>> {
    let x: Vec<BigRational> = (0..3).map(|_| small_rational(rng)).collect();
    let s: BigRational = x.iter().map(|v| v * v).fold(BigRational::zero(), |a, b| a + b);
    let d = BigRational::one() + &s;
    let two = q(2, 1);
    let a = cq(&two * &x[0] / &d, &two * &x[1] / &d);
    let b = cq(&two * &x[2] / &d, (&s - BigRational::one()) / &d);
    let mut m = identity_q(n);
    m[r][r] = a.clone();
    m[r][r + 1] = -b.conj();
    m[r + 1][r] = b;
    m[r + 1][r + 1] = a.conj();
    m
}

/// Is `a` anti-hermitian (a Lie algebra element of U(k))?
pub fn check_lie_u(a: &CMatrix) -> Result<()> {
    if !is_anti_hermitian(a) {
        return Err(Error::ShapeMismatch("Lie algebra element must be anti-hermitian".into()));
    }
    Ok(())
}
