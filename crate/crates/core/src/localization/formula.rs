use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::equivariant::{sigma_from_q, ActionSpec, ConditionResult, EquivariantForm, MetricData};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{Binding, ScalarExpr};
use crate::superalg::{SuperFunction, SuperVectorField};

use super::fixed::{eval_at, linearize_base, linearize_fiber, point_substitution};

/// Exact prefactor c·π^k.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prefactor {
    #[serde(serialize_with = "ser_rational")]
    pub rational: BigRational,
    pub pi_power: u32,
}

fn ser_rational<S: serde::Serializer>(q: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&q.to_string())
}

fn factorial(k: u32) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, j| acc * BigInt::from(j))
}

impl Prefactor {
    /// (−2π)^{m/2}.
    pub fn classical(m: usize) -> Result<Self> {
        if m % 2 == 1 {
            return Err(Error::OddDimension(m));
        }
        let k = (m / 2) as u32;
        Ok(Prefactor { rational: BigRational::from_integer(num_traits::pow(BigInt::from(-2), k as usize)), pi_power: k })
    }

    /// (−2)^{n/2} (n/2)! π^{m/2} / (m/2)!.
    pub fn superlocalization(m: usize, n: usize) -> Result<Self> {
        if m % 2 == 1 {
            return Err(Error::OddDimension(m));
        }
        if n % 2 == 1 {
            return Err(Error::OddDimension(n));
        }
        let (hm, hn) = ((m / 2) as u32, (n / 2) as u32);
        let num = num_traits::pow(BigInt::from(-2), hn as usize) * factorial(hn);
        Ok(Prefactor { rational: BigRational::new(num, factorial(hm)), pi_power: hm })
    }

    pub fn to_f64(&self) -> f64 {
        self.rational.to_f64().unwrap_or(f64::NAN) * std::f64::consts::PI.powi(self.pi_power as i32)
    }
}

impl fmt::Display for Prefactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_power {
            0 => write!(f, "{}", self.rational),
            1 => write!(f, "{}*pi", self.rational),
            k => write!(f, "{}*pi^{k}", self.rational),
        }
    }
}

fn linalg(e: crate::linalg::LinalgError) -> Error {
    Error::Linalg(e)
}

/// Exact Pfaffian by recursive expansion.
pub fn pfaffian(a: &Matrix<ScalarExpr>) -> Result<ScalarExpr> {
    a.pfaffian().map_err(linalg)
}

/// Sdet of the block-diagonal even endomorphism (A, B): det A / det B.
pub fn superdeterminant(a: &Matrix<ScalarExpr>, b: &Matrix<ScalarExpr>) -> Result<ScalarExpr> {
    let db = b.det_expansion().map_err(linalg)?;
    if db.is_zero() {
        return Err(Error::SingularFiberBlock);
    }
    let da = a.det_expansion().map_err(linalg)?;
    Ok(match db.as_constant() {
        Some(q) => da.scale(&q.recip()),
        None => da * db.pow(-1),
    })
}

/// Exact square root of a non-negative rational, when it exists.
pub fn exact_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let (n, d) = (q.numer(), q.denom());
    let (rn, rd) = (n.sqrt(), d.sqrt());
    (&rn * &rn == *n && &rd * &rd == *d).then(|| BigRational::new(rn, rd))
}

/// Skew part of a matrix that is skew up to rounding; exact input is returned unchanged.
fn skew_part(a: &Matrix<ScalarExpr>, params: &Binding, what: &str) -> Result<Matrix<ScalarExpr>> {
    let n = a.rows();
    let exact = (0..n).all(|i| (i..n).all(|j| a[(i, j)] == -&a[(j, i)]));
    if exact {
        return Ok(a.clone());
    }
    let num = eval_at(a, params)?;
    let scale = 1.0 + num.max_abs();
    for i in 0..n {
        for j in i..n {
            let d = (num[(i, j)] + num[(j, i)]).abs();
            if d > 1e-9 * scale {
                return Err(Error::ShapeMismatch(format!("{what} is not skew-symmetric (entry {i},{j} off by {d:e})")));
            }
        }
    }
    let half = ScalarExpr::ratio(1, 2);
    Ok(Matrix::from_fn(n, n, |i, j| &(&a[(i, j)] - &a[(j, i)]) * &half))
}

/// A square root of a determinant ratio as c · Pf / sqrt(D), with the pieces kept exact.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfDet {
    pub pfaffian: ScalarExpr,
    /// Determinant under the square root.
    pub det: ScalarExpr,
    pub orientation: i8,
}

impl HalfDet {
    /// orientation · Pf / sqrt(det).
    pub fn ratio_value(&self, params: &Binding) -> Result<f64> {
        let d = self.det.evaluate_f64(params)?;
        Ok(self.orientation as f64 * self.pfaffian.evaluate_f64(params)? / d.sqrt())
    }

    /// orientation · Pf / sqrt(det) as an expression when sqrt(det) is rational.
    pub fn ratio_exact(&self) -> Option<ScalarExpr> {
        let r = exact_sqrt(&self.det.as_constant()?)?;
        if r.is_zero() {
            return None;
        }
        Some(self.pfaffian.scale(&(BigRational::from_integer(self.orientation.into()) / r)))
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Contribution {
    pub point: Vec<(String, String)>,
    /// Body of the integrand at the point.
    pub integrand0: f64,
    /// det^{1/2}(L) for the classical formula, Sdet^{1/2}(L) for the super one.
    pub half_det: f64,
    /// prefactor · integrand0 / half_det (classical) or prefactor · half_det · integrand0.
    pub value: f64,
    /// Closed form of the unprefixed term when every piece is exact.
    pub symbolic: Option<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LocalizationOutcome {
    pub prefactor: Prefactor,
    pub prefactor_value: f64,
    pub contributions: Vec<Contribution>,
    pub total: f64,
    pub checks: Vec<ConditionResult>,
}

fn check(name: &str, passed: bool, residual: f64, detail: String) -> ConditionResult {
    ConditionResult { name: name.into(), passed, residual, detail }
}

fn point_label(p: &Binding) -> Vec<(String, String)> {
    p.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Zero symbolically, or below `tol` in max-norm at every sample.
fn vanishes(f: &SuperFunction, samples: &[Binding], tol: f64) -> Result<(bool, f64)> {
    if f.is_zero() {
        return Ok((true, 0.0));
    }
    let mut worst = 0.0f64;
    for p in samples {
        for (_, c) in f.terms() {
            worst = worst.max(c.evaluate_f64(p)?.abs());
        }
    }
    Ok((worst < tol && !samples.is_empty(), worst))
}

/// det^{1/2}(L) := orientation · Pf(−h_p L)/sqrt(det h_p).
pub fn sqrt_det_classical(l: &Matrix<ScalarExpr>, h_p: &Matrix<ScalarExpr>, params: &Binding, orientation: i8) -> Result<HalfDet> {
    let minus_hl = h_p.matmul(l).map_err(linalg)?.map(|e| -e);
    let a = skew_part(&minus_hl, params, "h L")?;
    Ok(HalfDet { pfaffian: pfaffian(&a)?, det: h_p.det_expansion().map_err(linalg)?, orientation })
}

/// Sdet^{1/2}(L) := orientation · sqrt(det H_p)/Pf(−a), a = H_p L̃. Returned as the
/// HalfDet of the reciprocal, whose ratio_value is Pf(−a)/sqrt(det H).
pub fn sqrt_sdet_via_pfaffian(ltilde: &Matrix<ScalarExpr>, big_h_p: &Matrix<ScalarExpr>, params: &Binding, orientation: i8) -> Result<HalfDet> {
    let minus_a = big_h_p.matmul(ltilde).map_err(linalg)?.map(|e| -e);
    let a = skew_part(&minus_a, params, "H L~")?;
    Ok(HalfDet { pfaffian: pfaffian(&a)?, det: big_h_p.det_expansion().map_err(linalg)?, orientation })
}

/// Inputs shared by both localization formulas.
pub struct LocalizationSetup<'a> {
    pub spec: &'a ActionSpec,
    pub xi: &'a [ScalarExpr],
    /// Values for the Lie parameters and any other free constants.
    pub params: &'a Binding,
    pub metric: &'a MetricData,
    pub points: &'a [Binding],
    pub orientation: i8,
    /// Points (coordinates and parameters) for closedness checks that cannot be settled
    /// symbolically.
    pub samples: &'a [Binding],
}

/// ∫ α(ξ) = (−2π)^{m/2} Σ_p α(ξ)₀(p) / det^{1/2}(L_{p,ξ}).
pub fn classical_localize(alpha: &EquivariantForm, setup: &LocalizationSetup) -> Result<LocalizationOutcome> {
    let spec = setup.spec;
    let m = spec.chart.m();
    let prefactor = Prefactor::classical(m)?;
    let dg = crate::equivariant::equivariant_differential(alpha, spec, setup.xi)?;
    let (closed, res) = vanishes(&dg.0, setup.samples, 1e-10)?;
    if !closed {
        return Err(Error::NotClosed(res));
    }
    let mut checks = vec![check("equivariantly_closed", true, res, String::new())];
    let v = spec.fundamental_field(setup.xi)?;
    let mut contributions = Vec::new();
    let pref = prefactor.to_f64();
    let mut worst_sq = 0.0f64;
    for p in setup.points {
        let l = linearize_base(&v, p, setup.params)?;
        let sub = point_substitution(p);
        let h_p = setup.metric.h.map(|e| e.substitute(&sub));
        let hd = sqrt_det_classical(&l, &h_p, setup.params, setup.orientation)?;
        // (Pf)² = det(−h L) = det h · det L
        let det_l = l.det_expansion().map_err(linalg)?;
        let sq = &(&hd.pfaffian * &hd.pfaffian) - &(&hd.det * &det_l);
        if !sq.is_zero() {
            worst_sq = worst_sq.max(sq.evaluate_f64(setup.params)?.abs() / (1.0 + (&hd.det * &det_l).evaluate_f64(setup.params)?.abs()));
        }
        let half = hd.ratio_value(setup.params)?;
        if half == 0.0 || !half.is_finite() {
            return Err(Error::SingularLinearization);
        }
        let body = alpha.0.body().substitute(&sub);
        let a0 = body.evaluate_f64(setup.params)?;
        let symbolic = hd.ratio_exact().map(|r| (body.clone() * r.pow(-1)).to_string());
        contributions.push(Contribution { point: point_label(p), integrand0: a0, half_det: half, value: pref * a0 / half, symbolic });
    }
    checks.push(check("pfaffian_squared", worst_sq < 1e-9, worst_sq, String::new()));
    let total = sum_ordered(&contributions);
    Ok(LocalizationOutcome { prefactor, prefactor_value: pref, contributions, total, checks })
}

/// Deterministic summation order: contributions sorted by their point labels.
fn sum_ordered(c: &[Contribution]) -> f64 {
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.sort_by(|&a, &b| c[a].point.cmp(&c[b].point));
    idx.iter().map(|&i| c[i].value).sum()
}

/// ∫ Θ F(ξ) = (−2)^{n/2}(n/2)! π^{m/2}/(m/2)! Σ_p Sdet^{1/2}(L_{p,ξ}) F(ξ)₀(p).
pub fn super_localize(f: &SuperFunction, q: &SuperVectorField, setup: &LocalizationSetup) -> Result<LocalizationOutcome> {
    let spec = setup.spec;
    let (m, n) = (spec.chart.m(), spec.chart.n());
    let prefactor = Prefactor::superlocalization(m, n)?;
    let lifted = spec.lifted_field(setup.xi)?;
    let square = q.graded_commutator(q)?.scale(&ScalarExpr::ratio(1, 2)).sub(&lifted)?;
    if !square.is_zero() {
        return Err(Error::BrstInvalid(square.nonzero_components().join("; ")));
    }
    let (closed, res) = vanishes(&q.apply(f)?, setup.samples, 1e-10)?;
    if !closed {
        return Err(Error::NotQClosed(res));
    }
    let mut checks = vec![check("q_squared_is_lift", true, 0.0, String::new()), check("q_closed", true, res, String::new())];
    let sigma = sigma_from_q(q)?;
    let v = spec.fundamental_field(setup.xi)?;
    let pref = prefactor.to_f64();
    let mut contributions = Vec::new();
    let (mut worst_sq, mut worst_compat) = (0.0f64, 0.0f64);
    for p in setup.points {
        let sub = point_substitution(p);
        let l = linearize_base(&v, p, setup.params)?;
        let lt = linearize_fiber(&lifted, p, setup.params)?;
        let s_p = sigma.map(|e| e.substitute(&sub));
        crate::equivariant::check_injective(&s_p, &[setup.params.merged(p)])?;
        // σ L̃ = J σ = −L σ at a fixed point
        let compat = s_p.matmul(&lt).map_err(linalg)?.add_matrix(&l.matmul(&s_p).map_err(linalg)?);
        worst_compat = worst_compat.max(eval_at(&compat, setup.params)?.max_abs());
        let h_p = setup.metric.h.map(|e| e.substitute(&sub));
        let big_h = s_p.transpose().matmul(&h_p).map_err(linalg)?.matmul(&s_p).map_err(linalg)?;
        let hd = sqrt_sdet_via_pfaffian(&lt, &big_h, setup.params, setup.orientation)?;
        let det_lt = lt.det_expansion().map_err(linalg)?;
        let sq = &(&hd.pfaffian * &hd.pfaffian) - &(&hd.det * &det_lt);
        if !sq.is_zero() {
            worst_sq = worst_sq.max(sq.evaluate_f64(setup.params)?.abs() / (1.0 + (&hd.det * &det_lt).evaluate_f64(setup.params)?.abs()));
        }
        let inv = hd.ratio_value(setup.params)?;
        if inv == 0.0 || !inv.is_finite() {
            return Err(Error::SingularFiberBlock);
        }
        let half = 1.0 / inv;
        let body = f.body().substitute(&sub);
        let f0 = body.evaluate_f64(setup.params)?;
        let symbolic = hd.ratio_exact().map(|r| (body.clone() * r.pow(-1)).to_string());
        contributions.push(Contribution { point: point_label(p), integrand0: f0, half_det: half, value: pref * half * f0, symbolic });
    }
    checks.push(check("compatibility_square", worst_compat < 1e-10, worst_compat, String::new()));
    checks.push(check("pfaffian_squared", worst_sq < 1e-9, worst_sq, String::new()));
    let total = sum_ordered(&contributions);
    Ok(LocalizationOutcome { prefactor, prefactor_value: pref, contributions, total, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational;

    fn e(s: &str) -> ScalarExpr {
        ScalarExpr::parse(s).unwrap()
    }

    #[test]
    fn prefactors() {
        let c = Prefactor::classical(2).unwrap();
        assert_eq!(c, Prefactor { rational: rational(-2, 1), pi_power: 1 });
        assert_eq!(Prefactor::superlocalization(2, 2).unwrap(), c);
        assert_eq!(Prefactor::superlocalization(4, 4).unwrap(), Prefactor::classical(4).unwrap());
        // Kähler: n = m/2 complex directions, m real: (−2)^{m/2}... with n = m/2 odd pairs
        let k = Prefactor::superlocalization(4, 2).unwrap();
        assert_eq!(k, Prefactor { rational: rational(-1, 1), pi_power: 2 });
        assert!(matches!(Prefactor::superlocalization(3, 2), Err(Error::OddDimension(3))));
        assert_eq!(c.to_string(), "-2*pi");
    }

    #[test]
    fn superdeterminant_of_blocks() {
        let id = Matrix::from_rows(vec![vec![e("1"), e("0")], vec![e("0"), e("1")]]).unwrap();
        let b = Matrix::from_rows(vec![vec![e("2"), e("0")], vec![e("0"), e("3")]]).unwrap();
        assert_eq!(superdeterminant(&id, &b).unwrap(), ScalarExpr::ratio(1, 6));
        let sing = Matrix::from_rows(vec![vec![e("1"), e("2")], vec![e("2"), e("4")]]).unwrap();
        assert_eq!(superdeterminant(&id, &sing), Err(Error::SingularFiberBlock));
    }

    #[test]
    fn exact_square_roots() {
        assert_eq!(exact_sqrt(&rational(16, 9)), Some(rational(4, 3)));
        assert_eq!(exact_sqrt(&rational(2, 1)), None);
        assert_eq!(exact_sqrt(&rational(-4, 1)), None);
    }

    #[test]
    fn rotation_half_dets() {
        let l = Matrix::from_rows(vec![vec![e("0"), e("t")], vec![e("-t"), e("0")]]).unwrap();
        let id = Matrix::from_rows(vec![vec![e("1"), e("0")], vec![e("0"), e("1")]]).unwrap();
        let params = Binding::new().with_rational("t", rational(2, 1));
        let hd = sqrt_det_classical(&l, &id, &params, 1).unwrap();
        assert_eq!(hd.ratio_exact().unwrap(), e("-t"));
        // squared identity, and the sign flips with orientation
        assert_eq!(&hd.pfaffian * &hd.pfaffian, l.det_expansion().unwrap());
        assert_eq!(sqrt_det_classical(&l, &id, &params, -1).unwrap().ratio_exact().unwrap(), e("t"));
    }
}
