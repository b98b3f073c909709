use std::collections::BTreeMap;

use crate::equivariant::{sigma_from_q, ActionSpec, MetricData};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{Binding, ScalarExpr, Symbol};
use crate::superalg::{SuperFunction, SuperVectorField};

use super::fixed::{eval_at, linearize_base, point_substitution};

/// λ and β = σ*_Q(λ) for the exactness argument, with the checks that were run.
#[derive(Clone, Debug)]
pub struct LambdaBeta {
    /// Components λ_i of the 1-form.
    pub lambda: Vec<ScalarExpr>,
    pub beta: SuperFunction,
    /// λ(ξ*) ≈ c · h_p(x − p, x − p) near p; c = 1 after rescaling when J is conformal.
    pub conformal: bool,
    pub invariance_residual: f64,
}

/// λ = h(ξ*, ·)/c where c = tr(h_p⁻¹ Jᵀ h_p J)/m, so that λ(ξ*) agrees with the squared
/// distance from p to second order whenever J is h_p-conformal.
pub fn build_lambda_beta(
    metric: &MetricData,
    spec: &ActionSpec,
    xi: &[ScalarExpr],
    q: &SuperVectorField,
    point: &Binding,
    params: &Binding,
    samples: &[Binding],
) -> Result<LambdaBeta> {
    let chart = &spec.chart;
    let m = chart.m();
    let v = spec.base_components(xi)?;
    let l = linearize_base(&spec.fundamental_field(xi)?, point, params)?;
    let sub = point_substitution(point);
    let h_p = eval_at(&metric.h.map(|e| e.substitute(&sub)), params)?;
    let j = eval_at(&l, params)?.map(|x| -x);
    let hinv = h_p.inverse()?;
    let jthj = j.transpose().matmul(&h_p)?.matmul(&j)?;
    let prod = hinv.matmul(&jthj)?;
    let c = (0..m).map(|i| prod[(i, i)]).sum::<f64>() / m as f64;
    if c.abs() < 1e-14 {
        return Err(Error::DegenerateField("linearization vanishes at the fixed point".into()));
    }
    let scale = (0..m).flat_map(|i| (0..m).map(move |k| (i, k))).fold(0.0f64, |acc, (i, k)| acc.max(jthj[(i, k)].abs()));
    let conformal = (0..m).all(|i| (0..m).all(|k| (jthj[(i, k)] - c * h_p[(i, k)]).abs() <= 1e-10 * (1.0 + scale)));
    // c is a polynomial in the parameters in typical cases; keep λ exact when it is
    let c_expr = exact_c(&l, metric, &sub, params).unwrap_or_else(|| ScalarExpr::constant(num_rational::BigRational::from_float(c).unwrap()));
    let inv_c = match c_expr.as_constant() {
        Some(q) => ScalarExpr::constant(q.recip()),
        None => c_expr.pow(-1),
    };
    let lambda: Vec<ScalarExpr> =
        (0..m).map(|jj| (0..m).map(|i| &metric.h[(i, jj)] * &v[i]).sum::<ScalarExpr>() * inv_c.clone()).collect();
    let invariance_residual = one_form_lie_residual(&lambda, &v, chart.even(), samples)?;
    let sigma = sigma_from_q(q)?;
    let mut beta = SuperFunction::zero(chart);
    for a in 0..chart.n() {
        let coeff: ScalarExpr = (0..m).map(|i| &lambda[i] * &sigma[(i, a)]).sum();
        beta = &beta + &SuperFunction::monomial(chart, 1u64 << a, coeff);
    }
    Ok(LambdaBeta { lambda, beta, conformal, invariance_residual })
}

/// c as an exact expression in the parameters when J is conformal with rational data:
/// reads it off the (0,0) entry of h_p⁻¹ Jᵀ h_p J.
fn exact_c(l: &Matrix<ScalarExpr>, metric: &MetricData, sub: &BTreeMap<Symbol, ScalarExpr>, params: &Binding) -> Option<ScalarExpr> {
    let h_p = metric.h.map(|e| e.substitute(sub));
    let hq = h_p.try_map(|e| e.as_constant().ok_or(())).ok()?;
    let hinv = hq.inverse().ok()?.map(|q| ScalarExpr::constant(q.clone()));
    let jthj = l.transpose().matmul(&h_p).ok()?.matmul(l).ok()?;
    let prod = hinv.matmul(&jthj).ok()?;
    let c = prod[(0, 0)].clone();
    // only trust it if the numeric trace agrees
    let m = l.rows();
    let tr: f64 = (0..m).map(|i| prod[(i, i)].evaluate_f64(params).unwrap_or(f64::NAN)).sum::<f64>() / m as f64;
    let c0 = c.evaluate_f64(params).ok()?;
    ((c0 - tr).abs() <= 1e-12 * (1.0 + tr.abs())).then_some(c)
}

/// max |(L_V λ)_j| over the samples, (L_V λ)_j = V^k ∂_k λ_j + λ_k ∂_j V^k.
pub fn one_form_lie_residual(lambda: &[ScalarExpr], v: &[ScalarExpr], coords: &[Symbol], samples: &[Binding]) -> Result<f64> {
    let m = coords.len();
    let comps: Vec<ScalarExpr> = (0..m)
        .map(|j| {
            (0..m)
                .map(|k| &(&v[k] * &lambda[j].differentiate(&coords[k])) + &(&lambda[k] * &v[k].differentiate(&coords[j])))
                .sum()
        })
        .collect();
    if comps.iter().all(ScalarExpr::is_zero) {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for p in samples {
        for c in &comps {
            worst = worst.max(c.evaluate_f64(p)?.abs());
        }
    }
    Ok(worst)
}

/// ν = (β · F · Q(β)⁻¹)_{[n−1]}, with Q(β) inverted as a nilpotent series; the body
/// of Q(β) must be non-zero at every sample.
pub fn exactness_witness(f: &SuperFunction, beta: &SuperFunction, q: &SuperVectorField, samples: &[Binding]) -> Result<SuperFunction> {
    let qb = q.apply(beta)?;
    let inv = qb.invert_even(samples).map_err(|e| match e {
        Error::ZeroBody(_) | Error::NotEven => Error::NonInvertibleQBeta,
        other => other,
    })?;
    let n = f.chart().n() as u32;
    if n == 0 {
        return Ok(SuperFunction::zero(f.chart()));
    }
    Ok(beta.wedge(f)?.wedge(&inv)?.component(n - 1))
}

/// max over samples of |Q(ν)_[n] − F_[n]|.
pub fn witness_residual(nu: &SuperFunction, f: &SuperFunction, q: &SuperVectorField, samples: &[Binding]) -> Result<f64> {
    let n = f.chart().n() as u32;
    let diff = &q.apply(nu)?.component(n) - &f.component(n);
    let mut worst = 0.0f64;
    for p in samples {
        for (_, c) in diff.terms() {
            worst = worst.max(c.evaluate_f64(p)?.abs());
        }
    }
    Ok(worst)
}

/// Effect of x ↦ s x, θ ↦ s θ on a superfunction (s a symbol): the coefficient of
/// θ^I picks up s^{|I|}.
pub fn rescale(f: &SuperFunction, s: &str) -> SuperFunction {
    let sv = ScalarExpr::symbol(s);
    let map: BTreeMap<Symbol, ScalarExpr> =
        f.chart().even().iter().map(|c| (c.clone(), &sv * &ScalarExpr::from_symbol(c.clone()))).collect();
    SuperFunction::from_terms(
        f.chart(),
        f.terms().map(|(mask, c)| (mask, c.substitute(&map) * sv.pow(mask.count_ones() as i32))),
    )
}

/// Largest |μ(s x, s θ) − μ(x, θ)| over samples and the given scale factors, for
/// μ = β · Q(β)⁻¹.
pub fn rescaling_residual(beta: &SuperFunction, q: &SuperVectorField, samples: &[Binding], scales: &[f64]) -> Result<f64> {
    let inv = q.apply(beta)?.invert_even(samples).map_err(|_| Error::NonInvertibleQBeta)?;
    let mu = beta.wedge(&inv)?;
    let scaled = rescale(&mu, "__s");
    let diff = &scaled - &mu;
    let mut worst = 0.0f64;
    for p in samples {
        for &s in scales {
            let at = p.clone().with_f64("__s", s);
            for (_, c) in diff.terms() {
                worst = worst.max(c.evaluate_f64(&at)?.abs());
            }
        }
    }
    Ok(worst)
}
