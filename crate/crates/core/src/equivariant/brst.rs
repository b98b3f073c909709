use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{FMatrix, Matrix};
use crate::scalar::{Binding, CompiledExpr, ScalarExpr, Symbol};
use crate::superalg::{Parity, SuperChart, SuperFunction, SuperVectorField};

use super::action::ActionSpec;
use super::numgrass::{CompiledSuperFunction, NumGrassmann};

/// Q_ξ = d + i_{ξ*} on a tautological chart: Q(x^i) = θ^i, Q(θ^A) = ξ^α T_α^A.
pub fn tautological_q(spec: &ActionSpec, xi: &[ScalarExpr]) -> Result<SuperVectorField> {
    let chart = &spec.chart;
    if chart.m() != chart.n() {
        return Err(Error::NotTautological { m: chart.m(), n: chart.n() });
    }
    let v = spec.base_components(xi)?;
    let mut q = SuperVectorField::zero(chart, Parity::Odd);
    for (i, vi) in v.into_iter().enumerate() {
        q.set_even(i, SuperFunction::generator(chart, i)?);
        q.set_odd(i, SuperFunction::scalar(chart, vi));
    }
    Ok(q)
}

/// Split of the real coordinates into formally independent holomorphic and
/// antiholomorphic coordinates z^j, z̄^j. The odd generator θ^j stands for dz^j.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexStructure {
    pub holomorphic: Vec<usize>,
    pub antiholomorphic: Vec<usize>,
}

impl ComplexStructure {
    /// Pairs (z1, zb1), (z2, zb2), ... laid out consecutively.
    pub fn interleaved(complex_dim: usize) -> Self {
        ComplexStructure {
            holomorphic: (0..complex_dim).map(|j| 2 * j).collect(),
            antiholomorphic: (0..complex_dim).map(|j| 2 * j + 1).collect(),
        }
    }

    fn validate(&self, chart: &SuperChart) -> Result<()> {
        let m = chart.m();
        if m % 2 == 1 {
            return Err(Error::OddComplexDimension(m));
        }
        let k = m / 2;
        if self.holomorphic.len() != k || self.antiholomorphic.len() != k || chart.n() != k {
            return Err(Error::ShapeMismatch(format!("complex structure needs {k} holomorphic coordinates and n = {k}")));
        }
        let mut seen = vec![false; m];
        for &i in self.holomorphic.iter().chain(&self.antiholomorphic) {
            if i >= m || seen[i] {
                return Err(Error::ShapeMismatch(format!("coordinate index {i} repeated or out of range")));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Q_ξ = ∂ + i_{ξ*}: Q(z^j) = θ^j, Q(z̄^j) = 0, Q(θ^j) = ξ^α T_α^{z^j}.
pub fn kahler_q(spec: &ActionSpec, xi: &[ScalarExpr], cs: &ComplexStructure) -> Result<SuperVectorField> {
    let chart = &spec.chart;
    cs.validate(chart)?;
    let v = spec.base_components(xi)?;
    let mut q = SuperVectorField::zero(chart, Parity::Odd);
    for (j, &i) in cs.holomorphic.iter().enumerate() {
        q.set_even(i, SuperFunction::generator(chart, j)?);
        q.set_odd(j, SuperFunction::scalar(chart, v[i].clone()));
    }
    Ok(q)
}

/// The action whose lift Kähler Q squares to: only the holomorphic components of ξ*
/// survive, and U_{αB}^A = ∂T_α^{z^A}/∂z^B.
pub fn holomorphic_action(spec: &ActionSpec, cs: &ComplexStructure) -> Result<ActionSpec> {
    let chart = &spec.chart;
    cs.validate(chart)?;
    let k = cs.holomorphic.len();
    let base: Vec<Vec<ScalarExpr>> = spec
        .base
        .iter()
        .map(|t| {
            let mut row = vec![ScalarExpr::zero(); chart.m()];
            for &i in &cs.holomorphic {
                row[i] = t[i].clone();
            }
            row
        })
        .collect();
    let fiber = spec
        .base
        .iter()
        .map(|t| {
            (0..k)
                .map(|b| (0..k).map(|a| t[cs.holomorphic[a]].differentiate(&chart.even()[cs.holomorphic[b]])).collect())
                .collect()
        })
        .collect();
    ActionSpec::new(chart, base, fiber)
}

/// σ^i_A from a^i = σ^i_A θ^A, as an m×n matrix.
pub fn sigma_from_q(q: &SuperVectorField) -> Result<Matrix<ScalarExpr>> {
    let chart = q.chart();
    let (m, n) = (chart.m(), chart.n());
    let mut sigma = Matrix::from_fn(m, n, |_, _| ScalarExpr::zero());
    for i in 0..m {
        for (mask, c) in q.even_component(i).terms() {
            if mask.count_ones() != 1 {
                return Err(Error::NotLinearInTheta(chart.even()[i].to_string()));
            }
            sigma[(i, mask.trailing_zeros() as usize)] = c.clone();
        }
    }
    Ok(sigma)
}

pub fn eval_matrix(mat: &Matrix<ScalarExpr>, at: &Binding) -> Result<FMatrix> {
    mat.try_map(|e| e.evaluate_f64(at))
}

/// Checks that σ has rank n at every sample.
pub fn check_injective(sigma: &Matrix<ScalarExpr>, samples: &[Binding]) -> Result<()> {
    let n = sigma.cols();
    for (k, p) in samples.iter().enumerate() {
        let s = eval_matrix(sigma, p)?;
        let rank = s.rank(1e-10 * (1.0 + s.max_abs()));
        if rank < n {
            return Err(Error::NotInjective { rank, n, sample: k });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ConditionResult {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BrstReport {
    pub conditions: Vec<ConditionResult>,
}

impl BrstReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Settings for [`verify_brst`]. `samples` bind the even coordinates and every Lie
/// parameter that appears in ξ.
#[derive(Clone, Debug)]
pub struct BrstCheck {
    pub samples: Vec<Binding>,
    pub functions: Vec<SuperFunction>,
    /// Flow times for the finite equivariance check.
    pub flow_times: Vec<f64>,
    pub rk4_steps: usize,
    pub tol: f64,
}

impl BrstCheck {
    pub fn new(samples: Vec<Binding>, functions: Vec<SuperFunction>) -> Self {
        BrstCheck { samples, functions, flow_times: vec![0.5], rk4_steps: 200, tol: 1e-8 }
    }
}

/// Checks the three defining conditions of a BRST operator: Q² = ξ̂*, equivariance
/// under the flow of ξ̂*, and injectivity of σ_Q. Failures are report entries.
pub fn verify_brst(q: &SuperVectorField, spec: &ActionSpec, xi: &[ScalarExpr], check: &BrstCheck) -> Result<BrstReport> {
    let lifted = spec.lifted_field(xi)?;
    let mut conditions = vec![square_condition(q, &lifted, check)?];
    conditions.push(equivariance_condition(q, spec, xi, check)?);
    conditions.push(match sigma_from_q(q).and_then(|s| check_injective(&s, &check.samples)) {
        Ok(()) => ConditionResult { name: "sigma_injective".into(), passed: true, residual: 0.0, detail: String::new() },
        Err(e) => ConditionResult { name: "sigma_injective".into(), passed: false, residual: 1.0, detail: e.to_string() },
    });
    Ok(BrstReport { conditions })
}

fn square_condition(q: &SuperVectorField, lifted: &SuperVectorField, check: &BrstCheck) -> Result<ConditionResult> {
    let half = ScalarExpr::ratio(1, 2);
    let residual = q.graded_commutator(q)?.scale(&half).sub(lifted)?;
    let mut detail = residual.nonzero_components();
    // the literal statement Q(Q f) = ξ̂*(f) on the supplied functions
    let mut worst = 0.0f64;
    for (k, f) in check.functions.iter().enumerate() {
        let diff = &q.apply(&q.apply(f)?)? - &lifted.apply(f)?;
        if !diff.is_zero() {
            detail.push(format!("Q^2 f - lift(f) = {diff} for function {k}"));
            for p in &check.samples {
                for (_, c) in diff.terms() {
                    worst = worst.max(c.evaluate_f64(p).map(f64::abs).unwrap_or(f64::INFINITY));
                }
            }
            worst = worst.max(f64::MIN_POSITIVE);
        }
    }
    if !residual.is_zero() {
        for p in &check.samples {
            for comp in residual.even_components().iter().chain(residual.odd_components()) {
                for (_, c) in comp.terms() {
                    worst = worst.max(c.evaluate_f64(p).map(f64::abs).unwrap_or(f64::INFINITY));
                }
            }
        }
        worst = worst.max(f64::MIN_POSITIVE);
    }
    Ok(ConditionResult { name: "q_squared_is_lift".into(), passed: detail.is_empty(), residual: worst, detail: detail.join("; ") })
}

/// Flow of the lifted field: x(s) along ξ*, and θ ↦ θ M(s) with M' = M U(x(s)).
struct LiftFlow {
    base: Vec<CompiledExpr>,
    fiber: Vec<(usize, usize, CompiledExpr)>,
    n: usize,
}

impl LiftFlow {
    fn new(spec: &ActionSpec, xi: &[ScalarExpr], fixed: &Binding) -> Result<Self> {
        let slots: Vec<Symbol> = spec.chart.even().to_vec();
        let base = spec.base_components(xi)?.iter().map(|e| CompiledExpr::new(e, &slots, fixed)).collect::<Result<_>>()?;
        let mut fiber = Vec::new();
        for (b, row) in spec.fiber_matrix(xi)?.iter().enumerate() {
            for (a, e) in row.iter().enumerate() {
                if !e.is_zero() {
                    fiber.push((b, a, CompiledExpr::new(e, &slots, fixed)?));
                }
            }
        }
        Ok(LiftFlow { base, fiber, n: spec.chart.n() })
    }

    fn rhs(&self, x: &[f64], mat: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let dx: Vec<f64> = self.base.iter().map(|c| c.eval(x)).collect();
        let mut u = vec![vec![0.0; self.n]; self.n];
        for (b, a, c) in &self.fiber {
            u[*b][*a] = c.eval(x);
        }
        let dm = (0..self.n)
            .map(|r| (0..self.n).map(|a| (0..self.n).map(|b| mat[r][b] * u[b][a]).sum()).collect())
            .collect();
        (dx, dm)
    }

    fn run(&self, x0: &[f64], s: f64, steps: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let h = s / steps as f64;
        let mut x = x0.to_vec();
        let mut mat: Vec<Vec<f64>> = (0..self.n).map(|r| (0..self.n).map(|c| (r == c) as u8 as f64).collect()).collect();
        let axpy = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + c * b).collect() };
        let maxpy = |m: &[Vec<f64>], k: &[Vec<f64>], c: f64| -> Vec<Vec<f64>> { m.iter().zip(k).map(|(a, b)| axpy(a, b, c)).collect() };
        for _ in 0..steps {
            let (k1x, k1m) = self.rhs(&x, &mat);
            let (k2x, k2m) = self.rhs(&axpy(&x, &k1x, h / 2.0), &maxpy(&mat, &k1m, h / 2.0));
            let (k3x, k3m) = self.rhs(&axpy(&x, &k2x, h / 2.0), &maxpy(&mat, &k2m, h / 2.0));
            let (k4x, k4m) = self.rhs(&axpy(&x, &k3x, h), &maxpy(&mat, &k3m, h));
            for i in 0..x.len() {
                x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            }
            for r in 0..self.n {
                for c in 0..self.n {
                    mat[r][c] += h / 6.0 * (k1m[r][c] + 2.0 * k2m[r][c] + 2.0 * k3m[r][c] + k4m[r][c]);
                }
            }
        }
        (x, mat)
    }
}

/// Compares Q(Φ_s^* F) with Φ_s^*(Q F) at the sample points, Φ_s the flow of ξ̂*.
/// The x-derivatives on the left are taken with a five-point stencil.
fn equivariance_condition(q: &SuperVectorField, spec: &ActionSpec, xi: &[ScalarExpr], check: &BrstCheck) -> Result<ConditionResult> {
    let chart = spec.chart.clone();
    let m = chart.m();
    let results: Vec<Result<f64>> = check
        .samples
        .par_iter()
        .map(|p| {
            let flow = LiftFlow::new(spec, xi, p)?;
            let x0: Vec<f64> = chart.even().iter().map(|s| ScalarExpr::from_symbol(s.clone()).evaluate_f64(p)).collect::<Result<_>>()?;
            let qa: Vec<NumGrassmann> = q.even_components().iter().map(|c| compile_eval(c, p, &x0)).collect::<Result<_>>()?;
            let qb: Vec<NumGrassmann> = q.odd_components().iter().map(|c| compile_eval(c, p, &x0)).collect::<Result<_>>()?;
            let mut worst = 0.0f64;
            for f in &check.functions {
                let cf = CompiledSuperFunction::new(f, p)?;
                let cqf = CompiledSuperFunction::new(&q.apply(f)?, p)?;
                for &s in &check.flow_times {
                    let pulled = |x: &[f64]| {
                        let (xs, mat) = flow.run(x, s, check.rk4_steps);
                        cf.eval_pulled(&xs, &mat)
                    };
                    let g0 = pulled(&x0);
                    let mut lhs = NumGrassmann::default();
                    for (a, b) in qb.iter().enumerate() {
                        if !b.terms.is_empty() {
                            lhs = lhs.add(&b.mul(&g0.odd_partial(a)));
                        }
                    }
                    for i in 0..m {
                        if qa[i].terms.is_empty() {
                            continue;
                        }
                        let h = 1e-3 * (1.0 + x0[i].abs());
                        let shifted = |k: f64| {
                            let mut x = x0.clone();
                            x[i] += k * h;
                            pulled(&x)
                        };
                        let d = shifted(-2.0)
                            .scale(1.0)
                            .add(&shifted(-1.0).scale(-8.0))
                            .add(&shifted(1.0).scale(8.0))
                            .add(&shifted(2.0).scale(-1.0))
                            .scale(1.0 / (12.0 * h));
                        lhs = lhs.add(&qa[i].mul(&d));
                    }
                    let (xs, mat) = flow.run(&x0, s, check.rk4_steps);
                    let rhs = cqf.eval_pulled(&xs, &mat);
                    let scale = 1.0 + rhs.max_abs().max(lhs.max_abs());
                    worst = worst.max(lhs.max_abs_diff(&rhs) / scale);
                }
            }
            Ok(worst)
        })
        .collect();
    let mut worst = 0.0f64;
    for r in results {
        worst = worst.max(r?);
    }
    let passed = worst <= check.tol;
    let detail = if passed { String::new() } else { format!("pushforward mismatch {worst:e} exceeds tolerance {:e}", check.tol) };
    Ok(ConditionResult { name: "equivariance".into(), passed, residual: worst, detail })
}

fn compile_eval(f: &SuperFunction, fixed: &Binding, x: &[f64]) -> Result<NumGrassmann> {
    Ok(CompiledSuperFunction::new(f, fixed)?.eval(x))
}

/// Shortcut for charts built in tests and scenarios: a chart with the given even
/// names and n = m odd generators.
pub fn tautological_chart(even: &[&str]) -> Arc<SuperChart> {
    SuperChart::new(even, even.len())
}
