use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{FMatrix, Matrix};
use crate::scalar::{Binding, ScalarExpr};
use crate::superalg::SuperChart;

use super::action::ActionSpec;
use super::brst::{check_injective, eval_matrix};

/// Riemannian metric h_ij on the body chart.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricData {
    pub chart: Arc<SuperChart>,
    pub h: Matrix<ScalarExpr>,
}

impl MetricData {
    pub fn new(chart: &Arc<SuperChart>, h: Matrix<ScalarExpr>) -> Result<Self> {
        let m = chart.m();
        if h.rows() != m || h.cols() != m {
            return Err(Error::ShapeMismatch(format!("metric must be {m}x{m}, got {}x{}", h.rows(), h.cols())));
        }
        for i in 0..m {
            for j in i + 1..m {
                if h[(i, j)] != h[(j, i)] {
                    return Err(Error::NotSymmetric(i, j));
                }
            }
        }
        Ok(MetricData { chart: chart.clone(), h })
    }

    pub fn euclidean(chart: &Arc<SuperChart>) -> Self {
        MetricData { chart: chart.clone(), h: Matrix::identity(chart.m()) }
    }

    pub fn check_positive_definite(&self, samples: &[Binding]) -> Result<()> {
        check_pd(&self.h, samples)
    }

    /// Largest |L_{ξ*} h| entry over the samples.
    pub fn invariance_residual(&self, spec: &ActionSpec, xi: &[ScalarExpr], samples: &[Binding]) -> Result<f64> {
        let lie = lie_derivative_metric(&self.h, &spec.base_components(xi)?, self.chart.even());
        let mut worst = 0.0f64;
        for p in samples {
            worst = worst.max(eval_matrix(&lie, p)?.max_abs());
        }
        Ok(worst)
    }

    pub fn check_invariant(&self, spec: &ActionSpec, xi: &[ScalarExpr], samples: &[Binding], tol: f64) -> Result<()> {
        let r = self.invariance_residual(spec, xi, samples)?;
        if r > tol {
            return Err(Error::NotInvariant(r));
        }
        Ok(())
    }
}

fn check_pd(mat: &Matrix<ScalarExpr>, samples: &[Binding]) -> Result<()> {
    for (k, p) in samples.iter().enumerate() {
        if !eval_matrix(mat, p)?.is_positive_definite() {
            return Err(Error::NotPositiveDefinite(k));
        }
    }
    Ok(())
}

/// (L_V h)_ij = V^k ∂_k h_ij + h_kj ∂_i V^k + h_ik ∂_j V^k.
pub fn lie_derivative_metric(h: &Matrix<ScalarExpr>, v: &[ScalarExpr], coords: &[crate::scalar::Symbol]) -> Matrix<ScalarExpr> {
    let m = h.rows();
    Matrix::from_fn(m, m, |i, j| {
        let mut acc = ScalarExpr::zero();
        for k in 0..m {
            acc += &(&v[k] * &h[(i, j)].differentiate(&coords[k]));
            acc += &(&h[(k, j)] * &v[k].differentiate(&coords[i]));
            acc += &(&h[(i, k)] * &v[k].differentiate(&coords[j]));
        }
        acc
    })
}

/// H = σᵀ h σ, after checking that σ is injective at the samples.
pub fn induced_fiber_metric(h: &MetricData, sigma: &Matrix<ScalarExpr>, samples: &[Binding]) -> Result<Matrix<ScalarExpr>> {
    if sigma.rows() != h.h.rows() {
        return Err(Error::ShapeMismatch(format!("sigma has {} rows, metric is {}x{}", sigma.rows(), h.h.rows(), h.h.rows())));
    }
    check_injective(sigma, samples)?;
    Ok(sigma.transpose().matmul(&h.h)?.matmul(sigma)?)
}

/// Christoffel symbols Γ^i_{kj} of a metric at a point, indexed `[i][k][j]`.
pub fn christoffel(g: &Matrix<ScalarExpr>, coords: &[crate::scalar::Symbol], at: &Binding) -> Result<Vec<Vec<Vec<f64>>>> {
    let d = g.rows();
    let ginv = eval_matrix(g, at)?.inverse()?;
    let dg: Vec<FMatrix> = coords.iter().take(d).map(|c| eval_matrix(&g.map(|e| e.differentiate(c)), at)).collect::<Result<_>>()?;
    Ok(christoffel_from(&ginv, &dg))
}

/// Γ from g⁻¹ and the partials dg[k] = ∂_k g.
fn christoffel_from(ginv: &FMatrix, dg: &[FMatrix]) -> Vec<Vec<Vec<f64>>> {
    let d = ginv.rows();
    let mut gamma = vec![vec![vec![0.0; d]; d]; d];
    for i in 0..d {
        for k in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += ginv[(i, l)] * (dg[k][(l, j)] + dg[j][(l, k)] - dg[l][(k, j)]);
                }
                gamma[i][k][j] = 0.5 * s;
            }
        }
    }
    gamma
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ParallelReport {
    pub passed: bool,
    pub max_covariant_derivative: f64,
    pub worst_sample: usize,
    pub tol: f64,
}

/// Covariant derivative ∇_k σ^i_A = ∂_k σ^i_A + Γ^i_{kj} σ^j_A − σ^i_B ω^B_{kA}, with
/// Levi-Civita Γ of h. On the fiber side ω is the Levi-Civita connection of H in the
/// frame θ^A when n = m, and the connection σ⁺(∂σ + Γσ) projected through
/// σ⁺ = H⁻¹σᵀh when n < m.
pub fn check_sigma_parallel(
    sigma: &Matrix<ScalarExpr>,
    h: &MetricData,
    big_h: &Matrix<ScalarExpr>,
    samples: &[Binding],
    tol: f64,
) -> Result<ParallelReport> {
    let coords = h.chart.even();
    let (m, n) = (sigma.rows(), sigma.cols());
    let dsigma: Vec<Matrix<ScalarExpr>> = coords.iter().map(|c| sigma.map(|e| e.differentiate(c))).collect();
    let mut worst = 0.0f64;
    let mut worst_sample = 0;
    for (idx, p) in samples.iter().enumerate() {
        let s = eval_matrix(sigma, p)?;
        let gamma = christoffel(&h.h, coords, p)?;
        let hh = eval_matrix(big_h, p)?;
        let hinv = hh.inverse()?;
        for k in 0..m {
            let ds = eval_matrix(&dsigma[k], p)?;
            // D = ∂_k σ + Γ_k σ
            let dmat = FMatrix::from_fn(m, n, |i, a| ds[(i, a)] + (0..m).map(|j| gamma[i][k][j] * s[(j, a)]).sum::<f64>());
            let omega = if n == m {
                let dh: Vec<FMatrix> = coords.iter().map(|c| eval_matrix(&big_h.map(|e| e.differentiate(c)), p)).collect::<Result<_>>()?;
                let g = christoffel_from(&hinv, &dh);
                FMatrix::from_fn(n, n, |b, a| g[b][k][a])
            } else {
                let hm = eval_matrix(&h.h, p)?;
                let plus = hinv.matmul(&s.transpose())?.matmul(&hm)?;
                plus.matmul(&dmat)?
            };
            let so = s.matmul(&omega)?;
            for i in 0..m {
                for a in 0..n {
                    let v = (dmat[(i, a)] - so[(i, a)]).abs();
                    if v > worst {
                        worst = v;
                        worst_sample = idx;
                    }
                }
            }
        }
    }
    Ok(ParallelReport { passed: worst <= tol, max_covariant_derivative: worst, worst_sample, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivariant::brst::tautological_chart;

    fn e(s: &str) -> ScalarExpr {
        ScalarExpr::parse(s).unwrap()
    }

    fn mat(rows: &[&[&str]]) -> Matrix<ScalarExpr> {
        Matrix::from_rows(rows.iter().map(|r| r.iter().map(|s| e(s)).collect()).collect()).unwrap()
    }

    fn grid(names: [&str; 2]) -> Vec<Binding> {
        let mut out = Vec::new();
        for &(a, b) in &[(0.3, -0.4), (1.2, 0.7), (-0.8, 0.25), (0.05, 1.5)] {
            out.push(Binding::new().with_f64(names[0], a).with_f64(names[1], b));
        }
        out
    }

    #[test]
    fn identity_sigma_gives_h() {
        let chart = tautological_chart(&["x", "y"]);
        let h = MetricData::new(&chart, mat(&[&["1 + x^2", "x*y"], &["x*y", "2"]])).unwrap();
        let big = induced_fiber_metric(&h, &Matrix::identity(2), &grid(["x", "y"])).unwrap();
        assert_eq!(big, h.h);
    }

    #[test]
    fn diagonal_sigma() {
        let chart = tautological_chart(&["x", "y"]);
        let h = MetricData::euclidean(&chart);
        let big = induced_fiber_metric(&h, &mat(&[&["2", "0"], &["0", "1"]]), &grid(["x", "y"])).unwrap();
        assert_eq!(big, mat(&[&["4", "0"], &["0", "1"]]));
    }

    #[test]
    fn asymmetric_metric_rejected() {
        let chart = tautological_chart(&["x", "y"]);
        assert!(matches!(MetricData::new(&chart, mat(&[&["1", "x"], &["0", "1"]])), Err(Error::NotSymmetric(0, 1))));
    }

    #[test]
    fn round_sphere_metric_is_invariant_and_tautological_sigma_parallel() {
        let chart = tautological_chart(&["u", "v"]);
        let h = MetricData::new(&chart, mat(&[&["4*(1 + u^2 + v^2)^(-2)", "0"], &["0", "4*(1 + u^2 + v^2)^(-2)"]])).unwrap();
        let samples = grid(["u", "v"]);
        h.check_positive_definite(&samples).unwrap();
        let spec = ActionSpec::tautological(&chart, vec![vec![e("-v"), e("u")]]).unwrap();
        h.check_invariant(&spec, &[ScalarExpr::one()], &samples, 1e-12).unwrap();
        let sigma = Matrix::identity(2);
        let big = induced_fiber_metric(&h, &sigma, &samples).unwrap();
        let rep = check_sigma_parallel(&sigma, &h, &big, &samples, 1e-8).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn translation_breaks_invariance_of_round_metric() {
        let chart = tautological_chart(&["u", "v"]);
        let h = MetricData::new(&chart, mat(&[&["4*(1 + u^2 + v^2)^(-2)", "0"], &["0", "4*(1 + u^2 + v^2)^(-2)"]])).unwrap();
        let spec = ActionSpec::tautological(&chart, vec![vec![e("1"), e("0")]]).unwrap();
        assert!(matches!(h.check_invariant(&spec, &[ScalarExpr::one()], &grid(["u", "v"]), 1e-12), Err(Error::NotInvariant(_))));
    }

    #[test]
    fn christoffel_matches_finite_differences() {
        let chart = tautological_chart(&["u", "v"]);
        let g = mat(&[&["4*(1 + u^2 + v^2)^(-2)", "0"], &["0", "4*(1 + u^2 + v^2)^(-2)"]]);
        let coords = chart.even();
        let (u, v) = (0.4, -0.3);
        let at = |du: f64, dv: f64| Binding::new().with_f64("u", u + du).with_f64("v", v + dv);
        let exact = christoffel(&g, coords, &at(0.0, 0.0)).unwrap();
        let step = 1e-5;
        let dg: Vec<FMatrix> = (0..2)
            .map(|k| {
                let (a, b) = if k == 0 { ((step, 0.0), (-step, 0.0)) } else { ((0.0, step), (0.0, -step)) };
                let plus = eval_matrix(&g, &at(a.0, a.1)).unwrap();
                let minus = eval_matrix(&g, &at(b.0, b.1)).unwrap();
                FMatrix::from_fn(2, 2, |i, j| (plus[(i, j)] - minus[(i, j)]) / (2.0 * step))
            })
            .collect();
        let fd = christoffel_from(&eval_matrix(&g, &at(0.0, 0.0)).unwrap().inverse().unwrap(), &dg);
        for i in 0..2 {
            for k in 0..2 {
                for j in 0..2 {
                    assert!((exact[i][k][j] - fd[i][k][j]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn constant_sigma_flat_metric_parallel() {
        let chart = tautological_chart(&["x", "y"]);
        let h = MetricData::euclidean(&chart);
        let sigma = mat(&[&["2", "1"], &["0", "3"]]);
        let samples = grid(["x", "y"]);
        let big = induced_fiber_metric(&h, &sigma, &samples).unwrap();
        let rep = check_sigma_parallel(&sigma, &h, &big, &samples, 1e-12).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.max_covariant_derivative, 0.0);
    }

    #[test]
    fn x_dependent_sigma_fails() {
        let chart = tautological_chart(&["x", "y"]);
        let h = MetricData::euclidean(&chart);
        let sigma = mat(&[&["1", "0"], &["0", "1 + x^2"]]);
        let samples = grid(["x", "y"]);
        let big = induced_fiber_metric(&h, &sigma, &samples).unwrap();
        let rep = check_sigma_parallel(&sigma, &h, &big, &samples, 1e-8).unwrap();
        assert!(!rep.passed);
        assert!(rep.max_covariant_derivative > 0.1);
    }

    #[test]
    fn tilting_line_subbundle_fails() {
        // n < m: the image of σ turns as x moves
        let chart = SuperChart::new(&["x", "y"], 1);
        let h = MetricData::euclidean(&chart);
        let sigma = mat(&[&["1"], &["x"]]);
        let samples = grid(["x", "y"]);
        let big = induced_fiber_metric(&h, &sigma, &samples).unwrap();
        assert!(!check_sigma_parallel(&sigma, &h, &big, &samples, 1e-8).unwrap().passed);
        let flat = mat(&[&["1"], &["2"]]);
        let big = induced_fiber_metric(&h, &flat, &samples).unwrap();
        assert!(check_sigma_parallel(&flat, &h, &big, &samples, 1e-12).unwrap().passed);
    }
}
