use serde::Serialize;

use crate::equivariant::{check_sigma_parallel, sigma_from_q, MetricData, ParallelReport};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{Binding, CompiledExpr, ScalarExpr};
use crate::superalg::{OddMask, SuperFunction, SuperVectorField};

use super::quadrature::{integrate, QuadratureOptions};

/// `radicand^(exponent/2) * value`. Square roots of determinants are not expressible
/// in the scalar language, so they ride along and are taken numerically.
#[derive(Clone, Debug, PartialEq)]
pub struct RootScaled<T> {
    pub value: T,
    pub radicand: ScalarExpr,
    pub exponent: i32,
}

impl<T> RootScaled<T> {
    pub fn factor(&self, at: &Binding) -> Result<f64> {
        let r = self.radicand.evaluate_f64(at)?;
        if !(r > 0.0) {
            return Err(Error::NotPositiveDefinite(0));
        }
        Ok(r.powf(self.exponent as f64 / 2.0))
    }
}

fn full_mask(n: usize) -> OddMask {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// (∗_H ν)^A = det(H)^{−1/2} ε^{A A₂…A_n} ν_{A₂…A_n}. With ν stored as a sum over
/// increasing index sets, the ε-contraction collapses to (−1)^A times the coefficient
/// of the complementary monomial (A counted from zero).
pub fn hodge_dual_big_h(nu: &SuperFunction, big_h: &Matrix<ScalarExpr>) -> Result<RootScaled<Vec<ScalarExpr>>> {
    let n = nu.chart().n();
    if n == 0 {
        return Err(Error::WrongGrade { expected: 0 });
    }
    if big_h.rows() != n || big_h.cols() != n {
        return Err(Error::ShapeMismatch(format!("H must be {n}x{n}")));
    }
    let expected = (n - 1) as u32;
    if nu.grades().any(|g| g != expected) {
        return Err(Error::WrongGrade { expected });
    }
    let full = full_mask(n);
    let value = (0..n)
        .map(|a| {
            let c = nu.coefficient(full & !(1u64 << a));
            if a % 2 == 0 {
                c
            } else {
                -&c
            }
        })
        .collect();
    Ok(RootScaled { value, radicand: big_h.det_expansion()?, exponent: -1 })
}

/// Inverse by cofactors; entries carry a reciprocal of det unless det is constant.
fn symbolic_inverse(a: &Matrix<ScalarExpr>) -> Result<Matrix<ScalarExpr>> {
    let d = a.rows();
    let det = a.det_expansion()?;
    if det.is_zero() {
        return Err(Error::Linalg(crate::linalg::LinalgError::Singular));
    }
    let inv_det = det.pow(-1);
    let mut out = Matrix::from_fn(d, d, |_, _| ScalarExpr::zero());
    for i in 0..d {
        for j in 0..d {
            let minor = Matrix::from_fn(d - 1, d - 1, |r, c| {
                let r = if r < j { r } else { r + 1 };
                let c = if c < i { c } else { c + 1 };
                a[(r, c)].clone()
            });
            let cof = if d == 1 { ScalarExpr::one() } else { minor.det_expansion()? };
            let cof = if (i + j) % 2 == 0 { cof } else { -&cof };
            out[(i, j)] = &cof * &inv_det;
        }
    }
    Ok(out)
}

/// Metric Hodge dual of a 1-form ω = ω_j dx^j on the tautological chart (θ^i = dx^i):
/// ∗ω = √det h · h^{ij} ω_j · ι_{∂_i}(dx¹…dx^m).
pub fn hodge_dual_h(omega: &[ScalarExpr], metric: &MetricData) -> Result<RootScaled<SuperFunction>> {
    let chart = &metric.chart;
    let m = chart.m();
    if chart.n() != m {
        return Err(Error::NotTautological { m, n: chart.n() });
    }
    if omega.len() != m {
        return Err(Error::ShapeMismatch(format!("1-form needs {m} components, got {}", omega.len())));
    }
    let hinv = symbolic_inverse(&metric.h)?;
    let full = full_mask(m);
    let terms = (0..m).map(|i| {
        let raised = (0..m).fold(ScalarExpr::zero(), |acc, j| &acc + &(&hinv[(i, j)] * &omega[j]));
        let c = if i % 2 == 0 { raised } else { -&raised };
        (full & !(1u64 << i), c)
    });
    Ok(RootScaled { value: SuperFunction::from_terms(chart, terms), radicand: metric.h.det_expansion()?, exponent: 1 })
}

#[derive(Clone, Debug)]
pub struct StokesOptions {
    pub tol: f64,
    pub parallel_tol: f64,
    pub quadrature: QuadratureOptions,
}

impl Default for StokesOptions {
    fn default() -> Self {
        StokesOptions { tol: 1e-8, parallel_tol: 1e-8, quadrature: QuadratureOptions { tol: 1e-11, ..QuadratureOptions::default() } }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct StokesReport {
    pub interior: f64,
    pub boundary: f64,
    /// Signed flux through each face, ordered (x¹ = a₁, x¹ = b₁, x² = a₂, …).
    pub faces: Vec<f64>,
    pub difference: f64,
    pub passed: bool,
    pub parallel: ParallelReport,
}

/// Interior sample points of a box: the 3^m grid at quarter, half and three quarters.
fn box_samples(coords: &[crate::scalar::Symbol], lower: &[f64], upper: &[f64], params: &Binding) -> Vec<Binding> {
    let m = coords.len();
    (0..3usize.pow(m as u32))
        .map(|mut idx| {
            let mut b = params.clone();
            for d in 0..m {
                let frac = 0.25 * (1 + idx % 3) as f64;
                idx /= 3;
                b.set_symbol(coords[d].clone(), crate::scalar::Number::Float(lower[d] + frac * (upper[d] - lower[d])));
            }
            b
        })
        .collect()
}

/// Compare ∫_U Θ Q(ν) with the flux ∫_{∂U} ∗_h σ(∗_H ν) over a coordinate box U.
///
/// The flux through the face x^i = c of W = σ(∗_H ν) is ±∫ √det h · W^i over the other
/// coordinates, with + on the upper face (outward normal first).
pub fn super_stokes_check(
    nu: &SuperFunction,
    q: &SuperVectorField,
    metric: &MetricData,
    lower: &[f64],
    upper: &[f64],
    params: &Binding,
    opts: &StokesOptions,
) -> Result<StokesReport> {
    let chart = q.chart();
    let (m, n) = (chart.m(), chart.n());
    if nu.chart() != chart || metric.chart.even() != chart.even() {
        return Err(Error::ShapeMismatch("nu, Q and the metric must share a chart".into()));
    }
    if lower.len() != m || upper.len() != m {
        return Err(Error::ShapeMismatch(format!("box needs {m} bounds per side")));
    }
    let sigma = sigma_from_q(q)?;
    let big_h = sigma.transpose().matmul(&metric.h)?.matmul(&sigma)?;
    let samples = box_samples(chart.even(), lower, upper, params);
    let parallel = check_sigma_parallel(&sigma, metric, &big_h, &samples, opts.parallel_tol)?;
    if !parallel.passed {
        return Err(Error::AssumptionViolated(parallel.max_covariant_derivative));
    }
    let dual = hodge_dual_big_h(nu, &big_h)?;
    let slots = chart.even();
    let det_h = CompiledExpr::new(&metric.h.det_expansion()?, slots, params)?;
    let det_big_h = CompiledExpr::new(&dual.radicand, slots, params)?;

    let top = CompiledExpr::new(&q.apply(nu)?.top_component(), slots, params)?;
    let interior = integrate(&|x: &[f64]| top.eval(x) * (det_h.eval(x) / det_big_h.eval(x)).sqrt(), lower, upper, &opts.quadrature)?;

    // W^i = σ^i_A (∗_H ν)^A without the det(H)^{−1/2}
    let w: Vec<CompiledExpr> = (0..m)
        .map(|i| {
            let wi = (0..n).fold(ScalarExpr::zero(), |acc, a| &acc + &(&sigma[(i, a)] * &dual.value[a]));
            CompiledExpr::new(&wi, slots, params)
        })
        .collect::<Result<_>>()?;
    let mut faces = Vec::with_capacity(2 * m);
    for i in 0..m {
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..m).filter(|&d| d != i).map(|d| (lower[d], upper[d])).unzip();
        for (c, sign) in [(lower[i], -1.0), (upper[i], 1.0)] {
            let flux = integrate(
                &|y: &[f64]| {
                    let mut x = Vec::with_capacity(m);
                    x.extend_from_slice(&y[..i]);
                    x.push(c);
                    x.extend_from_slice(&y[i..]);
                    (det_h.eval(&x) / det_big_h.eval(&x)).sqrt() * w[i].eval(&x)
                },
                &lo,
                &hi,
                &opts.quadrature,
            )?;
            faces.push(sign * flux.value);
        }
    }
    let boundary: f64 = faces.iter().sum();
    let difference = (interior.value - boundary).abs();
    let scale = 1.0f64.max(interior.value.abs()).max(boundary.abs());
    Ok(StokesReport {
        interior: interior.value,
        boundary,
        faces,
        difference,
        passed: difference <= opts.tol * scale,
        parallel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivariant::{tautological_chart, tautological_q, ActionSpec};
    use crate::scalar::rational;

    fn e(s: &str) -> ScalarExpr {
        ScalarExpr::parse(s).unwrap()
    }

    #[test]
    fn epsilon_contraction_n2() {
        let chart = tautological_chart(&["x", "y"]);
        let nu = SuperFunction::parse(&chart, "c*th1").unwrap();
        let d = hodge_dual_big_h(&nu, &Matrix::identity(2)).unwrap();
        assert_eq!(d.value, vec![ScalarExpr::zero(), e("-c")]);
        let nu = SuperFunction::parse(&chart, "c*th2").unwrap();
        assert_eq!(hodge_dual_big_h(&nu, &Matrix::identity(2)).unwrap().value, vec![e("c"), ScalarExpr::zero()]);
    }

    #[test]
    fn determinant_scaling() {
        let chart = tautological_chart(&["x", "y"]);
        let nu = SuperFunction::parse(&chart, "th1").unwrap();
        let d = hodge_dual_big_h(&nu, &Matrix::diagonal(&[ScalarExpr::int(4), ScalarExpr::one()])).unwrap();
        assert_eq!(d.factor(&Binding::new()).unwrap(), 0.5);
    }

    #[test]
    fn wrong_grade_rejected() {
        let chart = tautological_chart(&["x", "y", "z"]);
        let nu = SuperFunction::parse(&chart, "th1").unwrap();
        assert!(matches!(hodge_dual_big_h(&nu, &Matrix::identity(3)), Err(Error::WrongGrade { expected: 2 })));
    }

    /// Independent ε oracle: build ε by permutation parity and contract over all ordered
    /// index tuples with the fully antisymmetric coefficients ν_{A₂…A_n} = c_I/(n−1)!.
    #[test]
    fn matches_epsilon_oracle_and_double_dual() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 2 + trial % 3;
            let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
            let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let chart = tautological_chart(&refs);
            let full = full_mask(n);
            let coeffs: Vec<i64> = (0..n).map(|_| rng.gen_range(-9..=9)).collect();
            let nu = SuperFunction::from_terms(&chart, (0..n).map(|a| (full & !(1u64 << a), ScalarExpr::int(coeffs[a]))));
            let got = hodge_dual_big_h(&nu, &Matrix::identity(n)).unwrap().value;

            let perms = permutations(n);
            let mut fact = 1i64;
            for k in 1..n {
                fact *= k as i64;
            }
            for a in 0..n {
                let mut sum = 0i64;
                for (p, sign) in &perms {
                    if p[0] != a {
                        continue;
                    }
                    let mask: u64 = p[1..].iter().fold(0, |m, &b| m | 1 << b);
                    let idx = (0..n).find(|&b| full & !(1u64 << b) == mask).unwrap();
                    // antisymmetric component at the ordered tuple p[1..]
                    let tail_sign = perm_sign(&p[1..]);
                    sum += sign * tail_sign * coeffs[idx];
                }
                assert_eq!(sum % fact, 0);
                assert_eq!(got[a], ScalarExpr::int(sum / fact), "n={n} A={a}");
            }

            // Inverting the contraction recovers ν exactly.
            let back = SuperFunction::from_terms(&chart, (0..n).map(|a| {
                let c = if a % 2 == 0 { got[a].clone() } else { -&got[a] };
                (full & !(1u64 << a), c)
            }));
            assert_eq!(back, nu);
        }
    }

    fn perm_sign(p: &[usize]) -> i64 {
        let mut s = 1;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                if p[i] > p[j] {
                    s = -s;
                }
            }
        }
        s
    }

    fn permutations(n: usize) -> Vec<(Vec<usize>, i64)> {
        fn go(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == used.len() {
                out.push(cur.clone());
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    cur.push(i);
                    go(cur, used, out);
                    cur.pop();
                    used[i] = false;
                }
            }
        }
        let mut out = Vec::new();
        go(&mut Vec::new(), &mut vec![false; n], &mut out);
        out.into_iter().map(|p| {
            let s = perm_sign(&p);
            (p, s)
        }).collect()
    }

    #[test]
    fn flat_hodge_star() {
        let chart = tautological_chart(&["x", "y"]);
        let h = MetricData::euclidean(&chart);
        let dx = hodge_dual_h(&[ScalarExpr::one(), ScalarExpr::zero()], &h).unwrap();
        assert_eq!(dx.value, SuperFunction::parse(&chart, "th2").unwrap());
        let dy = hodge_dual_h(&[ScalarExpr::zero(), ScalarExpr::one()], &h).unwrap();
        assert_eq!(dy.value, SuperFunction::parse(&chart, "-th1").unwrap());
        // ∗∗ = −1 on 1-forms in two dimensions
        let omega = [e("x^2*y"), e("3 + y")];
        let once = hodge_dual_h(&omega, &h).unwrap().value;
        let again = hodge_dual_h(&[once.coefficient(1), once.coefficient(2)], &h).unwrap().value;
        assert_eq!(again, SuperFunction::from_terms(&chart, [(1, -&omega[0]), (2, -&omega[1])]));
    }

    #[test]
    fn curved_hodge_star_scales() {
        // polar metric diag(1, r²): ∗dr = r dφ
        let chart = tautological_chart(&["r", "ph"]);
        let h = MetricData::new(&chart, Matrix::diagonal(&[ScalarExpr::one(), e("r^2")])).unwrap();
        let d = hodge_dual_h(&[ScalarExpr::one(), ScalarExpr::zero()], &h).unwrap();
        let at = Binding::new().with_f64("r", 2.0);
        assert_eq!(d.value.coefficient(2), ScalarExpr::one());
        assert_eq!(d.factor(&at).unwrap(), 2.0);
    }

    fn rotation(chart: &std::sync::Arc<crate::superalg::SuperChart>, v: [&str; 2]) -> SuperVectorField {
        let spec = ActionSpec::tautological(chart, vec![vec![e(v[0]), e(v[1])]]).unwrap();
        tautological_q(&spec, &[e("t")]).unwrap()
    }

    fn params() -> Binding {
        Binding::new().with_rational("t", rational(3, 2))
    }

    #[test]
    fn zero_nu_both_sides_vanish() {
        let chart = tautological_chart(&["x", "y"]);
        let q = rotation(&chart, ["-y", "x"]);
        let r = super_stokes_check(&SuperFunction::zero(&chart), &q, &MetricData::euclidean(&chart), &[0.0, 0.0], &[1.0, 1.0], &params(), &StokesOptions::default()).unwrap();
        assert_eq!((r.interior, r.boundary), (0.0, 0.0));
        assert!(r.passed);
    }

    #[test]
    fn flat_unit_box() {
        let chart = tautological_chart(&["x", "y"]);
        let q = rotation(&chart, ["-y", "x"]);
        let h = MetricData::euclidean(&chart);
        for text in ["x*th1", "y*th1", "exp(x)*sin(y)*th1 + x^2*y*th2"] {
            let nu = SuperFunction::parse(&chart, text).unwrap();
            let r = super_stokes_check(&nu, &q, &h, &[0.0, 0.0], &[1.0, 1.0], &params(), &StokesOptions::default()).unwrap();
            assert!(r.passed, "{text}: {r:?}");
        }
        // y θ¹: Q(ν) top = −1, so both sides are −1
        let nu = SuperFunction::parse(&chart, "y*th1").unwrap();
        let r = super_stokes_check(&nu, &q, &h, &[0.0, 0.0], &[1.0, 1.0], &params(), &StokesOptions::default()).unwrap();
        assert!((r.interior + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_on_annulus() {
        // polar chart (r, φ) on 1 ≤ r ≤ 2, away from the fixed point; ξ* = t ∂_φ
        let chart = tautological_chart(&["r", "ph"]);
        let q = rotation(&chart, ["0", "1"]);
        let h = MetricData::new(&chart, Matrix::diagonal(&[ScalarExpr::one(), e("r^2")])).unwrap();
        let nu = SuperFunction::parse(&chart, "r^2*cos(ph)*th1 + exp(-t*r^2/2)*r*sin(ph)^2*th2").unwrap();
        let opts = StokesOptions { tol: 1e-7, ..StokesOptions::default() };
        let r = super_stokes_check(&nu, &q, &h, &[1.0, 0.0], &[2.0, 2.0 * std::f64::consts::PI], &params(), &opts).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.interior.abs() > 1e-3);
    }

    #[test]
    fn non_parallel_sigma_is_rejected() {
        let chart = tautological_chart(&["x", "y"]);
        let mut q = rotation(&chart, ["-y", "x"]);
        // diag(1, 1 + x²) is not the Jacobian of any coordinate change
        q.set_even(1, SuperFunction::parse(&chart, "(1+x^2)*th2").unwrap());
        let nu = SuperFunction::parse(&chart, "x*th1").unwrap();
        let r = super_stokes_check(&nu, &q, &MetricData::euclidean(&chart), &[0.0, 0.0], &[1.0, 1.0], &params(), &StokesOptions::default());
        assert!(matches!(r, Err(Error::AssumptionViolated(_))));
    }
}
