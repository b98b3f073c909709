use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{FMatrix, Matrix, QMatrix};
use crate::scalar::{Binding, CompiledExpr, Number, ScalarExpr, Symbol};
use crate::superalg::SuperVectorField;

/// Residual below which a point counts as a zero of ξ*.
pub const ZERO_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum FixedPointStrategy {
    /// User-supplied points, checked against the residual tolerance.
    Declared { points: Vec<BTreeMap<String, Number>> },
    /// Exact solve when every component is affine in the coordinates.
    Linear,
    /// Multi-start Newton from a `per_dim`^m grid over the box.
    Newton { lower: Vec<f64>, upper: Vec<f64>, per_dim: usize },
}

/// Every coordinate of the point as an exact constant; doubles are converted exactly.
pub fn point_substitution(point: &Binding) -> BTreeMap<Symbol, ScalarExpr> {
    point
        .iter()
        .map(|(k, v)| {
            let q = match v {
                Number::Rational(q) => q.clone(),
                Number::Float(x) => BigRational::from_float(*x).unwrap_or_else(BigRational::zero),
            };
            (k.clone(), ScalarExpr::constant(q))
        })
        .collect()
}

/// Components of ξ* as plain scalars; errors if any has θ-dependence.
pub fn base_components(field: &SuperVectorField) -> Result<Vec<ScalarExpr>> {
    field
        .even_components()
        .iter()
        .map(|c| {
            if c.terms().any(|(m, _)| m != 0) {
                Err(Error::ShapeMismatch("fixed points need a purely base vector field".into()))
            } else {
                Ok(c.body())
            }
        })
        .collect()
}

/// Max-norm of ξ* at the point, parameters taken from `params`.
pub fn residual(field: &SuperVectorField, point: &Binding, params: &Binding) -> Result<f64> {
    let at = params.merged(point);
    let mut worst = 0.0f64;
    for c in base_components(field)? {
        worst = worst.max(c.evaluate_f64(&at)?.abs());
    }
    Ok(worst)
}

fn jacobian_exprs(v: &[ScalarExpr], coords: &[Symbol]) -> Vec<Vec<ScalarExpr>> {
    v.iter().map(|vi| coords.iter().map(|c| vi.differentiate(c)).collect()).collect()
}

fn jacobian_at(jac: &[Vec<ScalarExpr>], at: &Binding) -> Result<FMatrix> {
    let m = jac.len();
    let rows: Vec<Vec<f64>> = jac.iter().map(|r| r.iter().map(|e| e.evaluate_f64(at)).collect::<Result<_>>()).collect::<Result<_>>()?;
    Ok(FMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

fn describe(point: &Binding) -> String {
    point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}

fn check_isolated(jac: &[Vec<ScalarExpr>], point: &Binding, params: &Binding) -> Result<()> {
    let j = jacobian_at(jac, &params.merged(point))?;
    let scale = 1.0 + j.max_abs();
    if j.rank(1e-10) < j.rows() || j.det()?.abs() <= 1e-12 * scale.powi(j.rows() as i32) {
        return Err(Error::NonIsolatedZero(describe(point)));
    }
    Ok(())
}

/// Zeros of the even, purely base field ξ*. Lie parameters are bound in `params`.
pub fn find_fixed_points(field: &SuperVectorField, params: &Binding, strategy: &FixedPointStrategy) -> Result<Vec<Binding>> {
    let coords: Vec<Symbol> = field.chart().even().to_vec();
    let v = base_components(field)?;
    let jac = jacobian_exprs(&v, &coords);
    let points = match strategy {
        FixedPointStrategy::Declared { points } => {
            let mut out = Vec::new();
            for p in points {
                let mut b = Binding::new();
                for c in &coords {
                    let val = p.get(&**c).ok_or_else(|| Error::Schema(format!("declared fixed point lacks coordinate `{c}`")))?;
                    b.set_symbol(c.clone(), val.clone());
                }
                let r = residual(field, &b, params)?;
                if r >= ZERO_TOL {
                    return Err(Error::NotAZero(r));
                }
                out.push(b);
            }
            out
        }
        FixedPointStrategy::Linear => vec![linear_solve(&v, &jac, &coords, params)?],
        FixedPointStrategy::Newton { lower, upper, per_dim } => newton_search(field, &v, &jac, &coords, params, lower, upper, *per_dim)?,
    };
    for p in &points {
        check_isolated(&jac, p, params)?;
    }
    Ok(points)
}

fn linear_solve(v: &[ScalarExpr], jac: &[Vec<ScalarExpr>], coords: &[Symbol], params: &Binding) -> Result<Binding> {
    let vars: BTreeSet<Symbol> = coords.iter().cloned().collect();
    let subst = params.rational_substitution();
    let m = coords.len();
    let mut a = QMatrix::zeros(m, m);
    let mut b = vec![BigRational::zero(); m];
    let zero_point: BTreeMap<Symbol, ScalarExpr> = coords.iter().map(|c| (c.clone(), ScalarExpr::zero())).collect();
    for i in 0..m {
        let vi = v[i].substitute(&subst);
        if vi.polynomial_degree_in(&vars).map_or(true, |d| d > 1) {
            return Err(Error::NoConvergence(format!("component {i} is not affine in the coordinates")));
        }
        for j in 0..m {
            a[(i, j)] = jac[i][j]
                .substitute(&subst)
                .as_constant()
                .ok_or_else(|| Error::NoConvergence(format!("coefficient J[{i}][{j}] is not an exact constant")))?;
        }
        b[i] = -vi
            .substitute(&zero_point)
            .as_constant()
            .ok_or_else(|| Error::NoConvergence(format!("constant term of component {i} is not exact")))?;
    }
    if a.det()?.is_zero() {
        return Err(Error::NonIsolatedZero("affine field with singular linear part".into()));
    }
    let inv = a.inverse()?;
    let mut point = Binding::new();
    for i in 0..m {
        let xi: BigRational = (0..m).map(|j| &inv[(i, j)] * &b[j]).fold(BigRational::zero(), |acc, t| acc + t);
        point.set_symbol(coords[i].clone(), Number::Rational(xi));
    }
    Ok(point)
}

#[allow(clippy::too_many_arguments)]
fn newton_search(
    field: &SuperVectorField,
    v: &[ScalarExpr],
    jac: &[Vec<ScalarExpr>],
    coords: &[Symbol],
    params: &Binding,
    lower: &[f64],
    upper: &[f64],
    per_dim: usize,
) -> Result<Vec<Binding>> {
    let m = coords.len();
    if lower.len() != m || upper.len() != m || per_dim == 0 {
        return Err(Error::Schema(format!("newton box needs {m} lower and upper bounds and per_dim > 0")));
    }
    let fv: Vec<CompiledExpr> = v.iter().map(|e| CompiledExpr::new(e, coords, params)).collect::<Result<_>>()?;
    let fj: Vec<Vec<CompiledExpr>> =
        jac.iter().map(|r| r.iter().map(|e| CompiledExpr::new(e, coords, params)).collect::<Result<_>>()).collect::<Result<_>>()?;
    let total = per_dim.pow(m as u32);
    let mut found: Vec<Vec<f64>> = Vec::new();
    for idx in 0..total {
        let mut x: Vec<f64> = (0..m)
            .map(|d| {
                let k = (idx / per_dim.pow(d as u32)) % per_dim;
                if per_dim == 1 {
                    0.5 * (lower[d] + upper[d])
                } else {
                    lower[d] + (upper[d] - lower[d]) * k as f64 / (per_dim - 1) as f64
                }
            })
            .collect();
        let mut converged = false;
        for _ in 0..60 {
            let f: Vec<f64> = fv.iter().map(|c| c.eval(&x)).collect();
            if f.iter().all(|r| r.abs() < 1e-14) {
                converged = true;
                break;
            }
            let jm = FMatrix::from_fn(m, m, |i, j| fj[i][j].eval(&x));
            let Ok(step) = jm.solve(&f) else { break };
            for d in 0..m {
                x[d] -= step[d];
            }
            if !x.iter().all(|c| c.is_finite()) {
                break;
            }
            if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-15 {
                converged = fv.iter().all(|c| c.eval(&x).abs() < ZERO_TOL);
                break;
            }
        }
        if !converged {
            continue;
        }
        let inside = (0..m).all(|d| x[d] >= lower[d] - 1e-9 && x[d] <= upper[d] + 1e-9);
        if inside && !found.iter().any(|y| y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < 1e-6) {
            found.push(x);
        }
    }
    if found.is_empty() {
        return Err(Error::NoConvergence(format!("no zero found from {total} starting points")));
    }
    found.sort_by(|a, b| a.iter().zip(b).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = Vec::new();
    for x in found {
        let mut b = Binding::new();
        for (c, val) in coords.iter().zip(&x) {
            b.set_symbol(c.clone(), Number::Float(*val));
        }
        let snapped = snap_to_zero(&b);
        let b = if residual(field, &snapped, params)? <= residual(field, &b, params)? { snapped } else { b };
        let r = residual(field, &b, params)?;
        if r >= ZERO_TOL {
            return Err(Error::NotAZero(r));
        }
        out.push(b);
    }
    Ok(out)
}

/// Coordinates within 1e-12 of zero become exact zeros, so that fixed points at chart
/// origins give exact linearizations.
fn snap_to_zero(point: &Binding) -> Binding {
    let mut out = Binding::new();
    for (k, v) in point.iter() {
        let val = match v {
            Number::Float(x) if x.abs() < 1e-12 => Number::Rational(BigRational::zero()),
            Number::Float(x) if (x - x.round()).abs() < 1e-12 && x.abs() < 1e6 => {
                Number::Rational(BigRational::from_integer((x.round() as i64).into()))
            }
            other => other.clone(),
        };
        out.set_symbol(k.clone(), val);
    }
    out
}

/// L = −J with J^i_j = ∂_j ξ*^i at p, so that L v = [ξ*, v] on constant fields v.
/// Coordinates are substituted exactly; Lie parameters stay symbolic.
pub fn linearize_base(field: &SuperVectorField, point: &Binding, params: &Binding) -> Result<Matrix<ScalarExpr>> {
    let r = residual(field, point, params)?;
    if r >= ZERO_TOL {
        return Err(Error::NotAZero(r));
    }
    let coords = field.chart().even().to_vec();
    let jac = jacobian_exprs(&base_components(field)?, &coords);
    let sub = point_substitution(point);
    let m = coords.len();
    Ok(Matrix::from_fn(m, m, |i, j| -jac[i][j].substitute(&sub)))
}

/// L̃^A_B = ξ^α U_{αB}^A(p), read off from the θ-linear odd components of ξ̂*.
pub fn linearize_fiber(lifted: &SuperVectorField, point: &Binding, params: &Binding) -> Result<Matrix<ScalarExpr>> {
    let chart = lifted.chart();
    let mut base = SuperVectorField::zero(chart, lifted.parity());
    for i in 0..chart.m() {
        base.set_even(i, lifted.even_component(i).clone());
    }
    let r = residual(&base, point, params)?;
    if r >= ZERO_TOL {
        return Err(Error::NotAZero(r));
    }
    let sub = point_substitution(point);
    let n = chart.n();
    let mut lt = Matrix::from_fn(n, n, |_, _| ScalarExpr::zero());
    for a in 0..n {
        for (mask, c) in lifted.odd_component(a).terms() {
            if mask.count_ones() != 1 {
                return Err(Error::NonlinearTtilde);
            }
            lt[(a, mask.trailing_zeros() as usize)] = c.substitute(&sub);
        }
    }
    Ok(lt)
}

/// Matrix entries with the parameters substituted and evaluated.
pub fn eval_at(mat: &Matrix<ScalarExpr>, params: &Binding) -> Result<FMatrix> {
    mat.try_map(|e| e.evaluate_f64(params))
}

/// Exact matrix when every entry becomes a rational constant under `params`.
pub fn exact_at(mat: &Matrix<ScalarExpr>, params: &Binding) -> Option<QMatrix> {
    let sub = params.rational_substitution();
    mat.try_map(|e| e.substitute(&sub).as_constant().ok_or(())).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equivariant::{tautological_chart, ActionSpec};
    use crate::scalar::rational;
    use crate::superalg::{Parity, SuperChart, SuperFunction};

    fn e(s: &str) -> ScalarExpr {
        ScalarExpr::parse(s).unwrap()
    }

    fn field(chart: &std::sync::Arc<SuperChart>, comps: &[&str]) -> SuperVectorField {
        let mut f = SuperVectorField::zero(chart, Parity::Even);
        for (i, c) in comps.iter().enumerate() {
            f.set_even(i, SuperFunction::parse(chart, c).unwrap());
        }
        f
    }

    fn t_is(v: i64) -> Binding {
        Binding::new().with_rational("t", rational(v, 1))
    }

    #[test]
    fn linear_field_origin() {
        let chart = tautological_chart(&["x", "y"]);
        let f = field(&chart, &["t*x", "t*y"]);
        let pts = find_fixed_points(&f, &t_is(2), &FixedPointStrategy::Linear).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].get("x"), Some(&Number::Rational(rational(0, 1))));
    }

    #[test]
    fn affine_field_exact_point() {
        let chart = tautological_chart(&["x", "y"]);
        let f = field(&chart, &["2*x - y + 1", "x + 3*y - 2"]);
        let pts = find_fixed_points(&f, &Binding::new(), &FixedPointStrategy::Linear).unwrap();
        // 2x - y = -1, x + 3y = 2 -> x = -1/7, y = 5/7
        assert_eq!(pts[0].get("x"), Some(&Number::Rational(rational(-1, 7))));
        assert_eq!(pts[0].get("y"), Some(&Number::Rational(rational(5, 7))));
    }

    #[test]
    fn sphere_rotation_newton_finds_chart_origin() {
        let chart = tautological_chart(&["u", "v"]);
        let f = field(&chart, &["-t*v", "t*u"]);
        let strat = FixedPointStrategy::Newton { lower: vec![-1.0, -1.0], upper: vec![1.0, 1.0], per_dim: 5 };
        let pts = find_fixed_points(&f, &t_is(1), &strat).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].get("u"), Some(&Number::Rational(rational(0, 1))));
    }

    #[test]
    fn newton_finds_several_zeros() {
        // zeros of (x^2 - 1, y) at (±1, 0)
        let chart = tautological_chart(&["x", "y"]);
        let f = field(&chart, &["x^2 - 1", "y"]);
        let strat = FixedPointStrategy::Newton { lower: vec![-2.0, -1.0], upper: vec![2.0, 1.0], per_dim: 5 };
        let pts = find_fixed_points(&f, &Binding::new(), &strat).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].get("x"), Some(&Number::Rational(rational(-1, 1))));
    }

    #[test]
    fn degenerate_zero_rejected() {
        let chart = tautological_chart(&["x", "y"]);
        let f = field(&chart, &["x", "0"]);
        let decl = FixedPointStrategy::Declared {
            points: vec![[("x".to_string(), Number::Float(0.0)), ("y".to_string(), Number::Float(0.3))].into()],
        };
        assert!(matches!(find_fixed_points(&f, &Binding::new(), &decl), Err(Error::NonIsolatedZero(_))));
        let off = FixedPointStrategy::Declared {
            points: vec![[("x".to_string(), Number::Float(0.5)), ("y".to_string(), Number::Float(0.0))].into()],
        };
        assert!(matches!(find_fixed_points(&f, &Binding::new(), &off), Err(Error::NotAZero(_))));
    }

    #[test]
    fn rotation_linearization() {
        let chart = tautological_chart(&["x", "y"]);
        let f = field(&chart, &["-t*y", "t*x"]);
        let origin = Binding::new().with_rational("x", rational(0, 1)).with_rational("y", rational(0, 1));
        let l = linearize_base(&f, &origin, &t_is(1)).unwrap();
        assert_eq!(l, Matrix::from_rows(vec![vec![e("0"), e("t")], vec![e("-t"), e("0")]]).unwrap());
        let zero = field(&chart, &["0", "0"]);
        assert!(linearize_base(&zero, &origin, &Binding::new()).unwrap().to_rows().iter().flatten().all(ScalarExpr::is_zero));
    }

    #[test]
    fn linearization_matches_bracket() {
        let chart = tautological_chart(&["x", "y"]);
        let f = field(&chart, &["3*x - 2*y + 1/2", "x/5 + 7*y - 4"]);
        let p = find_fixed_points(&f, &Binding::new(), &FixedPointStrategy::Linear).unwrap().remove(0);
        let l = linearize_base(&f, &p, &Binding::new()).unwrap();
        for j in 0..2 {
            let v = SuperVectorField::d_even(&chart, j);
            let br = f.graded_commutator(&v).unwrap();
            for i in 0..2 {
                assert_eq!(br.even_component(i).body(), l[(i, j)]);
            }
        }
    }

    #[test]
    fn tautological_fiber_linearization_is_jacobian() {
        let chart = tautological_chart(&["x", "y"]);
        let spec = ActionSpec::tautological(&chart, vec![vec![e("-y"), e("x")]]).unwrap();
        let xi = [ScalarExpr::symbol("t")];
        let lifted = spec.lifted_field(&xi).unwrap();
        let origin = Binding::new().with_rational("x", rational(0, 1)).with_rational("y", rational(0, 1));
        let lt = linearize_fiber(&lifted, &origin, &t_is(1)).unwrap();
        let l = linearize_base(&spec.fundamental_field(&xi).unwrap(), &origin, &t_is(1)).unwrap();
        assert_eq!(lt, l.map(|x| -x));
    }
}
