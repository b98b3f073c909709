use std::sync::Arc;

use serde::Serialize;

use super::complex::{dagger, CMatrix};
use super::data::{constraint_complex, constraint_real, ADHMData};
use super::fields::{adhm_base_components, AdhmChart, LieParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{Binding, ScalarExpr, Symbol};
use crate::superalg::{SuperChart, SuperFunction};

/// W_a = (∂V_a/∂x^k) θ^k on a tautological chart.
pub fn fermionic_constraints(v: &[ScalarExpr], chart: &Arc<SuperChart>) -> Result<Vec<SuperFunction>> {
    if chart.n() != chart.m() {
        return Err(Error::NotTautological { m: chart.m(), n: chart.n() });
    }
    Ok(v
        .iter()
        .map(|va| SuperFunction::from_terms(chart, chart.even().iter().enumerate().map(|(k, x)| (1u64 << k, va.differentiate(x)))))
        .collect())
}

/// The ADHM data of a chart as symbolic matrices.
pub fn symbolic_data(ch: &AdhmChart) -> ADHMData {
    ADHMData { k: ch.k, n: ch.n, b1: ch.even_matrix("b1"), b2: ch.even_matrix("b2"), i: ch.even_matrix("i"), j: ch.even_matrix("j") }
}

/// Real constraint functions V_a = ∂⟨H, c⟩/∂H^a, where ⟨H, c⟩ = tr(H_ℝ c_ℝ) + Re tr(H_ℂ† c_ℂ)
/// pairs the multipliers with the two ADHM constraints. Off-diagonal entries of the
/// hermitian c_ℝ therefore count twice; the zero set is the ADHM locus either way.
pub fn adhm_constraint_functions(ch: &AdhmChart) -> Vec<ScalarExpr> {
    let d = symbolic_data(ch);
    let (cr, cc) = (constraint_real(&d), constraint_complex(&d));
    let k = ch.k;
    let mut out = Vec::with_capacity(3 * k * k);
    for a in 0..k {
        for b in a..k {
            if a == b {
                out.push(cr[(a, a)].re.clone());
            } else {
                out.push(cr[(a, b)].re.scale(&crate::scalar::rational(2, 1)));
                out.push(cr[(a, b)].im.scale(&crate::scalar::rational(2, 1)));
            }
        }
    }
    for a in 0..k {
        for b in 0..k {
            out.push(cc[(a, b)].re.clone());
            out.push(cc[(a, b)].im.clone());
        }
    }
    out
}

/// Data for completing Q with a Lagrange-multiplier sector: constraints V_a(x), the base
/// field ξ^αT_α^k(x), multipliers H^a and their action ξ^αT̃_α^a(H).
#[derive(Clone, Debug)]
pub struct MultiplierSector {
    pub coords: Vec<Symbol>,
    pub constraints: Vec<ScalarExpr>,
    pub base_field: Vec<ScalarExpr>,
    pub multipliers: Vec<Symbol>,
    pub multiplier_field: Vec<ScalarExpr>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplierReport {
    /// N_a^b = ξ^α ∂T̃_α^b/∂H^a, so that R^b = χ^a N_a^b.
    pub n_matrix: Vec<Vec<String>>,
    pub det_n: String,
    /// Σ_b N_a^b V_b + (∂V_a/∂x^k) ξ^αT_α^k, one entry per constraint.
    pub residual: Vec<String>,
    pub residual_vanishes: bool,
    pub invertible: bool,
    /// Smallest |det N| over the samples (0 when det N vanishes identically).
    pub min_abs_det: f64,
}

/// Solve the multiplier BRST conditions for T̃ linear in H and report the consistency
/// residual and the invertibility of N at the samples.
pub fn multiplier_completion(sector: &MultiplierSector, samples: &[Binding]) -> Result<(Matrix<ScalarExpr>, MultiplierReport)> {
    let r = sector.constraints.len();
    if sector.multipliers.len() != r || sector.multiplier_field.len() != r {
        return Err(Error::ShapeMismatch(format!(
            "{r} constraints, {} multipliers, {} multiplier components",
            sector.multipliers.len(),
            sector.multiplier_field.len()
        )));
    }
    if sector.base_field.len() != sector.coords.len() {
        return Err(Error::ShapeMismatch("base field and coordinates differ in length".into()));
    }
    let hs: std::collections::BTreeMap<Symbol, ScalarExpr> = sector.multipliers.iter().map(|h| (h.clone(), ScalarExpr::zero())).collect();
    for t in &sector.multiplier_field {
        if !t.substitute(&hs).is_zero() {
            return Err(Error::NonlinearTtilde);
        }
        for h in &sector.multipliers {
            let d = t.differentiate(h);
            if sector.multipliers.iter().any(|g| !d.differentiate(g).is_zero()) || d.has_reciprocal() && d.free_symbols().iter().any(|s| hs.contains_key(s)) {
                return Err(Error::NonlinearTtilde);
            }
        }
    }
    let n = Matrix::from_fn(r, r, |a, b| sector.multiplier_field[b].differentiate(&sector.multipliers[a]));
    let residual: Vec<ScalarExpr> = (0..r)
        .map(|a| {
            let mut acc: ScalarExpr = (0..r).map(|b| &n[(a, b)] * &sector.constraints[b]).sum();
            for (x, v) in sector.coords.iter().zip(&sector.base_field) {
                acc += &(&sector.constraints[a].differentiate(x) * v);
            }
            acc
        })
        .collect();
    let det = n.det_expansion()?;
    let mut min_abs_det = if det.is_zero() { 0.0 } else { f64::INFINITY };
    if !det.is_zero() {
        for s in samples {
            min_abs_det = min_abs_det.min(det.evaluate_f64(s)?.abs());
        }
        if samples.is_empty() {
            min_abs_det = det.as_constant().map(|c| num_traits::ToPrimitive::to_f64(&c).unwrap_or(0.0).abs()).unwrap_or(f64::NAN);
        }
    }
    let report = MultiplierReport {
        n_matrix: n.to_rows().iter().map(|row| row.iter().map(|e| e.to_string()).collect()).collect(),
        det_n: det.to_string(),
        residual_vanishes: residual.iter().all(ScalarExpr::is_zero),
        residual: residual.iter().map(|e| e.to_string()).collect(),
        invertible: min_abs_det > 1e-12,
        min_abs_det,
    };
    Ok((n, report))
}

/// The ADHM multiplier sector: V = the paired constraints, H = (H_ℝ, H_ℂ) acted on by
/// [φ,H_ℝ] and [φ,H_ℂ] + iεH_ℂ. Needs the full chart.
pub fn adhm_multiplier_sector(ch: &AdhmChart, p: &LieParams) -> Result<MultiplierSector> {
    if !ch.full {
        return Err(Error::ShapeMismatch("multiplier sector needs the full chart".into()));
    }
    let matter = ch.matter_dim();
    let base = adhm_base_components(ch, p);
    let k2 = ch.k * ch.k;
    let even = ch.chart.even();
    Ok(MultiplierSector {
        coords: even[..matter].to_vec(),
        constraints: adhm_constraint_functions(ch),
        base_field: base[..matter].to_vec(),
        multipliers: even[matter..matter + 3 * k2].to_vec(),
        multiplier_field: base[matter..matter + 3 * k2].to_vec(),
    })
}

/// Only the H_ℂ block of the ADHM multiplier sector, where N is generically invertible.
pub fn adhm_complex_multiplier_sector(ch: &AdhmChart, p: &LieParams) -> Result<MultiplierSector> {
    let full = adhm_multiplier_sector(ch, p)?;
    let k2 = ch.k * ch.k;
    Ok(MultiplierSector {
        coords: full.coords,
        constraints: full.constraints[k2..].to_vec(),
        base_field: full.base_field,
        multipliers: full.multipliers[k2..].to_vec(),
        multiplier_field: full.multiplier_field[k2..].to_vec(),
    })
}

/// ⟨H, c⟩ for symbolic matrices, used to cross-check the constraint flattening.
pub fn pairing(hr: &CMatrix, hc: &CMatrix, cr: &CMatrix, cc: &CMatrix) -> ScalarExpr {
    let tr = |m: &CMatrix| (0..m.rows()).map(|i| m[(i, i)].re.clone()).sum::<ScalarExpr>();
    &tr(&super::complex::mul(hr, cr)) + &tr(&super::complex::mul(&dagger(hc), cc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adhm::fields::adhm_q_unconstrained;
    use crate::equivariant::tautological_chart;
    use crate::scalar::rational;

    fn e(s: &str) -> ScalarExpr {
        ScalarExpr::parse(s).unwrap()
    }

    #[test]
    fn toy_linearization() {
        let chart = tautological_chart(&["x"]);
        let w = fermionic_constraints(&[e("x^2")], &chart).unwrap();
        assert_eq!(w[0], SuperFunction::parse(&chart, "2*x*th1").unwrap());
    }

    #[test]
    fn k1_complex_constraint() {
        // V = IJ at k = 1: W = μ_I J + I μ_J, real part first
        let ch = AdhmChart::new(1, 2, false).unwrap();
        let v = adhm_constraint_functions(&ch);
        assert_eq!(v.len(), 3);
        let w = fermionic_constraints(&v[1..2], &ch.chart).unwrap();
        let expected = SuperFunction::parse(
            &ch.chart,
            "j_11r*mi_11r - j_11i*mi_11i + i_11r*mj_11r - i_11i*mj_11i + j_21r*mi_12r - j_21i*mi_12i + i_12r*mj_21r - i_12i*mj_21i",
        )
        .unwrap();
        assert_eq!(w[0], expected);
    }

    #[test]
    fn q_of_v_is_w() {
        let ch = AdhmChart::new(2, 1, false).unwrap();
        let p = LieParams::cartan_symbols(2, 1);
        let q = adhm_q_unconstrained(&ch, &p).unwrap();
        let v = adhm_constraint_functions(&ch);
        let w = fermionic_constraints(&v, &ch.chart).unwrap();
        for (va, wa) in v.iter().zip(&w) {
            assert_eq!(q.apply(&SuperFunction::scalar(&ch.chart, va.clone())).unwrap().component(1), *wa);
        }
    }

    #[test]
    fn constraint_flattening_is_dual_to_multipliers() {
        let ch = AdhmChart::new(2, 2, true).unwrap();
        let d = symbolic_data(&ch);
        let v = adhm_constraint_functions(&ch);
        let matter = ch.matter_dim();
        let hs = &ch.chart.even()[matter..matter + 12];
        let flat: ScalarExpr = hs.iter().zip(&v).map(|(h, va)| &ScalarExpr::from_symbol(h.clone()) * va).sum();
        let paired = pairing(&ch.even_matrix("hr"), &ch.even_matrix("hc"), &constraint_real(&d), &constraint_complex(&d));
        assert_eq!(flat, paired);
    }

    #[test]
    fn consistency_residual_vanishes() {
        for (k, n, generic) in [(1, 2, false), (2, 2, false), (2, 1, true)] {
            let ch = AdhmChart::new(k, n, true).unwrap();
            let p = if generic { LieParams::generic_symbols(k, n) } else { LieParams::cartan_symbols(k, n) };
            let (_, report) = multiplier_completion(&adhm_multiplier_sector(&ch, &p).unwrap(), &[]).unwrap();
            assert!(report.residual_vanishes, "k={k} N={n}: {:?}", report.residual);
        }
    }

    #[test]
    fn abelian_toy_is_flagged() {
        let ch = AdhmChart::new(1, 2, true).unwrap();
        let p = LieParams::cartan_symbols(1, 2);
        let mut sector = adhm_multiplier_sector(&ch, &p).unwrap();
        sector.constraints.truncate(1);
        sector.multipliers.truncate(1);
        sector.multiplier_field.truncate(1);
        let (n, report) = multiplier_completion(&sector, &[Binding::new().with_f64("p1", 0.3)]).unwrap();
        assert!(n[(0, 0)].is_zero());
        assert!(!report.invertible);
    }

    #[test]
    fn complex_block_invertible_at_k2() {
        let ch = AdhmChart::new(2, 2, true).unwrap();
        let p = LieParams::cartan_values(&[rational(1, 3), rational(-2, 7)], &[rational(1, 5)], rational(2, 9), rational(3, 11));
        let (n, report) = multiplier_completion(&adhm_complex_multiplier_sector(&ch, &p).unwrap(), &[Binding::new()]).unwrap();
        assert!(report.invertible, "{report:?}");
        // eigenvalues ±i(φ_i − φ_j + ε): det = Π over (i,j) of (φ_i − φ_j + ε)²
        let (p1, p2, eps) = (1.0 / 3.0, -2.0 / 7.0, 2.0 / 9.0 + 3.0 / 11.0);
        let expected: f64 = [eps, eps, p1 - p2 + eps, p2 - p1 + eps].iter().map(|w: &f64| w * w).product();
        let det = n.det_expansion().unwrap().evaluate_f64(&Binding::new()).unwrap();
        assert!((det - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn nonlinear_ttilde_rejected() {
        let sector = MultiplierSector {
            coords: vec![crate::scalar::sym("x")],
            constraints: vec![e("x")],
            base_field: vec![e("0")],
            multipliers: vec![crate::scalar::sym("h")],
            multiplier_field: vec![e("h^2")],
        };
        assert!(matches!(multiplier_completion(&sector, &[]), Err(Error::NonlinearTtilde)));
    }
}
