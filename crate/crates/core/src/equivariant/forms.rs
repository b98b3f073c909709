use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::ScalarExpr;
use crate::superalg::{Parity, SuperChart, SuperFunction, SuperVectorField};

use super::action::ActionSpec;

/// Differential form on a tautological chart, θ^i standing for dx^i. Coefficients may
/// depend polynomially on the Lie parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivariantForm(pub SuperFunction);

impl EquivariantForm {
    pub fn new(f: SuperFunction) -> Result<Self> {
        let c = f.chart();
        if c.m() != c.n() {
            return Err(Error::NotTautological { m: c.m(), n: c.n() });
        }
        Ok(EquivariantForm(f))
    }

    pub fn parse(chart: &Arc<SuperChart>, text: &str) -> Result<Self> {
        Self::new(SuperFunction::parse(chart, text)?)
    }

    pub fn function(&self) -> &SuperFunction {
        &self.0
    }
}

fn require_tautological(chart: &SuperChart) -> Result<()> {
    if chart.m() != chart.n() {
        return Err(Error::NotTautological { m: chart.m(), n: chart.n() });
    }
    Ok(())
}

/// de Rham d = θ^i ∂/∂x^i as an odd derivation.
pub fn exterior_derivative(chart: &Arc<SuperChart>) -> Result<SuperVectorField> {
    require_tautological(chart)?;
    let mut d = SuperVectorField::zero(chart, Parity::Odd);
    for i in 0..chart.m() {
        d.set_even(i, SuperFunction::generator(chart, i)?);
    }
    Ok(d)
}

/// Contraction i_V = V^i ∂/∂θ^i for an even field V without θ-dependence.
pub fn contraction(v: &SuperVectorField) -> Result<SuperVectorField> {
    let chart = v.chart();
    require_tautological(chart)?;
    let mut out = SuperVectorField::zero(chart, Parity::Odd);
    for i in 0..chart.m() {
        out.set_odd(i, v.even_component(i).clone());
    }
    Ok(out)
}

/// d_g = d − i_{ξ*} as an odd derivation.
pub fn equivariant_differential_field(spec: &ActionSpec, xi: &[ScalarExpr]) -> Result<SuperVectorField> {
    let d = exterior_derivative(&spec.chart)?;
    let i = contraction(&spec.fundamental_field(xi)?)?;
    d.sub(&i)
}

/// (d_g α)(ξ) = d(α(ξ)) − i_{ξ*} α(ξ).
pub fn equivariant_differential(alpha: &EquivariantForm, spec: &ActionSpec, xi: &[ScalarExpr]) -> Result<EquivariantForm> {
    let dg = equivariant_differential_field(spec, xi)?;
    Ok(EquivariantForm(dg.apply(&alpha.0)?))
}

/// Cartan formula L_V = d i_V + i_V d, evaluated as the commutator of odd derivations.
pub fn lie_derivative(alpha: &EquivariantForm, v: &SuperVectorField) -> Result<EquivariantForm> {
    let d = exterior_derivative(v.chart())?;
    let i = contraction(v)?;
    let l = d.graded_commutator(&i)?;
    Ok(EquivariantForm(l.apply(&alpha.0)?))
}

/// Equivariantly closed: d_g α = 0 identically.
pub fn is_equivariantly_closed(alpha: &EquivariantForm, spec: &ActionSpec, xi: &[ScalarExpr]) -> Result<bool> {
    Ok(equivariant_differential(alpha, spec, xi)?.0.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation() -> ActionSpec {
        let chart = SuperChart::with_odd_names(
            vec!["x".into(), "y".into()],
            vec!["thx".into(), "thy".into()],
        );
        ActionSpec::tautological(&chart, vec![vec![ScalarExpr::parse("-y").unwrap(), ScalarExpr::parse("x").unwrap()]]).unwrap()
    }

    #[test]
    fn constants_are_closed() {
        let spec = rotation();
        let one = EquivariantForm::parse(&spec.chart, "1").unwrap();
        assert!(is_equivariantly_closed(&one, &spec, &[ScalarExpr::symbol("t")]).unwrap());
    }

    #[test]
    fn rotation_one_form() {
        let spec = rotation();
        let c = &spec.chart;
        let alpha = EquivariantForm::parse(c, "x*thy - y*thx").unwrap();
        let got = equivariant_differential(&alpha, &spec, &[ScalarExpr::symbol("t")]).unwrap();
        let expect = SuperFunction::parse(c, "2*thx*thy - t*(x^2 + y^2)").unwrap();
        assert_eq!(got.0, expect);
    }

    #[test]
    fn square_is_minus_lie_derivative() {
        let spec = rotation();
        let c = &spec.chart;
        let xi = [ScalarExpr::symbol("t")];
        let v = spec.fundamental_field(&xi).unwrap();
        let alpha = EquivariantForm::parse(c, "x^3*y + exp(x)*thx + x*y*thy + sin(y)*thx*thy").unwrap();
        let twice = equivariant_differential(&equivariant_differential(&alpha, &spec, &xi).unwrap(), &spec, &xi).unwrap();
        let lie = lie_derivative(&alpha, &v).unwrap();
        assert_eq!(twice.0, -&lie.0);
    }

    #[test]
    fn non_tautological_rejected() {
        let chart = SuperChart::new(&["x", "y"], 1);
        assert!(matches!(exterior_derivative(&chart), Err(Error::NotTautological { .. })));
    }
}
