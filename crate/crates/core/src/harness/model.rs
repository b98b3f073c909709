use std::sync::Arc;

use super::scenario::{Model, QSpec, Real};
use crate::equivariant::{holomorphic_action, kahler_q, tautological_q, ActionSpec, ComplexStructure, MetricData};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::scalar::{sym, Binding, Number, ScalarExpr};
use crate::superalg::{Parity, SuperChart, SuperFunction, SuperVectorField};

/// Engine objects for one [`Model`]. `spec` is the action whose lift Q squares to,
/// which differs from the declared one for Kähler Q.
pub(crate) struct Built {
    pub chart: Arc<SuperChart>,
    pub spec: ActionSpec,
    pub xi: Vec<ScalarExpr>,
    pub q: SuperVectorField,
    pub metric: MetricData,
}

pub(crate) fn expr(text: &str) -> Result<ScalarExpr> {
    ScalarExpr::parse(text)
}

pub(crate) fn expr_matrix(rows: &[Vec<String>]) -> Result<Matrix<ScalarExpr>> {
    let rows = rows.iter().map(|r| r.iter().map(|e| expr(e)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_rows(rows)?)
}

pub(crate) fn metric(chart: &Arc<SuperChart>, rows: Option<&Vec<Vec<String>>>) -> Result<MetricData> {
    match rows {
        Some(h) => MetricData::new(chart, expr_matrix(h)?),
        None => Ok(MetricData::euclidean(chart)),
    }
}

pub(crate) fn real(r: &Real, constants: &Binding) -> Result<f64> {
    match r {
        Real::Num(x) => Ok(*x),
        Real::Expr(t) => expr(t)?.evaluate_f64(constants),
    }
}

pub(crate) fn build(model: &Model) -> Result<Built> {
    let even = model.even.iter().map(|s| sym(s)).collect();
    let chart = SuperChart::with_odd_names(even, model.odd_names());
    let base = model.action.iter().map(|row| row.iter().map(|e| expr(e)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
    let xi = model.xi.iter().map(|e| expr(e)).collect::<Result<Vec<_>>>()?;
    let metric = metric(&chart, model.metric.as_ref())?;
    let declared = |fallback: fn(&Arc<SuperChart>, Vec<Vec<ScalarExpr>>) -> Result<ActionSpec>| -> Result<ActionSpec> {
        match &model.fiber {
            Some(f) => {
                let fiber = f.iter().map(|u| expr_matrix(u).map(|m| m.to_rows())).collect::<Result<Vec<_>>>()?;
                ActionSpec::new(&chart, base.clone(), fiber)
            }
            None => fallback(&chart, base.clone()),
        }
    };
    let (spec, q) = match &model.q {
        QSpec::Tautological => {
            let spec = declared(ActionSpec::tautological)?;
            let q = tautological_q(&spec, &xi)?;
            (spec, q)
        }
        QSpec::Kahler => {
            let cs = ComplexStructure::interleaved(chart.m() / 2);
            let zero_fiber = |c: &Arc<SuperChart>, b: Vec<Vec<ScalarExpr>>| {
                let n = c.n();
                let fiber = vec![vec![vec![ScalarExpr::zero(); n]; n]; b.len()];
                ActionSpec::new(c, b, fiber)
            };
            let declared = declared(zero_fiber)?;
            let q = kahler_q(&declared, &xi, &cs)?;
            (holomorphic_action(&declared, &cs)?, q)
        }
        QSpec::Explicit { even, odd } => {
            let spec = declared(ActionSpec::tautological)?;
            let parse = |t: &String| SuperFunction::parse(&chart, t);
            let q = SuperVectorField::from_components(
                &chart,
                Parity::Odd,
                even.iter().map(parse).collect::<Result<_>>()?,
                odd.iter().map(parse).collect::<Result<_>>()?,
            )?;
            (spec, q)
        }
    };
    Ok(Built { chart, spec, xi, q, metric })
}

/// Sample bindings merged over the parameters; the first even coordinate set to a
/// generic value when none are given.
pub(crate) fn samples(given: &[Binding], chart: &SuperChart, params: &Binding) -> Vec<Binding> {
    if given.is_empty() {
        let generic = [0.37, -0.61, 0.83, 0.29, -0.45, 0.71, -0.23, 0.53];
        let mut b = params.clone();
        for (i, c) in chart.even().iter().enumerate() {
            b.set_symbol(c.clone(), Number::Float(generic[i % generic.len()]));
        }
        return vec![b];
    }
    given.iter().map(|g| params.merged(g)).collect()
}

/// Coordinates and generators, the default test functions for the BRST square check.
pub(crate) fn default_functions(chart: &Arc<SuperChart>) -> Result<Vec<SuperFunction>> {
    let mut out = Vec::new();
    for i in 0..chart.m() {
        out.push(SuperFunction::coordinate(chart, i)?);
    }
    for a in 0..chart.n() {
        out.push(SuperFunction::generator(chart, a)?);
    }
    Ok(out)
}
